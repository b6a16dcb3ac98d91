use std::fmt::Write;

use super::ir::*;
use super::schedule::ResourceReport;
use crate::error::{Error, Result};

pub fn emit_json(ir: &PipelineIR) -> String {
    let mut s = serde_json::to_string_pretty(ir).expect("IR serializes");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<PipelineIR> {
    let ir: PipelineIR = serde_json::from_str(text).map_err(|e| Error::Ir(e.to_string()))?;
    if ir.version != IR_VERSION {
        return Err(Error::Ir(format!(
            "unsupported IR version {} (expected {IR_VERSION})",
            ir.version
        )));
    }
    ir.check()?;
    Ok(ir)
}

pub const P4_WATERMARK: &str = "// GENERATED PSEUDO-P4: P4-16 flavored listing for reading only.\n\
// It has not been checked by any P4 compiler and will not build as is.\n";

/// P4-16 flavored rendering of the pipeline. Stage numbers are included
/// when a schedule is given.
pub fn emit_p4(ir: &PipelineIR, report: Option<&ResourceReport>) -> String {
    let mut o = String::new();
    o.push_str(P4_WATERMARK);
    if let Some(role) = &ir.role {
        let _ = writeln!(o, "// role: {role}");
    }
    if let Some(r) = report {
        let _ = writeln!(o, "// depth {} / width {} / {} atoms", r.depth, r.width, r.atoms);
    }
    o.push('\n');
    o.push_str(
        "control MafiaIngress(inout headers_t hdr, inout metadata_t meta, inout standard_metadata_t std_meta) {\n",
    );
    for r in &ir.registers {
        let _ = writeln!(
            o,
            "    register<bit<{}>>({}) {}; // {}",
            r.width, r.cells, r.name, r.decl
        );
    }
    if !ir.registers.is_empty() {
        o.push('\n');
    }
    for t in &ir.tables {
        let stages: Vec<usize> = report
            .map(|r| {
                let mut s: Vec<usize> = r
                    .placement
                    .iter()
                    .filter(|p| p.table == t.id)
                    .map(|p| p.stage)
                    .collect();
                s.dedup();
                s
            })
            .unwrap_or_default();
        let _ = writeln!(o, "    action {}_act() {{", t.name);
        for a in &t.actions {
            let _ = writeln!(o, "        {};", action_text(a));
        }
        for at in &t.atoms {
            let _ = writeln!(
                o,
                "        // {} {} ({}) -> ({})",
                match at.kind {
                    AtomKind::Stateful => "stateful",
                    AtomKind::Stateless => "stateless",
                },
                at.op,
                at.reads.join(", "),
                at.writes.join(", ")
            );
        }
        o.push_str("    }\n");
        let _ = writeln!(o, "    table {} {{", t.name);
        let _ = writeln!(o, "        actions = {{ {}_act; }}", t.name);
        let _ = writeln!(o, "        default_action = {}_act();", t.name);
        if !stages.is_empty() {
            let s: Vec<String> = stages.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(o, "        // stages {}", s.join(", "));
        }
        o.push_str("    }\n\n");
    }
    o.push_str("    apply {\n");
    for sc in &ir.controls {
        let _ = writeln!(o, "        if (meta.stream == STREAM_{}) {{", sc.stream.to_uppercase());
        control_text(ir, &sc.control, 3, &mut o);
        o.push_str("        }\n");
    }
    o.push_str("    }\n}\n");
    o
}

fn action_text(a: &Action) -> String {
    match a {
        Action::Tag { field, value, .. } => format!("hdr.{field} = {value}"),
        Action::Set {
            state,
            value,
            add: false,
        } => format!("{}.write({value})", state.var),
        Action::Set {
            state,
            value,
            add: true,
        } => format!("{}.write({} + {value})", state.var, state.var),
        Action::Insert { state } => format!("{}.insert()", state.var),
        Action::Init { state, value } => format!("{}.init({value})", state.var),
        Action::Reset { state } => format!("{}.reset()", state.var),
        Action::Timestamp { state } => format!("{}.write(std_meta.ingress_global_timestamp)", state.var),
        Action::Duplicate { stream } => format!("clone_to_stream(STREAM_{})", stream.to_uppercase()),
        Action::Collect { endpoint } => format!("emit_to({endpoint}); exit"),
    }
}

fn control_text(ir: &PipelineIR, c: &Control, depth: usize, o: &mut String) {
    let pad = "    ".repeat(depth);
    match c {
        Control::Halt => {
            let _ = writeln!(o, "{pad}exit;");
        }
        Control::Apply(id) => {
            let Some(t) = ir.table(*id) else { return };
            match &t.guard {
                Some(g) if t.actions.is_empty() => {
                    let _ = writeln!(o, "{pad}if (!({g})) {{ exit; }}");
                }
                Some(g) => {
                    let _ = writeln!(o, "{pad}if (!({g})) {{ exit; }}");
                    let _ = writeln!(o, "{pad}{}.apply();", t.name);
                }
                None => {
                    let _ = writeln!(o, "{pad}{}.apply();", t.name);
                }
            }
        }
        Control::Seq(items) => {
            for c in items {
                control_text(ir, c, depth, o);
            }
        }
        Control::Par(items) => {
            let _ = writeln!(o, "{pad}// parallel: branches see the state from before the split");
            for (i, c) in items.iter().enumerate() {
                let _ = writeln!(o, "{pad}branch_{i}: {{");
                control_text(ir, c, depth + 1, o);
                let _ = writeln!(o, "{pad}}}");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::lower::lower;
    use crate::frontend::parse;

    #[test]
    fn empty_program_has_no_tables() {
        let ir = lower(&parse("").unwrap().for_role(None).unwrap()).unwrap();
        let j = emit_json(&ir);
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["tables"], serde_json::json!([]));
        assert_eq!(parse_json(&j).unwrap(), ir);
    }

    #[test]
    fn p4_is_watermarked() {
        let ir = lower(
            &parse("c = Counter(width=32)\npkts >> c.add(1)")
                .unwrap()
                .for_role(None)
                .unwrap(),
        )
        .unwrap();
        let p4 = emit_p4(&ir, None);
        assert!(p4.starts_with(P4_WATERMARK));
        assert!(p4.contains("register<bit<32>>(1) c;"));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let ir = lower(&parse("").unwrap().for_role(None).unwrap()).unwrap();
        let j = emit_json(&ir).replace("\"version\": 1", "\"version\": 9");
        assert!(parse_json(&j).is_err());
    }
}
