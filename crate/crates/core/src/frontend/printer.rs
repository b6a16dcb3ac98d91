use std::fmt::Write;

use super::ast::*;
use super::parser::format_seconds;

/// Canonical source text for a program. Constants appear as their bound
/// values, so the output parses without any defines.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    print_segment(&mut out, &p.global, "");
    for r in &p.roles {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "@role(\"{}\") {{", r.role);
        print_segment(&mut out, &r.segment, "    ");
        out.push_str("}\n");
    }
    out
}

fn print_segment(out: &mut String, s: &Segment, indent: &str) {
    for k in &s.keys {
        let fields: Vec<&str> = k.fields.iter().map(|f| f.name()).collect();
        let _ = writeln!(out, "{indent}{} = Key({})", k.name, fields.join(", "));
    }
    for d in &s.state {
        let _ = writeln!(out, "{indent}{} = {}", d.name, d.kind);
    }
    if let Some(w) = s.window {
        let _ = writeln!(out, "{indent}window({}s)", format_seconds(w.ns));
    }
    for t in &s.tasks {
        let _ = writeln!(out, "{indent}{} >> {}", t.stream, print_node(&t.body));
    }
}

pub fn print_node(n: &Node) -> String {
    match n {
        Node::Seq(items) => items.iter().map(print_node).collect::<Vec<_>>().join(" >> "),
        Node::Par(branches) => {
            let parts: Vec<String> = branches.iter().map(print_node).collect();
            format!("({})", parts.join(" + "))
        }
        Node::Prim(p, _) => print_prim(p),
    }
}

pub fn print_prim(p: &Prim) -> String {
    match p {
        Prim::Match(e) => format!("match({e})"),
        Prim::Tag { field, value, .. } => format!("tag({field}, {value})"),
        Prim::Duplicate(s) => format!("duplicate({s})"),
        Prim::Collect(s) => format!("collect({s})"),
        Prim::Timestamp(s) => format!("timestamp({})", s.var),
        Prim::Call { state, method, arg } => match arg {
            Some(a) => format!("{}.{}({a})", state.var, method.name()),
            None => format!("{}.{}()", state.var, method.name()),
        },
    }
}
