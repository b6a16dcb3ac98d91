use super::atoms::annotate;
use super::ir::*;
use crate::error::Result;
use crate::frontend::{Method, Node, Prim, Program, SwitchProgram};

/// One table per primitive: `match` becomes a guard-only table, everything
/// else a single-action table.
pub fn lower(prog: &SwitchProgram) -> Result<PipelineIR> {
    let mut l = Lowerer { tables: Vec::new() };
    let controls = prog
        .tasks
        .iter()
        .map(|(stream, body)| StreamControl {
            stream: stream.clone(),
            control: l.node(body),
        })
        .collect();
    let registers = prog
        .state
        .iter()
        .map(|d| Register {
            id: d.id,
            name: d.name.clone(),
            decl: d.kind.clone(),
            cells: d.kind.total_cells(),
            width: d.kind.geometry().width,
            memory_bits: d.kind.memory_bits(),
        })
        .collect();
    let mut ir = PipelineIR {
        version: IR_VERSION,
        role: prog.role.clone(),
        window_ns: prog.window_ns,
        slot_count: prog.slot_count,
        keys: prog.keys.values().cloned().collect(),
        registers,
        tables: l.tables,
        controls,
    };
    annotate(&mut ir)?;
    Ok(ir)
}

/// Pipelines for every deployable slice: the top level alone when the
/// program has no roles, otherwise one per role.
pub fn lower_program(p: &Program) -> Result<Vec<PipelineIR>> {
    if p.roles.is_empty() {
        return Ok(vec![lower(&p.for_role(None)?)?]);
    }
    p.role_names()
        .into_iter()
        .map(|r| lower(&p.for_role(Some(r))?))
        .collect()
}

struct Lowerer {
    tables: Vec<Table>,
}

impl Lowerer {
    fn node(&mut self, n: &Node) -> Control {
        match n {
            Node::Seq(items) => Control::Seq(items.iter().map(|c| self.node(c)).collect()),
            Node::Par(items) => Control::Par(items.iter().map(|c| self.node(c)).collect()),
            Node::Prim(p, _) => Control::Apply(self.prim(p)),
        }
    }

    fn prim(&mut self, p: &Prim) -> usize {
        let (guard, action) = match p.clone() {
            Prim::Match(e) => (Some(e), None),
            Prim::Tag { field, width, value } => (None, Some(Action::Tag { field, width, value })),
            Prim::Duplicate(stream) => (None, Some(Action::Duplicate { stream })),
            Prim::Collect(endpoint) => (None, Some(Action::Collect { endpoint })),
            Prim::Timestamp(state) => (None, Some(Action::Timestamp { state })),
            Prim::Call { state, method, arg } => {
                let a = match (method, arg) {
                    (Method::Set, Some(value)) => Action::Set {
                        state,
                        value,
                        add: false,
                    },
                    (Method::Add, Some(value)) => Action::Set {
                        state,
                        value,
                        add: true,
                    },
                    (Method::Init, Some(value)) => Action::Init { state, value },
                    (Method::Reset, _) => Action::Reset { state },
                    _ => Action::Insert { state },
                };
                (None, Some(a))
            }
        };
        let id = self.tables.len();
        let label = match &action {
            Some(Action::Tag { field, .. }) => format!("tag_{}", field.replace('.', "_")),
            Some(a) => match a.state() {
                Some(s) => format!("{}_{}", s.var, a.name()),
                None => a.name().to_string(),
            },
            None => "match".to_string(),
        };
        self.tables.push(Table {
            id,
            name: format!("t{id}_{label}"),
            guard,
            actions: action.into_iter().collect(),
            atoms: Vec::new(),
        });
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn match_then_tag_is_two_tables() {
        let p = parse("pkts >> match(pkt.size > 100) >> tag(ipv4.id, pkt.size)").unwrap();
        let ir = lower(&p.for_role(None).unwrap()).unwrap();
        assert_eq!(ir.tables.len(), 2);
        assert!(ir.tables[0].guard.is_some() && ir.tables[0].actions.is_empty());
        assert_eq!(
            ir.controls[0].control,
            Control::Seq(vec![Control::Apply(0), Control::Apply(1)])
        );
    }
}
