//! Decomposition of tables into atoms.
//!
//! Costs per primitive:
//!
//! | primitive                         | atoms                                       |
//! |-----------------------------------|---------------------------------------------|
//! | `match(e)`                        | those of `e`                                |
//! | `tag(f, e)`                       | 1 + those of `e`                            |
//! | counter / timestamp update        | 1 stateful (+1 hash inside a HashMap)       |
//! | count-min, store, Bloom update    | H hash + H stateful                         |
//! | PCSA / HyperLogLog update         | 1 hash + 1 rank + 1 stateful                |
//! | `duplicate`, `collect`            | 1                                           |
//!
//! Inside expressions every operator is one stateless atom. A scalar read is
//! one stateful atom; an aggregate over H cells is H hash + H stateful +
//! (H - 1) combining atoms. In `v.set(v op x)` the `op` is folded into the
//! read-modify-write of `v`. Multiplication needs a constant operand and
//! division a constant divisor; anything else is rejected.

use std::collections::BTreeMap;

use super::ir::*;
use crate::error::{Error, Result};
use crate::model::decl::SketchAlg;
use crate::model::{BinOp, Expr, FlowKey, StateKind, StateOp, StateRef};

pub fn annotate(ir: &mut PipelineIR) -> Result<()> {
    let regs: BTreeMap<usize, StateKind> = ir.registers.iter().map(|r| (r.id, r.decl.clone())).collect();
    let keys: BTreeMap<String, FlowKey> = ir.keys.iter().map(|k| (k.name.clone(), k.clone())).collect();
    for t in &mut ir.tables {
        t.atoms = table_atoms(t, &regs, &keys)?;
    }
    Ok(())
}

pub fn guard_result(tid: usize) -> String {
    format!("ctl:{tid}")
}

fn table_atoms(t: &Table, regs: &BTreeMap<usize, StateKind>, keys: &BTreeMap<String, FlowKey>) -> Result<Vec<Atom>> {
    let mut g = Gen {
        tid: t.id,
        n: 0,
        out: Vec::new(),
        regs,
        keys,
    };
    if let Some(e) = &t.guard {
        let before = g.out.len();
        g.expr(e, None)?;
        if g.out.len() > before {
            let last = g.out.last_mut().unwrap();
            last.writes = vec![guard_result(t.id)];
        }
    }
    for a in &t.actions {
        g.action(a)?;
    }
    Ok(g.out)
}

struct Gen<'a> {
    tid: usize,
    n: u32,
    out: Vec<Atom>,
    regs: &'a BTreeMap<usize, StateKind>,
    keys: &'a BTreeMap<String, FlowKey>,
}

fn row(var: &str, r: u32) -> String {
    format!("state:{var}#{r}")
}

fn rows(kind: &StateKind) -> u32 {
    match kind.instance() {
        StateKind::BloomFilter { nhash, .. }
        | StateKind::Sketch {
            alg: SketchAlg::CountMin | SketchAlg::Store,
            nhash,
            ..
        } => *nhash,
        _ => 1,
    }
}

fn is_self(e: &Expr, id: usize) -> bool {
    matches!(e, Expr::State { state, op: StateOp::Value, .. } if state.id == id)
}

impl Gen<'_> {
    fn tmp(&mut self) -> String {
        self.n += 1;
        format!("tmp:{}.{}", self.tid, self.n)
    }

    fn push(&mut self, kind: AtomKind, op: &str, reads: Vec<String>, writes: Vec<String>) {
        self.out.push(Atom {
            kind,
            op: op.to_string(),
            reads,
            writes,
        });
    }

    fn kind(&self, s: &StateRef) -> Result<StateKind> {
        self.regs
            .get(&s.id)
            .cloned()
            .ok_or_else(|| Error::UnknownState(s.var.clone()))
    }

    fn hash(&mut self, key: &str) -> String {
        let reads = self
            .keys
            .get(key)
            .map(|k| k.fields.iter().map(|f| format!("field:{}", f.name())).collect())
            .unwrap_or_default();
        let t = self.tmp();
        self.push(AtomKind::Stateless, "hash", reads, vec![t.clone()]);
        t
    }

    fn slot(&mut self, kind: &StateKind) -> Vec<String> {
        match kind {
            StateKind::HashMap { key, .. } => vec![self.hash(key)],
            _ => vec![],
        }
    }

    fn hashed(kind: &StateKind) -> Option<String> {
        kind.hash_key().map(str::to_string)
    }

    fn read_state(&mut self, s: &StateRef, op: StateOp, arg: Option<String>) -> Result<String> {
        let kind = self.kind(s)?;
        let slot = self.slot(&kind);
        let h = rows(&kind);
        let membership = kind.is_membership();
        let result = match kind.instance() {
            StateKind::Counter { .. } | StateKind::Timestamp => {
                let t = self.tmp();
                let mut reads = vec![row(&s.var, 0)];
                reads.extend(slot);
                self.push(AtomKind::Stateful, "read", reads, vec![t.clone()]);
                t
            }
            StateKind::Sketch {
                alg: SketchAlg::Pcsa | SketchAlg::Hyperloglog,
                ..
            } => {
                let t = self.tmp();
                let mut reads = vec![row(&s.var, 0)];
                reads.extend(slot);
                self.push(AtomKind::Stateful, "read", reads, vec![t.clone()]);
                let e = self.tmp();
                self.push(AtomKind::Stateless, "estimate", vec![t], vec![e.clone()]);
                e
            }
            _ if membership && op != StateOp::Test => {
                let t = self.tmp();
                let mut reads: Vec<String> = (0..h).map(|r| row(&s.var, r)).collect();
                reads.extend(slot);
                self.push(AtomKind::Stateful, "read", reads, vec![t.clone()]);
                t
            }
            _ => {
                let key = Self::hashed(&kind).unwrap_or_default();
                let mut cells = Vec::new();
                for r in 0..h {
                    let hr = self.hash(&key);
                    let c = self.tmp();
                    let mut reads = vec![row(&s.var, r), hr];
                    reads.extend(slot.iter().cloned());
                    reads.extend(arg.iter().cloned());
                    self.push(AtomKind::Stateful, "read", reads, vec![c.clone()]);
                    cells.push(c);
                }
                let combine = match op {
                    StateOp::Max => "max",
                    StateOp::Sum => "+",
                    // the final combine also divides by H
                    StateOp::Avg => "avg",
                    StateOp::Any => "or",
                    StateOp::All | StateOp::Test => "and",
                    _ => "min",
                };
                let mut acc = cells[0].clone();
                for c in cells.into_iter().skip(1) {
                    let t = self.tmp();
                    self.push(AtomKind::Stateless, combine, vec![acc, c], vec![t.clone()]);
                    acc = t;
                }
                acc
            }
        };
        Ok(result)
    }

    fn expr(&mut self, e: &Expr, self_id: Option<usize>) -> Result<Option<String>> {
        Ok(match e {
            Expr::Lit(_) => None,
            Expr::Field(f) => Some(format!("field:{}", f.name())),
            Expr::State { state, op, arg } => {
                if Some(state.id) == self_id && *op == StateOp::Value {
                    return Ok(None);
                }
                let a = match arg {
                    Some(a) => self.expr(a, self_id)?,
                    None => None,
                };
                Some(self.read_state(state, *op, a)?)
            }
            Expr::Bin { op, lhs, rhs } => {
                match op {
                    BinOp::Mul if !lhs.fold().is_const() && !rhs.fold().is_const() => {
                        return Err(Error::UnsupportedExpr(format!(
                            "`{e}`: multiplication needs a constant operand"
                        )))
                    }
                    BinOp::Div if !rhs.fold().is_const() => {
                        return Err(Error::UnsupportedExpr(format!(
                            "`{e}`: division needs a constant divisor"
                        )))
                    }
                    _ => {}
                }
                let l = self.expr(lhs, self_id)?;
                let r = self.expr(rhs, self_id)?;
                let t = self.tmp();
                self.push(
                    AtomKind::Stateless,
                    op.symbol(),
                    l.into_iter().chain(r).collect(),
                    vec![t.clone()],
                );
                Some(t)
            }
            Expr::Not(inner) => {
                let x = self.expr(inner, self_id)?;
                let t = self.tmp();
                self.push(AtomKind::Stateless, "!", x.into_iter().collect(), vec![t.clone()]);
                Some(t)
            }
            Expr::Max(a, b) => {
                let x = self.expr(a, self_id)?;
                let y = self.expr(b, self_id)?;
                let t = self.tmp();
                self.push(
                    AtomKind::Stateless,
                    "max",
                    x.into_iter().chain(y).collect(),
                    vec![t.clone()],
                );
                Some(t)
            }
            Expr::Random { .. } => {
                let t = self.tmp();
                self.push(AtomKind::Stateless, "random", vec![], vec![t.clone()]);
                Some(t)
            }
        })
    }

    /// Read-modify-write of every row of `s` selected for the packet.
    fn update_rows(&mut self, s: &StateRef, kind: &StateKind, op: &str, value: Option<String>) {
        let slot = self.slot(kind);
        let key = Self::hashed(kind);
        for r in 0..rows(kind) {
            let mut reads = vec![row(&s.var, r)];
            if let Some(k) = &key {
                reads.push(self.hash(k));
            }
            reads.extend(slot.iter().cloned());
            reads.extend(value.iter().cloned());
            self.push(AtomKind::Stateful, op, reads, vec![row(&s.var, r)]);
        }
    }

    fn whole(&mut self, s: &StateRef, kind: &StateKind, op: &str, value: Option<String>) {
        let mut reads = self.slot(kind);
        reads.extend(value);
        let writes = (0..rows(kind)).map(|r| row(&s.var, r)).collect();
        self.push(AtomKind::Stateful, op, reads, writes);
    }

    fn action(&mut self, a: &Action) -> Result<()> {
        match a {
            Action::Tag { field, value, .. } => {
                let v = self.expr(value, None)?;
                self.push(
                    AtomKind::Stateless,
                    "set_field",
                    v.into_iter().collect(),
                    vec![format!("field:{field}")],
                );
            }
            Action::Set { state, value, add } => {
                let kind = self.kind(state)?;
                let (op, v) = match value {
                    Expr::Bin { op, lhs, rhs } if !add && is_self(lhs, state.id) => {
                        (op.symbol().to_string(), self.expr(rhs, Some(state.id))?)
                    }
                    Expr::Bin { op, lhs, rhs }
                        if !add
                            && is_self(rhs, state.id)
                            && matches!(op, BinOp::Add | BinOp::Mul | BinOp::BitAnd | BinOp::BitOr) =>
                    {
                        (op.symbol().to_string(), self.expr(lhs, Some(state.id))?)
                    }
                    _ if *add => ("+".to_string(), self.expr(value, Some(state.id))?),
                    _ => ("write".to_string(), self.expr(value, Some(state.id))?),
                };
                self.update_rows(state, &kind, &op, v);
            }
            Action::Insert { state } => {
                let kind = self.kind(state)?;
                match kind.instance() {
                    StateKind::Sketch {
                        alg: SketchAlg::Pcsa | SketchAlg::Hyperloglog,
                        key,
                        ..
                    } => {
                        let slot = self.slot(&kind);
                        let h = self.hash(key);
                        let rank = self.tmp();
                        self.push(AtomKind::Stateless, "rank", vec![h.clone()], vec![rank.clone()]);
                        let mut reads = vec![row(&state.var, 0), h, rank];
                        reads.extend(slot);
                        self.push(AtomKind::Stateful, "update", reads, vec![row(&state.var, 0)]);
                    }
                    _ => self.update_rows(state, &kind, "insert", None),
                }
            }
            Action::Init { state, value } => {
                let kind = self.kind(state)?;
                let v = self.expr(value, None)?;
                self.whole(state, &kind, "init", v);
            }
            Action::Reset { state } => {
                let kind = self.kind(state)?;
                self.whole(state, &kind, "reset", None);
            }
            Action::Timestamp { state } => {
                let kind = self.kind(state)?;
                self.whole(state, &kind, "timestamp", Some("field:pkt.ts".into()));
            }
            Action::Duplicate { stream } => {
                self.push(
                    AtomKind::Stateless,
                    "copy",
                    vec!["field:*".into()],
                    vec![format!("copy:{stream}")],
                );
            }
            Action::Collect { endpoint } => {
                self.push(
                    AtomKind::Stateless,
                    "emit",
                    vec!["field:*".into()],
                    vec![format!("emit:{endpoint}")],
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::lower::lower;
    use crate::frontend::parse;

    fn atoms(src: &str) -> Vec<Vec<Atom>> {
        let p = parse(src).unwrap();
        let ir = lower(&p.for_role(None).unwrap()).unwrap();
        ir.tables.into_iter().map(|t| t.atoms).collect()
    }

    const DECLS: &str = "k = Key(ipv4.src, ipv4.dst)\nc = Counter(width=32)\n\
        nb = Sketch(alg=\"count-min\",key=k,nhash=4,size=256)\n\
        hh = BloomFilter(alg=\"membership\",key=k,nhash=3,size=64)\n\
        m = HashMap(key=k,size=16,type=Counter(width=32))\n\
        card = Sketch(alg=\"hyperloglog\",key=k,nhash=1,size=64)\n";

    #[test]
    fn documented_costs() {
        let t = atoms(&format!(
            "{DECLS}pkts >> nb.set(nb + pkt.size) >> c.set(c + 1) >> tag(ipv4.id, pkt.size + 1) \
             >> match(nb.min() > 10) >> m.set(nb.min()) >> hh.insert() >> card.update() >> duplicate(x)\n\
             x >> collect(C)"
        ));
        let n: Vec<usize> = t.iter().map(|a| a.len()).collect();
        // sketch set, counter add, tag, match, hashmap set, bloom insert, hll update, duplicate, collect
        assert_eq!(n, vec![8, 1, 2, 4 + 4 + 3 + 1, 1 + (4 + 4 + 3) + 1, 6, 3, 1, 1]);
        let stateful = t[0].iter().filter(|a| a.kind == AtomKind::Stateful).count();
        assert_eq!(stateful, 4);
        assert_eq!(t[3].last().unwrap().writes, vec![guard_result(3)]);
    }

    #[test]
    fn variable_products_are_rejected() {
        let p = parse(&format!("{DECLS}pkts >> match(nb.min() * c > 3)")).unwrap();
        assert!(matches!(
            lower(&p.for_role(None).unwrap()),
            Err(Error::UnsupportedExpr(_))
        ));
        let p = parse(&format!("{DECLS}pkts >> match(nb.min() / c > 3)")).unwrap();
        assert!(matches!(
            lower(&p.for_role(None).unwrap()),
            Err(Error::UnsupportedExpr(_))
        ));
        let p = parse(&format!("{DECLS}pkts >> match(nb.min() * 100 > 50 * c)")).unwrap();
        assert!(lower(&p.for_role(None).unwrap()).is_ok());
    }
}
