//! IR-to-IR passes. Each one preserves the packet-level behavior of the
//! pipeline; none adds atoms.

use std::collections::{BTreeMap, BTreeSet};

use super::atoms::annotate;
use super::ir::*;
use crate::model::Expr;

pub fn optimize(input: &PipelineIR) -> PipelineIR {
    let mut ir = input.clone();
    for t in &mut ir.tables {
        t.guard = t.guard.as_ref().map(Expr::fold);
        for a in &mut t.actions {
            for e in a.exprs_mut() {
                *e = e.fold();
            }
        }
    }
    if annotate(&mut ir).is_err() {
        return input.clone();
    }
    let mut tables: BTreeMap<usize, Table> = std::mem::take(&mut ir.tables).into_iter().map(|t| (t.id, t)).collect();
    for sc in &mut ir.controls {
        let c = std::mem::replace(&mut sc.control, Control::Halt);
        sc.control = simplify(c, &mut tables);
    }
    let mut used = Vec::new();
    for sc in &ir.controls {
        sc.control.tables(&mut used);
    }
    let used: BTreeSet<usize> = used.into_iter().collect();
    ir.tables = tables.into_values().filter(|t| used.contains(&t.id)).collect();
    if annotate(&mut ir).is_err() || ir.atom_count() > input.atom_count() {
        return input.clone();
    }
    ir
}

fn simplify(c: Control, tables: &mut BTreeMap<usize, Table>) -> Control {
    match c {
        Control::Halt => Control::Halt,
        Control::Apply(id) => {
            let t = tables.get_mut(&id).expect("control names a table");
            match t.guard {
                Some(Expr::Lit(0)) => Control::Halt,
                Some(Expr::Lit(_)) => {
                    t.guard = None;
                    if t.actions.is_empty() {
                        Control::Seq(vec![])
                    } else {
                        Control::Apply(id)
                    }
                }
                _ => Control::Apply(id),
            }
        }
        Control::Par(items) => {
            let mut items: Vec<Control> = items.into_iter().map(|c| simplify(c, tables)).collect();
            if items.len() == 1 {
                items.pop().unwrap()
            } else {
                Control::Par(items)
            }
        }
        Control::Seq(items) => {
            let mut flat = Vec::new();
            for c in items {
                match simplify(c, tables) {
                    Control::Seq(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
                if matches!(flat.last(), Some(Control::Halt)) {
                    break;
                }
            }
            let mut out: Vec<Control> = Vec::new();
            for c in flat {
                if let (Some(Control::Apply(a)), Control::Apply(b)) = (out.last(), &c) {
                    if let Some(keep) = fuse(*a, *b, tables) {
                        *out.last_mut().unwrap() = Control::Apply(keep);
                        continue;
                    }
                }
                out.push(c);
            }
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                Control::Seq(out)
            }
        }
    }
}

/// Tries to merge table `b` into the table `a` it follows. Returns the id of
/// the surviving table.
fn fuse(a: usize, b: usize, tables: &mut BTreeMap<usize, Table>) -> Option<usize> {
    let (ta, tb) = (&tables[&a], &tables[&b]);
    let a_guard_only = ta.guard.is_some() && ta.actions.is_empty();
    if a_guard_only && tb.actions.is_empty() && ta.guard == tb.guard && !ta.guard.as_ref().unwrap().has_random() {
        tables.remove(&b);
        return Some(a);
    }
    if tb.guard.is_some() {
        return None;
    }
    if a_guard_only {
        let ta = tables.remove(&a).unwrap();
        let tb = tables.get_mut(&b).unwrap();
        tb.guard = ta.guard;
        let mut atoms = ta.atoms;
        atoms.append(&mut tb.atoms);
        tb.atoms = atoms;
        return Some(b);
    }
    let halts = ta.actions.iter().any(|x| matches!(x, Action::Collect { .. }));
    if halts || !independent(&ta.atoms, &tb.atoms) {
        return None;
    }
    let mut tb = tables.remove(&b).unwrap();
    let ta = tables.get_mut(&a).unwrap();
    ta.actions.append(&mut tb.actions);
    ta.atoms.append(&mut tb.atoms);
    Some(a)
}

fn resources(atoms: &[Atom]) -> (BTreeSet<&str>, BTreeSet<&str>) {
    let mut r = BTreeSet::new();
    let mut w = BTreeSet::new();
    for at in atoms {
        r.extend(at.reads.iter().map(String::as_str).filter(|x| !x.starts_with("tmp:")));
        w.extend(at.writes.iter().map(String::as_str).filter(|x| !x.starts_with("tmp:")));
    }
    (r, w)
}

pub(crate) fn conflicts(x: &str, y: &str) -> bool {
    x == y || (x == "field:*" && y.starts_with("field:")) || (y == "field:*" && x.starts_with("field:"))
}

fn overlaps(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> bool {
    a.iter().any(|x| b.iter().any(|y| conflicts(x, y)))
}

fn independent(a: &[Atom], b: &[Atom]) -> bool {
    let (ra, wa) = resources(a);
    let (rb, wb) = resources(b);
    !overlaps(&wa, &rb) && !overlaps(&wa, &wb) && !overlaps(&wb, &ra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::lower::lower;
    use crate::frontend::parse;

    fn opt(src: &str) -> (PipelineIR, PipelineIR) {
        let ir = lower(&parse(src).unwrap().for_role(None).unwrap()).unwrap();
        let o = optimize(&ir);
        (ir, o)
    }

    #[test]
    fn true_guard_is_dropped() {
        let (_, o) = opt("pkts >> match(1 == 1) >> tag(ipv4.id, 3)");
        assert_eq!(o.tables.len(), 1);
        assert!(o.tables[0].guard.is_none());
        assert_eq!(o.controls[0].control, Control::Apply(1));
    }

    #[test]
    fn false_guard_halts() {
        let (_, o) = opt("pkts >> tag(ipv4.id, 3) >> match(2 < 1) >> tag(ipv4.tos, 1)");
        assert_eq!(
            o.controls[0].control,
            Control::Seq(vec![Control::Apply(0), Control::Halt])
        );
        assert_eq!(o.tables.len(), 1);
    }

    #[test]
    fn disjoint_tags_fuse() {
        let (_, o) = opt("pkts >> tag(ipv4.id, pkt.size) >> tag(ipv4.tos, 1)");
        assert_eq!(o.tables.len(), 1);
        assert_eq!(o.tables[0].actions.len(), 2);
    }

    #[test]
    fn dependent_tags_stay_apart() {
        let (_, o) = opt("pkts >> tag(ipv4.id, pkt.size) >> tag(ipv4.tos, ipv4.id)");
        assert_eq!(o.tables.len(), 2);
    }

    #[test]
    fn duplicate_guards_merge_and_fuse() {
        let (i, o) = opt("c = Counter(width=32)\npkts >> match(pkt.size > 3) >> match(pkt.size > 3) >> c.add(1)");
        assert_eq!(o.tables.len(), 1);
        assert!(o.tables[0].guard.is_some());
        assert!(o.atom_count() < i.atom_count());
    }
}
