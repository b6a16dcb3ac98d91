//! Best-effort conflict detection for parallel compositions.
//!
//! For every `Par` node, each pair of branches is checked for a state
//! variable that one branch writes while the other reads or writes it. A pair
//! whose leading `match` guards are syntactically complementary can never
//! both run on the same packet, so its conflicts are reported as `Info`.

use std::collections::BTreeSet;
use std::fmt;

use super::ast::*;
use crate::error::Span;
use crate::model::{BinOp, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictKind {
    ReadWrite,
    WriteWrite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: ConflictKind,
    pub var: String,
    pub span: Span,
    pub message: String,
}

pub fn validate_composition(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (_, seg) in p.segments() {
        for t in &seg.tasks {
            check(&t.body, t.loc.0, &mut out);
        }
    }
    out
}

fn check(n: &Node, fallback: Span, out: &mut Vec<Diagnostic>) {
    match n {
        Node::Prim(..) => {}
        Node::Seq(items) => items.iter().for_each(|c| check(c, fallback, out)),
        Node::Par(branches) => {
            let span = first_span(n).unwrap_or(fallback);
            let sets: Vec<(BTreeSet<&str>, BTreeSet<&str>)> = branches.iter().map(access_sets).collect();
            for i in 0..branches.len() {
                for j in i + 1..branches.len() {
                    let exclusive = complementary(&branches[i], &branches[j]);
                    let severity = if exclusive { Severity::Info } else { Severity::Warning };
                    let (ri, wi) = &sets[i];
                    let (rj, wj) = &sets[j];
                    let vars: BTreeSet<&str> = wi.union(wj).copied().collect();
                    for v in vars {
                        let kind = if wi.contains(v) && wj.contains(v) {
                            ConflictKind::WriteWrite
                        } else if (wi.contains(v) && rj.contains(v)) || (wj.contains(v) && ri.contains(v)) {
                            ConflictKind::ReadWrite
                        } else {
                            continue;
                        };
                        let what = match kind {
                            ConflictKind::WriteWrite => format!("both write `{v}`"),
                            ConflictKind::ReadWrite => format!("read and write `{v}`"),
                        };
                        let mut message = format!("parallel branches {} and {} {what}", i + 1, j + 1);
                        if exclusive {
                            message.push_str(" (guards are complementary)");
                        }
                        out.push(Diagnostic {
                            severity,
                            kind,
                            var: v.to_string(),
                            span,
                            message,
                        });
                    }
                }
            }
            branches.iter().for_each(|b| check(b, span, out));
        }
    }
}

fn first_span(n: &Node) -> Option<Span> {
    let mut s = None;
    n.visit_prims(&mut |_, span| {
        if s.is_none() {
            s = Some(span);
        }
    });
    s
}

fn access_sets(n: &Node) -> (BTreeSet<&str>, BTreeSet<&str>) {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    n.visit_prims(&mut |p, _| {
        reads.extend(p.reads().into_iter().map(|r| r.var.as_str()));
        writes.extend(p.writes().map(|r| r.var.as_str()));
    });
    (reads, writes)
}

fn leading_guard(n: &Node) -> Option<&Expr> {
    match n {
        Node::Prim(Prim::Match(e), _) => Some(e),
        Node::Seq(items) => items.first().and_then(leading_guard),
        _ => None,
    }
}

fn conjuncts<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Bin {
            op: BinOp::And,
            lhs,
            rhs,
        } => {
            conjuncts(lhs, out);
            conjuncts(rhs, out);
        }
        other => out.push(other),
    }
}

/// True when the leading guards of `a` and `b` cannot both hold.
pub fn complementary(a: &Node, b: &Node) -> bool {
    let (Some(ga), Some(gb)) = (leading_guard(a), leading_guard(b)) else {
        return false;
    };
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    conjuncts(ga, &mut ca);
    conjuncts(gb, &mut cb);
    ca.iter().any(|x| cb.iter().any(|y| negation_of(x, y)))
}

fn negation_of(x: &Expr, y: &Expr) -> bool {
    match (x, y) {
        (Expr::Not(inner), other) | (other, Expr::Not(inner)) if **inner == *other => true,
        (
            Expr::Bin {
                op: o1,
                lhs: l1,
                rhs: r1,
            },
            Expr::Bin {
                op: o2,
                lhs: l2,
                rhs: r2,
            },
        ) => o1.negated() == Some(*o2) && l1 == l2 && r1 == r2,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    const DECLS: &str = "k = Key(ipv4.src)\nc = Counter(width=32)\nd = Counter(width=32)\n\
        hh = BloomFilter(alg=\"membership\",key=k,nhash=2,size=64)\n";

    fn diags(body: &str) -> Vec<Diagnostic> {
        validate_composition(&parse(&format!("{DECLS}{body}")).unwrap())
    }

    #[test]
    fn unguarded_read_write_is_a_warning() {
        let d = diags("pkts >> (c.set(c + 1) + match(c > 3))");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Warning);
        assert_eq!(d[0].kind, ConflictKind::ReadWrite);
        assert_eq!(d[0].var, "c");
    }

    #[test]
    fn complementary_guards_downgrade_to_info() {
        let d = diags("pkts >> ((match(!hh.test()) >> hh.insert() >> c.set(1)) + (match(hh.test()) >> c.set(c + 2)))");
        assert!(!d.is_empty());
        assert!(d.iter().all(|x| x.severity == Severity::Info));
        let d = diags("pkts >> ((match(c == 0) >> c.set(1)) + (match(c != 0) >> c.set(2)))");
        assert!(d.iter().all(|x| x.severity == Severity::Info));
    }

    #[test]
    fn disjoint_state_is_clean() {
        assert!(diags("pkts >> (c.set(c + 1) + d.set(d + 1))").is_empty());
    }
}
