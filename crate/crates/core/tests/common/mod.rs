//! Random well-formed programs over a fixed set of declarations.

#![allow(dead_code)]

use proptest::prelude::*;

pub const DECLS: &str = "\
flowid = Key(ipv4.src, ipv4.dst)
c = Counter(width=16)
h = HashMap(key=flowid, size=16, type=Counter(width=32))
cm = Sketch(alg=\"countmin\", key=flowid, nhash=2, size=32, width=32)
bf = BloomFilter(alg=\"membership\", key=flowid, nhash=2, size=16)
t = Timestamp()
";

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u64..50).prop_map(|v| v.to_string()),
        Just("pkt.size".to_string()),
        Just("ipv4.tos".to_string()),
        Just("ipv4.id".to_string()),
        Just("c".to_string()),
        Just("h".to_string()),
        Just("cm.min()".to_string()),
        Just("t".to_string()),
    ]
}

pub fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (
                inner.clone(),
                prop::sample::select(vec!["+", "-", "&", "|"]),
                inner.clone()
            )
                .prop_map(|(a, op, b)| format!("({a} {op} {b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("max({a}, {b})")),
        ]
    })
}

fn cond() -> impl Strategy<Value = String> {
    prop_oneof![
        (
            expr(),
            prop::sample::select(vec!["==", "!=", "<", ">", "<=", ">="]),
            expr()
        )
            .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
        Just("bf.test()".to_string()),
        Just("!bf.test()".to_string()),
    ]
}

fn prim() -> impl Strategy<Value = String> {
    prop_oneof![
        expr().prop_map(|e| format!("tag(ipv4.id, {e})")),
        expr().prop_map(|e| format!("tag(ipv4.tos, {e})")),
        expr().prop_map(|e| format!("c.set(c + {e})")),
        Just("h.set(h + 1)".to_string()),
        expr().prop_map(|e| format!("cm.set(cm + {e})")),
        Just("bf.insert()".to_string()),
        cond().prop_map(|e| format!("match({e})")),
        Just("h.reset()".to_string()),
        Just("timestamp(t)".to_string()),
    ]
}

/// A task body: primitives in sequence, with occasional parallel groups.
pub fn body() -> impl Strategy<Value = String> {
    prim().prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| v.join(" >> ")),
            prop::collection::vec(inner, 2..3).prop_map(|v| format!(
                "( {} )",
                v.iter().map(|b| format!("({b})")).collect::<Vec<_>>().join(" + ")
            )),
        ]
    })
}

/// A whole program whose packets end up in sink `OUT`.
pub fn program() -> impl Strategy<Value = String> {
    body().prop_map(|b| format!("{DECLS}\npkts >> {b} >> duplicate(out)\nout >> collect(OUT)\n"))
}
