//! Random programs must behave the same under the tree-walking interpreter
//! and the compiled pipeline.

mod common;

use mafia::compiler::{compile, TargetModel};
use mafia::corpus::same_state;
use mafia::frontend::parse;
use mafia::interp::{simulate, ChainEntry, EngineKind, SwitchConfig};
use mafia::tracegen::{generate, Scenario, TraceSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn engines_agree(src in common::program(), seed in 0u64..1000) {
        let prog = parse(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        let sp = prog.for_role(None).unwrap();
        compile(&sp, &TargetModel::default()).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        let mut spec = TraceSpec::new(Scenario::Mixed, 150, seed);
        spec.flows = 8;
        let trace = generate(&spec);
        let chain = [ChainEntry { switch_id: 1, program: sp }];
        let a = simulate(&chain, &trace, seed, EngineKind::Ast, SwitchConfig::default()).unwrap();
        let b = simulate(&chain, &trace, seed, EngineKind::Ir, SwitchConfig::default()).unwrap();
        prop_assert!(a.sinks == b.sinks, "sinks differ for\n{}", src);
        prop_assert!(same_state(&a, &b), "state differs for\n{}", src);
    }
}

#[test]
fn windowed_corpus_programs_agree_under_small_reset_chunks() {
    for name in ["heavy_hitter", "topk_congested", "path_changes"] {
        let e = mafia::corpus::get(name).unwrap();
        let chain = e.chain().unwrap();
        // About 12 s of traffic, so every window expires at least twice.
        let trace = generate(&TraceSpec::new(Scenario::Mixed, 12_000, 5));
        let config = SwitchConfig {
            reset_chunk: 16,
            ..SwitchConfig::default()
        };
        let a = simulate(&chain, &trace, 5, EngineKind::Ast, config).unwrap();
        let b = simulate(&chain, &trace, 5, EngineKind::Ir, config).unwrap();
        assert!(
            a.report.switches.iter().any(|s| s.resets_completed >= 2),
            "{name} never reset"
        );
        assert!(a.sinks == b.sinks && same_state(&a, &b), "{name}");
    }
}
