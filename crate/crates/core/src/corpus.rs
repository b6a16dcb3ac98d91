//! The bundled measurement programs, with the constants, switch chain and
//! trace each one is exercised with.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::compiler::{self, emit_json, parse_json, TargetModel};
use crate::error::Result;
use crate::frontend::{parse_with, validate_composition, ParseOptions, Program, Severity};
use crate::interp::{simulate, ChainEntry, EngineKind, RunOutput, SwitchConfig, TraceRecord};
use crate::tracegen::{generate, Scenario, TraceSpec};

#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub title: &'static str,
    pub category: &'static str,
    pub source: &'static str,
    pub defines: &'static [(&'static str, &'static str)],
    /// Switch ids in forwarding order with their roles.
    pub chain: &'static [(u16, Option<&'static str>)],
    pub scenario: Scenario,
    /// Composition warnings the program is known to produce.
    pub expected_warnings: usize,
}

const SINGLE: &[(u16, Option<&str>)] = &[(1, None)];

pub const CORPUS: &[CorpusEntry] = &[
    CorpusEntry {
        name: "flow_volume",
        title: "Flow volume and duration",
        category: "flow-statistics",
        source: include_str!("../corpus/flow_volume.mafia"),
        defines: &[],
        chain: SINGLE,
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "count_min",
        title: "Approximate flow volume (count-min)",
        category: "flow-statistics",
        source: include_str!("../corpus/count_min.mafia"),
        defines: &[],
        chain: SINGLE,
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "cardinality_pcsa",
        title: "Flow cardinality (PCSA)",
        category: "cardinality",
        source: include_str!("../corpus/cardinality_pcsa.mafia"),
        defines: &[],
        chain: SINGLE,
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "cardinality_hll",
        title: "Flow cardinality (HyperLogLog)",
        category: "cardinality",
        source: include_str!("../corpus/cardinality_hll.mafia"),
        defines: &[],
        chain: SINGLE,
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "counter_thresholds",
        title: "Counter thresholds",
        category: "thresholds",
        source: include_str!("../corpus/counter_thresholds.mafia"),
        defines: &[("PACKET_THRESHOLD", "100"), ("BYTE_THRESHOLD", "100000")],
        chain: SINGLE,
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "stochastic_sampling",
        title: "Stochastic sampling",
        category: "sampling",
        source: include_str!("../corpus/stochastic_sampling.mafia"),
        defines: &[("SamplingRatio", "10")],
        chain: SINGLE,
        scenario: Scenario::Sampling,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "deterministic_sampling",
        title: "Deterministic sampling",
        category: "sampling",
        source: include_str!("../corpus/deterministic_sampling.mafia"),
        defines: &[("SKIP", "10"), ("NUM_SAMPLES", "2"), ("NUM_PACKETS", "20")],
        chain: SINGLE,
        scenario: Scenario::Sampling,
        expected_warnings: 3,
    },
    CorpusEntry {
        name: "postcards",
        title: "Postcard generation",
        category: "path-tracing",
        source: include_str!("../corpus/postcards.mafia"),
        defines: &[],
        chain: &[(1, None), (2, None), (3, None)],
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "trajectory",
        title: "Trajectory encoding",
        category: "path-tracing",
        source: include_str!("../corpus/trajectory.mafia"),
        defines: &[("THRESHOLD", "1000000")],
        chain: &[(1, Some("ingress")), (2, Some("intermediate")), (3, Some("egress"))],
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "heavy_hitter",
        title: "Two-phase heavy hitters",
        category: "heavy-hitters",
        source: include_str!("../corpus/heavy_hitter.mafia"),
        defines: &[
            ("mment_interval", "5"),
            ("PORT", "1"),
            ("THRESHOLD", "50"),
            ("HH_VOLUME", "1"),
        ],
        chain: SINGLE,
        scenario: Scenario::HeavyHitter,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "topk_congested",
        title: "Top-k congested flows",
        category: "congestion",
        source: include_str!("../corpus/topk_congested.mafia"),
        defines: &[],
        chain: &[(1, Some("first-hop")), (2, Some("intermediate")), (3, Some("last-hop"))],
        scenario: Scenario::Mixed,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "path_changes",
        title: "Path changes",
        category: "path-tracing",
        source: include_str!("../corpus/path_changes.mafia"),
        defines: &[("RTT", "0.1")],
        chain: &[
            (1, Some("intermediate")),
            (2, Some("intermediate")),
            (3, Some("last-hop")),
        ],
        scenario: Scenario::PathChange,
        expected_warnings: 0,
    },
    CorpusEntry {
        name: "path_change_latency",
        title: "Path change latency",
        category: "path-tracing",
        source: include_str!("../corpus/path_change_latency.mafia"),
        defines: &[("GoodToMove", "1")],
        chain: SINGLE,
        scenario: Scenario::Segway,
        expected_warnings: 0,
    },
];

pub fn get(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}

/// Entries whose name, title or category contains `filter`, ignoring case.
pub fn select(filter: Option<&str>) -> Vec<&'static CorpusEntry> {
    let f = filter.map(str::to_lowercase);
    CORPUS
        .iter()
        .filter(|e| match &f {
            None => true,
            Some(f) => {
                e.name.contains(f.as_str())
                    || e.title.to_lowercase().contains(f.as_str())
                    || e.category.contains(f.as_str())
            }
        })
        .collect()
}

impl CorpusEntry {
    pub fn options(&self) -> ParseOptions {
        ParseOptions::with_defines(self.defines.iter().copied())
    }

    pub fn parse(&self) -> Result<Program> {
        parse_with(self.source, &self.options())
    }

    pub fn chain(&self) -> Result<Vec<ChainEntry>> {
        let p = self.parse()?;
        self.chain
            .iter()
            .map(|(id, role)| {
                Ok(ChainEntry {
                    switch_id: *id,
                    program: p.for_role(*role)?,
                })
            })
            .collect()
    }

    pub fn trace(&self, packets: usize, seed: u64) -> Vec<TraceRecord> {
        generate(&TraceSpec::new(self.scenario, packets, seed))
    }

    pub fn run(&self, trace: &[TraceRecord], seed: u64, engine: EngineKind) -> Result<RunOutput> {
        simulate(&self.chain()?, trace, seed, engine, SwitchConfig::default())
    }
}

/// Outcome of one check of one entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusRow {
    pub program: &'static str,
    pub checks: Vec<Check>,
    pub compile_time: Duration,
}

impl CorpusRow {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

pub const CHECK_NAMES: [&str; 7] = [
    "parse",
    "validate",
    "compile",
    "envelope",
    "roundtrip",
    "equivalence",
    "determinism",
];

/// Runs every corpus property on `entry`: parsing, composition diagnostics,
/// compilation within the target envelope and in under a second, JSON round
/// trip, AST/IR equivalence and replay determinism on the bundled trace.
pub fn check(entry: &CorpusEntry, target: &TargetModel, packets: usize, seed: u64) -> CorpusRow {
    let mut checks = Vec::new();
    let mut push = |name: &'static str, r: std::result::Result<String, String>| {
        let (ok, detail) = match r {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(Check { name, ok, detail });
    };
    let start = Instant::now();
    let program = match entry.parse() {
        Ok(p) => {
            push("parse", Ok(String::new()));
            p
        }
        Err(e) => {
            push("parse", Err(e.to_string()));
            return CorpusRow {
                program: entry.name,
                checks,
                compile_time: start.elapsed(),
            };
        }
    };
    let warnings = validate_composition(&program)
        .iter()
        .filter(|d| d.severity == Severity::Warning)
        .count();
    push(
        "validate",
        if warnings == entry.expected_warnings {
            Ok(format!("{warnings} warnings"))
        } else {
            Err(format!("{warnings} warnings, expected {}", entry.expected_warnings))
        },
    );
    let roles: Vec<Option<&str>> = if program.roles.is_empty() {
        vec![None]
    } else {
        program.role_names().into_iter().map(Some).collect()
    };
    let mut compiled = Vec::new();
    let mut compile_err = None;
    for r in roles {
        match program.for_role(r).and_then(|sp| compiler::compile(&sp, target)) {
            Ok(c) => compiled.push(c),
            Err(e) => compile_err = Some(e.to_string()),
        }
    }
    let compile_time = start.elapsed();
    push(
        "compile",
        match compile_err {
            Some(e) => Err(e),
            None if compile_time > Duration::from_secs(1) => Err(format!("took {compile_time:?}")),
            None => Ok(format!("{compile_time:?}")),
        },
    );
    let depth = compiled.iter().map(|c| c.report.depth).max().unwrap_or(0);
    let width = compiled.iter().map(|c| c.report.width).max().unwrap_or(0);
    let grew = compiled.iter().any(|c| c.ir.atom_count() > c.unoptimized.atom_count());
    push(
        "envelope",
        if depth <= target.stages && width <= target.width && !grew {
            Ok(format!("depth {depth}, width {width}"))
        } else {
            Err(format!("depth {depth}, width {width}, atoms grew: {grew}"))
        },
    );
    push(
        "roundtrip",
        if compiled
            .iter()
            .all(|c| parse_json(&emit_json(&c.ir)).ok().as_ref() == Some(&c.ir))
        {
            Ok(String::new())
        } else {
            Err("emit/parse changed the IR".into())
        },
    );
    let trace = entry.trace(packets, seed);
    let ast = entry.run(&trace, seed, EngineKind::Ast);
    let ir = entry.run(&trace, seed, EngineKind::Ir);
    push(
        "equivalence",
        match (&ast, &ir) {
            (Ok(a), Ok(b)) if a.sinks == b.sinks && same_state(a, b) => Ok(a.report.digest[..12].to_string()),
            (Ok(_), Ok(_)) => Err("AST and IR runs differ".into()),
            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
        },
    );
    let again = entry.run(&trace, seed, EngineKind::Ast);
    push(
        "determinism",
        match (&ast, &again) {
            (Ok(a), Ok(b)) if a.report == b.report => Ok(String::new()),
            (Ok(_), Ok(_)) => Err("two runs differ".into()),
            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
        },
    );
    CorpusRow {
        program: entry.name,
        checks,
        compile_time,
    }
}

/// Final state and mode of every switch match.
pub fn same_state(a: &RunOutput, b: &RunOutput) -> bool {
    let key = |o: &RunOutput| {
        o.report
            .switches
            .iter()
            .map(|s| (s.switch_id, s.mode, s.resets_completed, s.state.clone()))
            .collect::<Vec<_>>()
    };
    key(a) == key(b) && a.report.transitions == b.report.transitions
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_programs() {
        assert_eq!(CORPUS.len(), 13);
        for e in CORPUS {
            e.parse().unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }

    #[test]
    fn filters() {
        let names: Vec<_> = select(Some("cardinality")).iter().map(|e| e.name).collect();
        assert_eq!(names, ["cardinality_pcsa", "cardinality_hll"]);
        assert!(select(Some("no-such-thing")).is_empty());
        assert_eq!(select(None).len(), 13);
    }
}
