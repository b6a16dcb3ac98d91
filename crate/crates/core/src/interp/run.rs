use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::exec::{AstEngine, Engine};
use super::sink::{self, SinkRecord, Sinks};
use super::switch::{Mode, SwitchConfig, SwitchInstance, Transition};
use super::trace::TraceRecord;
use crate::error::{Error, Result};
use crate::frontend::{parse_with, ParseOptions, Program, SwitchProgram};
use crate::model::Schema;
use crate::primitives::store::VarDump;

/// One switch of a linear chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    pub switch_id: u16,
    pub program: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, deserialize_with = "de_defines", skip_serializing_if = "BTreeMap::is_empty")]
    pub defines: BTreeMap<String, String>,
}

fn de_defines<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, String>, D::Error> {
    let raw: BTreeMap<String, serde_json::Value> = BTreeMap::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => Ok((k, s)),
            serde_json::Value::Number(n) => Ok((k, n.to_string())),
            other => Err(serde::de::Error::custom(format!(
                "define {k}: unsupported value {other}"
            ))),
        })
        .collect()
}

/// Switches in forwarding order plus the file each endpoint writes to.
///
/// File form: `{"switches":[{"switch_id":1,"program":"p.mafia","role":"first-hop",
/// "defines":{"PORT":1}}], "sinks":{"CONTROLLER":"out/controller.jsonl"}}`.
/// Relative paths are resolved against the topology file's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub switches: Vec<SwitchSpec>,
    #[serde(default)]
    pub sinks: BTreeMap<String, PathBuf>,
}

impl Topology {
    pub fn load(path: &Path) -> Result<Topology> {
        let text = std::fs::read_to_string(path)?;
        let mut t: Topology =
            serde_json::from_str(&text).map_err(|e| Error::Topology(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for s in &mut t.switches {
            if s.program.is_relative() {
                s.program = dir.join(&s.program);
            }
        }
        for p in t.sinks.values_mut() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        t.check()?;
        Ok(t)
    }

    /// A single switch (id 1) running `program`.
    pub fn single(program: &Path, role: Option<String>, defines: BTreeMap<String, String>) -> Topology {
        Topology {
            switches: vec![SwitchSpec {
                switch_id: 1,
                program: program.to_path_buf(),
                role,
                defines,
            }],
            sinks: BTreeMap::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.switches {
            if !seen.insert(s.switch_id) {
                return Err(Error::Topology(format!("switch id {} appears twice", s.switch_id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    #[default]
    Ast,
    Ir,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Required when any program calls `random`; 0 otherwise.
    pub seed: Option<u64>,
    pub engine: EngineKind,
    pub switch: SwitchConfig,
    pub schema: Schema,
    /// Defines shared by every switch; a switch's own defines take precedence.
    pub defines: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub switch_id: u16,
    pub role: Option<String>,
    pub mode: Mode,
    pub resets_completed: usize,
    pub state: Vec<VarDump>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub engine: EngineKind,
    pub seed: u64,
    pub packets: usize,
    pub emitted: BTreeMap<String, usize>,
    pub sink_digests: BTreeMap<String, String>,
    pub digest: String,
    pub transitions: Vec<Transition>,
    pub switches: Vec<SwitchReport>,
}

pub struct RunOutput {
    pub report: RunReport,
    pub sinks: Sinks,
}

pub fn make_engine(kind: EngineKind, program: &SwitchProgram) -> Result<Arc<dyn Engine>> {
    Ok(match kind {
        EngineKind::Ast => Arc::new(AstEngine {
            program: program.clone(),
        }),
        EngineKind::Ir => Arc::new(crate::compiler::IrEngine::compile(program)?),
    })
}

/// One switch of a chain before instantiation: its parsed program slice.
#[derive(Debug, Clone)]
pub struct ChainEntry {
    pub switch_id: u16,
    pub program: SwitchProgram,
}

/// Replays `trace` through the chain. Every record visits the switches in
/// order; header tags persist from hop to hop, metadata does not.
pub fn simulate(
    chain: &[ChainEntry],
    trace: &[TraceRecord],
    seed: u64,
    engine: EngineKind,
    config: SwitchConfig,
) -> Result<RunOutput> {
    let mut switches = chain
        .iter()
        .map(|c| SwitchInstance::new(c.switch_id, &c.program, make_engine(engine, &c.program)?, seed, config))
        .collect::<Result<Vec<_>>>()?;
    let mut sinks: Sinks = BTreeMap::new();
    for (index, rec) in trace.iter().enumerate() {
        let mut headers = rec.headers.clone();
        for sw in &mut switches {
            let mut p = rec.packet_at(sw.switch_id);
            p.headers = headers;
            for r in sw.step(&mut p, index)? {
                sinks.entry(r.endpoint.clone()).or_default().push(r);
            }
            headers = p.headers;
        }
    }
    let mut transitions: Vec<Transition> = switches.iter().flat_map(|s| s.transitions().iter().cloned()).collect();
    transitions.sort_by_key(|t| (t.packet_index, t.switch_id));
    let report = RunReport {
        engine,
        seed,
        packets: trace.len(),
        emitted: sinks.iter().map(|(k, v)| (k.clone(), v.len())).collect(),
        sink_digests: sink::digests(&sinks),
        digest: sink::combined_digest(&sinks),
        transitions,
        switches: switches
            .iter()
            .map(|s| SwitchReport {
                switch_id: s.switch_id,
                role: s.role.clone(),
                mode: s.mode(),
                resets_completed: s.resets_completed(),
                state: s.store().dump(),
            })
            .collect(),
    };
    Ok(RunOutput { report, sinks })
}

/// Parses every program of a topology into its per-switch slice.
pub fn load_chain(topo: &Topology, opts: &RunOptions) -> Result<(Vec<ChainEntry>, bool)> {
    let mut chain = Vec::new();
    let mut uses_random = false;
    let mut cache: BTreeMap<(PathBuf, BTreeMap<String, String>), Program> = BTreeMap::new();
    for s in &topo.switches {
        let mut defines = opts.defines.clone();
        defines.extend(s.defines.clone());
        let key = (s.program.clone(), defines.clone());
        let program = match cache.get(&key) {
            Some(p) => p.clone(),
            None => {
                let src = std::fs::read_to_string(&s.program)
                    .map_err(|e| Error::Topology(format!("{}: {e}", s.program.display())))?;
                let popts = ParseOptions {
                    defines,
                    schema: opts.schema.clone(),
                };
                let p = parse_with(&src, &popts).map_err(|e| match e.span() {
                    Some(span) => Error::Topology(format!("{}:{span}: {}", s.program.display(), e.message())),
                    None => e,
                })?;
                cache.insert(key, p.clone());
                p
            }
        };
        uses_random |= program.uses_random();
        chain.push(ChainEntry {
            switch_id: s.switch_id,
            program: program.for_role(s.role.as_deref())?,
        });
    }
    Ok((chain, uses_random))
}

/// Loads, runs and writes the sink files of a topology.
///
/// Endpoints without a path in `topo.sinks` are written to
/// `sink_dir/<endpoint>.jsonl` when `sink_dir` is given.
pub fn run_trace(
    topo: &Topology,
    trace: &[TraceRecord],
    opts: &RunOptions,
    sink_dir: Option<&Path>,
) -> Result<RunOutput> {
    let (chain, uses_random) = load_chain(topo, opts)?;
    let seed = match (opts.seed, uses_random) {
        (Some(s), _) => s,
        (None, true) => return Err(Error::MissingSeed),
        (None, false) => 0,
    };
    let out = simulate(&chain, trace, seed, opts.engine, opts.switch)?;
    for (endpoint, records) in &out.sinks {
        let path = match (topo.sinks.get(endpoint), sink_dir) {
            (Some(p), _) => p.clone(),
            (None, Some(d)) => d.join(format!("{endpoint}.jsonl")),
            (None, None) => continue,
        };
        sink::write_jsonl(&path, records)?;
    }
    for (endpoint, path) in &topo.sinks {
        if !out.sinks.contains_key(endpoint) {
            sink::write_jsonl(path, &[])?;
        }
    }
    Ok(out)
}

/// All sink records of a run, flattened in endpoint order.
pub fn all_records(sinks: &Sinks) -> Vec<&SinkRecord> {
    sinks.values().flatten().collect()
}
