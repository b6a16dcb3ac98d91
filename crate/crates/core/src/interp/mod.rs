//! The reference simulator: per-switch execution, window resets, chains of
//! switches, traces and sinks.

pub mod exec;
pub mod run;
pub mod sink;
pub mod switch;
pub mod trace;

pub use exec::{AstEngine, Ctx, Engine, Flow, Output};
pub use run::{
    load_chain, make_engine, run_trace, simulate, ChainEntry, EngineKind, RunOptions, RunOutput, RunReport,
    SwitchReport, SwitchSpec, Topology,
};
pub use sink::{SinkRecord, Sinks};
pub use switch::{Mode, SwitchConfig, SwitchInstance, Transition};
pub use trace::{parse_trace, read_trace, write_trace, TraceRecord};
