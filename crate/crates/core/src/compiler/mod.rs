//! Lowering to match-action tables, optimization, stage scheduling and
//! code emission.

pub mod atoms;
pub mod emit;
pub mod ir;
pub mod ir_exec;
pub mod lower;
pub mod optimize;
pub mod schedule;
pub mod target;

pub use emit::{emit_json, emit_p4, parse_json, P4_WATERMARK};
pub use ir::{Action, Atom, AtomKind, Control, PipelineIR, Register, StreamControl, Table, IR_VERSION};
pub use ir_exec::IrEngine;
pub use lower::{lower, lower_program};
pub use optimize::optimize;
pub use schedule::{schedule, Placement, ResourceReport, VarMemory};
pub use target::{TargetModel, TARGET_ENV};

use crate::error::Result;
use crate::frontend::SwitchProgram;

/// Everything the compiler produces for one switch program.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub unoptimized: PipelineIR,
    pub ir: PipelineIR,
    pub report: ResourceReport,
}

impl Compiled {
    pub fn warnings(&self) -> &[String] {
        &self.report.warnings
    }
}

pub fn compile(program: &SwitchProgram, target: &TargetModel) -> Result<Compiled> {
    let unoptimized = lower(program)?;
    let ir = optimize(&unoptimized);
    let report = schedule(&ir, target);
    Ok(Compiled {
        unoptimized,
        ir,
        report,
    })
}
