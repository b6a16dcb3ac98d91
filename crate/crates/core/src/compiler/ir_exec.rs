//! Executes a pipeline IR with the same packet semantics as the AST engine.

use super::ir::*;
use super::lower::lower;
use super::optimize::optimize;
use crate::error::Result;
use crate::frontend::SwitchProgram;
use crate::interp::exec::{self, Ctx, Engine, Flow};
use crate::model::Packet;
use crate::primitives::cells::CellAccess;

pub struct IrEngine {
    pub ir: PipelineIR,
}

impl IrEngine {
    /// Lowers and optimizes `program`.
    pub fn compile(program: &SwitchProgram) -> Result<Self> {
        Ok(IrEngine {
            ir: optimize(&lower(program)?),
        })
    }

    pub fn new(ir: PipelineIR) -> Self {
        IrEngine { ir }
    }

    fn control(&self, c: &Control, acc: &mut dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<Flow> {
        match c {
            Control::Halt => Ok(Flow::Halt),
            Control::Apply(id) => match self.ir.table(*id) {
                Some(t) => self.table(t, acc, pkt, ctx),
                None => Err(crate::Error::Ir(format!("unknown table {id}"))),
            },
            Control::Seq(items) => {
                for c in items {
                    if self.control(c, acc, pkt, ctx)? == Flow::Halt {
                        return Ok(Flow::Halt);
                    }
                }
                Ok(Flow::Continue)
            }
            Control::Par(items) => exec::par(items, acc, pkt, ctx, |c, acc, pkt, ctx| self.control(c, acc, pkt, ctx)),
        }
    }

    fn table(&self, t: &Table, acc: &mut dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<Flow> {
        if let Some(g) = &t.guard {
            if exec::guard(g, acc, pkt, ctx)? == Flow::Halt {
                return Ok(Flow::Halt);
            }
        }
        for a in &t.actions {
            match a {
                Action::Tag { field, width, value } => exec::tag(field, *width, value, acc, pkt, ctx)?,
                Action::Set { state, value, add } => exec::set(state, value, *add, acc, pkt, ctx)?,
                Action::Insert { state } => exec::insert(state, acc, pkt, ctx)?,
                Action::Init { state, value } => exec::init(state, value, acc, pkt, ctx)?,
                Action::Reset { state } => exec::reset(state, acc, pkt, ctx)?,
                Action::Timestamp { state } => exec::timestamp(state, acc, pkt, ctx)?,
                Action::Duplicate { stream } => exec::duplicate(stream, pkt, ctx),
                Action::Collect { endpoint } => {
                    exec::collect(endpoint, pkt, ctx);
                    return Ok(Flow::Halt);
                }
            }
        }
        Ok(Flow::Continue)
    }
}

impl Engine for IrEngine {
    fn has_task(&self, stream: &str) -> bool {
        self.ir.control(stream).is_some()
    }

    fn run_task(&self, stream: &str, acc: &mut dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<()> {
        if let Some(c) = self.ir.control(stream) {
            self.control(c, acc, pkt, ctx)?;
        }
        Ok(())
    }
}
