//! Packet-level semantics shared by the AST and IR engines.
//!
//! A sequence runs left to right and stops at the first failed `match` or
//! `collect`. Every branch of a parallel composition starts from the state
//! and packet as they were before the composition; its own writes are
//! visible to itself only. Once all branches have run, their state writes
//! and header tags are committed in declaration order, so a later branch
//! wins when two write the same cell or field. A parallel composition halts
//! the enclosing sequence only if every branch halted.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frontend::{Method, Node, Prim, SwitchProgram};
use crate::model::{EvalEnv, Expr, Packet, StateOp, StateRef};
use crate::primitives::cells::{CellAccess, Overlay};
use crate::primitives::store::{self, StateLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Halt,
}

/// Packets produced while processing one packet, in program order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Copy { stream: String, packet: Packet },
    Sink { endpoint: String, packet: Packet },
}

pub struct Ctx<'a> {
    pub layout: &'a StateLayout,
    pub rng: &'a mut ChaCha8Rng,
    pub out: Vec<Output>,
}

/// Something that can run the task attached to a stream.
pub trait Engine: Send + Sync {
    fn has_task(&self, stream: &str) -> bool;
    fn run_task(&self, stream: &str, acc: &mut dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<()>;
}

struct Env<'a, 'b> {
    acc: &'a dyn CellAccess,
    layout: &'a StateLayout,
    rng: &'b mut ChaCha8Rng,
    /// Inside `v.set(e)`, the bare name `v` reads the cell being written.
    bind: Option<(usize, u64)>,
}

impl EvalEnv for Env<'_, '_> {
    fn read_state(&mut self, s: &StateRef, op: StateOp, arg: Option<u64>, p: &Packet) -> Result<u64> {
        if let Some((id, v)) = self.bind {
            if id == s.id && op == StateOp::Value {
                return Ok(v);
            }
        }
        let info = self.layout.get(s.id)?;
        store::read(self.acc, info, self.layout.seed, op, arg, p)
    }

    fn random(&mut self, lo: u64, hi: u64) -> u64 {
        if lo >= hi {
            lo
        } else {
            self.rng.gen_range(lo..hi)
        }
    }
}

pub fn eval(e: &Expr, acc: &dyn CellAccess, pkt: &Packet, ctx: &mut Ctx) -> Result<u64> {
    eval_bound(e, acc, pkt, ctx, None)
}

fn eval_bound(e: &Expr, acc: &dyn CellAccess, pkt: &Packet, ctx: &mut Ctx, bind: Option<(usize, u64)>) -> Result<u64> {
    let mut env = Env {
        acc,
        layout: ctx.layout,
        rng: &mut *ctx.rng,
        bind,
    };
    e.eval(pkt, &mut env)
}

pub fn guard(e: &Expr, acc: &dyn CellAccess, pkt: &Packet, ctx: &mut Ctx) -> Result<Flow> {
    Ok(if eval(e, acc, pkt, ctx)? != 0 {
        Flow::Continue
    } else {
        Flow::Halt
    })
}

pub fn tag(field: &str, width: u32, value: &Expr, acc: &dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<()> {
    let v = eval(value, acc, pkt, ctx)?;
    pkt.set_header(field, width, v);
    Ok(())
}

/// `set(e)` or, with `add`, `set(v + e)`: evaluated once per selected cell
/// against the state before the update.
pub fn set(
    state: &StateRef,
    arg: &Expr,
    add: bool,
    acc: &mut dyn CellAccess,
    pkt: &Packet,
    ctx: &mut Ctx,
) -> Result<()> {
    let layout = ctx.layout;
    let info = layout.get(state.id)?;
    let sel = info.select(pkt, layout.seed);
    let current = store::current_values(acc, info, &sel);
    let mut values = Vec::with_capacity(current.len());
    for cur in current {
        let v = eval_bound(arg, acc, pkt, ctx, Some((state.id, cur)))?;
        values.push(if add { cur.wrapping_add(v) } else { v });
    }
    store::write_selected(acc, info, &sel, &values);
    Ok(())
}

pub fn insert(state: &StateRef, acc: &mut dyn CellAccess, pkt: &Packet, ctx: &mut Ctx) -> Result<()> {
    let info = ctx.layout.get(state.id)?;
    store::insert(acc, info, ctx.layout.seed, pkt);
    Ok(())
}

pub fn init(state: &StateRef, arg: &Expr, acc: &mut dyn CellAccess, pkt: &Packet, ctx: &mut Ctx) -> Result<()> {
    let v = eval(arg, acc, pkt, ctx)?;
    let info = ctx.layout.get(state.id)?;
    store::init(acc, info, ctx.layout.seed, pkt, v)
}

pub fn reset(state: &StateRef, acc: &mut dyn CellAccess, pkt: &Packet, ctx: &mut Ctx) -> Result<()> {
    let info = ctx.layout.get(state.id)?;
    store::reset(acc, info, ctx.layout.seed, pkt);
    Ok(())
}

pub fn timestamp(state: &StateRef, acc: &mut dyn CellAccess, pkt: &Packet, ctx: &mut Ctx) -> Result<()> {
    let info = ctx.layout.get(state.id)?;
    let base = info.base(pkt, ctx.layout.seed);
    acc.set_cell(info.id, base, pkt.ts);
    Ok(())
}

pub fn duplicate(stream: &str, pkt: &Packet, ctx: &mut Ctx) {
    let mut copy = pkt.clone();
    copy.stream = stream.to_string();
    ctx.out.push(Output::Copy {
        stream: stream.to_string(),
        packet: copy,
    });
}

pub fn collect(endpoint: &str, pkt: &Packet, ctx: &mut Ctx) {
    ctx.out.push(Output::Sink {
        endpoint: endpoint.to_string(),
        packet: pkt.clone(),
    });
}

/// Runs parallel branches with snapshot isolation and commits their effects
/// in order.
pub fn par<T>(
    branches: &[T],
    acc: &mut dyn CellAccess,
    pkt: &mut Packet,
    ctx: &mut Ctx,
    mut run: impl FnMut(&T, &mut dyn CellAccess, &mut Packet, &mut Ctx) -> Result<Flow>,
) -> Result<Flow> {
    let before = pkt.clone();
    let mut results = Vec::with_capacity(branches.len());
    for b in branches {
        let mut overlay = Overlay::new(&*acc);
        let mut bp = before.clone();
        let flow = run(b, &mut overlay, &mut bp, ctx)?;
        results.push((overlay.into_writes(), bp, flow));
    }
    let mut all_halt = !branches.is_empty();
    for (writes, bp, flow) in results {
        for ((var, i), v) in writes {
            acc.set_cell(var, i, v);
        }
        for (k, v) in bp.headers {
            if before.headers.get(&k) != Some(&v) {
                pkt.headers.insert(k, v);
            }
        }
        all_halt &= flow == Flow::Halt;
    }
    Ok(if all_halt { Flow::Halt } else { Flow::Continue })
}

pub fn exec_prim(p: &Prim, acc: &mut dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<Flow> {
    match p {
        Prim::Match(e) => return guard(e, acc, pkt, ctx),
        Prim::Tag { field, width, value } => tag(field, *width, value, acc, pkt, ctx)?,
        Prim::Duplicate(s) => duplicate(s, pkt, ctx),
        Prim::Collect(ep) => {
            collect(ep, pkt, ctx);
            return Ok(Flow::Halt);
        }
        Prim::Timestamp(s) => timestamp(s, acc, pkt, ctx)?,
        Prim::Call { state, method, arg } => match (method, arg) {
            (Method::Set, Some(a)) => set(state, a, false, acc, pkt, ctx)?,
            (Method::Add, Some(a)) => set(state, a, true, acc, pkt, ctx)?,
            (Method::Init, Some(a)) => init(state, a, acc, pkt, ctx)?,
            (Method::Insert | Method::Update, None) => insert(state, acc, pkt, ctx)?,
            (Method::Reset, None) => reset(state, acc, pkt, ctx)?,
            _ => return Err(Error::Ir(format!("malformed call `{}.{}`", state.var, method.name()))),
        },
    }
    Ok(Flow::Continue)
}

pub fn exec_node(n: &Node, acc: &mut dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<Flow> {
    match n {
        Node::Prim(p, _) => exec_prim(p, acc, pkt, ctx),
        Node::Seq(items) => {
            for c in items {
                if exec_node(c, acc, pkt, ctx)? == Flow::Halt {
                    return Ok(Flow::Halt);
                }
            }
            Ok(Flow::Continue)
        }
        Node::Par(branches) => par(branches, acc, pkt, ctx, exec_node),
    }
}

/// Reference engine: walks the composition tree directly.
pub struct AstEngine {
    pub program: SwitchProgram,
}

impl Engine for AstEngine {
    fn has_task(&self, stream: &str) -> bool {
        self.program.task(stream).is_some()
    }

    fn run_task(&self, stream: &str, acc: &mut dyn CellAccess, pkt: &mut Packet, ctx: &mut Ctx) -> Result<()> {
        if let Some(body) = self.program.task(stream) {
            exec_node(body, acc, pkt, ctx)?;
        }
        Ok(())
    }
}
