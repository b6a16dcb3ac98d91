use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exec::{AstEngine, Ctx, Engine, Output};
use super::sink::SinkRecord;
use crate::error::{Error, Result};
use crate::frontend::SwitchProgram;
use crate::model::hash::hash_values;
use crate::model::Packet;
use crate::primitives::store::{StateLayout, StateStore, DEFAULT_RESET_CHUNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Measuring,
    Resetting,
}

/// A mode change, logged when it happens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub switch_id: u16,
    pub packet_index: usize,
    pub ts: u64,
    pub to: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchConfig {
    /// Cells cleared per packet while resetting.
    pub reset_chunk: u32,
    /// Logical copies allowed per trace packet.
    pub copy_limit: usize,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            reset_chunk: DEFAULT_RESET_CHUNK,
            copy_limit: 1024,
        }
    }
}

/// One simulated switch: its program, state, window mode and RNG.
///
/// The first packet starts the first window, which ends at its `ts` plus the
/// window length. The first packet with `ts >= deadline` switches to
/// Resetting. While resetting, every arriving packet clears one chunk of one
/// variable (variables are visited round-robin) and is not measured; when all
/// variables are clear the switch measures again and the deadline moves
/// forward by one window.
pub struct SwitchInstance {
    pub switch_id: u16,
    pub role: Option<String>,
    engine: Arc<dyn Engine>,
    layout: Arc<StateLayout>,
    store: StateStore,
    rng: ChaCha8Rng,
    config: SwitchConfig,
    window_ns: Option<u64>,
    mode: Mode,
    deadline: Option<u64>,
    pending: Vec<usize>,
    next: usize,
    resets_completed: usize,
    transitions: Vec<Transition>,
}

impl SwitchInstance {
    pub fn new(
        switch_id: u16,
        program: &SwitchProgram,
        engine: Arc<dyn Engine>,
        seed: u64,
        config: SwitchConfig,
    ) -> Result<Self> {
        let layout = Arc::new(StateLayout::for_switch(program, seed)?);
        Ok(SwitchInstance {
            switch_id,
            role: program.role.clone(),
            engine,
            store: StateStore::new(layout.clone()),
            layout,
            rng: ChaCha8Rng::seed_from_u64(hash_values(&[seed, switch_id as u64], 0)),
            config,
            window_ns: program.window_ns,
            mode: Mode::Measuring,
            deadline: None,
            pending: Vec::new(),
            next: 0,
            resets_completed: 0,
            transitions: Vec::new(),
        })
    }

    /// A switch running the reference tree-walking engine.
    pub fn ast(switch_id: u16, program: &SwitchProgram, seed: u64, config: SwitchConfig) -> Result<Self> {
        let engine = Arc::new(AstEngine {
            program: program.clone(),
        });
        Self::new(switch_id, program, engine, seed, config)
    }

    pub fn store(&self) -> &StateStore {
        &self.store
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn deadline(&self) -> Option<u64> {
        self.deadline
    }

    pub fn resets_completed(&self) -> usize {
        self.resets_completed
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    fn log(&mut self, packet_index: usize, ts: u64) {
        self.transitions.push(Transition {
            switch_id: self.switch_id,
            packet_index,
            ts,
            to: self.mode,
        });
    }

    /// Starts a reset if the current window has ended at `now`.
    pub fn advance_window(&mut self, now: u64, packet_index: usize) {
        let Some(w) = self.window_ns else { return };
        if self.mode != Mode::Measuring {
            return;
        }
        match self.deadline {
            None => self.deadline = Some(now.saturating_add(w)),
            Some(d) if now >= d => {
                self.mode = Mode::Resetting;
                self.pending = self.layout.iter().map(|v| v.id).collect();
                self.next = 0;
                self.log(packet_index, now);
            }
            Some(_) => {}
        }
    }

    fn reset_step(&mut self, now: u64, packet_index: usize) -> Result<()> {
        if !self.pending.is_empty() {
            let id = self.pending[self.next];
            if self.store.reset_chunk(id, self.config.reset_chunk)? {
                self.pending.remove(self.next);
                if self.next >= self.pending.len() {
                    self.next = 0;
                }
            } else {
                self.next = (self.next + 1) % self.pending.len();
            }
        }
        if self.pending.is_empty() {
            self.mode = Mode::Measuring;
            self.resets_completed += 1;
            if let (Some(d), Some(w)) = (self.deadline, self.window_ns) {
                self.deadline = Some(d.saturating_add(w));
            }
            self.log(packet_index, now);
        }
        Ok(())
    }

    /// Processes one packet arriving on the main path. Tags written by the
    /// task stay on `pkt`; logical copies are processed depth-first before
    /// returning.
    pub fn step(&mut self, pkt: &mut Packet, packet_index: usize) -> Result<Vec<SinkRecord>> {
        self.step_inner(pkt, packet_index).map_err(|e| Error::Runtime {
            packet_index,
            switch_id: self.switch_id,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self, pkt: &mut Packet, packet_index: usize) -> Result<Vec<SinkRecord>> {
        pkt.meta.switch_id = self.switch_id;
        self.advance_window(pkt.ts, packet_index);
        if self.mode == Mode::Resetting {
            self.reset_step(pkt.ts, packet_index)?;
            return Ok(Vec::new());
        }
        let mut sinks = Vec::new();
        if !self.engine.has_task(&pkt.stream) {
            return Ok(sinks);
        }
        let mut ctx = Ctx {
            layout: &self.layout,
            rng: &mut self.rng,
            out: Vec::new(),
        };
        self.engine
            .run_task(&pkt.stream.clone(), &mut self.store, pkt, &mut ctx)?;
        let mut stack: Vec<Output> = std::mem::take(&mut ctx.out);
        stack.reverse();
        let mut copies = 0;
        while let Some(o) = stack.pop() {
            match o {
                Output::Sink { endpoint, packet } => {
                    sinks.push(SinkRecord::new(endpoint, packet_index, self.switch_id, packet))
                }
                Output::Copy { stream, mut packet } => {
                    copies += 1;
                    if copies > self.config.copy_limit {
                        return Err(Error::CopyLimit(stream));
                    }
                    self.engine.run_task(&stream, &mut self.store, &mut packet, &mut ctx)?;
                    let mut produced = std::mem::take(&mut ctx.out);
                    produced.reverse();
                    stack.extend(produced);
                }
            }
        }
        Ok(sinks)
    }
}
