//! The match-action pipeline IR.
//!
//! JSON schema (version 1), as produced by [`emit_json`](super::emit::emit_json):
//!
//! ```text
//! { "version": 1,
//!   "role": null | "<role>",
//!   "window_ns": null | <ns>,
//!   "slot_count": <program-wide state count>,
//!   "keys": [ {"name": "flowid", "fields": ["ipv4.src", ...]} ],
//!   "registers": [ {"id", "name", "decl", "cells", "width", "memory_bits"} ],
//!   "tables": [ {"id", "name", "guard": null | Expr, "actions": [Action], "atoms": [Atom]} ],
//!   "controls": [ {"stream": "pkts", "control": Control} ] }
//! ```
//!
//! `Control` is `{"apply": <table id>}`, `{"seq": [...]}`, `{"par": [...]}` or
//! `"halt"`. A table whose guard evaluates to 0 halts its sequence; otherwise
//! its actions run in order, and a `collect` action halts after emitting.
//! Parallel branches have the isolation semantics described in
//! [`crate::interp::exec`].

use serde::{Deserialize, Serialize};

use crate::model::{Expr, FlowKey, StateKind, StateRef};

pub const IR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineIR {
    pub version: u32,
    pub role: Option<String>,
    pub window_ns: Option<u64>,
    pub slot_count: usize,
    pub keys: Vec<FlowKey>,
    pub registers: Vec<Register>,
    pub tables: Vec<Table>,
    pub controls: Vec<StreamControl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub id: usize,
    pub name: String,
    pub decl: StateKind,
    pub cells: usize,
    pub width: u32,
    pub memory_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: usize,
    pub name: String,
    pub guard: Option<Expr>,
    pub actions: Vec<Action>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Tag {
        field: String,
        width: u32,
        value: Expr,
    },
    /// `state.set(value)`, or `state.set(state + value)` when `add` is set.
    Set {
        state: StateRef,
        value: Expr,
        add: bool,
    },
    /// Membership insert or PCSA/HyperLogLog update.
    Insert {
        state: StateRef,
    },
    Init {
        state: StateRef,
        value: Expr,
    },
    Reset {
        state: StateRef,
    },
    Timestamp {
        state: StateRef,
    },
    Duplicate {
        stream: String,
    },
    Collect {
        endpoint: String,
    },
}

impl Action {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Action::Tag { value, .. } | Action::Set { value, .. } | Action::Init { value, .. } => vec![value],
            _ => vec![],
        }
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Action::Tag { value, .. } | Action::Set { value, .. } | Action::Init { value, .. } => vec![value],
            _ => vec![],
        }
    }

    pub fn state(&self) -> Option<&StateRef> {
        match self {
            Action::Set { state, .. }
            | Action::Insert { state }
            | Action::Init { state, .. }
            | Action::Reset { state }
            | Action::Timestamp { state } => Some(state),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Action::Tag { .. } => "tag",
            Action::Set { add: false, .. } => "set",
            Action::Set { add: true, .. } => "add",
            Action::Insert { .. } => "insert",
            Action::Init { .. } => "init",
            Action::Reset { .. } => "reset",
            Action::Timestamp { .. } => "timestamp",
            Action::Duplicate { .. } => "duplicate",
            Action::Collect { .. } => "collect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Apply(usize),
    Seq(Vec<Control>),
    Par(Vec<Control>),
    Halt,
}

impl Control {
    pub fn tables(&self, out: &mut Vec<usize>) {
        match self {
            Control::Apply(t) => out.push(*t),
            Control::Seq(c) | Control::Par(c) => c.iter().for_each(|x| x.tables(out)),
            Control::Halt => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamControl {
    pub stream: String,
    pub control: Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    Stateless,
    Stateful,
}

/// One pipeline operation. `reads` and `writes` name resources:
/// `field:<name>`, `state:<var>#<row>`, `tmp:<table>.<n>`, `copy:<stream>`,
/// `emit:<endpoint>`; `field:*` stands for every packet field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub kind: AtomKind,
    pub op: String,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
}

impl PipelineIR {
    pub fn table(&self, id: usize) -> Option<&Table> {
        self.tables.iter().find(|t| t.id == id)
    }

    pub fn control(&self, stream: &str) -> Option<&Control> {
        self.controls.iter().find(|c| c.stream == stream).map(|c| &c.control)
    }

    pub fn atom_count(&self) -> usize {
        self.tables.iter().map(|t| t.atoms.len()).sum()
    }

    /// Checks internal references: table ids exist and are unique, and every
    /// state reference names a register.
    pub fn check(&self) -> crate::Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for t in &self.tables {
            if !ids.insert(t.id) {
                return Err(crate::Error::Ir(format!("duplicate table id {}", t.id)));
            }
            for a in &t.actions {
                if let Some(s) = a.state() {
                    if !self.registers.iter().any(|r| r.id == s.id && r.name == s.var) {
                        return Err(crate::Error::Ir(format!(
                            "table {} uses unknown register `{}`",
                            t.id, s.var
                        )));
                    }
                }
            }
        }
        for c in &self.controls {
            let mut used = Vec::new();
            c.control.tables(&mut used);
            if let Some(t) = used.iter().find(|t| !ids.contains(t)) {
                return Err(crate::Error::Ir(format!(
                    "stream `{}` applies unknown table {t}",
                    c.stream
                )));
            }
        }
        Ok(())
    }
}
