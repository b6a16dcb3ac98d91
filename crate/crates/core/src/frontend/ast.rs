use std::collections::BTreeMap;

use crate::error::Span;
use crate::model::{Expr, FieldRef, FlowKey, StateKind, StateRef};

/// A source position that never takes part in equality, so that a program
/// and its pretty-printed re-parse compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Loc(pub Span);

impl PartialEq for Loc {
    fn eq(&self, _: &Loc) -> bool {
        true
    }
}

impl Eq for Loc {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyDecl {
    pub name: String,
    pub fields: Vec<FieldRef>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDecl {
    pub name: String,
    /// Program-wide declaration index.
    pub id: usize,
    pub kind: StateKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Set,
    Add,
    Reset,
    Insert,
    Update,
    Init,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Set => "set",
            Method::Add => "add",
            Method::Reset => "reset",
            Method::Insert => "insert",
            Method::Update => "update",
            Method::Init => "init",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Some(match s {
            "set" => Method::Set,
            "add" => Method::Add,
            "reset" => Method::Reset,
            "insert" => Method::Insert,
            "update" => Method::Update,
            "init" => Method::Init,
            _ => return None,
        })
    }
}

/// A primitive invocation inside a composition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prim {
    Match(Expr),
    Tag {
        field: String,
        width: u32,
        value: Expr,
    },
    Duplicate(String),
    Collect(String),
    Timestamp(StateRef),
    Call {
        state: StateRef,
        method: Method,
        arg: Option<Expr>,
    },
}

impl Prim {
    pub fn name(&self) -> &'static str {
        match self {
            Prim::Match(_) => "match",
            Prim::Tag { .. } => "tag",
            Prim::Duplicate(_) => "duplicate",
            Prim::Collect(_) => "collect",
            Prim::Timestamp(_) => "timestamp",
            Prim::Call { method, .. } => method.name(),
        }
    }

    /// Expressions evaluated by the primitive.
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Prim::Match(e) => vec![e],
            Prim::Tag { value, .. } => vec![value],
            Prim::Call { arg: Some(a), .. } => vec![a],
            _ => vec![],
        }
    }

    /// State variables the primitive writes.
    pub fn writes(&self) -> Option<&StateRef> {
        match self {
            Prim::Timestamp(s) | Prim::Call { state: s, .. } => Some(s),
            _ => None,
        }
    }

    /// State variables the primitive reads.
    pub fn reads(&self) -> Vec<&StateRef> {
        let mut out: Vec<&StateRef> = self.exprs().into_iter().flat_map(|e| e.state_reads()).collect();
        if let Prim::Call {
            state,
            method: Method::Add | Method::Insert | Method::Update,
            ..
        } = self
        {
            out.push(state);
        }
        out
    }
}

/// A composition of primitives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    /// Left to right; a failed match stops the rest.
    Seq(Vec<Node>),
    /// Every branch sees the same packet and state.
    Par(Vec<Node>),
    Prim(Prim, Loc),
}

impl Node {
    pub fn visit_prims<'a>(&'a self, f: &mut dyn FnMut(&'a Prim, Span)) {
        match self {
            Node::Seq(c) | Node::Par(c) => c.iter().for_each(|n| n.visit_prims(f)),
            Node::Prim(p, loc) => f(p, loc.0),
        }
    }

    pub fn prims(&self) -> Vec<&Prim> {
        let mut out = Vec::new();
        self.visit_prims(&mut |p, _| out.push(p));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub stream: String,
    pub body: Node,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowDecl {
    pub ns: u64,
    pub loc: Loc,
}

/// Declarations and tasks at one level of a program: either the top level or
/// one `@role(...)` block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Segment {
    pub keys: Vec<KeyDecl>,
    pub state: Vec<StateDecl>,
    pub window: Option<WindowDecl>,
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSegment {
    pub role: String,
    pub segment: Segment,
    pub loc: Loc,
}

/// A parsed and validated measurement program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub global: Segment,
    pub roles: Vec<RoleSegment>,
}

pub const BUILTIN_STREAMS: [&str; 2] = ["pkts", "ctrl"];

impl Program {
    pub fn segments(&self) -> impl Iterator<Item = (Option<&str>, &Segment)> {
        std::iter::once((None, &self.global)).chain(self.roles.iter().map(|r| (Some(r.role.as_str()), &r.segment)))
    }

    pub fn role_names(&self) -> Vec<&str> {
        self.roles.iter().map(|r| r.role.as_str()).collect()
    }

    /// Every declared state variable, indexed by `StateDecl::id`.
    pub fn all_state(&self) -> Vec<&StateDecl> {
        let mut v: Vec<&StateDecl> = self.segments().flat_map(|(_, s)| s.state.iter()).collect();
        v.sort_by_key(|d| d.id);
        v
    }

    pub fn uses_random(&self) -> bool {
        let mut found = false;
        for (_, seg) in self.segments() {
            for t in &seg.tasks {
                for p in t.body.prims() {
                    found |= p.exprs().iter().any(|e| e.has_random());
                }
            }
        }
        found
    }

    /// The slice of the program one switch runs.
    ///
    /// `role = None` selects only the top-level segment; a role name selects the
    /// top level plus that role's block. Several tasks on the same stream are
    /// combined into one parallel composition, top level first.
    pub fn for_role(&self, role: Option<&str>) -> crate::Result<SwitchProgram> {
        let role_seg = match role {
            None => None,
            Some(r) => Some(
                self.roles
                    .iter()
                    .find(|s| s.role == r)
                    .ok_or_else(|| crate::Error::Topology(format!("program has no role `{r}`")))?,
            ),
        };
        let segs: Vec<&Segment> = std::iter::once(&self.global)
            .chain(role_seg.map(|r| &r.segment))
            .collect();

        let mut keys = BTreeMap::new();
        let mut state = Vec::new();
        let mut window_ns = None;
        let mut by_stream: Vec<(String, Vec<Node>)> = Vec::new();
        for seg in &segs {
            for k in &seg.keys {
                keys.insert(
                    k.name.clone(),
                    FlowKey {
                        name: k.name.clone(),
                        fields: k.fields.clone(),
                    },
                );
            }
            state.extend(seg.state.iter().cloned());
            if let Some(w) = seg.window {
                window_ns = Some(w.ns);
            }
            for t in &seg.tasks {
                match by_stream.iter_mut().find(|(s, _)| *s == t.stream) {
                    Some((_, v)) => v.push(t.body.clone()),
                    None => by_stream.push((t.stream.clone(), vec![t.body.clone()])),
                }
            }
        }
        let tasks = by_stream
            .into_iter()
            .map(|(s, mut bodies)| {
                let body = if bodies.len() == 1 {
                    bodies.pop().unwrap()
                } else {
                    Node::Par(bodies)
                };
                (s, body)
            })
            .collect();
        Ok(SwitchProgram {
            role: role.map(str::to_string),
            keys,
            state,
            window_ns,
            tasks,
            slot_count: self.all_state().len(),
        })
    }
}

/// The part of a program deployed on one switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchProgram {
    pub role: Option<String>,
    pub keys: BTreeMap<String, FlowKey>,
    pub state: Vec<StateDecl>,
    pub window_ns: Option<u64>,
    pub tasks: Vec<(String, Node)>,
    /// Number of state declarations in the whole program; state ids index
    /// into a table of this size.
    pub slot_count: usize,
}

impl SwitchProgram {
    pub fn task(&self, stream: &str) -> Option<&Node> {
        self.tasks.iter().find(|(s, _)| s == stream).map(|(_, n)| n)
    }
}
