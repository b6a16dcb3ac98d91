//! Packets, fields, flow keys, expressions and state declarations shared by
//! the simulator and the compiler.

pub mod decl;
pub mod expr;
pub mod hash;
pub mod packet;
pub mod schema;

pub use decl::{BloomAlg, Geometry, SketchAlg, StateKind};
pub use expr::{BinOp, EvalEnv, Expr, StateOp, StateRef};
pub use hash::{key_index, FlowKey};
pub use packet::{Meta, MetaPatch, Packet};
pub use schema::{FieldRef, MetaField, Schema};
