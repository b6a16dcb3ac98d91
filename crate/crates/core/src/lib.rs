//! Parser, data-plane simulator and match-action compiler for MAFIA network
//! measurement programs.

pub mod compiler;
pub mod corpus;
pub mod error;
pub mod frontend;
pub mod interp;
pub mod model;
pub mod primitives;
pub mod tracegen;

pub use error::{Error, Result, Span};
