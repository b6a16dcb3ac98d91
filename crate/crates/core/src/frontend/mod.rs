//! Lexing, parsing, printing and static checks for `.mafia` source text.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod validate;

pub use ast::{
    KeyDecl, Method, Node, Prim, Program, RoleSegment, Segment, StateDecl, SwitchProgram, Task, WindowDecl,
    BUILTIN_STREAMS,
};
pub use parser::{parse, parse_with, ParseOptions};
pub use printer::print_program;
pub use validate::{validate_composition, ConflictKind, Diagnostic, Severity};
