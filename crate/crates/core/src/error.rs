use std::fmt;

/// Position in a `.mafia` source file, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{span}: syntax error: {message}")]
    Syntax { span: Span, message: String },
    #[error("{span}: undeclared state variable `{name}`")]
    UndeclaredState { span: Span, name: String },
    #[error("{span}: `{name}` is declared more than once")]
    DuplicateDecl { span: Span, name: String },
    #[error("{span}: stream `{name}` is consumed but never produced")]
    UnknownStream { span: Span, name: String },
    #[error("{span}: wrong arguments for `{primitive}`: {message}")]
    Arity {
        span: Span,
        primitive: String,
        message: String,
    },
    #[error("{span}: unknown header field `{name}`")]
    UnknownField { span: Span, name: String },
    #[error("{span}: constant `{name}` is not bound (use --define {name}=VALUE)")]
    UnboundConstant { span: Span, name: String },
    #[error("{span}: invalid declaration of `{name}`: {message}")]
    InvalidDecl { span: Span, name: String, message: String },
    #[error("{span}: `{var}` does not support `{method}`")]
    InvalidMethod { span: Span, var: String, method: String },
    #[error("{span}: field `{name}` is switch metadata and cannot be tagged")]
    ReadOnlyField { span: Span, name: String },
    #[error("membership filter `{name}` has {size} bits; at most 64 fit in a field")]
    FilterTooWide { name: String, size: u32 },

    #[error("unknown field `{0}`")]
    UnknownFieldRef(String),
    #[error("unknown state variable `{0}`")]
    UnknownState(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression cannot be decomposed into pipeline atoms: {0}")]
    UnsupportedExpr(String),

    #[error("trace line {line}: {message}")]
    TraceFormat { line: usize, message: String },
    #[error("topology: {0}")]
    Topology(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("IR: {0}")]
    Ir(String),
    #[error("program uses random() but no seed was given")]
    MissingSeed,
    #[error("packet {packet_index} at switch {switch_id}: {source}")]
    Runtime {
        packet_index: usize,
        switch_id: u16,
        #[source]
        source: Box<Error>,
    },
    #[error("logical stream `{0}` exceeded the per-packet copy limit")]
    CopyLimit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Source position for frontend errors.
    pub fn span(&self) -> Option<Span> {
        match self {
            Error::Syntax { span, .. }
            | Error::UndeclaredState { span, .. }
            | Error::DuplicateDecl { span, .. }
            | Error::UnknownStream { span, .. }
            | Error::Arity { span, .. }
            | Error::UnknownField { span, .. }
            | Error::UnboundConstant { span, .. }
            | Error::InvalidDecl { span, .. }
            | Error::InvalidMethod { span, .. }
            | Error::ReadOnlyField { span, .. } => Some(*span),
            _ => None,
        }
    }

    /// Message without the position prefix, for `file:line:col: error: msg` output.
    pub fn message(&self) -> String {
        let full = self.to_string();
        match self.span() {
            Some(span) => full.strip_prefix(&format!("{span}: ")).unwrap_or(&full).to_string(),
            None => full,
        }
    }

    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Self {
        Error::Syntax {
            span,
            message: message.into(),
        }
    }
}
