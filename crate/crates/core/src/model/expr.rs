//! Expressions over packet fields and measurement state.
//!
//! Values are unsigned 64-bit integers and arithmetic wraps modulo 2^64.
//! Comparisons and logical operators yield 0 or 1. `/` is truncating integer
//! division and fails on a zero divisor. Shifts by 64 or more yield 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::packet::Packet;
use super::schema::FieldRef;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
    #[serde(rename = "&")]
    BitAnd,
    #[serde(rename = "|")]
    BitOr,
    #[serde(rename = "<<")]
    Shl,
    #[serde(rename = ">>")]
    Shr,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "&&")]
    And,
    #[serde(rename = "||")]
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 16] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::BitAnd,
        BinOp::BitOr,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter. All levels are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Mul | BinOp::Div => 10,
            BinOp::Add | BinOp::Sub => 9,
            BinOp::Shl | BinOp::Shr => 8,
            BinOp::BitAnd => 7,
            BinOp::BitOr => 6,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::And => 4,
            BinOp::Or => 3,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    /// The comparison that holds exactly when `self` does not.
    pub fn negated(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            BinOp::Lt => BinOp::Ge,
            BinOp::Ge => BinOp::Lt,
            BinOp::Gt => BinOp::Le,
            BinOp::Le => BinOp::Gt,
            _ => return None,
        })
    }

    pub fn apply(self, a: u64, b: u64) -> Result<u64> {
        Ok(match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Div => a.checked_div(b).ok_or(Error::DivisionByZero)?,
            BinOp::BitAnd => a & b,
            BinOp::BitOr => a | b,
            BinOp::Shl => a.checked_shl(b.min(64) as u32).unwrap_or(0),
            BinOp::Shr => a.checked_shr(b.min(64) as u32).unwrap_or(0),
            BinOp::Eq => (a == b) as u64,
            BinOp::Ne => (a != b) as u64,
            BinOp::Lt => (a < b) as u64,
            BinOp::Le => (a <= b) as u64,
            BinOp::Gt => (a > b) as u64,
            BinOp::Ge => (a >= b) as u64,
            BinOp::And => (a != 0 && b != 0) as u64,
            BinOp::Or => (a != 0 || b != 0) as u64,
        })
    }
}

/// How a state variable is read inside an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateOp {
    /// Bare name: counter/timestamp value, the bound cell inside a sketch's own
    /// `set`, a membership filter's bit pattern, a cardinality estimate, or the
    /// minimum over the selected cells of any other hashed structure.
    Value,
    Min,
    Max,
    Sum,
    Avg,
    Test,
    Any,
    All,
    Read,
}

impl StateOp {
    pub fn method(self) -> Option<&'static str> {
        Some(match self {
            StateOp::Value => return None,
            StateOp::Min => "min",
            StateOp::Max => "max",
            StateOp::Sum => "sum",
            StateOp::Avg => "avg",
            StateOp::Test => "test",
            StateOp::Any => "any",
            StateOp::All => "all",
            StateOp::Read => "read",
        })
    }

    pub fn from_method(name: &str) -> Option<StateOp> {
        Some(match name {
            "min" => StateOp::Min,
            "max" => StateOp::Max,
            "sum" => StateOp::Sum,
            "avg" => StateOp::Avg,
            "test" => StateOp::Test,
            "any" => StateOp::Any,
            "all" => StateOp::All,
            "read" => StateOp::Read,
            _ => return None,
        })
    }

    pub fn takes_arg(self) -> bool {
        matches!(self, StateOp::Any | StateOp::All)
    }
}

/// A state variable, by name and by program-wide declaration index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateRef {
    pub var: String,
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Lit(u64),
    Field(FieldRef),
    State {
        state: StateRef,
        op: StateOp,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<Box<Expr>>,
    },
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Not(Box<Expr>),
    /// Uniform draw from `[lo, hi)`.
    Random {
        lo: u64,
        hi: u64,
    },
    Max(Box<Expr>, Box<Expr>),
}

/// What an expression needs from its surroundings at evaluation time.
pub trait EvalEnv {
    /// Reads state variable `state` for packet `p`. `arg` is the evaluated
    /// argument of `any`/`all`.
    fn read_state(&mut self, state: &StateRef, op: StateOp, arg: Option<u64>, p: &Packet) -> Result<u64>;
    fn random(&mut self, lo: u64, hi: u64) -> u64;
}

impl Expr {
    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn eval(&self, p: &Packet, env: &mut dyn EvalEnv) -> Result<u64> {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Field(f) => Ok(p.get(f)),
            Expr::State { state, op, arg } => {
                let arg = match arg {
                    Some(a) => Some(a.eval(p, env)?),
                    None => None,
                };
                env.read_state(state, *op, arg, p)
            }
            Expr::Bin { op, lhs, rhs } => {
                let a = lhs.eval(p, env)?;
                let b = rhs.eval(p, env)?;
                op.apply(a, b)
            }
            Expr::Not(e) => Ok((e.eval(p, env)? == 0) as u64),
            Expr::Random { lo, hi } => Ok(env.random(*lo, *hi)),
            Expr::Max(a, b) => {
                let a = a.eval(p, env)?;
                let b = b.eval(p, env)?;
                Ok(a.max(b))
            }
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Lit(_) | Expr::Field(_) | Expr::Random { .. } => vec![],
            Expr::State { arg, .. } => arg.iter().map(|a| a.as_ref()).collect(),
            Expr::Bin { lhs, rhs, .. } | Expr::Max(lhs, rhs) => vec![lhs, rhs],
            Expr::Not(e) => vec![e],
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn has_random(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::Random { .. }));
        found
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Lit(_))
    }

    /// State variables read anywhere in the expression.
    pub fn state_reads(&self) -> Vec<&StateRef> {
        let mut out = Vec::new();
        self.collect_state(&mut out);
        out
    }

    fn collect_state<'a>(&'a self, out: &mut Vec<&'a StateRef>) {
        if let Expr::State { state, .. } = self {
            out.push(state);
        }
        for c in self.children() {
            c.collect_state(out);
        }
    }

    pub fn fields(&self) -> Vec<&FieldRef> {
        let mut out = Vec::new();
        self.collect_fields(&mut out);
        out
    }

    fn collect_fields<'a>(&'a self, out: &mut Vec<&'a FieldRef>) {
        if let Expr::Field(f) = self {
            out.push(f);
        }
        for c in self.children() {
            c.collect_fields(out);
        }
    }

    /// Folds constant sub-expressions. Division by a constant zero and
    /// `random` are left in place so runtime behavior is unchanged.
    pub fn fold(&self) -> Expr {
        match self {
            Expr::Bin { op, lhs, rhs } => {
                let (l, r) = (lhs.fold(), rhs.fold());
                if let (Expr::Lit(a), Expr::Lit(b)) = (&l, &r) {
                    if let Ok(v) = op.apply(*a, *b) {
                        return Expr::Lit(v);
                    }
                }
                Expr::bin(*op, l, r)
            }
            Expr::Not(e) => match e.fold() {
                Expr::Lit(v) => Expr::Lit((v == 0) as u64),
                other => Expr::Not(Box::new(other)),
            },
            Expr::Max(a, b) => match (a.fold(), b.fold()) {
                (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(x.max(y)),
                (x, y) => Expr::Max(Box::new(x), Box::new(y)),
            },
            Expr::State { state, op, arg } => Expr::State {
                state: state.clone(),
                op: *op,
                arg: arg.as_ref().map(|a| Box::new(a.fold())),
            },
            other => other.clone(),
        }
    }

    /// Number of operator nodes (binary, unary, `max`, `random`).
    pub fn op_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Bin { .. } | Expr::Not(_) | Expr::Max(..) | Expr::Random { .. }) {
                n += 1
            }
        });
        n
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin { op, .. } => op.precedence(),
            _ => u8::MAX,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Field(r) => write!(f, "{r}"),
            Expr::State { state, op, arg } => {
                write!(f, "{}", state.var)?;
                if let Some(m) = op.method() {
                    write!(f, ".{m}(")?;
                    if let Some(a) = arg {
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            Expr::Bin { op, lhs, rhs } => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // Left-associative: an equal-precedence right operand needs parens.
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            Expr::Not(e) => {
                if e.precedence() == u8::MAX {
                    write!(f, "!{e}")
                } else {
                    write!(f, "!({e})")
                }
            }
            Expr::Random { lo, hi } => write!(f, "random({lo}:{hi})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::schema::MetaField;

    struct NoState;
    impl EvalEnv for NoState {
        fn read_state(&mut self, s: &StateRef, _: StateOp, _: Option<u64>, _: &Packet) -> Result<u64> {
            Err(Error::UnknownState(s.var.clone()))
        }
        fn random(&mut self, lo: u64, _: u64) -> u64 {
            lo
        }
    }

    fn tos() -> Expr {
        Expr::Field(FieldRef::Header("ipv4.tos".into()))
    }

    #[test]
    fn field_projection() {
        let mut p = Packet::new("pkts", 0);
        p.meta.size = 1500;
        let e = Expr::Field(FieldRef::Meta(MetaField::Size));
        assert_eq!(e.eval(&p, &mut NoState).unwrap(), 1500);
    }

    #[test]
    fn tos_low_bit_match() {
        let p = Packet::new("pkts", 0).with_header("ipv4.tos", 3);
        let e = Expr::bin(BinOp::Eq, Expr::bin(BinOp::BitAnd, tos(), Expr::Lit(1)), Expr::Lit(1));
        assert_eq!(e.eval(&p, &mut NoState).unwrap(), 1);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let e = Expr::bin(BinOp::Div, Expr::Lit(4), Expr::Lit(0));
        let p = Packet::default();
        assert!(matches!(e.eval(&p, &mut NoState), Err(Error::DivisionByZero)));
        // folding keeps the failing division
        assert_eq!(e.fold(), e);
    }

    #[test]
    fn wrapping_and_shifts() {
        assert_eq!(BinOp::Sub.apply(0, 1).unwrap(), u64::MAX);
        assert_eq!(BinOp::Add.apply(u64::MAX, 2).unwrap(), 1);
        assert_eq!(BinOp::Shl.apply(1, 64).unwrap(), 0);
        assert_eq!(BinOp::Shr.apply(u64::MAX, 200).unwrap(), 0);
        assert_eq!(BinOp::Shl.apply(1, 63).unwrap(), 1 << 63);
    }

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = Expr::bin(
            BinOp::Sub,
            Expr::Lit(1),
            Expr::bin(BinOp::Sub, Expr::Lit(2), Expr::Lit(3)),
        );
        assert_eq!(e.to_string(), "1 - (2 - 3)");
        let e = Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Add, Expr::Lit(1), Expr::Lit(2)),
            Expr::Lit(3),
        );
        assert_eq!(e.to_string(), "(1 + 2) * 3");
    }

    #[test]
    fn fold_constants() {
        let e = Expr::bin(BinOp::Eq, Expr::Lit(1), Expr::Lit(1));
        assert_eq!(e.fold(), Expr::Lit(1));
        let r = Expr::bin(BinOp::Lt, Expr::Random { lo: 0, hi: 100 }, Expr::Lit(10));
        assert_eq!(r.fold(), r);
    }
}
