//! Recursive-descent parser for `.mafia` programs.
//!
//! Grammar (comments start with `//`; `;` after a statement is optional):
//!
//! ```text
//! program   := stmt*
//! stmt      := "@" "role" "(" STRING ")" "{" stmt* "}"
//!            | IDENT "=" ("Key" | "key") "(" field ("," field)* ")"
//!            | IDENT "=" type
//!            | "window" "(" duration ")"
//!            | IDENT ("." "window" "(" duration ")")? ">>" seq
//! type      := "Counter" "(" kwargs ")" | "Timestamp" "(" ")"
//!            | "BloomFilter" "(" kwargs ")" | "Sketch" "(" kwargs ")"
//!            | "HashMap" "(" "key" "=" IDENT "," "size" "=" INT "," "type" "=" type ")"
//! duration  := factor ("*" factor)*        factor := NUMBER ["s"] | CONSTANT
//! seq       := elem (">>" elem)*
//! elem      := prim | "(" seq ("+" seq)* ")"
//! prim      := "match" "(" expr ")" | "tag" "(" field "," expr ")"
//!            | "duplicate" "(" IDENT ")" | "collect" "(" IDENT ")"
//!            | "timestamp" "(" IDENT ")" | IDENT "." METHOD "(" [expr] ")"
//! ```
//!
//! Parallel groups always need their parentheses; inside a group `>>` binds
//! tighter than `+`. Expressions use the operator precedence of
//! [`BinOp::precedence`](crate::model::BinOp::precedence). Identifiers that
//! start with an upper-case letter are compile-time constants and must be
//! bound through [`ParseOptions::defines`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use crate::error::{Error, Result, Span};
use crate::model::decl::DEFAULT_CELL_WIDTH;
use crate::model::{BinOp, BloomAlg, Expr, FieldRef, Schema, SketchAlg, StateKind, StateOp, StateRef};

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Values for named constants, as written after `--define NAME=`.
    pub defines: BTreeMap<String, String>,
    pub schema: Schema,
}

impl ParseOptions {
    pub fn with_defines<I, K, V>(defines: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        ParseOptions {
            defines: defines.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            schema: Schema::default(),
        }
    }
}

/// Parses with the default schema and no constants.
pub fn parse(source: &str) -> Result<Program> {
    parse_with(source, &ParseOptions::default())
}

pub fn parse_with(source: &str, opts: &ParseOptions) -> Result<Program> {
    let tokens = lex(source)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        opts,
    };
    let mut program = Program::default();
    while !p.at(&Tok::Eof) {
        if p.at(&Tok::At) {
            let start = p.span();
            p.bump();
            p.expect_ident("role")?;
            p.expect(Tok::LParen)?;
            let role = match p.bump() {
                Token { tok: Tok::Str(s), .. } => s,
                t => {
                    return Err(Error::syntax(
                        t.span,
                        format!("expected role name, found {}", t.tok.describe()),
                    ))
                }
            };
            p.expect(Tok::RParen)?;
            p.expect(Tok::LBrace)?;
            if program.roles.iter().any(|r| r.role == role) {
                return Err(Error::DuplicateDecl {
                    span: start,
                    name: format!("@role(\"{role}\")"),
                });
            }
            let mut seg = Segment::default();
            while !p.at(&Tok::RBrace) {
                if p.at(&Tok::Eof) {
                    return Err(Error::syntax(p.span(), "unclosed role block"));
                }
                if p.at(&Tok::At) {
                    return Err(Error::syntax(p.span(), "role blocks cannot nest"));
                }
                p.statement(&mut seg)?;
            }
            p.bump();
            program.roles.push(RoleSegment {
                role,
                segment: seg,
                loc: Loc(start),
            });
        } else {
            p.statement(&mut program.global)?;
        }
    }
    resolve(&mut program, &opts.schema)?;
    Ok(program)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    opts: &'a ParseOptions,
}

const UNRESOLVED: usize = usize::MAX;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<Span> {
        if self.at(&t) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{}`", tok_text(&t))))
        }
    }

    fn unexpected(&self, wanted: &str) -> Error {
        Error::syntax(
            self.span(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn ident(&mut self) -> Result<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn expect_ident(&mut self, name: &str) -> Result<Span> {
        match self.peek() {
            Tok::Ident(s) if s == name => Ok(self.bump().span),
            _ => Err(self.unexpected(&format!("`{name}`"))),
        }
    }

    /// `a.b.c` as a dotted name.
    fn path(&mut self) -> Result<(String, Span)> {
        let (mut name, span) = self.ident()?;
        while self.at(&Tok::Dot) && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let (part, _) = self.ident()?;
            name.push('.');
            name.push_str(&part);
        }
        Ok((name, span))
    }

    fn statement(&mut self, seg: &mut Segment) -> Result<()> {
        let span = self.span();
        let name = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.unexpected("a declaration or task")),
        };
        if name == "window" && self.peek_at(1) == &Tok::LParen {
            self.bump();
            self.expect(Tok::LParen)?;
            let ns = self.duration()?;
            self.expect(Tok::RParen)?;
            set_window(seg, ns, span)?;
        } else if self.peek_at(1) == &Tok::Assign {
            self.bump();
            self.bump();
            self.declaration(seg, name, span)?;
        } else {
            self.bump();
            if self.at(&Tok::Dot) {
                self.bump();
                self.expect_ident("window")?;
                self.expect(Tok::LParen)?;
                let ns = self.duration()?;
                self.expect(Tok::RParen)?;
                set_window(seg, ns, span)?;
            }
            if !self.at(&Tok::Shr) {
                return Err(self.unexpected("`=` or `>>`"));
            }
            self.bump();
            let body = self.seq()?;
            seg.tasks.push(Task {
                stream: name,
                body,
                loc: Loc(span),
            });
        }
        self.eat(&Tok::Semi);
        Ok(())
    }

    fn duration(&mut self) -> Result<u64> {
        let mut total = self.duration_factor()? as u128;
        while self.eat(&Tok::Star) {
            let f = self.duration_factor()? as u128;
            total = total * f / 1_000_000_000;
        }
        u64::try_from(total).map_err(|_| Error::syntax(self.span(), "duration overflows"))
    }

    fn duration_factor(&mut self) -> Result<u64> {
        let t = self.bump();
        match t.tok {
            Tok::Number { text, .. } => {
                parse_seconds(&text).ok_or_else(|| Error::syntax(t.span, format!("invalid duration `{text}`")))
            }
            Tok::Ident(name) => {
                let v = self.opts.defines.get(&name).ok_or(Error::UnboundConstant {
                    span: t.span,
                    name: name.clone(),
                })?;
                parse_seconds(v.trim_end_matches('s'))
                    .ok_or_else(|| Error::syntax(t.span, format!("constant {name}={v} is not a duration")))
            }
            other => Err(Error::syntax(
                t.span,
                format!("expected duration, found {}", other.describe()),
            )),
        }
    }

    fn declaration(&mut self, seg: &mut Segment, name: String, span: Span) -> Result<()> {
        let (ty, _) = self.ident()?;
        if ty == "Key" || ty == "key" {
            self.expect(Tok::LParen)?;
            let mut fields = Vec::new();
            loop {
                let (f, fspan) = self.path()?;
                fields.push(self.field(&f, fspan)?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
            seg.keys.push(KeyDecl {
                name,
                fields,
                loc: Loc(span),
            });
            return Ok(());
        }
        let kind = self.type_body(&name, &ty, span)?;
        kind.check().map_err(|message| Error::InvalidDecl {
            span,
            name: name.clone(),
            message,
        })?;
        seg.state.push(StateDecl {
            name,
            id: UNRESOLVED,
            kind,
            loc: Loc(span),
        });
        Ok(())
    }

    fn type_body(&mut self, var: &str, ty: &str, span: Span) -> Result<StateKind> {
        self.expect(Tok::LParen)?;
        let kw = self.kwargs(var)?;
        self.expect(Tok::RParen)?;
        let bad = |message: String| Error::InvalidDecl {
            span,
            name: var.to_string(),
            message,
        };
        let allowed: &[&str] = match ty {
            "Counter" => &["width"],
            "Timestamp" => &[],
            "BloomFilter" => &["alg", "key", "nhash", "size", "width"],
            "Sketch" => &["alg", "key", "nhash", "size", "width"],
            "HashMap" => &["key", "size", "type"],
            other => return Err(bad(format!("unknown state type `{other}`"))),
        };
        if let Some(k) = kw.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(bad(format!("`{ty}` has no parameter `{k}`")));
        }
        let int = |k: &str| -> Result<Option<u64>> {
            match kw.get(k) {
                None => Ok(None),
                Some(KwVal::Int(v)) => Ok(Some(*v)),
                Some(_) => Err(bad(format!("`{k}` must be an integer"))),
            }
        };
        let req_int = |k: &str| -> Result<u32> {
            let v = int(k)?.ok_or_else(|| bad(format!("missing `{k}`")))?;
            u32::try_from(v).map_err(|_| bad(format!("`{k}` is too large")))
        };
        let opt_width = |default: u32| -> Result<u32> {
            Ok(match int("width")? {
                Some(v) => u32::try_from(v).map_err(|_| bad("`width` is too large".into()))?,
                None => default,
            })
        };
        let key = |k: &str| -> Result<String> {
            match kw.get(k) {
                Some(KwVal::Name(n)) => Ok(n.clone()),
                Some(_) => Err(bad(format!("`{k}` must name a Key"))),
                None => Err(bad(format!("missing `{k}`"))),
            }
        };
        let alg = || -> Result<String> {
            match kw.get("alg") {
                Some(KwVal::Str(s)) => Ok(s.clone()),
                Some(_) => Err(bad("`alg` must be a string".into())),
                None => Err(bad("missing `alg`".into())),
            }
        };
        Ok(match ty {
            "Counter" => StateKind::Counter {
                width: req_int("width")?,
            },
            "Timestamp" => StateKind::Timestamp,
            "BloomFilter" => {
                let a = alg()?;
                StateKind::BloomFilter {
                    alg: BloomAlg::parse(&a).ok_or_else(|| bad(format!("unknown alg \"{a}\"")))?,
                    key: key("key")?,
                    nhash: req_int("nhash")?,
                    size: req_int("size")?,
                    width: opt_width(DEFAULT_CELL_WIDTH)?,
                }
            }
            "Sketch" => {
                let a = alg()?;
                StateKind::Sketch {
                    alg: SketchAlg::parse(&a).ok_or_else(|| bad(format!("unknown alg \"{a}\"")))?,
                    key: key("key")?,
                    nhash: req_int("nhash")?,
                    size: req_int("size")?,
                    width: opt_width(DEFAULT_CELL_WIDTH)?,
                }
            }
            "HashMap" => {
                let inner = match kw.get("type") {
                    Some(KwVal::Type(k)) => k.clone(),
                    _ => return Err(bad("missing `type`".into())),
                };
                StateKind::HashMap {
                    key: key("key")?,
                    size: req_int("size")?,
                    inner: Box::new(inner),
                }
            }
            _ => unreachable!(),
        })
    }

    fn kwargs(&mut self, var: &str) -> Result<BTreeMap<String, KwVal>> {
        let mut out: BTreeMap<String, KwVal> = BTreeMap::new();
        if self.at(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            let (mut k, kspan) = self.ident()?;
            if k == "w" {
                k = "width".into();
            }
            self.expect(Tok::Assign)?;
            let v = self.kwarg_value(var)?;
            if let Some(prev) = out.get(&k) {
                if *prev != v {
                    return Err(Error::InvalidDecl {
                        span: kspan,
                        name: var.to_string(),
                        message: format!("conflicting values for `{k}`"),
                    });
                }
            }
            out.insert(k, v);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn kwarg_value(&mut self, var: &str) -> Result<KwVal> {
        let t = self.bump();
        match t.tok {
            Tok::Str(s) => Ok(KwVal::Str(s)),
            Tok::Number { text, seconds: false } => parse_int(&text)
                .map(KwVal::Int)
                .ok_or_else(|| Error::syntax(t.span, format!("expected integer, found `{text}`"))),
            Tok::Ident(name) if self.at(&Tok::LParen) => Ok(KwVal::Type(self.type_body(var, &name, t.span)?)),
            Tok::Ident(name) if is_constant(&name) => Ok(KwVal::Int(self.constant(&name, t.span)?)),
            Tok::Ident(name) => Ok(KwVal::Name(name)),
            other => Err(Error::syntax(
                t.span,
                format!("expected parameter value, found {}", other.describe()),
            )),
        }
    }

    fn constant(&self, name: &str, span: Span) -> Result<u64> {
        let v = self.opts.defines.get(name).ok_or(Error::UnboundConstant {
            span,
            name: name.to_string(),
        })?;
        parse_int(v.trim()).ok_or_else(|| Error::syntax(span, format!("constant {name}={v} is not an integer")))
    }

    fn field(&self, name: &str, span: Span) -> Result<FieldRef> {
        self.opts.schema.resolve(name).ok_or(Error::UnknownField {
            span,
            name: name.to_string(),
        })
    }

    // ---- composition ----

    fn seq(&mut self) -> Result<Node> {
        let mut items = vec![self.elem()?];
        while self.eat(&Tok::Shr) {
            items.push(self.elem()?);
        }
        Ok(flatten_seq(items))
    }

    fn elem(&mut self) -> Result<Node> {
        if self.eat(&Tok::LParen) {
            let mut branches = vec![self.seq()?];
            while self.eat(&Tok::Plus) {
                branches.push(self.seq()?);
            }
            self.expect(Tok::RParen)?;
            return Ok(if branches.len() == 1 {
                branches.pop().unwrap()
            } else {
                Node::Par(branches)
            });
        }
        let span = self.span();
        let (name, _) = self.ident()?;
        let prim = match name.as_str() {
            "match" => {
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.close_call("match")?;
                Prim::Match(e)
            }
            "tag" => {
                self.expect(Tok::LParen)?;
                let (f, fspan) = self.path()?;
                let field = self.field(&f, fspan)?;
                let name = match field {
                    FieldRef::Header(h) => h,
                    FieldRef::Meta(m) => {
                        return Err(Error::ReadOnlyField {
                            span: fspan,
                            name: m.name().to_string(),
                        })
                    }
                };
                if !self.eat(&Tok::Comma) {
                    return Err(Error::Arity {
                        span,
                        primitive: "tag".into(),
                        message: "expected `tag(field, expr)`".into(),
                    });
                }
                let value = self.expr()?;
                self.close_call("tag")?;
                let width = self.opts.schema.width(&FieldRef::Header(name.clone()));
                Prim::Tag {
                    field: name,
                    width,
                    value,
                }
            }
            "duplicate" | "collect" | "timestamp" => {
                self.expect(Tok::LParen)?;
                if self.at(&Tok::RParen) {
                    return Err(Error::Arity {
                        span,
                        primitive: name,
                        message: "expected one name".into(),
                    });
                }
                let (arg, _) = self.ident()?;
                self.close_call(&name)?;
                match name.as_str() {
                    "duplicate" => Prim::Duplicate(arg),
                    "collect" => Prim::Collect(arg),
                    _ => Prim::Timestamp(StateRef {
                        var: arg,
                        id: UNRESOLVED,
                    }),
                }
            }
            _ => {
                if !self.at(&Tok::Dot) {
                    return Err(Error::syntax(span, format!("expected a primitive, found `{name}`")));
                }
                self.bump();
                let (mname, mspan) = self.ident()?;
                let method = Method::parse(&mname).ok_or(Error::InvalidMethod {
                    span: mspan,
                    var: name.clone(),
                    method: mname.clone(),
                })?;
                self.expect(Tok::LParen)?;
                let arg = if self.at(&Tok::RParen) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.close_call(&mname)?;
                Prim::Call {
                    state: StateRef {
                        var: name,
                        id: UNRESOLVED,
                    },
                    method,
                    arg,
                }
            }
        };
        Ok(Node::Prim(prim, Loc(span)))
    }

    fn close_call(&mut self, primitive: &str) -> Result<()> {
        if self.at(&Tok::Comma) {
            return Err(Error::Arity {
                span: self.span(),
                primitive: primitive.to_string(),
                message: "too many arguments".into(),
            });
        }
        self.expect(Tok::RParen)?;
        Ok(())
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = binop(self.peek()) {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Bang) {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number { text, seconds } => {
                self.bump();
                if seconds {
                    return Err(Error::syntax(span, "durations are only allowed in window()"));
                }
                parse_int(&text)
                    .map(Expr::Lit)
                    .ok_or_else(|| Error::syntax(span, format!("expected integer, found `{text}`")))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let (path, span) = self.path()?;
                let parts: Vec<&str> = path.split('.').collect();
                if self.at(&Tok::LParen) {
                    return match parts.as_slice() {
                        ["random"] => self.random(),
                        ["max"] => {
                            self.bump();
                            let a = self.expr()?;
                            if !self.eat(&Tok::Comma) {
                                return Err(Error::Arity {
                                    span,
                                    primitive: "max".into(),
                                    message: "expected two arguments".into(),
                                });
                            }
                            let b = self.expr()?;
                            self.close_call("max")?;
                            Ok(Expr::Max(Box::new(a), Box::new(b)))
                        }
                        [var, method] => {
                            let op = StateOp::from_method(method).ok_or(Error::InvalidMethod {
                                span,
                                var: var.to_string(),
                                method: method.to_string(),
                            })?;
                            self.bump();
                            let arg = if self.at(&Tok::RParen) {
                                None
                            } else {
                                Some(Box::new(self.expr()?))
                            };
                            self.close_call(method)?;
                            Ok(Expr::State {
                                state: StateRef {
                                    var: var.to_string(),
                                    id: UNRESOLVED,
                                },
                                op,
                                arg,
                            })
                        }
                        _ => Err(Error::syntax(span, format!("`{path}` is not callable"))),
                    };
                }
                if parts.len() == 1 {
                    if is_constant(&path) {
                        Ok(Expr::Lit(self.constant(&path, span)?))
                    } else {
                        Ok(Expr::State {
                            state: StateRef {
                                var: path,
                                id: UNRESOLVED,
                            },
                            op: StateOp::Value,
                            arg: None,
                        })
                    }
                } else {
                    Ok(Expr::Field(self.field(&path, span)?))
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    /// `random(lo:hi)` or `random([lo:hi])`.
    fn random(&mut self) -> Result<Expr> {
        self.expect(Tok::LParen)?;
        let bracket = self.eat(&Tok::LBracket);
        let lo = self.bound()?;
        self.expect(Tok::Colon)?;
        let hi = self.bound()?;
        if bracket {
            self.expect(Tok::RBracket)?;
        }
        self.close_call("random")?;
        Ok(Expr::Random { lo, hi })
    }

    fn bound(&mut self) -> Result<u64> {
        let t = self.bump();
        match t.tok {
            Tok::Number { text, seconds: false } => {
                parse_int(&text).ok_or_else(|| Error::syntax(t.span, "expected integer bound"))
            }
            Tok::Ident(name) if is_constant(&name) => self.constant(&name, t.span),
            other => Err(Error::syntax(
                t.span,
                format!("expected integer bound, found {}", other.describe()),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KwVal {
    Str(String),
    Int(u64),
    Name(String),
    Type(StateKind),
}

fn tok_text(t: &Tok) -> String {
    let d = t.describe();
    d.trim_matches('`').to_string()
}

fn binop(t: &Tok) -> Option<BinOp> {
    Some(match t {
        Tok::Plus => BinOp::Add,
        Tok::Minus => BinOp::Sub,
        Tok::Star => BinOp::Mul,
        Tok::Slash => BinOp::Div,
        Tok::Amp => BinOp::BitAnd,
        Tok::Pipe => BinOp::BitOr,
        Tok::Shl => BinOp::Shl,
        Tok::Shr => BinOp::Shr,
        Tok::EqEq => BinOp::Eq,
        Tok::Ne => BinOp::Ne,
        Tok::Lt => BinOp::Lt,
        Tok::Le => BinOp::Le,
        Tok::Gt => BinOp::Gt,
        Tok::Ge => BinOp::Ge,
        Tok::AndAnd => BinOp::And,
        Tok::OrOr => BinOp::Or,
        _ => return None,
    })
}

fn flatten_seq(items: Vec<Node>) -> Node {
    let mut flat = Vec::new();
    for n in items {
        match n {
            Node::Seq(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    if flat.len() == 1 {
        flat.pop().unwrap()
    } else {
        Node::Seq(flat)
    }
}

fn is_constant(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_uppercase())
}

fn parse_int(text: &str) -> Option<u64> {
    match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => text.parse().ok(),
    }
}

/// Decimal seconds to nanoseconds, exact up to 9 fractional digits.
pub fn parse_seconds(text: &str) -> Option<u64> {
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int.is_empty() || frac.len() > 9 || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: u64 = int.parse().ok()?;
    let mut frac_ns: u64 = 0;
    if !frac.is_empty() {
        frac_ns = format!("{frac:0<9}").parse().ok()?;
    }
    whole.checked_mul(1_000_000_000)?.checked_add(frac_ns)
}

/// Nanoseconds as decimal seconds, e.g. `5`, `0.25`.
pub fn format_seconds(ns: u64) -> String {
    let whole = ns / 1_000_000_000;
    let frac = ns % 1_000_000_000;
    if frac == 0 {
        whole.to_string()
    } else {
        let f = format!("{frac:09}");
        format!("{whole}.{}", f.trim_end_matches('0'))
    }
}

fn set_window(seg: &mut Segment, ns: u64, span: Span) -> Result<()> {
    if seg.window.is_some() {
        return Err(Error::DuplicateDecl {
            span,
            name: "window".into(),
        });
    }
    seg.window = Some(WindowDecl { ns, loc: Loc(span) });
    Ok(())
}

// ---- name resolution and semantic checks ----

struct Scope<'a> {
    keys: HashMap<&'a str, ()>,
    state: HashMap<String, (usize, StateKind, String)>,
}

fn resolve(program: &mut Program, schema: &Schema) -> Result<()> {
    let _ = schema;
    // Names are unique across the whole program.
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut next_id = 0usize;
    let mut assign = |seg: &mut Segment| -> Result<()> {
        for k in &seg.keys {
            if !seen.insert(k.name.clone()) {
                return Err(Error::DuplicateDecl {
                    span: k.loc.0,
                    name: k.name.clone(),
                });
            }
        }
        for d in &mut seg.state {
            if !seen.insert(d.name.clone()) {
                return Err(Error::DuplicateDecl {
                    span: d.loc.0,
                    name: d.name.clone(),
                });
            }
            d.id = next_id;
            next_id += 1;
        }
        Ok(())
    };
    assign(&mut program.global)?;
    for r in &mut program.roles {
        assign(&mut r.segment)?;
    }

    // Streams produced anywhere in the program.
    let mut produced: BTreeSet<String> = BUILTIN_STREAMS.iter().map(|s| s.to_string()).collect();
    for (_, seg) in program.segments() {
        for t in &seg.tasks {
            t.body.visit_prims(&mut |p, _| {
                if let Prim::Duplicate(s) = p {
                    produced.insert(s.clone());
                }
            });
        }
    }

    let global = program.global.clone();
    check_segment(&mut program.global, None, &produced)?;
    for r in &mut program.roles {
        check_segment(&mut r.segment, Some(&global), &produced)?;
    }
    Ok(())
}

fn check_segment(seg: &mut Segment, parent: Option<&Segment>, produced: &BTreeSet<String>) -> Result<()> {
    let mut scope = Scope {
        keys: HashMap::new(),
        state: HashMap::new(),
    };
    let add = |s: &Segment, scope: &mut Scope| {
        for d in &s.state {
            scope
                .state
                .insert(d.name.clone(), (d.id, d.kind.clone(), d.name.clone()));
        }
    };
    if let Some(p) = parent {
        add(p, &mut scope);
    }
    add(seg, &mut scope);
    let key_names: Vec<String> = parent
        .into_iter()
        .flat_map(|p| p.keys.iter())
        .chain(seg.keys.iter())
        .map(|k| k.name.clone())
        .collect();
    for k in &key_names {
        scope.keys.insert(k.as_str(), ());
    }
    for d in &seg.state {
        let mut kind = &d.kind;
        loop {
            let key = match kind {
                StateKind::HashMap { key, .. } | StateKind::BloomFilter { key, .. } | StateKind::Sketch { key, .. } => {
                    Some(key)
                }
                _ => None,
            };
            if let Some(key) = key {
                if !scope.keys.contains_key(key.as_str()) {
                    return Err(Error::InvalidDecl {
                        span: d.loc.0,
                        name: d.name.clone(),
                        message: format!("unknown key `{key}`"),
                    });
                }
            }
            match kind {
                StateKind::HashMap { inner, .. } => kind = inner,
                _ => break,
            }
        }
    }
    for t in &mut seg.tasks {
        if !produced.contains(&t.stream) {
            return Err(Error::UnknownStream {
                span: t.loc.0,
                name: t.stream.clone(),
            });
        }
        check_node(&mut t.body, &scope)?;
    }
    Ok(())
}

fn lookup<'s>(scope: &'s Scope, r: &mut StateRef, span: Span) -> Result<&'s StateKind> {
    match scope.state.get(&r.var) {
        Some((id, kind, _)) => {
            r.id = *id;
            Ok(kind)
        }
        None => Err(Error::UndeclaredState {
            span,
            name: r.var.clone(),
        }),
    }
}

fn check_node(node: &mut Node, scope: &Scope) -> Result<()> {
    match node {
        Node::Seq(c) | Node::Par(c) => c.iter_mut().try_for_each(|n| check_node(n, scope)),
        Node::Prim(p, loc) => check_prim(p, loc.0, scope),
    }
}

fn check_prim(p: &mut Prim, span: Span, scope: &Scope) -> Result<()> {
    match p {
        Prim::Match(e) => check_expr(e, span, scope),
        Prim::Tag { value, .. } => check_expr(value, span, scope),
        Prim::Duplicate(_) | Prim::Collect(_) => Ok(()),
        Prim::Timestamp(r) => {
            let kind = lookup(scope, r, span)?;
            if !matches!(kind.instance(), StateKind::Timestamp) {
                return Err(Error::InvalidMethod {
                    span,
                    var: r.var.clone(),
                    method: "timestamp".into(),
                });
            }
            Ok(())
        }
        Prim::Call { state, method, arg } => {
            if let Some(a) = arg.as_mut() {
                check_expr(a, span, scope)?;
            }
            let kind = lookup(scope, state, span)?.clone();
            let inst = kind.instance();
            let membership = kind.is_membership();
            if membership && *method == Method::Set && arg.is_none() {
                *method = Method::Insert;
            }
            let allowed: &[Method] = match inst {
                StateKind::Counter { .. } => &[Method::Set, Method::Add, Method::Reset],
                StateKind::Timestamp => &[Method::Set, Method::Reset],
                StateKind::BloomFilter {
                    alg: BloomAlg::Membership,
                    ..
                } => &[Method::Insert, Method::Reset, Method::Init],
                StateKind::BloomFilter {
                    alg: BloomAlg::Counting,
                    ..
                } => &[Method::Set, Method::Reset, Method::Init],
                StateKind::Sketch {
                    alg: SketchAlg::CountMin | SketchAlg::Store,
                    ..
                } => &[Method::Set, Method::Reset],
                StateKind::Sketch { .. } => &[Method::Update, Method::Reset],
                StateKind::HashMap { .. } => unreachable!(),
            };
            if !allowed.contains(method) {
                return Err(Error::InvalidMethod {
                    span,
                    var: state.var.clone(),
                    method: method.name().into(),
                });
            }
            let wants_arg = matches!(method, Method::Set | Method::Add | Method::Init);
            if wants_arg != arg.is_some() {
                return Err(Error::Arity {
                    span,
                    primitive: format!("{}.{}", state.var, method.name()),
                    message: if wants_arg {
                        "expected one argument".into()
                    } else {
                        "takes no arguments".into()
                    },
                });
            }
            if membership && *method == Method::Init {
                check_fits_field(&state.var, &kind)?;
            }
            Ok(())
        }
    }
}

fn check_fits_field(var: &str, kind: &StateKind) -> Result<()> {
    if let StateKind::BloomFilter { size, .. } = kind.instance() {
        if *size > 64 {
            return Err(Error::FilterTooWide {
                name: var.to_string(),
                size: *size,
            });
        }
    }
    Ok(())
}

fn check_expr(e: &mut Expr, span: Span, scope: &Scope) -> Result<()> {
    match e {
        Expr::State { state, op, arg } => {
            if let Some(a) = arg.as_mut() {
                check_expr(a, span, scope)?;
            }
            let kind = lookup(scope, state, span)?.clone();
            let allowed: &[StateOp] = match kind.instance() {
                StateKind::Counter { .. } | StateKind::Timestamp => &[StateOp::Value],
                StateKind::BloomFilter {
                    alg: BloomAlg::Membership,
                    ..
                } => &[StateOp::Value, StateOp::Test, StateOp::Read],
                StateKind::BloomFilter { .. }
                | StateKind::Sketch {
                    alg: SketchAlg::Store, ..
                } => &[
                    StateOp::Value,
                    StateOp::Min,
                    StateOp::Max,
                    StateOp::Sum,
                    StateOp::Avg,
                    StateOp::Any,
                    StateOp::All,
                ],
                StateKind::Sketch {
                    alg: SketchAlg::CountMin,
                    ..
                } => &[StateOp::Value, StateOp::Min, StateOp::Max, StateOp::Sum, StateOp::Avg],
                StateKind::Sketch { .. } => &[StateOp::Value, StateOp::Test],
                StateKind::HashMap { .. } => unreachable!(),
            };
            if !allowed.contains(op) {
                return Err(Error::InvalidMethod {
                    span,
                    var: state.var.clone(),
                    method: op.method().unwrap_or("value").into(),
                });
            }
            if op.takes_arg() != arg.is_some() {
                return Err(Error::Arity {
                    span,
                    primitive: format!("{}.{}", state.var, op.method().unwrap_or("")),
                    message: if op.takes_arg() {
                        "expected one argument".into()
                    } else {
                        "takes no arguments".into()
                    },
                });
            }
            if kind.is_membership() && matches!(op, StateOp::Value | StateOp::Read) {
                check_fits_field(&state.var, &kind)?;
            }
            Ok(())
        }
        Expr::Bin { lhs, rhs, .. } | Expr::Max(lhs, rhs) => {
            check_expr(lhs, span, scope)?;
            check_expr(rhs, span, scope)
        }
        Expr::Not(inner) => check_expr(inner, span, scope),
        Expr::Lit(_) | Expr::Field(_) | Expr::Random { .. } => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HH: &str = r#"
flowid = Key(ip.src,ip.dest,tcp.src,tcp.dest,ip.proto)
total = Counter(width=32)
nbytes =
 Sketch(alg="count-min",nhash=4,key=flowid,size=256,width=32)
hh =
 BloomFilter(alg="membership",key=flowid,nhash=4,size=64)
hh_bytes =
 HashMap(key=flowid,size=1024,type=Counter(width=32))
window(mment_interval)
// Heavy hitter detection.
pkts
  >> match(pkt.input_port == PORT)
  >> total.set(total + pkt.size)
  >> (( match(!hh.test())
           >> nbytes.set(nbytes + pkt.size)
           >> match(nbytes.min() / total > GAMMA)
           >> hh.insert()
           >> hh_bytes.set(nbytes.min())
           >> duplicate(hh_alarms) )
       +
        ( match(hh.test()) >> hh_bytes.set(hh_bytes + pkt.size)))
// Alarms sent to the SDN controller.
hh_alarms
  >> tag(ipv4.checksum, nbytes.min()) >> collect(CONTROLLER)
ctrl
  >> match(pkt.request==HH_VOLUME) >> duplicate(get_hh_volume)
get_hh_volume
  >> tag(pkt.hh_volume, hh_bytes) >> collect(CONTROLLER)
"#;

    fn hh_opts() -> ParseOptions {
        ParseOptions::with_defines([
            ("mment_interval", "5"),
            ("PORT", "1"),
            ("GAMMA", "0"),
            ("HH_VOLUME", "7"),
        ])
    }

    #[test]
    fn heavy_hitter_listing_parses() {
        let p = parse_with(HH, &hh_opts()).unwrap();
        assert_eq!(p.global.keys.len(), 1);
        let names: Vec<_> = p.global.state.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["total", "nbytes", "hh", "hh_bytes"]);
        assert_eq!(p.global.window.unwrap().ns, 5_000_000_000);
        let streams: Vec<_> = p.global.tasks.iter().map(|t| t.stream.as_str()).collect();
        assert_eq!(streams, ["pkts", "hh_alarms", "ctrl", "get_hh_volume"]);
        // pkts >> match >> set >> Par(..)
        match &p.global.tasks[0].body {
            Node::Seq(items) => {
                assert_eq!(items.len(), 3);
                assert!(matches!(&items[2], Node::Par(b) if b.len() == 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_source_is_a_valid_program() {
        let p = parse("").unwrap();
        assert!(p.global.tasks.is_empty());
        let p = parse("// nothing but a comment\n").unwrap();
        assert_eq!(p, Program::default());
    }

    #[test]
    fn undeclared_state_is_reported() {
        let err = parse("pkts >> nbytes.set(nbytes + pkt.size)").unwrap_err();
        assert!(matches!(err, Error::UndeclaredState { ref name, .. } if name == "nbytes"));
    }

    #[test]
    fn duplicate_declarations() {
        let err = parse("a = Counter(width=8)\na = Counter(width=8)").unwrap_err();
        assert!(matches!(err, Error::DuplicateDecl { ref name, span } if name == "a" && span.line == 2));
        assert!(matches!(
            parse("window(1)\nwindow(2)"),
            Err(Error::DuplicateDecl { .. })
        ));
    }

    #[test]
    fn unknown_stream() {
        let err = parse("alarms >> collect(C)").unwrap_err();
        assert!(matches!(err, Error::UnknownStream { ref name, .. } if name == "alarms"));
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(
            parse("c = Counter(width=8)\npkts >> c.set(1, 2)"),
            Err(Error::Arity { .. })
        ));
        assert!(matches!(
            parse("c = Counter(width=8)\npkts >> c.reset(1)"),
            Err(Error::Arity { .. })
        ));
        assert!(matches!(parse("pkts >> tag(ipv4.id)"), Err(Error::Arity { .. })));
    }

    #[test]
    fn unbound_constant() {
        let err = parse("pkts >> match(pkt.input_port == PORT) >> duplicate(x)\nx >> collect(C)").unwrap_err();
        assert!(matches!(err, Error::UnboundConstant { ref name, .. } if name == "PORT"));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse("pkts >> match(pkt.size > )").unwrap_err();
        match err {
            Error::Syntax { span, .. } => assert_eq!(span, Span::new(1, 26)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn both_window_forms() {
        let a = parse("pkts.window(5s) >> match(1)").unwrap();
        let b = parse("window(5)\npkts >> match(1)").unwrap();
        assert_eq!(a.global.window.unwrap().ns, b.global.window.unwrap().ns);
        let c = parse_with("window(10 * RTT)", &ParseOptions::with_defines([("RTT", "0.002")])).unwrap();
        assert_eq!(c.global.window.unwrap().ns, 20_000_000);
    }

    #[test]
    fn precedence_follows_the_table() {
        let p = parse("pkts >> match(ipv4.tos & 0x1 == 0x1 && pkt.size + 2 * 3 > 10)").unwrap();
        let e = match &p.global.tasks[0].body {
            Node::Prim(Prim::Match(e), _) => e.clone(),
            _ => unreachable!(),
        };
        assert_eq!(e.to_string(), "ipv4.tos & 1 == 1 && pkt.size + 2 * 3 > 10");
        match e {
            Expr::Bin { op: BinOp::And, .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn membership_set_means_insert_and_wide_filters_cannot_be_tagged() {
        let p = parse(
            "loc = Key(pkt.input_port)\nbf = BloomFilter(alg=\"membership\",key=loc,nhash=2,size=16)\npkts >> bf.set()",
        )
        .unwrap();
        assert!(matches!(
            &p.global.tasks[0].body,
            Node::Prim(
                Prim::Call {
                    method: Method::Insert,
                    ..
                },
                _
            )
        ));
        let err = parse(
            "loc = Key(pkt.input_port)\nbf = BloomFilter(alg=\"membership\",key=loc,nhash=2,size=128)\npkts >> tag(ipv4.id, bf)",
        )
        .unwrap_err();
        assert!(matches!(err, Error::FilterTooWide { size: 128, .. }));
    }

    #[test]
    fn metadata_is_read_only() {
        assert!(matches!(
            parse("pkts >> tag(pkt.size, 1)"),
            Err(Error::ReadOnlyField { .. })
        ));
    }

    #[test]
    fn seconds_round_trip() {
        for (s, ns) in [
            ("5", 5_000_000_000u64),
            ("0.25", 250_000_000),
            ("1.000000001", 1_000_000_001),
        ] {
            assert_eq!(parse_seconds(s), Some(ns));
            assert_eq!(format_seconds(ns), s);
        }
        assert_eq!(parse_seconds("1.0000000001"), None);
    }
}
