use crate::error::{Error, Result, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Integer or decimal literal as written; `seconds` is set for a trailing `s`.
    Number {
        text: String,
        seconds: bool,
    },
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    Semi,
    Assign,
    At,
    /// `>>` or `≫`: sequential composition, or right shift inside expressions.
    Shr,
    Shl,
    Plus,
    Minus,
    Star,
    Slash,
    Amp,
    Pipe,
    AndAnd,
    OrOr,
    Bang,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number { text, .. } => format!("number `{text}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Assign => "=",
            Tok::At => "@",
            Tok::Shr => ">>",
            Tok::Shl => "<<",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        let peek = chars.get(i + 1).copied();
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && peek == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            out.push(Token {
                tok: Tok::Ident(s),
                span,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            if c == '0' && matches!(peek, Some('x') | Some('X')) {
                s.push_str("0x");
                bump!();
                bump!();
                while i < chars.len() && chars[i].is_ascii_hexdigit() {
                    s.push(chars[i]);
                    bump!();
                }
                if s.len() == 2 {
                    return Err(Error::syntax(span, "hex literal without digits"));
                }
            } else {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    bump!();
                }
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                    s.push('.');
                    bump!();
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        s.push(chars[i]);
                        bump!();
                    }
                }
            }
            let mut seconds = false;
            if i < chars.len()
                && chars[i] == 's'
                && !chars.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric() || *n == '_')
            {
                seconds = true;
                bump!();
            }
            if i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                return Err(Error::syntax(
                    Span::new(line, col),
                    format!("unexpected `{}` after number", chars[i]),
                ));
            }
            out.push(Token {
                tok: Tok::Number { text: s, seconds },
                span,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(Error::syntax(span, "unterminated string")),
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        bump!();
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), span });
            continue;
        }
        let two = |a: char, b: char| c == a && peek == Some(b);
        let (tok, len) = if two('>', '>') {
            (Tok::Shr, 2)
        } else if two('<', '<') {
            (Tok::Shl, 2)
        } else if two('=', '=') {
            (Tok::EqEq, 2)
        } else if two('!', '=') {
            (Tok::Ne, 2)
        } else if two('<', '=') {
            (Tok::Le, 2)
        } else if two('>', '=') {
            (Tok::Ge, 2)
        } else if two('&', '&') {
            (Tok::AndAnd, 2)
        } else if two('|', '|') {
            (Tok::OrOr, 2)
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                ':' => Tok::Colon,
                ';' => Tok::Semi,
                '=' => Tok::Assign,
                '@' => Tok::At,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' | '×' => Tok::Star,
                '/' => Tok::Slash,
                '&' => Tok::Amp,
                '|' => Tok::Pipe,
                '!' => Tok::Bang,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                '≫' => Tok::Shr,
                other => return Err(Error::syntax(span, format!("unexpected character `{other}`"))),
            };
            (t, 1)
        };
        for _ in 0..len {
            bump!();
        }
        out.push(Token { tok, span });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn composition_and_comments() {
        assert_eq!(
            toks("pkts >> x // trailing\n≫ y"),
            vec![
                Tok::Ident("pkts".into()),
                Tok::Shr,
                Tok::Ident("x".into()),
                Tok::Shr,
                Tok::Ident("y".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn numbers_and_durations() {
        assert_eq!(
            toks("0x1F 2.5s 10"),
            vec![
                Tok::Number {
                    text: "0x1F".into(),
                    seconds: false
                },
                Tok::Number {
                    text: "2.5".into(),
                    seconds: true
                },
                Tok::Number {
                    text: "10".into(),
                    seconds: false
                },
                Tok::Eof
            ]
        );
        assert!(lex("12abc").is_err());
    }

    #[test]
    fn spans_are_one_based() {
        let t = lex("a\n  b").unwrap();
        assert_eq!(t[1].span, Span::new(2, 3));
    }

    #[test]
    fn unterminated_string() {
        assert!(matches!(lex("\"abc"), Err(Error::Syntax { .. })));
    }
}
