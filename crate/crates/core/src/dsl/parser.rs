//! Lexer and recursive-descent parser for alpha formulas.
//!
//! ```text
//! line   := ident '=' expr
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | atom
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers are `[A-Za-z_][A-Za-z0-9_]*`; only `min`, `max`, and `abs`
//! may be called. Numbers are unsigned decimals with an optional fraction
//! and exponent. A `#` starts a comment running to the end of the line.
//! Errors carry the 0-based byte offset of the offending token; the file
//! parser in the parent module fills in line numbers.

use crate::dsl::ast::{BinOp, Expr, Func};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Ident(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Eq,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Number(v) => format!("`{v}`"),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Slash => "`/`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Eq => "`=`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn err_at(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        offset,
        msg: msg.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b' ' | b'\t' | b'\r' => pos += 1,
            b'#' => break,
            b'+' | b'-' | b'*' | b'/' | b'(' | b')' | b',' | b'=' => {
                let kind = match b {
                    b'+' => TokenKind::Plus,
                    b'-' => TokenKind::Minus,
                    b'*' => TokenKind::Star,
                    b'/' => TokenKind::Slash,
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    b',' => TokenKind::Comma,
                    _ => TokenKind::Eq,
                };
                tokens.push(Token { kind, offset: pos });
                pos += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = pos;
                let mut saw_digit = false;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    saw_digit = true;
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'.' {
                    pos += 1;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        saw_digit = true;
                        pos += 1;
                    }
                }
                if !saw_digit {
                    return Err(err_at(start, "expected digits in numeric literal"));
                }
                if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                    let exp_start = pos;
                    pos += 1;
                    if pos < bytes.len() && (bytes[pos] == b'+' || bytes[pos] == b'-') {
                        pos += 1;
                    }
                    if pos >= bytes.len() || !bytes[pos].is_ascii_digit() {
                        return Err(err_at(exp_start, "malformed exponent in numeric literal"));
                    }
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
                let text = &src[start..pos];
                let value: f64 = text
                    .parse()
                    .map_err(|_| err_at(start, format!("bad numeric literal `{text}`")))?;
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    offset: start,
                });
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = pos;
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
                {
                    pos += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(src[start..pos].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(err_at(
                    pos,
                    format!("unexpected character `{}`", &src[pos..][..1]),
                ));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end_offset: usize,
}

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.offset)
            .unwrap_or(self.end_offset)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<()> {
        match self.peek() {
            Some(k) if *k == kind => {
                self.pos += 1;
                Ok(())
            }
            Some(k) => Err(err_at(
                self.offset(),
                format!("expected {what}, found {}", k.describe()),
            )),
            None => Err(err_at(self.offset(), format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op) = match self.peek() {
            Some(TokenKind::Plus) => Some(BinOp::Add),
            Some(TokenKind::Minus) => Some(BinOp::Sub),
            _ => None,
        } {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = match self.peek() {
            Some(TokenKind::Star) => Some(BinOp::Mul),
            Some(TokenKind::Slash) => Some(BinOp::Div),
            _ => None,
        } {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(TokenKind::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.bump().map(|t| t.kind) {
            Some(TokenKind::Number(v)) => Ok(Expr::Number(v)),
            Some(TokenKind::Ident(name)) => {
                if matches!(self.peek(), Some(TokenKind::LParen)) {
                    let func = Func::from_name(&name).ok_or_else(|| {
                        err_at(offset, format!("unknown function `{name}`"))
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(TokenKind::Comma)) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(TokenKind::RParen, "`)`")?;
                    if args.len() != func.arity() {
                        return Err(err_at(
                            offset,
                            format!(
                                "{} expects {} argument{}, got {}",
                                func.name(),
                                func.arity(),
                                if func.arity() == 1 { "" } else { "s" },
                                args.len()
                            ),
                        ));
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            Some(TokenKind::LParen) => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            Some(kind) => Err(err_at(
                offset,
                format!("expected expression, found {}", kind.describe()),
            )),
            None => Err(err_at(offset, "expected expression")),
        }
    }
}

/// Parses a bare expression (no `name =` prefix). Trailing input is an error.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser {
        tokens: lex(src)?,
        pos: 0,
        end_offset: src.len(),
    };
    if p.tokens.is_empty() {
        return Err(err_at(0, "empty expression"));
    }
    let expr = p.expr()?;
    if let Some(kind) = p.peek() {
        return Err(err_at(
            p.offset(),
            format!("unexpected trailing input starting with {}", kind.describe()),
        ));
    }
    Ok(expr)
}

/// Parses a `name = expression` line into its parts.
pub fn parse_named(src: &str) -> Result<(String, Expr)> {
    let mut p = Parser {
        tokens: lex(src)?,
        pos: 0,
        end_offset: src.len(),
    };
    let name = match p.bump() {
        Some(Token {
            kind: TokenKind::Ident(name),
            ..
        }) => name,
        Some(t) => {
            return Err(err_at(
                t.offset,
                format!("expected alpha name, found {}", t.kind.describe()),
            ))
        }
        None => return Err(err_at(0, "empty alpha definition")),
    };
    p.expect(TokenKind::Eq, "`=` after alpha name")?;
    let expr = p.expr()?;
    if let Some(kind) = p.peek() {
        return Err(err_at(
            p.offset(),
            format!("unexpected trailing input starting with {}", kind.describe()),
        ));
    }
    Ok((name, expr))
}
