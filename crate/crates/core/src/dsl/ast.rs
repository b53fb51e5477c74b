//! Expression tree for alpha formulas.
//!
//! The surface syntax is a Python-compatible arithmetic subset: identifiers,
//! numeric literals, unary minus, `+ - * /`, parentheses, and the calls
//! `min(a, b)`, `max(a, b)`, `abs(a)`. Unary minus binds tighter than `*`
//! and `/`, which bind tighter than `+` and `-`; binary operators associate
//! left.
//!
//! `Display` renders with the minimal parentheses that reparse to the same
//! tree, so `parse(render(ast)) == ast`. `Number` holds non-negative
//! literals by construction (the parser turns a leading `-` into [`Expr::Neg`]);
//! hand-built trees must follow the same convention for round-tripping.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Abs => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Ident(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Binding strength for the renderer; atoms and calls never need parens.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Number(_) | Expr::Ident(_) | Expr::Call(..) => 4,
            Expr::Neg(_) => 3,
            Expr::Bin(op, ..) => op.precedence(),
        }
    }

    /// Collects every identifier in the tree.
    pub fn identifiers(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Number(_) => {}
            Expr::Ident(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(inner) => inner.identifiers(out),
            Expr::Bin(_, lhs, rhs) => {
                lhs.identifiers(out);
                rhs.identifiers(out);
            }
            Expr::Call(_, args) => {
                for a in args {
                    a.identifiers(out);
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                wrapped(f, inner, inner.precedence() < self.precedence())
            }
            Expr::Bin(op, lhs, rhs) => {
                // left operand of equal precedence reparses identically under
                // left association; a right operand of equal precedence does
                // not, so it keeps its parens
                wrapped(f, lhs, lhs.precedence() < op.precedence())?;
                write!(f, " {} ", op.symbol())?;
                wrapped(f, rhs, rhs.precedence() <= op.precedence())
            }
            Expr::Call(func, args) => {
                f.write_str(func.name())?;
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
