//! Symbolic rewriting for the gravity BFV differential.
//!
//! Expressions are built from the field symbols in [`expr::SYMBOLS`] and the
//! operators in [`expr::Op`], parsed from the text syntax described in
//! `docs/GRAMMAR.md`. [`engine::normalize`] rewrites an expression to a
//! canonical sum of ordered products using only the rules of a
//! [`engine::RuleSet`], recording every step. [`checks`] holds the three
//! verifications built on top of that.

use alloc::boxed::Box;
use alloc::string::String;

pub mod checks;
pub mod engine;
pub mod expr;
pub mod parse;

pub use engine::{normalize, Normalized, Rule, RuleSet, TraceStep};
pub use expr::{Expr, Kind, Op};
pub use parse::parse_expression;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    Expected(char, char),
    ExpectedInteger,
    DivisionByZero,
    UnknownSymbol(String),
    UnknownOperator(String),
    Arity {
        op: String,
        expected: usize,
        found: usize,
    },
    /// Well-formed text that fails the kind or degree check.
    Ill(Box<FormalError>),
}

impl core::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input"),
            ParseErrorKind::Expected(want, got) => write!(f, "expected '{want}', found '{got}'"),
            ParseErrorKind::ExpectedInteger => f.write_str("expected an integer"),
            ParseErrorKind::DivisionByZero => f.write_str("division by zero"),
            ParseErrorKind::UnknownSymbol(s) => write!(f, "unknown symbol `{s}`"),
            ParseErrorKind::UnknownOperator(s) => write!(f, "unknown operator `{s}`"),
            ParseErrorKind::Arity { op, expected, found } => {
                write!(f, "{op} takes {expected} argument(s), found {found}")
            }
            ParseErrorKind::Ill(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FormalError {
    #[error("parse error at byte {pos}: {kind}")]
    Parse { pos: usize, kind: ParseErrorKind },
    #[error("kind error: {0}")]
    Kind(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("invalid definition: {0}")]
    Definition(String),
    #[error("rewriting did not terminate within {0} steps")]
    Budget(usize),
}

impl FormalError {
    /// Byte offset for parse errors.
    pub fn position(&self) -> Option<usize> {
        match self {
            FormalError::Parse { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}
