//! Recursive-descent parser for the field-expression language.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary ("*" unary | "/" INT)*
//! unary   := "-" unary | primary
//! primary := INT | SYMBOL | OP "(" expr ("," expr)* ")" | "(" expr ")"
//! ```

use alloc::boxed::Box;
use alloc::string::{String, ToString};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::expr::{symbol_id, Expr, Op};
use super::{FormalError, ParseErrorKind};
use crate::graded::Rational;

pub fn parse_expression(text: &str) -> Result<Expr, FormalError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err(ParseErrorKind::UnexpectedChar(p.src[p.pos] as char)));
    }
    e.check().map_err(|e| FormalError::Parse {
        pos: 0,
        kind: ParseErrorKind::Ill(Box::new(e)),
    })?;
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

fn push_sum(acc: Expr, t: Expr) -> Expr {
    match acc {
        Expr::Add(mut v) => {
            v.push(t);
            Expr::Add(v)
        }
        other => Expr::Add(alloc::vec![other, t]),
    }
}

fn negate(e: Expr) -> Expr {
    match e {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Mul(mut v) => {
            if let Some(Expr::Num(c)) = v.first_mut() {
                *c = -c.clone();
            } else {
                v.insert(0, Expr::Num(-Rational::one()));
            }
            Expr::Mul(v)
        }
        other => Expr::Mul(alloc::vec![Expr::Num(-Rational::one()), other]),
    }
}

impl<'a> Parser<'a> {
    fn err(&self, kind: ParseErrorKind) -> FormalError {
        FormalError::Parse { pos: self.pos, kind }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), FormalError> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(self.err(ParseErrorKind::Expected(c as char, x as char))),
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
        }
    }

    fn expr(&mut self) -> Result<Expr, FormalError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = push_sum(acc, t);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = push_sum(acc, negate(t));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, FormalError> {
        let mut factors = alloc::vec![self.unary()?];
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    factors.push(self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let n = self.integer()?;
                    if n.is_zero() {
                        return Err(self.err(ParseErrorKind::DivisionByZero));
                    }
                    factors.push(Expr::Num(Rational::from_integer(n).recip()));
                }
                _ => break,
            }
        }
        Ok(if factors.len() == 1 {
            factors.pop().expect("one factor")
        } else {
            Expr::Mul(factors)
        })
    }

    fn unary(&mut self) -> Result<Expr, FormalError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(negate(self.unary()?));
        }
        self.primary()
    }

    fn integer(&mut self) -> Result<BigInt, FormalError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(ParseErrorKind::ExpectedInteger));
        }
        let s = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(s.parse::<BigInt>().expect("digits parse"))
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        core::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .to_string()
    }

    fn primary(&mut self) -> Result<Expr, FormalError> {
        match self.peek() {
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => Ok(Expr::Num(Rational::from_integer(self.integer()?))),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident();
                if self.peek() == Some(b'(') {
                    let op = Op::from_name(&name).ok_or(FormalError::Parse {
                        pos: start,
                        kind: ParseErrorKind::UnknownOperator(name.clone()),
                    })?;
                    self.pos += 1;
                    let mut args = alloc::vec![self.expr()?];
                    while self.peek() == Some(b',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(b')')?;
                    if args.len() != op.arity() {
                        return Err(FormalError::Parse {
                            pos: start,
                            kind: ParseErrorKind::Arity {
                                op: name,
                                expected: op.arity(),
                                found: args.len(),
                            },
                        });
                    }
                    let e = Expr::Op(op, args);
                    e.check().map_err(|err| FormalError::Parse {
                        pos: start,
                        kind: ParseErrorKind::Ill(Box::new(err)),
                    })?;
                    Ok(e)
                } else {
                    let id = symbol_id(&name).ok_or(FormalError::Parse {
                        pos: start,
                        kind: ParseErrorKind::UnknownSymbol(name),
                    })?;
                    Ok(Expr::Sym(id))
                }
            }
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedChar(c as char))),
        }
    }
}
