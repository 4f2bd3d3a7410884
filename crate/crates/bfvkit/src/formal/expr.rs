//! Expression trees over the ADM field symbols and their ghosts.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use super::FormalError;
use crate::graded::Rational;

/// Tensor character of a symbol or subexpression. Only used to reject
/// operator misuse; [`Kind::Tensor`] matches anything.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Scalar,
    Vector,
    Metric,
    Momentum,
    Density,
    Form,
    FormDensity,
    VectorDensity,
    Tensor,
}

impl Kind {
    pub fn tag(self) -> &'static str {
        match self {
            Kind::Scalar => "scalar",
            Kind::Vector => "vector",
            Kind::Metric => "metric",
            Kind::Momentum => "momentum",
            Kind::Density => "density",
            Kind::Form => "1-form",
            Kind::FormDensity => "1-form-density",
            Kind::VectorDensity => "vector-density",
            Kind::Tensor => "tensor",
        }
    }

    fn compatible(self, other: Kind) -> bool {
        self == other || self == Kind::Tensor || other == Kind::Tensor
    }
}

pub struct SymbolInfo {
    pub name: &'static str,
    pub degree: i32,
    pub kind: Kind,
}

/// Built-in symbols. Ghost degrees: `xiN`, `xiD` are `+1`, `chiN`, `chiD` are
/// `-1`, everything else is `0`.
pub const SYMBOLS: &[SymbolInfo] = &[
    SymbolInfo {
        name: "xiN",
        degree: 1,
        kind: Kind::Scalar,
    },
    SymbolInfo {
        name: "xiD",
        degree: 1,
        kind: Kind::Vector,
    },
    SymbolInfo {
        name: "chiN",
        degree: -1,
        kind: Kind::Density,
    },
    SymbolInfo {
        name: "chiD",
        degree: -1,
        kind: Kind::FormDensity,
    },
    SymbolInfo {
        name: "psiN",
        degree: 0,
        kind: Kind::Density,
    },
    SymbolInfo {
        name: "psiD",
        degree: 0,
        kind: Kind::FormDensity,
    },
    SymbolInfo {
        name: "h",
        degree: 0,
        kind: Kind::Metric,
    },
    SymbolInfo {
        name: "Pi",
        degree: 0,
        kind: Kind::Momentum,
    },
    SymbolInfo {
        name: "HN",
        degree: 0,
        kind: Kind::Density,
    },
    SymbolInfo {
        name: "HD",
        degree: 0,
        kind: Kind::FormDensity,
    },
    SymbolInfo {
        name: "K",
        degree: 0,
        kind: Kind::Metric,
    },
    SymbolInfo {
        name: "G",
        degree: 0,
        kind: Kind::Metric,
    },
    SymbolInfo {
        name: "Gss",
        degree: 0,
        kind: Kind::Tensor,
    },
    SymbolInfo {
        name: "PiT",
        degree: 0,
        kind: Kind::Momentum,
    },
    SymbolInfo {
        name: "vol",
        degree: 0,
        kind: Kind::Density,
    },
];

pub fn symbol_id(name: &str) -> Option<usize> {
    SYMBOLS.iter().position(|s| s.name == name)
}

pub fn sym(name: &str) -> Expr {
    Expr::Sym(symbol_id(name).expect("built-in symbol"))
}

/// Operators. Every operator is linear in each argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    /// `Lie(V, T)`: Lie derivative of `T` along `V`.
    Lie,
    /// `LieHalf(V, f)`: `L_V(f vol^{-1/2}) vol^{1/2}`.
    LieHalf,
    /// `d(f)`: exterior derivative of a scalar.
    D,
    /// `grad(f)`: metric gradient of a scalar.
    Grad,
    /// `sharp(a)`: index raised with the inverse metric.
    Sharp,
    /// `sharp2(T)`: both indices raised.
    Sharp2,
    /// `Div(V)`: metric divergence.
    Div,
    /// `bracket(V, W)`: vector field commutator.
    Bracket,
    /// `tens(a, b)`: symmetrised tensor product.
    Tens,
    /// `Dh(f)`: `-Hess f + h Lap f` with both indices raised.
    Dh,
    /// `Q(e)`: the homological vector field applied to `e`.
    Q,
}

impl Op {
    pub const ALL: &'static [Op] = &[
        Op::Lie,
        Op::LieHalf,
        Op::D,
        Op::Grad,
        Op::Sharp,
        Op::Sharp2,
        Op::Div,
        Op::Bracket,
        Op::Tens,
        Op::Dh,
        Op::Q,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Lie => "Lie",
            Op::LieHalf => "LieHalf",
            Op::D => "d",
            Op::Grad => "grad",
            Op::Sharp => "sharp",
            Op::Sharp2 => "sharp2",
            Op::Div => "Div",
            Op::Bracket => "bracket",
            Op::Tens => "tens",
            Op::Dh => "Dh",
            Op::Q => "Q",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Lie | Op::LieHalf | Op::Bracket | Op::Tens => 2,
            _ => 1,
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|o| o.name() == s)
    }
}

/// Expression tree. `Mul` is the ordered graded product; swapping adjacent
/// factors costs the Koszul sign of their ghost degrees.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    Num(Rational),
    Sym(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Op(Op, Vec<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(Rational::zero())
    }

    pub fn num(c: Rational) -> Expr {
        Expr::Num(c)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Expr::Num(c) => c.is_zero(),
            Expr::Add(v) => v.is_empty(),
            _ => false,
        }
    }

    /// Zero on sight: a zero number, an empty sum, or a product or operator
    /// application with a vanishing factor or argument, or `Q` of a constant.
    pub fn vanishes(&self) -> bool {
        match self {
            Expr::Num(c) => c.is_zero(),
            Expr::Add(v) => v.iter().all(Expr::vanishes),
            Expr::Op(Op::Q, v) if matches!(v[0], Expr::Num(_)) => true,
            Expr::Mul(v) | Expr::Op(_, v) => v.iter().any(Expr::vanishes),
            Expr::Sym(_) => false,
        }
    }

    pub fn op(op: Op, args: Vec<Expr>) -> Expr {
        Expr::Op(op, args)
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Expr::Sym(_) | Expr::Op(..))
    }

    /// Ghost degree. Sums report the degree of their first non-vanishing
    /// term; the parser and [`Expr::check`] reject inhomogeneous sums.
    pub fn degree(&self) -> i32 {
        match self {
            Expr::Num(_) => 0,
            Expr::Sym(s) => SYMBOLS[*s].degree,
            Expr::Add(v) => v.iter().find(|t| !t.vanishes()).map_or(0, Expr::degree),
            Expr::Mul(v) => v.iter().map(Expr::degree).sum(),
            Expr::Op(op, args) => args.iter().map(Expr::degree).sum::<i32>() + i32::from(*op == Op::Q),
        }
    }

    pub fn is_odd(&self) -> bool {
        self.degree() & 1 != 0
    }

    /// Degree homogeneity and operator kinds; returns the kind.
    pub fn check(&self) -> Result<Kind, FormalError> {
        match self {
            Expr::Num(_) => Ok(Kind::Scalar),
            Expr::Sym(s) => Ok(SYMBOLS[*s].kind),
            Expr::Add(v) => {
                let mut kind: Option<Kind> = None;
                let deg = v.iter().find(|t| !t.vanishes()).map(Expr::degree);
                for t in v {
                    let k = t.check()?;
                    if t.vanishes() {
                        continue;
                    }
                    if Some(t.degree()) != deg {
                        return Err(FormalError::Degree(alloc::format!(
                            "sum mixes ghost degrees {} and {}",
                            deg.unwrap_or(0),
                            t.degree()
                        )));
                    }
                    kind = match kind {
                        None => Some(k),
                        Some(prev) if prev.compatible(k) => Some(if prev == Kind::Tensor { k } else { prev }),
                        Some(prev) => {
                            return Err(FormalError::Kind(alloc::format!(
                                "cannot add {} and {}",
                                prev.tag(),
                                k.tag()
                            )))
                        }
                    };
                }
                Ok(kind.unwrap_or(Kind::Scalar))
            }
            Expr::Mul(v) => {
                let mut others: Vec<Kind> = Vec::new();
                for f in v {
                    let k = f.check()?;
                    if k != Kind::Scalar {
                        others.push(k);
                    }
                }
                Ok(match others.as_slice() {
                    [] => Kind::Scalar,
                    [k] => *k,
                    [Kind::Density, Kind::Vector] | [Kind::Vector, Kind::Density] => Kind::VectorDensity,
                    [Kind::Density, Kind::Form] | [Kind::Form, Kind::Density] => Kind::FormDensity,
                    [Kind::Density, Kind::Tensor] | [Kind::Tensor, Kind::Density] => Kind::Momentum,
                    _ => Kind::Tensor,
                })
            }
            Expr::Op(op, args) => {
                if args.len() != op.arity() {
                    return Err(FormalError::Kind(alloc::format!(
                        "{} takes {} argument(s)",
                        op.name(),
                        op.arity()
                    )));
                }
                let kinds = args.iter().map(Expr::check).collect::<Result<Vec<_>, _>>()?;
                let want = |k: Kind, allowed: &[Kind], what: &str| -> Result<(), FormalError> {
                    if allowed.iter().any(|a| a.compatible(k)) {
                        Ok(())
                    } else {
                        Err(FormalError::Kind(alloc::format!(
                            "{} expects {what}, got {}",
                            op.name(),
                            k.tag()
                        )))
                    }
                };
                let vectorish = [Kind::Vector, Kind::VectorDensity];
                match op {
                    // a vector density acting on a scalar yields a density
                    Op::Lie => {
                        want(kinds[0], &vectorish, "a vector field first")?;
                        Ok(match (kinds[0], kinds[1]) {
                            (Kind::VectorDensity, Kind::Scalar) => Kind::Density,
                            (_, k) => k,
                        })
                    }
                    Op::LieHalf => {
                        want(kinds[0], &vectorish, "a vector field first")?;
                        want(kinds[1], &[Kind::Scalar], "a scalar second")?;
                        Ok(if kinds[0] == Kind::VectorDensity {
                            Kind::Density
                        } else {
                            Kind::Scalar
                        })
                    }
                    Op::D => {
                        want(kinds[0], &[Kind::Scalar], "a scalar")?;
                        Ok(Kind::Form)
                    }
                    Op::Grad => {
                        want(kinds[0], &[Kind::Scalar], "a scalar")?;
                        Ok(Kind::Vector)
                    }
                    Op::Sharp => {
                        want(kinds[0], &[Kind::Form, Kind::FormDensity], "a 1-form")?;
                        Ok(if kinds[0] == Kind::FormDensity {
                            Kind::VectorDensity
                        } else {
                            Kind::Vector
                        })
                    }
                    Op::Div => {
                        want(kinds[0], &vectorish, "a vector field")?;
                        Ok(if kinds[0] == Kind::VectorDensity {
                            Kind::Density
                        } else {
                            Kind::Scalar
                        })
                    }
                    Op::Bracket => {
                        want(kinds[0], &[Kind::Vector], "vector fields")?;
                        want(kinds[1], &[Kind::Vector], "vector fields")?;
                        Ok(Kind::Vector)
                    }
                    Op::Dh => {
                        want(kinds[0], &[Kind::Scalar], "a scalar")?;
                        Ok(Kind::Tensor)
                    }
                    Op::Sharp2 | Op::Tens => Ok(Kind::Tensor),
                    Op::Q => Ok(kinds[0]),
                }
            }
        }
    }

    pub fn render(&self) -> String {
        alloc::format!("{self}")
    }
}

fn needs_parens_in_product(e: &Expr) -> bool {
    match e {
        Expr::Add(v) => v.len() > 1,
        Expr::Num(c) => c.is_negative() || !c.is_integer(),
        _ => false,
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, e: &Expr, leading: bool) -> fmt::Result {
    // splits a leading numeric factor so that sums print as `a - 2*b`
    let (coef, rest): (Rational, Vec<&Expr>) = match e {
        Expr::Num(c) => (c.clone(), Vec::new()),
        Expr::Mul(v) => match v.first() {
            Some(Expr::Num(c)) => (c.clone(), v[1..].iter().collect()),
            _ => (Rational::one(), v.iter().collect()),
        },
        other => (Rational::one(), alloc::vec![other]),
    };
    let neg = coef.is_negative();
    let a = coef.abs();
    if leading {
        if neg {
            f.write_str("-")?;
        }
    } else {
        f.write_str(if neg { " - " } else { " + " })?;
    }
    if rest.is_empty() {
        return write!(f, "{a}");
    }
    let mut first = true;
    if !a.is_one() {
        write!(f, "{a}")?;
        first = false;
    }
    for x in rest {
        if !first {
            f.write_str("*")?;
        }
        first = false;
        if needs_parens_in_product(x) {
            write!(f, "({x})")?;
        } else {
            write!(f, "{x}")?;
        }
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Sym(s) => f.write_str(SYMBOLS[*s].name),
            Expr::Add(v) if v.is_empty() => f.write_str("0"),
            Expr::Add(v) => {
                for (k, t) in v.iter().enumerate() {
                    write_term(f, t, k == 0)?;
                }
                Ok(())
            }
            Expr::Mul(_) => write_term(f, self, true),
            Expr::Op(op, args) => {
                write!(f, "{}(", op.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
