//! Free graded-commutative polynomials with exact rational coefficients.
//!
//! A [`Monomial`] keeps its generators sorted by id. Multiplying two monomials
//! produces the Koszul sign of the shuffle that restores that order, and any
//! shared odd generator kills the product.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

/// `n / d` as a [`Rational`].
pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgebraError {
    #[error("operands live over different generator sets")]
    GeneratorMismatch,
    #[error("generator `{0}` declared twice")]
    DuplicateGenerator(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("invalid generator name `{0}`")]
    InvalidName(String),
    #[error("no image given for generator `{0}`")]
    MissingImage(String),
    #[error("degree mismatch for `{generator}`: expected {expected}, found {found}")]
    DegreeMismatch {
        generator: String,
        expected: i32,
        found: i32,
    },
    #[error("image of `{0}` is not homogeneous")]
    Inhomogeneous(String),
    #[error("reduction exceeded the budget of {0} steps")]
    BudgetExceeded(usize),
    #[error("relation with left side `{0}` does not decrease the monomial order")]
    NonDecreasingRelation(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub degree: i32,
}

impl Generator {
    pub fn is_odd(&self) -> bool {
        self.degree & 1 != 0
    }
}

/// An ordered list of named generators with integer degrees. The position in
/// the list is the generator id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Algebra {
    gens: Vec<Generator>,
}

pub(crate) fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Algebra {
    pub fn new<S: AsRef<str>>(decls: &[(S, i32)]) -> Result<Arc<Self>, AlgebraError> {
        let mut gens = Vec::with_capacity(decls.len());
        let mut seen = BTreeSet::new();
        for (name, degree) in decls {
            let name = name.as_ref();
            if !valid_ident(name) {
                return Err(AlgebraError::InvalidName(name.to_string()));
            }
            if !seen.insert(name.to_string()) {
                return Err(AlgebraError::DuplicateGenerator(name.to_string()));
            }
            gens.push(Generator {
                name: name.to_string(),
                degree: *degree,
            });
        }
        Ok(Arc::new(Algebra { gens }))
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    pub fn generator(&self, id: usize) -> &Generator {
        &self.gens[id]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|g| g.name == name)
    }

    pub fn id(&self, name: &str) -> Result<usize, AlgebraError> {
        self.lookup(name)
            .ok_or_else(|| AlgebraError::UnknownGenerator(name.to_string()))
    }

    pub fn degree(&self, id: usize) -> i32 {
        self.gens[id].degree
    }

    pub fn is_odd(&self, id: usize) -> bool {
        self.gens[id].is_odd()
    }
}

fn same_algebra(a: &Arc<Algebra>, b: &Arc<Algebra>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Sorted `(generator id, exponent)` pairs; odd generators appear with
/// exponent one.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(usize, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn generator(id: usize) -> Self {
        Monomial(vec![(id, 1)])
    }

    /// Wraps already sorted, positive-exponent factors.
    pub(crate) fn from_sorted(factors: Vec<(usize, u32)>) -> Self {
        debug_assert!(factors.windows(2).all(|w| w[0].0 < w[1].0));
        Monomial(factors)
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_exponent(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, id: usize) -> u32 {
        self.0.iter().find(|&&(g, _)| g == id).map_or(0, |&(_, e)| e)
    }

    pub fn degree(&self, alg: &Algebra) -> i32 {
        self.0.iter().map(|&(g, e)| alg.degree(g) * e as i32).sum()
    }

    pub fn is_odd(&self, alg: &Algebra) -> bool {
        self.0.iter().filter(|&&(g, _)| alg.is_odd(g)).count() % 2 == 1
    }

    /// Product with the Koszul sign; `None` when an odd generator repeats.
    /// The flag is `true` when the sign is negative.
    pub fn mul(&self, other: &Monomial, alg: &Algebra) -> Option<(Monomial, bool)> {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        // odd factors of `self` not yet passed by the merge
        let mut odd_left: usize = self.0.iter().filter(|&&(g, _)| alg.is_odd(g)).count();
        let mut swaps = 0usize;
        while i < self.0.len() || j < other.0.len() {
            let take_left = match (self.0.get(i), other.0.get(j)) {
                (Some(&(a, _)), Some(&(b, _))) => match a.cmp(&b) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        if alg.is_odd(a) {
                            return None;
                        }
                        out.push((a, self.0[i].1 + other.0[j].1));
                        i += 1;
                        j += 1;
                        continue;
                    }
                },
                (Some(_), None) => true,
                _ => false,
            };
            if take_left {
                let (g, e) = self.0[i];
                if alg.is_odd(g) {
                    odd_left -= 1;
                }
                out.push((g, e));
                i += 1;
            } else {
                let (g, e) = other.0[j];
                if alg.is_odd(g) {
                    swaps += odd_left;
                }
                out.push((g, e));
                j += 1;
            }
        }
        Some((Monomial(out), swaps % 2 == 1))
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().all(|&(g, e)| other.exponent(g) >= e)
    }

    /// `other / self` as a bare monomial, without sign bookkeeping.
    pub fn cofactor_in(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::new();
        for &(g, e) in &other.0 {
            let rest = e - self.exponent(g);
            if rest > 0 {
                out.push((g, rest));
            }
        }
        Monomial(out)
    }

    /// Degree-then-lexicographic order, compatible with multiplication.
    pub fn grlex_cmp(&self, other: &Monomial) -> Ordering {
        self.total_exponent()
            .cmp(&other.total_exponent())
            .then_with(|| self.0.cmp(&other.0))
    }

    pub fn display<'a>(&'a self, alg: &'a Algebra) -> impl fmt::Display + 'a {
        MonomialDisplay { m: self, alg }
    }
}

struct MonomialDisplay<'a> {
    m: &'a Monomial,
    alg: &'a Algebra,
}

impl fmt::Display for MonomialDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.m.is_one() {
            return f.write_str("1");
        }
        for (k, &(g, e)) in self.m.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            f.write_str(&self.alg.generator(g).name)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// Element of the free graded-commutative algebra over an [`Algebra`].
#[derive(Clone, Debug)]
pub struct GradedPoly {
    alg: Arc<Algebra>,
    terms: BTreeMap<Monomial, Rational>,
}

impl PartialEq for GradedPoly {
    fn eq(&self, other: &Self) -> bool {
        same_algebra(&self.alg, &other.alg) && self.terms == other.terms
    }
}

impl Eq for GradedPoly {}

impl GradedPoly {
    pub fn zero(alg: &Arc<Algebra>) -> Self {
        GradedPoly {
            alg: alg.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(alg: &Arc<Algebra>, c: Rational) -> Self {
        Self::from_monomial(alg, Monomial::one(), c)
    }

    pub fn one(alg: &Arc<Algebra>) -> Self {
        Self::constant(alg, Rational::one())
    }

    pub fn from_monomial(alg: &Arc<Algebra>, m: Monomial, c: Rational) -> Self {
        let mut p = Self::zero(alg);
        p.add_term(m, c);
        p
    }

    pub fn generator(alg: &Arc<Algebra>, id: usize) -> Self {
        Self::from_monomial(alg, Monomial::generator(id), Rational::one())
    }

    pub fn var(alg: &Arc<Algebra>, name: &str) -> Result<Self, AlgebraError> {
        Ok(Self::generator(alg, alg.id(name)?))
    }

    /// Parses a polynomial written with `+ - * / ^`, integers and generator
    /// names, e.g. `1/2*x1^2*c1 - p2`.
    pub fn parse(alg: &Arc<Algebra>, text: &str) -> Result<Self, AlgebraError> {
        PolyParser::new(alg, text).parse()
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.alg
    }

    pub fn terms(&self) -> alloc::collections::btree_map::Iter<'_, Monomial, Rational> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        let remove = {
            let slot = self.terms.entry(m.clone()).or_insert_with(Rational::zero);
            *slot += c;
            slot.is_zero()
        };
        if remove {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(&self.alg);
        }
        GradedPoly {
            alg: self.alg.clone(),
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, AlgebraError> {
        if !same_algebra(&self.alg, &other.alg) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.try_add(&-other)
    }

    /// Graded-commutative product; fails when the generator sets differ.
    pub fn try_mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        if !same_algebra(&self.alg, &other.alg) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let mut out = Self::zero(&self.alg);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                if let Some((m, neg)) = m1.mul(m2, &self.alg) {
                    let c = c1 * c2;
                    out.add_term(m, if neg { -c } else { c });
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::one(&self.alg);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// The common degree of all terms; `None` for zero or mixed degrees.
    pub fn degree(&self) -> Option<i32> {
        let mut it = self.terms.keys().map(|m| m.degree(&self.alg));
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.is_zero() || self.degree().is_some()
    }

    pub fn degrees(&self) -> BTreeSet<i32> {
        self.terms.keys().map(|m| m.degree(&self.alg)).collect()
    }

    pub fn component(&self, degree: i32) -> Self {
        self.filter(|m| m.degree(&self.alg) == degree)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Monomial) -> bool) -> Self {
        GradedPoly {
            alg: self.alg.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Derivative acting from the left: the generator is first moved to the
    /// front of each monomial.
    pub fn left_partial(&self, id: usize) -> Self {
        self.partial(id, true)
    }

    /// Derivative acting from the right: the generator is first moved to the
    /// back of each monomial.
    pub fn right_partial(&self, id: usize) -> Self {
        self.partial(id, false)
    }

    fn partial(&self, id: usize, from_left: bool) -> Self {
        let mut out = Self::zero(&self.alg);
        let odd = self.alg.is_odd(id);
        for (m, c) in &self.terms {
            let pos = match m.0.iter().position(|&(g, _)| g == id) {
                Some(p) => p,
                None => continue,
            };
            let e = m.0[pos].1;
            let mut rest = m.0.clone();
            if e == 1 {
                rest.remove(pos);
            } else {
                rest[pos].1 -= 1;
            }
            let mut coeff = c * BigInt::from(e);
            if odd {
                let passed = if from_left { &m.0[..pos] } else { &m.0[pos + 1..] };
                let n_odd = passed.iter().filter(|&&(g, _)| self.alg.is_odd(g)).count();
                if n_odd % 2 == 1 {
                    coeff = -coeff;
                }
            }
            out.add_term(Monomial(rest), coeff);
        }
        out
    }

    /// Replaces every coefficient by `f(coefficient)`, dropping zeros.
    pub fn map_coefficients(&self, mut f: impl FnMut(&Rational) -> Rational) -> Self {
        let mut out = Self::zero(&self.alg);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Largest absolute coefficient, zero for the zero polynomial.
    pub fn max_abs_coefficient(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

impl fmt::Display for GradedPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.is_one() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{}", m.display(&self.alg))?;
            } else {
                write!(f, "{a}*{}", m.display(&self.alg))?;
            }
        }
        Ok(())
    }
}

impl Neg for &GradedPoly {
    type Output = GradedPoly;
    fn neg(self) -> GradedPoly {
        self.scale(&-Rational::one())
    }
}

impl Neg for GradedPoly {
    type Output = GradedPoly;
    fn neg(self) -> GradedPoly {
        -&self
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $try:ident) => {
        impl $tr for &GradedPoly {
            type Output = GradedPoly;
            /// Panics if the operands use different generator sets; use the
            /// `try_` form to get an error instead.
            fn $m(self, rhs: &GradedPoly) -> GradedPoly {
                self.$try(rhs).expect("generator-set mismatch")
            }
        }
        impl $tr for GradedPoly {
            type Output = GradedPoly;
            fn $m(self, rhs: GradedPoly) -> GradedPoly {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&GradedPoly> for GradedPoly {
            type Output = GradedPoly;
            fn $m(self, rhs: &GradedPoly) -> GradedPoly {
                (&self).$m(rhs)
            }
        }
        impl $tr<GradedPoly> for &GradedPoly {
            type Output = GradedPoly;
            fn $m(self, rhs: GradedPoly) -> GradedPoly {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

/// Degree-`degree` graded derivation acting from the left, determined by its
/// values on generators.
#[derive(Clone, Debug)]
pub struct Derivation {
    alg: Arc<Algebra>,
    degree: i32,
    images: BTreeMap<usize, GradedPoly>,
}

/// Outcome of [`Derivation::check_nilpotent`].
#[derive(Clone, Debug, PartialEq)]
pub enum Nilpotency {
    Nilpotent,
    /// `D(D(generator)) = residue`, for the first generator where it fails.
    Fails {
        generator: usize,
        residue: GradedPoly,
    },
}

impl Nilpotency {
    pub fn holds(&self) -> bool {
        matches!(self, Nilpotency::Nilpotent)
    }
}

impl Derivation {
    pub fn new(alg: &Arc<Algebra>, degree: i32) -> Self {
        Derivation {
            alg: alg.clone(),
            degree,
            images: BTreeMap::new(),
        }
    }

    pub fn from_images(
        alg: &Arc<Algebra>,
        degree: i32,
        images: impl IntoIterator<Item = (usize, GradedPoly)>,
    ) -> Result<Self, AlgebraError> {
        let mut d = Self::new(alg, degree);
        for (g, img) in images {
            d.set_image(g, img)?;
        }
        Ok(d)
    }

    pub fn set_image(&mut self, id: usize, image: GradedPoly) -> Result<(), AlgebraError> {
        if !same_algebra(&self.alg, image.algebra()) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let gen = self.alg.generator(id);
        let expected = gen.degree + self.degree;
        if !image.is_zero() {
            let found = image
                .degree()
                .ok_or_else(|| AlgebraError::Inhomogeneous(gen.name.clone()))?;
            if found != expected {
                return Err(AlgebraError::DegreeMismatch {
                    generator: gen.name.clone(),
                    expected,
                    found,
                });
            }
        }
        self.images.insert(id, image);
        Ok(())
    }

    /// Sends every generator without an image to zero.
    pub fn zero_elsewhere(mut self) -> Self {
        for g in 0..self.alg.len() {
            self.images.entry(g).or_insert_with(|| GradedPoly::zero(&self.alg));
        }
        self
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.alg
    }

    pub fn image(&self, id: usize) -> Option<&GradedPoly> {
        self.images.get(&id)
    }

    fn image_or_err(&self, id: usize) -> Result<&GradedPoly, AlgebraError> {
        self.images
            .get(&id)
            .ok_or_else(|| AlgebraError::MissingImage(self.alg.generator(id).name.clone()))
    }

    /// Extends by the graded Leibniz rule
    /// `D(ab) = D(a) b + (-1)^{|D||a|} a D(b)`.
    pub fn apply(&self, p: &GradedPoly) -> Result<GradedPoly, AlgebraError> {
        if !same_algebra(&self.alg, p.algebra()) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let alg = &self.alg;
        let d_odd = self.degree & 1 != 0;
        let mut out = GradedPoly::zero(alg);
        for (m, c) in p.terms() {
            let f = m.factors();
            for j in 0..f.len() {
                let (g, e) = f[j];
                let img = self.image_or_err(g)?;
                if img.is_zero() {
                    continue;
                }
                let prefix = Monomial(f[..j].to_vec());
                let mut suffix_f = f[j + 1..].to_vec();
                if e > 1 {
                    suffix_f.insert(0, (g, e - 1));
                }
                let suffix = Monomial(suffix_f);
                let mut coeff = c * BigInt::from(e);
                if d_odd && prefix.is_odd(alg) {
                    coeff = -coeff;
                }
                let left = GradedPoly::from_monomial(alg, prefix, coeff);
                let right = GradedPoly::from_monomial(alg, suffix, Rational::one());
                out = out + &(&(&left * img) * &right);
            }
        }
        Ok(out)
    }

    /// Graded commutator `D1 D2 - (-1)^{|D1||D2|} D2 D1`, evaluated on every
    /// generator.
    pub fn commutator(&self, other: &Derivation) -> Result<Derivation, AlgebraError> {
        if !same_algebra(&self.alg, &other.alg) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let sign_neg = (self.degree & other.degree & 1) == 0;
        let mut out = Derivation::new(&self.alg, self.degree + other.degree);
        for g in 0..self.alg.len() {
            let x = GradedPoly::generator(&self.alg, g);
            let a = self.apply(&other.apply(&x)?)?;
            let b = other.apply(&self.apply(&x)?)?;
            let img = if sign_neg { a - b } else { a + b };
            out.set_image(g, img)?;
        }
        Ok(out)
    }

    /// Checks `D^2 = 0` on generators, which suffices for odd `D` since `D^2`
    /// is then itself a derivation.
    pub fn check_nilpotent(&self) -> Result<Nilpotency, AlgebraError> {
        for g in 0..self.alg.len() {
            let x = GradedPoly::generator(&self.alg, g);
            let r = self.apply(&self.apply(&x)?)?;
            if !r.is_zero() {
                return Ok(Nilpotency::Fails {
                    generator: g,
                    residue: r,
                });
            }
        }
        Ok(Nilpotency::Nilpotent)
    }
}

/// A rule of a [`RelationSet`].
#[derive(Clone, Debug)]
pub enum Relation {
    /// Monomials divisible by this one vanish.
    Annihilate(Monomial),
    /// The monomial is replaced by a polynomial of lower grlex order.
    Rewrite(Monomial, GradedPoly),
}

/// Monomial relations applied innermost-leftmost until no rule fires.
#[derive(Clone, Debug)]
pub struct RelationSet {
    alg: Arc<Algebra>,
    rules: Vec<Relation>,
    budget: usize,
}

pub const DEFAULT_REDUCTION_BUDGET: usize = 1_000_000;

impl RelationSet {
    pub fn new(alg: &Arc<Algebra>) -> Self {
        RelationSet {
            alg: alg.clone(),
            rules: Vec::new(),
            budget: DEFAULT_REDUCTION_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn annihilate(&mut self, m: Monomial) {
        self.rules.push(Relation::Annihilate(m));
    }

    /// Adds `lhs -> rhs`. Every term of `rhs` must be grlex-smaller than
    /// `lhs` and share its degree, which guarantees termination.
    pub fn rewrite(&mut self, lhs: Monomial, rhs: GradedPoly) -> Result<(), AlgebraError> {
        if !same_algebra(&self.alg, rhs.algebra()) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let name = format!("{}", lhs.display(&self.alg));
        let deg = lhs.degree(&self.alg);
        for (m, _) in rhs.terms() {
            if m.grlex_cmp(&lhs) != Ordering::Less {
                return Err(AlgebraError::NonDecreasingRelation(name));
            }
            let found = m.degree(&self.alg);
            if found != deg {
                return Err(AlgebraError::DegreeMismatch {
                    generator: name,
                    expected: deg,
                    found,
                });
            }
        }
        self.rules.push(Relation::Rewrite(lhs, rhs));
        Ok(())
    }

    pub fn rules(&self) -> &[Relation] {
        &self.rules
    }

    pub fn reduce(&self, p: &GradedPoly) -> Result<GradedPoly, AlgebraError> {
        if !same_algebra(&self.alg, p.algebra()) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let alg = &self.alg;
        let mut work: Vec<(Monomial, Rational)> = p.terms().map(|(m, c)| (m.clone(), c.clone())).rev().collect();
        let mut out = GradedPoly::zero(alg);
        let mut steps = 0usize;
        while let Some((m, c)) = work.pop() {
            let hit = self.rules.iter().find(|r| match r {
                Relation::Annihilate(l) | Relation::Rewrite(l, _) => l.divides(&m),
            });
            let Some(rule) = hit else {
                out.add_term(m, c);
                continue;
            };
            steps += 1;
            if steps > self.budget {
                return Err(AlgebraError::BudgetExceeded(self.budget));
            }
            if let Relation::Rewrite(lhs, rhs) = rule {
                let rest = lhs.cofactor_in(&m);
                // lhs * rest = +/- m fixes the sign of the replacement
                let (_, neg) = lhs.mul(&rest, alg).expect("cofactor of a monomial");
                let c = if neg { -c } else { c };
                let repl = &GradedPoly::from_monomial(alg, Monomial::one(), c) * rhs;
                let repl = &repl * &GradedPoly::from_monomial(alg, rest, Rational::one());
                for (m2, c2) in repl.terms().rev() {
                    work.push((m2.clone(), c2.clone()));
                }
            }
        }
        Ok(out)
    }
}

/// Degree-preserving algebra morphism given on generators.
#[derive(Clone, Debug)]
pub struct Substitution {
    source: Arc<Algebra>,
    target: Arc<Algebra>,
    images: BTreeMap<usize, GradedPoly>,
}

impl Substitution {
    pub fn new(source: &Arc<Algebra>, target: &Arc<Algebra>) -> Self {
        Substitution {
            source: source.clone(),
            target: target.clone(),
            images: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, id: usize, image: GradedPoly) -> Result<(), AlgebraError> {
        if !same_algebra(&self.target, image.algebra()) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let gen = self.source.generator(id);
        if !image.is_zero() {
            let found = image
                .degree()
                .ok_or_else(|| AlgebraError::Inhomogeneous(gen.name.clone()))?;
            if found != gen.degree {
                return Err(AlgebraError::DegreeMismatch {
                    generator: gen.name.clone(),
                    expected: gen.degree,
                    found,
                });
            }
        }
        self.images.insert(id, image);
        Ok(())
    }

    fn image(&self, id: usize) -> Result<GradedPoly, AlgebraError> {
        if let Some(img) = self.images.get(&id) {
            return Ok(img.clone());
        }
        // unmapped generators go to the same-named generator of the target
        let gen = self.source.generator(id);
        match self.target.lookup(&gen.name) {
            Some(t) if self.target.degree(t) == gen.degree => Ok(GradedPoly::generator(&self.target, t)),
            _ => Err(AlgebraError::MissingImage(gen.name.clone())),
        }
    }

    pub fn apply(&self, p: &GradedPoly) -> Result<GradedPoly, AlgebraError> {
        if !same_algebra(&self.source, p.algebra()) {
            return Err(AlgebraError::GeneratorMismatch);
        }
        let mut out = GradedPoly::zero(&self.target);
        for (m, c) in p.terms() {
            let mut t = GradedPoly::constant(&self.target, c.clone());
            for &(g, e) in m.factors() {
                t = &t * &self.image(g)?.pow(e);
            }
            out = out + t;
        }
        Ok(out)
    }
}

struct PolyParser<'a> {
    alg: &'a Arc<Algebra>,
    src: &'a [u8],
    pos: usize,
}

impl<'a> PolyParser<'a> {
    fn new(alg: &'a Arc<Algebra>, text: &'a str) -> Self {
        PolyParser {
            alg,
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> AlgebraError {
        AlgebraError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
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

    fn parse(mut self) -> Result<GradedPoly, AlgebraError> {
        let p = self.expr()?;
        if self.peek().is_some() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(p)
    }

    fn expr(&mut self) -> Result<GradedPoly, AlgebraError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<GradedPoly, AlgebraError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc * self.factor()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let n = self.integer()?;
                    if n.is_zero() {
                        return Err(self.err("division by zero"));
                    }
                    acc = acc.scale(&Rational::from_integer(n).recip());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<GradedPoly, AlgebraError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.factor()
            }
            _ => {
                let base = self.primary()?;
                if self.peek() == Some(b'^') {
                    self.pos += 1;
                    self.skip_ws();
                    let e = self.integer()?;
                    let e: u32 = e.try_into().map_err(|_| self.err("exponent out of range"))?;
                    Ok(base.pow(e))
                } else {
                    Ok(base)
                }
            }
        }
    }

    fn integer(&mut self) -> Result<BigInt, AlgebraError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        let s = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        s.parse::<BigInt>().map_err(|_| self.err("bad integer"))
    }

    fn primary(&mut self) -> Result<GradedPoly, AlgebraError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let p = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(p)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(GradedPoly::constant(self.alg, Rational::from_integer(n)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                match self.alg.lookup(name) {
                    Some(id) => Ok(GradedPoly::generator(self.alg, id)),
                    None => {
                        self.pos = start;
                        Err(self.err(&format!("unknown generator `{name}`")))
                    }
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}
