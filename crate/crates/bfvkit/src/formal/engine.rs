//! Rule-driven normalisation with a step trace.
//!
//! A step picks the highest-priority rule of the active [`RuleSet`] that
//! matches anywhere in the tree, applies it at the first matching node in
//! pre-order, and records the whole expression before and after. Nothing
//! else rewrites an expression.
//!
//! Canonical form: `0`, a single term, or a sum of at least two terms with
//! distinct, sorted factor lists. A term is an atom (symbol or operator
//! application) or a product whose only numeric factor leads and is not `1`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::{One, Zero};

use super::expr::{symbol_id, Expr, Op, SYMBOLS};
use super::parse::parse_expression;
use super::FormalError;
use crate::graded::{rat, Rational};

pub const DEFAULT_STEP_BUDGET: usize = 100_000;

/// Rewrite rules, in priority order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    /// Drops zero summands; products and operator applications with a zero
    /// factor or argument vanish.
    Zero,
    /// Sums and products of length zero or one.
    Unwrap,
    /// Collects numeric factors into one leading coefficient.
    NumFold,
    /// Associativity of sums and products.
    Flatten,
    /// `Q(Q(s)) = 0` for a symbol `s`.
    QSquareAxiom,
    /// Replaces `Q(s)` by the declared image of `s`.
    QImage,
    /// `Q` of a sum or of a scaled product.
    QLinear,
    /// `Q(a b) = Q(a) b + (-1)^|a| a Q(b)`.
    QLeibniz,
    /// `psiN xiN = psiD xiN = 0`.
    Ideal,
    /// `sharp(psiD) xiN = 0`.
    SharpIdeal,
    /// `chiN xiN = psiN`, `chiD xiN = psiD`.
    PsiIntro,
    /// `LieHalf(V, f) = Lie(V, f) + 1/2 Div(V) f`.
    HalfDensity,
    /// Products distribute over sums.
    Distribute,
    /// Operators other than `Q` are linear in every argument.
    LinearOp,
    /// `Lie(V, a b) = Lie(V, a) b + (-1)^{|V||a|} a Lie(V, b)`.
    LieLeibniz,
    /// Sorts the factors of a product, with Koszul signs.
    KoszulSort,
    /// A repeated odd factor kills a product.
    OddNilpotent,
    /// Sorts the terms of a sum and merges equal ones.
    Collect,
    /// Reads `Lie(V, a) b R + (-1)^{|V||a|} a Lie(V, b) R` backwards as
    /// `Lie(V, a b) R` when `a b` is a relation pattern.
    Recombine,
    /// `Lie(V, xiN) xiN = Lie(V xiN, xiN)` for `V = sharp(..)`.
    LieAbsorb,
    /// `sharp(a) xiN = sharp(a xiN)`.
    SharpScalar,
}

impl Rule {
    pub const ALL: &'static [Rule] = &[
        Rule::Zero,
        Rule::Unwrap,
        Rule::NumFold,
        Rule::Flatten,
        Rule::QSquareAxiom,
        Rule::QImage,
        Rule::QLinear,
        Rule::QLeibniz,
        Rule::Ideal,
        Rule::SharpIdeal,
        Rule::PsiIntro,
        Rule::HalfDensity,
        Rule::Distribute,
        Rule::LinearOp,
        Rule::LieLeibniz,
        Rule::KoszulSort,
        Rule::OddNilpotent,
        Rule::Collect,
        Rule::Recombine,
        Rule::LieAbsorb,
        Rule::SharpScalar,
    ];

    pub const STRUCTURAL: &'static [Rule] = &[
        Rule::Zero,
        Rule::Unwrap,
        Rule::NumFold,
        Rule::Flatten,
        Rule::Distribute,
        Rule::LinearOp,
        Rule::LieLeibniz,
        Rule::KoszulSort,
        Rule::OddNilpotent,
        Rule::Collect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Zero => "zero",
            Rule::Unwrap => "unwrap",
            Rule::NumFold => "num-fold",
            Rule::Flatten => "flatten",
            Rule::QSquareAxiom => "q-square-axiom",
            Rule::QImage => "q-image",
            Rule::QLinear => "q-linear",
            Rule::QLeibniz => "q-leibniz",
            Rule::Ideal => "ideal",
            Rule::SharpIdeal => "sharp-ideal",
            Rule::PsiIntro => "psi-intro",
            Rule::HalfDensity => "half-density",
            Rule::Distribute => "distribute",
            Rule::LinearOp => "linear-op",
            Rule::LieLeibniz => "lie-leibniz",
            Rule::KoszulSort => "koszul-sort",
            Rule::OddNilpotent => "odd-nilpotent",
            Rule::Collect => "collect",
            Rule::Recombine => "leibniz-recombine",
            Rule::LieAbsorb => "lie-absorb",
            Rule::SharpScalar => "sharp-scalar",
        }
    }

    pub fn from_name(s: &str) -> Option<Rule> {
        Rule::ALL.iter().copied().find(|r| r.name() == s)
    }

    /// Relation rules describe the ghost relations, not the algebra; they
    /// stay off inside `Q(...)` so that `Q` is applied to the product itself.
    fn is_relation(self) -> bool {
        matches!(self, Rule::Ideal | Rule::SharpIdeal | Rule::PsiIntro | Rule::Recombine)
    }
}

/// Images of the symbols under a degree-one derivation `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct QDefinition {
    name: String,
    images: Vec<Option<Expr>>,
}

impl QDefinition {
    pub fn new(name: &str) -> Self {
        QDefinition {
            name: name.to_string(),
            images: alloc::vec![None; SYMBOLS.len()],
        }
    }

    pub fn from_table(name: &str, table: &[(&str, &str)]) -> Result<Self, FormalError> {
        let mut q = QDefinition::new(name);
        for (s, img) in table {
            q.define(s, img)?;
        }
        Ok(q)
    }

    /// Parses `image` and checks that it is one degree above `symbol`.
    pub fn define(&mut self, symbol: &str, image: &str) -> Result<(), FormalError> {
        let id =
            symbol_id(symbol).ok_or_else(|| FormalError::Definition(alloc::format!("unknown symbol `{symbol}`")))?;
        let e = parse_expression(image)?;
        if !e.is_zero() && e.degree() != SYMBOLS[id].degree + 1 {
            return Err(FormalError::Degree(alloc::format!(
                "Q({symbol}) must have degree {}, `{image}` has degree {}",
                SYMBOLS[id].degree + 1,
                e.degree()
            )));
        }
        self.images[id] = Some(e);
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn image(&self, symbol: usize) -> Option<&Expr> {
        self.images.get(symbol).and_then(Option::as_ref)
    }

    pub fn defined(&self) -> impl Iterator<Item = (&'static str, &Expr)> {
        self.images
            .iter()
            .enumerate()
            .filter_map(|(k, e)| e.as_ref().map(|e| (SYMBOLS[k].name, e)))
    }
}

#[derive(Clone, Debug)]
pub struct RuleSet {
    name: String,
    rules: BTreeSet<Rule>,
    q: Option<QDefinition>,
    flip_even_leibniz: bool,
    budget: usize,
}

impl RuleSet {
    pub fn new(name: &str, rules: &[Rule]) -> Self {
        RuleSet {
            name: name.to_string(),
            rules: rules.iter().copied().collect(),
            q: None,
            flip_even_leibniz: false,
            budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn structural(name: &str) -> Self {
        RuleSet::new(name, Rule::STRUCTURAL)
    }

    pub fn with(mut self, rule: Rule) -> Self {
        self.rules.insert(rule);
        self
    }

    pub fn without(mut self, rule: Rule) -> Self {
        self.rules.remove(&rule);
        self
    }

    pub fn with_q(mut self, q: QDefinition) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Deliberately wrong variant of `q-leibniz`: the sign is flipped when
    /// the left factor is even. Used as a negative control.
    pub fn with_flipped_leibniz_sign(mut self) -> Self {
        self.flip_even_leibniz = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn contains(&self, rule: Rule) -> bool {
        self.rules.contains(&rule)
    }

    /// Active rules in priority order.
    pub fn rules(&self) -> impl Iterator<Item = Rule> + '_ {
        self.rules.iter().copied()
    }

    pub fn q(&self) -> Option<&QDefinition> {
        self.q.as_ref()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub rule: Rule,
    pub before: Expr,
    pub after: Expr,
}

#[derive(Clone, Debug)]
pub struct Normalized {
    pub expr: Expr,
    pub trace: Vec<TraceStep>,
}

impl Normalized {
    pub fn is_zero(&self) -> bool {
        self.expr.is_zero()
    }

    /// Distinct rule names used, in order of first use.
    pub fn rules_used(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for s in &self.trace {
            if !out.contains(&s.rule.name()) {
                out.push(s.rule.name());
            }
        }
        out
    }
}

pub fn normalize(e: &Expr, rs: &RuleSet) -> Result<Normalized, FormalError> {
    e.check()?;
    let mut cur = e.clone();
    let mut trace = Vec::new();
    while let Some((rule, next)) = step(&cur, rs) {
        if trace.len() >= rs.budget {
            return Err(FormalError::Budget(rs.budget));
        }
        trace.push(TraceStep {
            rule,
            before: core::mem::replace(&mut cur, next.clone()),
            after: next,
        });
    }
    Ok(Normalized { expr: cur, trace })
}

/// One rewriting step, or `None` if no active rule applies.
pub fn step(e: &Expr, rs: &RuleSet) -> Option<(Rule, Expr)> {
    rs.rules().find_map(|r| apply_first(e, r, rs, false).map(|x| (r, x)))
}

type Rebuild = fn(Vec<Expr>, &Expr) -> Expr;

fn apply_first(e: &Expr, rule: Rule, rs: &RuleSet, under_q: bool) -> Option<Expr> {
    if !(under_q && rule.is_relation()) {
        if let Some(x) = try_rule(rule, e, rs) {
            return Some(x);
        }
    }
    let (children, rebuild): (&Vec<Expr>, Rebuild) = match e {
        Expr::Add(v) => (v, |v, _| Expr::Add(v)),
        Expr::Mul(v) => (v, |v, _| Expr::Mul(v)),
        Expr::Op(_, v) => (v, |v, orig| match orig {
            Expr::Op(op, _) => Expr::Op(*op, v),
            _ => unreachable!(),
        }),
        _ => return None,
    };
    let inner_q = under_q || matches!(e, Expr::Op(Op::Q, _));
    for (k, c) in children.iter().enumerate() {
        if let Some(x) = apply_first(c, rule, rs, inner_q) {
            let mut v = children.clone();
            v[k] = x;
            return Some(rebuild(v, e));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// helpers

fn num(c: Rational) -> Expr {
    Expr::Num(c)
}

fn sym_is(e: &Expr, name: &str) -> bool {
    matches!(e, Expr::Sym(s) if SYMBOLS[*s].name == name)
}

fn sign(neg: bool) -> Rational {
    if neg {
        -Rational::one()
    } else {
        Rational::one()
    }
}

/// Parity of the Koszul sign for moving a factor of degree `deg` past `others`.
fn passes(deg: i32, others: &[Expr]) -> bool {
    deg & 1 != 0 && others.iter().map(Expr::degree).sum::<i32>() & 1 != 0
}

/// Coefficient and non-numeric factors of a term.
fn split_term(e: &Expr) -> (Rational, Vec<Expr>) {
    match e {
        Expr::Num(c) => (c.clone(), Vec::new()),
        Expr::Mul(v) => {
            let mut c = Rational::one();
            let mut atoms = Vec::new();
            for f in v {
                match f {
                    Expr::Num(x) => c *= x,
                    other => atoms.push(other.clone()),
                }
            }
            (c, atoms)
        }
        other => (Rational::one(), alloc::vec![other.clone()]),
    }
}

fn make_term(c: Rational, mut atoms: Vec<Expr>) -> Expr {
    if c.is_zero() {
        return Expr::zero();
    }
    if atoms.is_empty() {
        return num(c);
    }
    if c.is_one() {
        if atoms.len() == 1 {
            return atoms.pop().expect("one atom");
        }
        return Expr::Mul(atoms);
    }
    atoms.insert(0, num(c));
    Expr::Mul(atoms)
}

fn product(factors: Vec<Expr>) -> Expr {
    match factors.len() {
        0 => num(Rational::one()),
        1 => factors.into_iter().next().expect("one factor"),
        _ => Expr::Mul(factors),
    }
}

/// Sorts factors, returning whether the Koszul sign is negative.
fn koszul_sort(atoms: &mut [Expr]) -> bool {
    let mut neg = false;
    for i in 1..atoms.len() {
        let mut j = i;
        while j > 0 && atoms[j - 1] > atoms[j] {
            if atoms[j - 1].is_odd() && atoms[j].is_odd() {
                neg = !neg;
            }
            atoms.swap(j - 1, j);
            j -= 1;
        }
    }
    neg
}

/// Canonical key and sign of a product of atoms; `None` if it vanishes
/// because an odd atom repeats.
fn canonical(mut atoms: Vec<Expr>) -> Option<(Rational, Vec<Expr>)> {
    let neg = koszul_sort(&mut atoms);
    if atoms.windows(2).any(|w| w[0] == w[1] && w[0].is_odd()) {
        return None;
    }
    Some((sign(neg), atoms))
}

/// Moves `v[from]` to sit immediately left of `v[to]` (or right of it when
/// `right` is set) and returns the new order with the sign of the move.
fn move_next_to(v: &[Expr], from: usize, to: usize, right: bool) -> (bool, Vec<Expr>, usize) {
    let deg = v[from].degree();
    let mut w = v.to_vec();
    let x = w.remove(from);
    let target = if to > from { to - 1 } else { to };
    let insert_at = if right { target + 1 } else { target };
    let passed: Vec<Expr> = if from < insert_at {
        v[from + 1..=insert_at].to_vec()
    } else {
        v[insert_at..from].to_vec()
    };
    w.insert(insert_at, x);
    (passes(deg, &passed), w, insert_at)
}

// ---------------------------------------------------------------------------
// rules

fn try_rule(rule: Rule, e: &Expr, rs: &RuleSet) -> Option<Expr> {
    match rule {
        Rule::Zero => zero(e),
        Rule::Unwrap => unwrap(e),
        Rule::NumFold => num_fold(e),
        Rule::Flatten => flatten(e),
        Rule::QSquareAxiom => match e {
            Expr::Op(Op::Q, a) => match &a[0] {
                Expr::Op(Op::Q, b) if matches!(b[0], Expr::Sym(_)) => Some(Expr::zero()),
                _ => None,
            },
            _ => None,
        },
        Rule::QImage => match e {
            Expr::Op(Op::Q, a) => match &a[0] {
                Expr::Sym(s) => rs.q.as_ref()?.image(*s).cloned(),
                _ => None,
            },
            _ => None,
        },
        Rule::QLinear => q_linear(e),
        Rule::QLeibniz => q_leibniz(e, rs.flip_even_leibniz),
        Rule::Ideal => match e {
            Expr::Mul(v)
                if v.iter().any(|f| sym_is(f, "psiN") || sym_is(f, "psiD")) && v.iter().any(|f| sym_is(f, "xiN")) =>
            {
                Some(Expr::zero())
            }
            _ => None,
        },
        Rule::SharpIdeal => match e {
            Expr::Mul(v) if v.iter().any(is_sharp_psi) && v.iter().any(|f| sym_is(f, "xiN")) => Some(Expr::zero()),
            _ => None,
        },
        Rule::PsiIntro => psi_intro(e),
        Rule::HalfDensity => match e {
            Expr::Op(Op::LieHalf, a) => Some(Expr::Add(alloc::vec![
                Expr::Op(Op::Lie, a.clone()),
                Expr::Mul(alloc::vec![
                    num(rat(1, 2)),
                    Expr::Op(Op::Div, alloc::vec![a[0].clone()]),
                    a[1].clone(),
                ]),
            ])),
            _ => None,
        },
        Rule::Distribute => distribute(e),
        Rule::LinearOp => linear_op(e),
        Rule::LieLeibniz => lie_leibniz(e),
        Rule::KoszulSort => sort_product(e),
        Rule::OddNilpotent => match e {
            Expr::Mul(v) => {
                let odd: Vec<&Expr> = v.iter().filter(|f| f.is_odd()).collect();
                let repeated = odd.iter().enumerate().any(|(i, a)| odd[i + 1..].iter().any(|b| a == b));
                repeated.then(Expr::zero)
            }
            _ => None,
        },
        Rule::Collect => collect(e),
        Rule::Recombine => recombine(e, rs),
        Rule::LieAbsorb => lie_absorb(e),
        Rule::SharpScalar => sharp_scalar(e),
    }
}

fn is_sharp_psi(e: &Expr) -> bool {
    matches!(e, Expr::Op(Op::Sharp, a) if sym_is(&a[0], "psiD"))
}

fn zero(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Mul(_) | Expr::Op(..) if e.vanishes() => Some(Expr::zero()),
        Expr::Add(v) if v.iter().any(Expr::vanishes) => {
            Some(Expr::Add(v.iter().filter(|t| !t.vanishes()).cloned().collect()))
        }
        _ => None,
    }
}

fn unwrap(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Add(v) if v.is_empty() => Some(Expr::zero()),
        Expr::Mul(v) if v.is_empty() => Some(num(Rational::one())),
        Expr::Add(v) | Expr::Mul(v) if v.len() == 1 => Some(v[0].clone()),
        _ => None,
    }
}

fn num_fold(e: &Expr) -> Option<Expr> {
    let Expr::Mul(v) = e else { return None };
    let nums: Vec<usize> = (0..v.len()).filter(|&k| matches!(v[k], Expr::Num(_))).collect();
    let needs = match nums.as_slice() {
        [] => false,
        [0] => matches!(&v[0], Expr::Num(c) if c.is_one()),
        _ => true,
    };
    if !needs {
        return None;
    }
    let (c, atoms) = split_term(e);
    Some(make_term(c, atoms))
}

fn flatten(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Add(v) if v.iter().any(|t| matches!(t, Expr::Add(_))) => {
            let mut out = Vec::new();
            for t in v {
                match t {
                    Expr::Add(w) => out.extend(w.iter().cloned()),
                    other => out.push(other.clone()),
                }
            }
            Some(Expr::Add(out))
        }
        Expr::Mul(v) if v.iter().any(|t| matches!(t, Expr::Mul(_))) => {
            let mut out = Vec::new();
            for t in v {
                match t {
                    Expr::Mul(w) => out.extend(w.iter().cloned()),
                    other => out.push(other.clone()),
                }
            }
            Some(Expr::Mul(out))
        }
        _ => None,
    }
}

fn q_of(e: Expr) -> Expr {
    Expr::Op(Op::Q, alloc::vec![e])
}

fn q_linear(e: &Expr) -> Option<Expr> {
    let Expr::Op(Op::Q, a) = e else { return None };
    match &a[0] {
        Expr::Add(v) => Some(Expr::Add(v.iter().cloned().map(q_of).collect())),
        Expr::Num(_) => Some(Expr::zero()),
        Expr::Mul(v) => match v.first() {
            Some(Expr::Num(c)) => Some(Expr::Mul(alloc::vec![num(c.clone()), q_of(product(v[1..].to_vec())),])),
            _ => None,
        },
        _ => None,
    }
}

fn q_leibniz(e: &Expr, flip_even: bool) -> Option<Expr> {
    let Expr::Op(Op::Q, a) = e else { return None };
    let Expr::Mul(v) = &a[0] else { return None };
    if v.len() < 2 || matches!(v[0], Expr::Num(_)) {
        return None;
    }
    let first = &v[0];
    let rest = v[1..].to_vec();
    let mut neg = first.is_odd();
    if flip_even && !first.is_odd() {
        neg = !neg;
    }
    let mut t1 = alloc::vec![q_of(first.clone())];
    t1.extend(rest.iter().cloned());
    let t2 = alloc::vec![num(sign(neg)), first.clone(), q_of(product(rest))];
    Some(Expr::Add(alloc::vec![Expr::Mul(t1), Expr::Mul(t2)]))
}

/// Moves the first `chi` next to the first `xiN` and fuses them.
fn psi_intro(e: &Expr) -> Option<Expr> {
    let Expr::Mul(v) = e else { return None };
    let x = v.iter().position(|f| sym_is(f, "xiN"))?;
    let (c, psi) = v.iter().enumerate().find_map(|(k, f)| {
        if sym_is(f, "chiN") {
            Some((k, "psiN"))
        } else if sym_is(f, "chiD") {
            Some((k, "psiD"))
        } else {
            None
        }
    })?;
    let (neg, mut w, at) = move_next_to(v, c, x, false);
    w.remove(at + 1);
    w[at] = Expr::Sym(symbol_id(psi).expect("built-in"));
    if neg {
        w.insert(0, num(-Rational::one()));
    }
    Some(product(w))
}

fn distribute(e: &Expr) -> Option<Expr> {
    let Expr::Mul(v) = e else { return None };
    let k = v.iter().position(|f| matches!(f, Expr::Add(_)))?;
    let Expr::Add(terms) = &v[k] else { unreachable!() };
    Some(Expr::Add(
        terms
            .iter()
            .map(|t| {
                let mut w = v.clone();
                w[k] = t.clone();
                Expr::Mul(w)
            })
            .collect(),
    ))
}

fn linear_op(e: &Expr) -> Option<Expr> {
    let Expr::Op(op, args) = e else { return None };
    if *op == Op::Q {
        return None;
    }
    for (k, a) in args.iter().enumerate() {
        match a {
            Expr::Add(terms) if terms.len() >= 2 => {
                return Some(Expr::Add(
                    terms
                        .iter()
                        .map(|t| {
                            let mut w = args.clone();
                            w[k] = t.clone();
                            Expr::Op(*op, w)
                        })
                        .collect(),
                ));
            }
            Expr::Mul(v) => {
                if let Some(Expr::Num(c)) = v.first() {
                    let mut w = args.clone();
                    w[k] = product(v[1..].to_vec());
                    return Some(Expr::Mul(alloc::vec![num(c.clone()), Expr::Op(*op, w)]));
                }
            }
            _ => {}
        }
    }
    None
}

fn lie_leibniz(e: &Expr) -> Option<Expr> {
    let Expr::Op(Op::Lie, args) = e else { return None };
    let Expr::Mul(v) = &args[1] else { return None };
    if v.len() < 2 || matches!(v[0], Expr::Num(_)) {
        return None;
    }
    let field = &args[0];
    let a = &v[0];
    let rest = v[1..].to_vec();
    let lie = |x: Expr| Expr::Op(Op::Lie, alloc::vec![field.clone(), x]);
    let mut t1 = alloc::vec![lie(a.clone())];
    t1.extend(rest.iter().cloned());
    let neg = field.is_odd() && a.is_odd();
    let t2 = alloc::vec![num(sign(neg)), a.clone(), lie(product(rest))];
    Some(Expr::Add(alloc::vec![Expr::Mul(t1), Expr::Mul(t2)]))
}

fn sort_product(e: &Expr) -> Option<Expr> {
    let Expr::Mul(v) = e else { return None };
    let start = usize::from(matches!(v.first(), Some(Expr::Num(_))));
    let atoms = &v[start..];
    if atoms.windows(2).all(|w| w[0] <= w[1]) {
        return None;
    }
    let mut sorted = atoms.to_vec();
    let neg = koszul_sort(&mut sorted);
    let mut c = match v.first() {
        Some(Expr::Num(c)) => c.clone(),
        _ => Rational::one(),
    };
    if neg {
        c = -c;
    }
    Some(make_term(c, sorted))
}

fn collect(e: &Expr) -> Option<Expr> {
    let Expr::Add(v) = e else { return None };
    let split: Vec<(Rational, Vec<Expr>)> = v.iter().map(split_term).collect();
    let ordered = split.windows(2).all(|w| w[0].1 < w[1].1);
    if ordered && split.iter().all(|(c, _)| !c.is_zero()) {
        return None;
    }
    let mut acc: BTreeMap<Vec<Expr>, Rational> = BTreeMap::new();
    for (c, k) in split {
        *acc.entry(k).or_insert_with(Rational::zero) += c;
    }
    Some(Expr::Add(
        acc.into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| make_term(c, k))
            .collect(),
    ))
}

/// `(a, b)` pairs whose product a relation rule in `rs` can consume.
fn recombine_patterns(rs: &RuleSet) -> Vec<(&'static str, &'static str)> {
    let mut out = Vec::new();
    if rs.contains(Rule::Ideal) {
        out.push(("psiN", "xiN"));
        out.push(("psiD", "xiN"));
    }
    if rs.contains(Rule::PsiIntro) {
        out.push(("chiN", "xiN"));
        out.push(("chiD", "xiN"));
    }
    out
}

fn recombine(e: &Expr, rs: &RuleSet) -> Option<Expr> {
    let Expr::Add(v) = e else { return None };
    let patterns = recombine_patterns(rs);
    if patterns.is_empty() {
        return None;
    }
    let terms: Vec<(Rational, Vec<Expr>)> = v.iter().map(split_term).collect();
    for (ti, (c, atoms)) in terms.iter().enumerate() {
        for (p, atom) in atoms.iter().enumerate() {
            let Expr::Op(Op::Lie, la) = atom else { continue };
            let Some(&(_, bn)) = patterns.iter().find(|(an, _)| sym_is(&la[1], an)) else {
                continue;
            };
            let Some(q) = (0..atoms.len()).find(|&q| q != p && sym_is(&atoms[q], bn)) else {
                continue;
            };
            let field = &la[0];
            let a = la[1].clone();
            let b = atoms[q].clone();
            let rest: Vec<Expr> = (0..atoms.len())
                .filter(|&k| k != p && k != q)
                .map(|k| atoms[k].clone())
                .collect();
            let lie = |x: Expr| Expr::Op(Op::Lie, alloc::vec![field.clone(), x]);

            let mut m1 = alloc::vec![atom.clone(), b.clone()];
            m1.extend(rest.iter().cloned());
            let mut m2 = alloc::vec![a.clone(), lie(b.clone())];
            m2.extend(rest.iter().cloned());
            let Some((s1, k1)) = canonical(m1) else { continue };
            let mut own = atoms.clone();
            let own_sign = sign(koszul_sort(&mut own));
            if k1 != own {
                continue;
            }
            // c * atoms = c * own_sign * k1 = lambda * s1 * k1
            let lambda = c * &own_sign / &s1;
            let Some((s2, k2)) = canonical(m2) else { continue };
            let leib = sign(field.is_odd() && a.is_odd());
            let expected = &lambda * &leib * &s2;
            let partner = terms.iter().enumerate().find(|(tj, (_, at))| {
                if *tj == ti {
                    return false;
                }
                let mut s = at.clone();
                koszul_sort(&mut s);
                s == k2
            });
            let Some((tj, (cj, at))) = partner else { continue };
            let mut sorted = at.clone();
            let pj = sign(koszul_sort(&mut sorted));
            if cj * &pj != expected {
                continue;
            }
            let mut fused = alloc::vec![lie(Expr::Mul(alloc::vec![a, b]))];
            fused.extend(rest);
            let mut out: Vec<Expr> = Vec::new();
            for (k, t) in v.iter().enumerate() {
                if k == ti {
                    out.push(make_term(lambda.clone(), fused.clone()));
                } else if k != tj {
                    out.push(t.clone());
                }
            }
            return Some(Expr::Add(out));
        }
    }
    None
}

fn lie_absorb(e: &Expr) -> Option<Expr> {
    let Expr::Mul(v) = e else { return None };
    for (i, f) in v.iter().enumerate() {
        let Expr::Op(Op::Lie, la) = f else { continue };
        if !matches!(la[0], Expr::Op(Op::Sharp, _)) || !sym_is(&la[1], "xiN") {
            continue;
        }
        let Some(j) = (0..v.len()).find(|&j| j != i && sym_is(&v[j], "xiN")) else {
            continue;
        };
        let (neg, mut w, at) = move_next_to(v, j, i, true);
        // `at` holds xiN, the Lie factor sits just before it
        w.remove(at);
        w[at - 1] = Expr::Op(
            Op::Lie,
            alloc::vec![Expr::Mul(alloc::vec![la[0].clone(), la[1].clone()]), la[1].clone()],
        );
        if neg {
            w.insert(0, num(-Rational::one()));
        }
        return Some(product(w));
    }
    None
}

fn sharp_scalar(e: &Expr) -> Option<Expr> {
    let Expr::Mul(v) = e else { return None };
    let i = v.iter().position(|f| matches!(f, Expr::Op(Op::Sharp, _)))?;
    let j = v.iter().position(|f| sym_is(f, "xiN"))?;
    let (neg, mut w, at) = move_next_to(v, j, i, true);
    w.remove(at);
    let Expr::Op(Op::Sharp, a) = &w[at - 1] else {
        unreachable!()
    };
    w[at - 1] = Expr::Op(
        Op::Sharp,
        alloc::vec![Expr::Mul(alloc::vec![
            a[0].clone(),
            Expr::Sym(symbol_id("xiN").expect("built-in"))
        ])],
    );
    if neg {
        w.insert(0, num(-Rational::one()));
    }
    Some(product(w))
}
