//! Finite-dimensional BFV construction for polynomial first-class constraints.
//!
//! The extended phase space has canonical pairs `(x_i, p_i)` and ghost pairs
//! `(c_a, b_a)` of degrees `+1` and `-1`. The bracket is
//!
//! ```text
//! {F,G} = sum_i (dF/dx_i dG/dp_i - dF/dp_i dG/dx_i)
//!       + sum_a (F <d/dc_a)(d/db_a> G) + (F <d/db_a)(d/dc_a> G)
//! ```
//!
//! with right derivatives on `F` and left derivatives on `G`, so that
//! `{c_a, b_a} = {b_a, c_a} = 1` and `{S, .}` is a left derivation of degree
//! `|S|`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::graded::{rat, Algebra, AlgebraError, Derivation, GradedPoly, Monomial, Rational};
use crate::linalg::SparseSolver;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BfvError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("invalid constraint data: {0}")]
    Invalid(String),
    #[error("constraints are not first class; {0} bracket residue(s) are nonzero")]
    NotFirstClass(usize),
    #[error("no homotopy solution at order {order}: the Koszul differential does not reach the obstruction on the bounded basis")]
    NonRegular { order: usize },
    #[error("master equation unsolved after {0} orders")]
    OrderBudget(usize),
}

/// Generator layout of the extended phase space: `x1..xn, p1..pn, c1..cm,
/// b1..bm`.
#[derive(Clone, Debug)]
pub struct PhaseSpace {
    alg: Arc<Algebra>,
    n: usize,
    m: usize,
}

impl PhaseSpace {
    pub fn new(n: usize, m: usize) -> Self {
        let mut decls: Vec<(String, i32)> = Vec::new();
        for i in 1..=n {
            decls.push((format!("x{i}"), 0));
        }
        for i in 1..=n {
            decls.push((format!("p{i}"), 0));
        }
        for a in 1..=m {
            decls.push((format!("c{a}"), 1));
        }
        for a in 1..=m {
            decls.push((format!("b{a}"), -1));
        }
        let alg = Algebra::new(&decls).expect("generated names are distinct");
        PhaseSpace { alg, n, m }
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.alg
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x(&self, i: usize) -> usize {
        i
    }

    pub fn p(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn c(&self, a: usize) -> usize {
        2 * self.n + a
    }

    pub fn b(&self, a: usize) -> usize {
        2 * self.n + self.m + a
    }

    pub fn gen(&self, id: usize) -> GradedPoly {
        GradedPoly::generator(&self.alg, id)
    }

    pub fn parse(&self, text: &str) -> Result<GradedPoly, AlgebraError> {
        GradedPoly::parse(&self.alg, text)
    }

    fn is_b(&self, id: usize) -> bool {
        id >= 2 * self.n + self.m
    }

    fn is_c(&self, id: usize) -> bool {
        id >= 2 * self.n && id < 2 * self.n + self.m
    }

    pub fn b_degree(&self, m: &Monomial) -> u32 {
        m.factors()
            .iter()
            .filter(|&&(g, _)| self.is_b(g))
            .map(|&(_, e)| e)
            .sum()
    }

    pub fn c_degree(&self, m: &Monomial) -> u32 {
        m.factors()
            .iter()
            .filter(|&&(g, _)| self.is_c(g))
            .map(|&(_, e)| e)
            .sum()
    }

    pub fn body_degree(&self, m: &Monomial) -> u32 {
        m.factors()
            .iter()
            .filter(|&&(g, _)| g < 2 * self.n)
            .map(|&(_, e)| e)
            .sum()
    }

    pub fn is_body(&self, p: &GradedPoly) -> bool {
        p.terms().all(|(m, _)| m.factors().iter().all(|&(g, _)| g < 2 * self.n))
    }

    /// The bracket restricted to the canonical pairs.
    pub fn body_bracket(&self, f: &GradedPoly, g: &GradedPoly) -> GradedPoly {
        let mut out = GradedPoly::zero(&self.alg);
        for i in 0..self.n {
            let (x, p) = (self.x(i), self.p(i));
            out = out + f.right_partial(x) * g.left_partial(p) - f.right_partial(p) * g.left_partial(x);
        }
        out
    }

    pub fn bracket(&self, f: &GradedPoly, g: &GradedPoly) -> GradedPoly {
        let mut out = self.body_bracket(f, g);
        for a in 0..self.m {
            let (c, b) = (self.c(a), self.b(a));
            out = out + f.right_partial(c) * g.left_partial(b) + f.right_partial(b) * g.left_partial(c);
        }
        out
    }

    /// `{S, .}` as a derivation of degree `|S|`.
    pub fn hamiltonian_derivation(&self, s: &GradedPoly) -> Result<Derivation, AlgebraError> {
        let deg = s.degree().unwrap_or(1);
        let mut d = Derivation::new(&self.alg, deg);
        for g in 0..self.alg.len() {
            d.set_image(g, self.bracket(s, &self.gen(g)))?;
        }
        Ok(d)
    }

    /// All monomials in the canonical variables of total degree at most
    /// `bound`.
    pub fn body_monomials(&self, bound: u32) -> Vec<Monomial> {
        fn rec(var: usize, nvars: usize, left: u32, cur: &mut Vec<(usize, u32)>, out: &mut Vec<Monomial>) {
            if var == nvars {
                out.push(Monomial::from_sorted(cur.clone()));
                return;
            }
            rec(var + 1, nvars, left, cur, out);
            for e in 1..=left {
                cur.push((var, e));
                rec(var + 1, nvars, left - e, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, 2 * self.n, bound, &mut Vec::new(), &mut out);
        out.sort_by(|a, b| a.grlex_cmp(b));
        out
    }

    /// Ghost monomials with `k` distinct ghosts taken from the ids
    /// `first..first + m`, each with coefficient +1 in increasing order.
    fn ghost_monomials(&self, first: usize, k: usize) -> Vec<GradedPoly> {
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        if k > self.m {
            return out;
        }
        loop {
            let mut p = GradedPoly::one(&self.alg);
            for &i in &idx {
                p = p * self.gen(first + i);
            }
            out.push(p);
            // next combination
            let mut pos = k;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if idx[pos] < self.m - k + pos {
                    idx[pos] += 1;
                    for q in pos + 1..k {
                        idx[q] = idx[q - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

/// Constraints `H_a(x, p)` with structure functions `f_ab^c(x, p)`, stored
/// antisymmetrically in `(a, b)`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    space: PhaseSpace,
    h: Vec<GradedPoly>,
    f: Vec<GradedPoly>,
}

impl ConstraintSystem {
    /// `structure` lists `((a, b, c), f_ab^c)`; the `(b, a)` entry is filled
    /// in by antisymmetry and must agree if given.
    pub fn new(
        space: PhaseSpace,
        h: Vec<GradedPoly>,
        structure: Vec<((usize, usize, usize), GradedPoly)>,
    ) -> Result<Self, BfvError> {
        let m = space.m;
        if h.len() != m {
            return Err(BfvError::Invalid(format!(
                "{} constraints for {} ghost pairs",
                h.len(),
                m
            )));
        }
        for (a, ha) in h.iter().enumerate() {
            if !space.is_body(ha) {
                return Err(BfvError::Invalid(format!("H{} involves ghosts", a + 1)));
            }
        }
        let zero = GradedPoly::zero(&space.alg);
        let mut f: Vec<Option<GradedPoly>> = alloc::vec![None; m * m * m];
        for ((a, b, c), v) in structure {
            if a >= m || b >= m || c >= m {
                return Err(BfvError::Invalid(format!(
                    "structure index ({}, {}, {}) out of range",
                    a + 1,
                    b + 1,
                    c + 1
                )));
            }
            if !space.is_body(&v) {
                return Err(BfvError::Invalid(format!(
                    "f({},{};{}) involves ghosts",
                    a + 1,
                    b + 1,
                    c + 1
                )));
            }
            if a == b && !v.is_zero() {
                return Err(BfvError::Invalid(format!(
                    "f({},{};{}) must vanish by antisymmetry",
                    a + 1,
                    b + 1,
                    c + 1
                )));
            }
            for (i, j, val) in [(a, b, v.clone()), (b, a, -&v)] {
                let slot = &mut f[(i * m + j) * m + c];
                match slot {
                    Some(old) if *old != val => {
                        return Err(BfvError::Invalid(format!(
                            "f({},{};{}) given inconsistently",
                            i + 1,
                            j + 1,
                            c + 1
                        )))
                    }
                    _ => *slot = Some(val),
                }
            }
        }
        let f = f.into_iter().map(|x| x.unwrap_or_else(|| zero.clone())).collect();
        Ok(ConstraintSystem { space, h, f })
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.space.alg
    }

    pub fn m(&self) -> usize {
        self.space.m
    }

    pub fn h(&self, a: usize) -> &GradedPoly {
        &self.h[a]
    }

    pub fn f(&self, a: usize, b: usize, c: usize) -> &GradedPoly {
        let m = self.space.m;
        &self.f[(a * m + b) * m + c]
    }

    pub fn has_constant_structure(&self) -> bool {
        self.f.iter().all(|p| p.terms().all(|(mono, _)| mono.is_one()))
    }

    /// `{H_a, H_b} - f_ab^c H_c` for every `a < b` where it is nonzero.
    pub fn first_class_residues(&self) -> Vec<(usize, usize, GradedPoly)> {
        let mut out = Vec::new();
        for a in 0..self.m() {
            for b in a + 1..self.m() {
                let mut r = self.space.body_bracket(&self.h[a], &self.h[b]);
                for c in 0..self.m() {
                    r = r - self.f(a, b, c) * &self.h[c];
                }
                if !r.is_zero() {
                    out.push((a, b, r));
                }
            }
        }
        out
    }

    /// Koszul differential `delta F = sum_a H_a d/db_a> F`.
    pub fn koszul(&self, f: &GradedPoly) -> GradedPoly {
        let mut out = GradedPoly::zero(self.algebra());
        for a in 0..self.m() {
            out = out + &self.h[a] * &f.left_partial(self.space.b(a));
        }
        out
    }

    /// Multipliers `g_a` with `t = sum_a g_a H_a` for a ghost-free `t`,
    /// searching multipliers of body degree at most `bound`.
    pub fn body_ideal_membership(&self, t: &GradedPoly, bound: u32) -> Option<Vec<GradedPoly>> {
        let basis = self.space.body_monomials(bound);
        let alg = self.algebra();
        let mut solver = SparseSolver::new();
        for a in 0..self.m() {
            for mono in &basis {
                let col = GradedPoly::from_monomial(alg, mono.clone(), Rational::one()) * &self.h[a];
                solver.push(crate::linalg::poly_vec(&col));
            }
        }
        let x = solver.solve(&crate::linalg::poly_vec(t))?;
        let mut out = Vec::new();
        for a in 0..self.m() {
            let mut g = GradedPoly::zero(alg);
            for (k, mono) in basis.iter().enumerate() {
                g.add_term(mono.clone(), x[a * basis.len() + k].clone());
            }
            out.push(g);
        }
        Some(out)
    }

    /// Membership of an arbitrary element in the ideal generated by the
    /// constraints. Ghost monomials split the problem into body problems.
    pub fn in_constraint_ideal(&self, t: &GradedPoly, bound: u32) -> bool {
        let mut by_ghost: alloc::collections::BTreeMap<Vec<(usize, u32)>, GradedPoly> =
            alloc::collections::BTreeMap::new();
        let nbody = 2 * self.space.n;
        for (mono, c) in t.terms() {
            let (body, ghost): (Vec<_>, Vec<_>) = mono.factors().iter().partition(|&&(g, _)| g < nbody);
            let mut bp = GradedPoly::one(self.algebra());
            for (g, e) in body {
                bp = bp * self.space.gen(g).pow(e);
            }
            let entry = by_ghost
                .entry(ghost)
                .or_insert_with(|| GradedPoly::zero(self.algebra()));
            *entry = &*entry + &bp.scale(c);
        }
        by_ghost
            .values()
            .all(|body| body.is_zero() || self.body_ideal_membership(body, bound).is_some())
    }
}

/// A BFV charge together with its ghost-momentum components `S^k`.
#[derive(Clone, Debug)]
pub struct BfvCharge {
    pub components: Vec<GradedPoly>,
}

impl BfvCharge {
    pub fn total(&self) -> GradedPoly {
        let mut it = self.components.iter();
        let mut s = it.next().expect("S^0 always present").clone();
        for c in it {
            s = s + c;
        }
        s
    }

    /// Highest `k` with `S^k` nonzero.
    pub fn order(&self) -> usize {
        self.components.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }
}

/// `S^0 = c_a H_a` and `S^1 = -1/2 f_ab^c b_c c_a c_b`, the unique choice
/// with `{c, b} = 1` that cancels the ghost-free part of `{S, S}`.
pub fn build_initial_charge(cs: &ConstraintSystem) -> BfvCharge {
    let sp = cs.space();
    let alg = cs.algebra();
    let mut s0 = GradedPoly::zero(alg);
    let mut s1 = GradedPoly::zero(alg);
    let half = rat(-1, 2);
    for a in 0..cs.m() {
        s0 = s0 + sp.gen(sp.c(a)) * cs.h(a);
        for b in 0..cs.m() {
            for c in 0..cs.m() {
                let f = cs.f(a, b, c);
                if f.is_zero() {
                    continue;
                }
                s1 = s1 + (f.scale(&half) * sp.gen(sp.b(c))) * (sp.gen(sp.c(a)) * sp.gen(sp.c(b)));
            }
        }
    }
    BfvCharge {
        components: alloc::vec![s0, s1],
    }
}

/// Result of [`solve_master_equation`].
#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub charge: BfvCharge,
    /// Number of homotopy corrections that were solved for.
    pub corrections: usize,
}

fn part_with_b_degree(sp: &PhaseSpace, p: &GradedPoly, k: u32) -> GradedPoly {
    p.filter(|m| sp.b_degree(m) == k)
}

fn max_body_degree(sp: &PhaseSpace, p: &GradedPoly) -> u32 {
    p.terms().map(|(m, _)| sp.body_degree(m)).max().unwrap_or(0)
}

/// Extends the initial charge order by order, solving
/// `delta S^{k+1} = -1/2 R_k` with `R_k` the ghost-momentum degree `k` part of
/// `{S, S}`. Each linear problem is solved exactly on the span of body
/// monomials of degree at most `body_bound` (default: the degree of `R_k`)
/// times ghost monomials of the right degrees.
pub fn solve_master_equation(
    cs: &ConstraintSystem,
    max_order: usize,
    body_bound: Option<u32>,
) -> Result<MasterSolution, BfvError> {
    if !cs.first_class_residues().is_empty() {
        return Err(BfvError::NotFirstClass(cs.first_class_residues().len()));
    }
    let sp = cs.space();
    let alg = cs.algebra();
    let mut charge = build_initial_charge(cs);
    let mut corrections = 0;
    for k in 1..=max_order {
        let s = charge.total();
        let r = sp.bracket(&s, &s);
        if r.is_zero() {
            return Ok(MasterSolution { charge, corrections });
        }
        for j in 0..k as u32 {
            if !part_with_b_degree(sp, &r, j).is_zero() {
                return Err(BfvError::NonRegular { order: j as usize });
            }
        }
        let rk = part_with_b_degree(sp, &r, k as u32);
        if rk.is_zero() {
            // nothing to solve at this order; the obstruction sits higher up
            charge.components.push(GradedPoly::zero(alg));
            continue;
        }
        let bound = body_bound.unwrap_or_else(|| max_body_degree(sp, &rk));
        let body = sp.body_monomials(bound);
        let bs = sp.ghost_monomials(sp.b(0), k + 1);
        let css = sp.ghost_monomials(sp.c(0), k + 2);
        let mut basis = Vec::new();
        let mut solver = SparseSolver::new();
        for mono in &body {
            let mp = GradedPoly::from_monomial(alg, mono.clone(), Rational::one());
            for bb in &bs {
                for cc in &css {
                    let u = &(&mp * bb) * cc;
                    solver.push(crate::linalg::poly_vec(&cs.koszul(&u)));
                    basis.push(u);
                }
            }
        }
        let target = rk.scale(&rat(-1, 2));
        let x = solver
            .solve(&crate::linalg::poly_vec(&target))
            .ok_or(BfvError::NonRegular { order: k })?;
        let mut sk = GradedPoly::zero(alg);
        for (u, a) in basis.iter().zip(x) {
            if !a.is_zero() {
                sk = sk + u.scale(&a);
            }
        }
        charge.components.push(sk);
        corrections += 1;
    }
    let s = charge.total();
    if sp.bracket(&s, &s).is_zero() {
        Ok(MasterSolution { charge, corrections })
    } else {
        Err(BfvError::OrderBudget(max_order))
    }
}

/// Both sides of the coisotropy identity
/// `{S^0, S^0}_body = -2 sum_c (S^1 <d/db_c)(d/dc_c> S^0)`.
#[derive(Clone, Debug)]
pub struct CoisotropyReport {
    pub lhs: GradedPoly,
    pub rhs: GradedPoly,
}

impl CoisotropyReport {
    pub fn residue(&self) -> GradedPoly {
        &self.lhs - &self.rhs
    }

    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn check_coisotropy_identity(cs: &ConstraintSystem, charge: &BfvCharge) -> CoisotropyReport {
    let sp = cs.space();
    let s0 = &charge.components[0];
    let s1 = charge
        .components
        .get(1)
        .cloned()
        .unwrap_or_else(|| GradedPoly::zero(cs.algebra()));
    let lhs = sp.body_bracket(s0, s0);
    let mut rhs = GradedPoly::zero(cs.algebra());
    for c in 0..cs.m() {
        rhs = rhs + s1.right_partial(sp.b(c)) * s0.left_partial(sp.c(c));
    }
    CoisotropyReport {
        lhs,
        rhs: rhs.scale(&rat(-2, 1)),
    }
}

/// Constraint systems used throughout the tests and fixtures.
pub mod examples {
    use super::{ConstraintSystem, PhaseSpace};
    use alloc::vec::Vec;

    fn build(n: usize, h: &[&str], f: &[((usize, usize, usize), &str)]) -> ConstraintSystem {
        let sp = PhaseSpace::new(n, h.len());
        let hs: Vec<_> = h.iter().map(|t| sp.parse(t).expect("valid literal")).collect();
        let fs = f
            .iter()
            .map(|&(idx, t)| (idx, sp.parse(t).expect("valid literal")))
            .collect();
        ConstraintSystem::new(sp, hs, fs).expect("consistent literal data")
    }

    /// Angular momenta `H_i = eps_ijk x_j p_k` with `f_ij^k = eps_ijk`.
    pub fn so3() -> ConstraintSystem {
        build(
            3,
            &["x2*p3 - x3*p2", "x3*p1 - x1*p3", "x1*p2 - x2*p1"],
            &[((0, 1, 2), "1"), ((1, 2, 0), "1"), ((2, 0, 1), "1")],
        )
    }

    /// `H_i = p_i`, `i = 1, 2`.
    pub fn abelian() -> ConstraintSystem {
        build(2, &["p1", "p2"], &[])
    }

    /// `H1 = p1`, `H2 = -x1 x2 p1 + p2` with `f_12^1 = x2`.
    pub fn nonconstant_pair() -> ConstraintSystem {
        build(2, &["p1", "-x1*x2*p1 + p2"], &[((0, 1, 0), "x2")])
    }

    /// `H1 = p1`, `H2 = x1 p2` declared with vanishing structure functions,
    /// which is not first class.
    pub fn not_first_class() -> ConstraintSystem {
        build(2, &["p1", "x1*p2"], &[])
    }
}
