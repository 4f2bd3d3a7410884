//! Exact sparse linear algebra over the rationals.
//!
//! Used for ideal membership and for inverting the Koszul differential on a
//! bounded monomial basis.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::graded::{GradedPoly, Monomial, Rational};

type SparseVec<K> = BTreeMap<K, Rational>;

fn axpy<K: Ord + Clone>(y: &mut SparseVec<K>, a: &Rational, x: &SparseVec<K>) {
    for (k, v) in x {
        let remove = {
            let slot = y.entry(k.clone()).or_insert_with(Rational::zero);
            *slot += a * v;
            slot.is_zero()
        };
        if remove {
            y.remove(k);
        }
    }
}

struct Pivot<K> {
    key: K,
    vec: SparseVec<K>,
    comb: SparseVec<usize>,
}

/// Incremental column echelon form. Columns are pushed one at a time and
/// `solve` expresses a right-hand side in terms of them.
pub struct SparseSolver<K: Ord + Clone> {
    pivots: Vec<Pivot<K>>,
    ncols: usize,
}

impl<K: Ord + Clone> Default for SparseSolver<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Ord + Clone> SparseSolver<K> {
    pub fn new() -> Self {
        SparseSolver {
            pivots: Vec::new(),
            ncols: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    // Pivot t's vector never holds the key of an earlier pivot, so a single
    // sweep in insertion order clears every pivot key.
    fn reduce(&self, v: &mut SparseVec<K>, comb: &mut SparseVec<usize>, sign: &Rational) {
        for p in &self.pivots {
            if let Some(a) = v.get(&p.key).cloned() {
                axpy(v, &-a.clone(), &p.vec);
                axpy(comb, &(sign * &a), &p.comb);
            }
        }
    }

    pub fn push(&mut self, column: SparseVec<K>) {
        let idx = self.ncols;
        self.ncols += 1;
        let mut v = column;
        let mut comb = SparseVec::new();
        comb.insert(idx, Rational::one());
        self.reduce(&mut v, &mut comb, &-Rational::one());
        if let Some((k, a)) = v.iter().next().map(|(k, a)| (k.clone(), a.clone())) {
            let inv = a.recip();
            for x in v.values_mut() {
                *x *= &inv;
            }
            for x in comb.values_mut() {
                *x *= &inv;
            }
            self.pivots.push(Pivot { key: k, vec: v, comb });
        }
    }

    /// Coefficients `x` with `sum_j x_j column_j = rhs`, or `None`.
    pub fn solve(&self, rhs: &SparseVec<K>) -> Option<Vec<Rational>> {
        let mut v = rhs.clone();
        let mut x = SparseVec::new();
        self.reduce(&mut v, &mut x, &Rational::one());
        if !v.is_empty() {
            return None;
        }
        let mut out = alloc::vec![Rational::zero(); self.ncols];
        for (j, a) in x {
            out[j] = a;
        }
        Some(out)
    }
}

pub fn poly_vec(p: &GradedPoly) -> SparseVec<Monomial> {
    p.terms().map(|(m, c)| (m.clone(), c.clone())).collect()
}

/// Solves `sum_j x_j columns[j] = rhs` exactly.
pub fn solve_combination(columns: &[GradedPoly], rhs: &GradedPoly) -> Option<Vec<Rational>> {
    let mut s = SparseSolver::new();
    for c in columns {
        s.push(poly_vec(c));
    }
    s.solve(&poly_vec(rhs))
}
