//! Lie-algebroid candidates over a first-class constraint system.
//!
//! Hamiltonian vector fields are `X_i = {H_i, .}`. With structure functions
//! they close only up to terms proportional to the constraints:
//! `[X_i, X_j] g = f_ij^k X_k g + {f_ij^k, g} H_k`.
//!
//! *Alternative 1* takes sections `s = s^i u_i` of a trivial bundle with
//! anchor `s^i X_i` and the bracket built from `f`. *Alternative 2* sends a
//! section to the function `s^i H_i` and uses the Poisson bracket itself.

use alloc::vec::Vec;

use crate::bfv::ConstraintSystem;
use crate::graded::{rat, AlgebraError, Derivation, GradedPoly, Rational};

/// Components `s^i` of a section, functions of the canonical variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Section(pub Vec<GradedPoly>);

impl Section {
    /// The `i`-th basis section `u_i`.
    pub fn basis(cs: &ConstraintSystem, i: usize) -> Self {
        let alg = cs.algebra();
        Section(
            (0..cs.m())
                .map(|k| {
                    if k == i {
                        GradedPoly::one(alg)
                    } else {
                        GradedPoly::zero(alg)
                    }
                })
                .collect(),
        )
    }

    pub fn scale_by(&self, g: &GradedPoly) -> Self {
        Section(self.0.iter().map(|s| g * s).collect())
    }
}

pub fn hamiltonian_vf(cs: &ConstraintSystem, i: usize, g: &GradedPoly) -> GradedPoly {
    cs.space().body_bracket(cs.h(i), g)
}

/// `[X_i, X_j] g - f_ij^k X_k g`, computed directly.
pub fn hamiltonian_commutator_defect(cs: &ConstraintSystem, i: usize, j: usize, g: &GradedPoly) -> GradedPoly {
    let mut out = hamiltonian_vf(cs, i, &hamiltonian_vf(cs, j, g)) - hamiltonian_vf(cs, j, &hamiltonian_vf(cs, i, g));
    for k in 0..cs.m() {
        out = out - cs.f(i, j, k) * &hamiltonian_vf(cs, k, g);
    }
    out
}

/// `{f_ij^k, g} H_k`.
pub fn hamiltonian_commutator_formula(cs: &ConstraintSystem, i: usize, j: usize, g: &GradedPoly) -> GradedPoly {
    let mut out = GradedPoly::zero(cs.algebra());
    for k in 0..cs.m() {
        out = out + cs.space().body_bracket(cs.f(i, j, k), g) * cs.h(k);
    }
    out
}

pub fn alt1_anchor(cs: &ConstraintSystem, s: &Section, g: &GradedPoly) -> GradedPoly {
    let mut out = GradedPoly::zero(cs.algebra());
    for (i, si) in s.0.iter().enumerate() {
        out = out + si * &hamiltonian_vf(cs, i, g);
    }
    out
}

/// `[s1, s2]^k = s1^i s2^j f_ij^k + rho(s1) s2^k - rho(s2) s1^k`.
pub fn alt1_bracket(cs: &ConstraintSystem, s1: &Section, s2: &Section) -> Section {
    let m = cs.m();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = alt1_anchor(cs, s1, &s2.0[k]) - alt1_anchor(cs, s2, &s1.0[k]);
        for i in 0..m {
            for j in 0..m {
                let f = cs.f(i, j, k);
                if !f.is_zero() {
                    v = v + &s1.0[i] * &s2.0[j] * f;
                }
            }
        }
        out.push(v);
    }
    Section(out)
}

/// `[rho(s1), rho(s2)] g - rho([s1, s2]) g`, computed directly.
pub fn alt1_anchor_defect(cs: &ConstraintSystem, s1: &Section, s2: &Section, g: &GradedPoly) -> GradedPoly {
    alt1_anchor(cs, s1, &alt1_anchor(cs, s2, g))
        - alt1_anchor(cs, s2, &alt1_anchor(cs, s1, g))
        - alt1_anchor(cs, &alt1_bracket(cs, s1, s2), g)
}

/// `s1^i s2^j {f_ij^k, g} H_k`.
pub fn alt1_defect_formula(cs: &ConstraintSystem, s1: &Section, s2: &Section, g: &GradedPoly) -> GradedPoly {
    let mut out = GradedPoly::zero(cs.algebra());
    for i in 0..cs.m() {
        for j in 0..cs.m() {
            let w = &s1.0[i] * &s2.0[j];
            if w.is_zero() {
                continue;
            }
            for k in 0..cs.m() {
                let f = cs.f(i, j, k);
                if f.is_zero() {
                    continue;
                }
                out = out + &w * &cs.space().body_bracket(f, g) * cs.h(k);
            }
        }
    }
    out
}

/// The degree-one derivation of Alternative 1: `Q g = X_i(g) c^i` on the
/// canonical variables, `Q c^i = lambda f_jk^i c^j c^k`, and `Q b = 0`.
/// Only `lambda = -1/2` squares to zero for constant structure functions.
pub fn alt1_q(cs: &ConstraintSystem, lambda: &Rational) -> Result<Derivation, AlgebraError> {
    let sp = cs.space();
    let alg = cs.algebra();
    let mut d = Derivation::new(alg, 1);
    for var in 0..2 * sp.n() {
        let g = sp.gen(var);
        let mut img = GradedPoly::zero(alg);
        for i in 0..cs.m() {
            img = img + hamiltonian_vf(cs, i, &g) * sp.gen(sp.c(i));
        }
        d.set_image(var, img)?;
    }
    for i in 0..cs.m() {
        let mut img = GradedPoly::zero(alg);
        for j in 0..cs.m() {
            for k in 0..cs.m() {
                let f = cs.f(j, k, i);
                if !f.is_zero() {
                    img = img + f.scale(lambda) * sp.gen(sp.c(j)) * sp.gen(sp.c(k));
                }
            }
        }
        d.set_image(sp.c(i), img)?;
        d.set_image(sp.b(i), GradedPoly::zero(alg))?;
    }
    Ok(d)
}

pub fn alt1_q_square(cs: &ConstraintSystem, lambda: &Rational, g: &GradedPoly) -> Result<GradedPoly, AlgebraError> {
    let q = alt1_q(cs, lambda)?;
    q.apply(&q.apply(g)?)
}

/// Closed form of `Q^2 g` for `lambda = -1/2` and a function `g` of the
/// canonical variables: `1/2 {f_ji^k, g} H_k c^j c^i`.
pub fn alt1_q_square_formula(cs: &ConstraintSystem, g: &GradedPoly) -> GradedPoly {
    let sp = cs.space();
    let mut out = GradedPoly::zero(cs.algebra());
    for j in 0..cs.m() {
        for i in 0..cs.m() {
            let cc = sp.gen(sp.c(j)) * sp.gen(sp.c(i));
            for k in 0..cs.m() {
                let f = cs.f(j, i, k);
                if f.is_zero() {
                    continue;
                }
                out = out + sp.body_bracket(f, g) * cs.h(k) * &cc;
            }
        }
    }
    out.scale(&rat(1, 2))
}

/// Closed form of `Q^2 c^i`:
/// `lambda X_l(f_jk^i) c^l c^j c^k + lambda^2 f_jk^i (f_lm^j c^l c^m c^k - c^j f_lm^k c^l c^m)`.
pub fn alt1_ghost_square_formula(cs: &ConstraintSystem, lambda: &Rational, i: usize) -> GradedPoly {
    let sp = cs.space();
    let m = cs.m();
    let c = |a: usize| sp.gen(sp.c(a));
    let mut out = GradedPoly::zero(cs.algebra());
    let l2 = lambda * lambda;
    for j in 0..m {
        for k in 0..m {
            let f = cs.f(j, k, i);
            if f.is_zero() {
                continue;
            }
            for l in 0..m {
                out = out + hamiltonian_vf(cs, l, f).scale(lambda) * c(l) * c(j) * c(k);
                for mm in 0..m {
                    let t1 = f * cs.f(l, mm, j) * c(l) * c(mm) * c(k);
                    let t2 = f * c(j) * cs.f(l, mm, k) * c(l) * c(mm);
                    out = out + (t1 - t2).scale(&l2);
                }
            }
        }
    }
    out
}

/// The function `s^i H_i` attached to a section in Alternative 2.
pub fn alt2_function(cs: &ConstraintSystem, s: &Section) -> GradedPoly {
    let mut out = GradedPoly::zero(cs.algebra());
    for (i, si) in s.0.iter().enumerate() {
        out = out + si * cs.h(i);
    }
    out
}

/// Function-valued bracket `{s1^i H_i, s2^j H_j}`.
pub fn alt2_bracket(cs: &ConstraintSystem, s1: &Section, s2: &Section) -> GradedPoly {
    cs.space().body_bracket(&alt2_function(cs, s1), &alt2_function(cs, s2))
}

/// Anchor of Alternative 2 applied to `a`: `{s^i H_i, a}`.
pub fn alt2_anchor(cs: &ConstraintSystem, s: &Section, a: &GradedPoly) -> GradedPoly {
    cs.space().body_bracket(&alt2_function(cs, s), a)
}

/// Residues of the Alternative 2 checks for one triple.
#[derive(Clone, Debug)]
pub struct Alt2Report {
    /// `{s1, g s2} - g {s1, s2} - rho2(s1)(g) s2`, in function form.
    pub leibniz: GradedPoly,
    /// `rho2([s1, s2]) a - [rho2(s1), rho2(s2)] a`, one entry per canonical
    /// variable `a`.
    pub homomorphism: Vec<GradedPoly>,
}

impl Alt2Report {
    pub fn holds(&self) -> bool {
        self.leibniz.is_zero() && self.homomorphism.iter().all(GradedPoly::is_zero)
    }
}

pub fn alt2_checks(cs: &ConstraintSystem, s1: &Section, s2: &Section, g: &GradedPoly) -> Alt2Report {
    let sp = cs.space();
    let f1 = alt2_function(cs, s1);
    let f2 = alt2_function(cs, s2);
    let br = sp.body_bracket(&f1, &f2);
    let leibniz = sp.body_bracket(&f1, &(g * &f2)) - g * &br - sp.body_bracket(&f1, g) * &f2;
    let homomorphism = (0..2 * sp.n())
        .map(|v| {
            let a = sp.gen(v);
            sp.body_bracket(&br, &a)
                - (sp.body_bracket(&f1, &sp.body_bracket(&f2, &a)) - sp.body_bracket(&f2, &sp.body_bracket(&f1, &a)))
        })
        .collect();
    Alt2Report { leibniz, homomorphism }
}

/// `rho2(g s)(a) - g rho2(s)(a)`, which equals `(s^i H_i) {g, a}`.
pub fn alt2_linearity_defect(cs: &ConstraintSystem, g: &GradedPoly, s: &Section, a: &GradedPoly) -> GradedPoly {
    alt2_anchor(cs, &s.scale_by(g), a) - g * &alt2_anchor(cs, s, a)
}

/// First canonical variable `a` (in the order `x1.., p1..`) on which the
/// anchor of Alternative 2 fails to be linear over `g`.
pub fn alt2_linearity_witness(cs: &ConstraintSystem, g: &GradedPoly, s: &Section) -> Option<(usize, GradedPoly)> {
    let sp = cs.space();
    (0..2 * sp.n()).find_map(|v| {
        let d = alt2_linearity_defect(cs, g, s, &sp.gen(v));
        (!d.is_zero()).then_some((v, d))
    })
}
