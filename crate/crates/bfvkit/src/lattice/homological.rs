//! The BFV vector field on lattice fields with ghosts expanded in odd
//! parameters.
//!
//! Ghosts are `xi = sum_a e_a (phi_a, X_a)` for generators `e_a` of a
//! [`Grass`] algebra. `Q^2` is read off by shifting every field `z` to
//! `z + eta Q(z)` for a spare generator `eta` and taking the `eta` component
//! of `Q` at the shifted point.
//!
//! Images, with `s` the sign of the vector-field action (`+1` here):
//!
//! ```text
//! Q(h)     = h~ xiN + s L_xiD h
//! Q(Pi)    = -Pi~ xiN + vol (G^## xiN + D^##(xiN)) + s L_xiD Pi
//!            - (chiD (x)_s d xiN)^## xiN
//! Q(xiN)   = xiD^c d_c xiN
//! Q(xiD)   = -xiN grad_h xiN + xiD^c d_c xiD
//! Q(chiD)  = H_d + s L_xiD chiD - chiN d xiN
//! Q(chiN)  = H_n + s L_xiD chiN - 2 (chiD^# . d xiN + div(chiD^#) xiN / 2)
//! ```
//!
//! `Q_0` drops every antighost term and sends the antighosts to zero.

use alloc::vec::Vec;

use super::constraints::{energy_constraint, h_tilde, momentum_constraint, momentum_flow, Geometry};
use super::geometry::{compute_curvature, directional, grad_sharp, lie_derivative, zeros, TensorKind};
use super::grass::{Grass, Scalar};
use super::torus::{lift, Field, Torus};
use super::LatticeError;

#[derive(Clone, Debug, PartialEq)]
pub struct BfvFields<S> {
    pub torus: Torus,
    pub h: Vec<Field<S>>,
    pub pi: Vec<Field<S>>,
    pub xi_n: Field<S>,
    pub xi_d: Vec<Field<S>>,
    pub chi_n: Field<S>,
    pub chi_d: Vec<Field<S>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Bfv,
    Zero,
}

/// Sign conventions for the lattice vector field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QOptions {
    pub which: Which,
    /// Sign `s` of the Lie-derivative terms on `h`, `Pi` and the antighosts.
    pub lie_sign: f64,
}

impl QOptions {
    pub fn zero() -> QOptions {
        QOptions {
            which: Which::Zero,
            lie_sign: 1.0,
        }
    }

    pub fn bfv() -> QOptions {
        QOptions {
            which: Which::Bfv,
            lie_sign: 1.0,
        }
    }

    pub fn with_lie_sign(self, lie_sign: f64) -> QOptions {
        QOptions { lie_sign, ..self }
    }
}

/// Ghost test data: one `(phi_a, X_a)` per odd parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct GhostData {
    pub phi: Vec<Field<f64>>,
    pub x: Vec<Vec<Field<f64>>>,
}

impl GhostData {
    pub fn k(&self) -> usize {
        self.phi.len()
    }
}

impl<S: Scalar> BfvFields<S> {
    fn map(&self, f: impl Fn(S) -> S) -> BfvFields<S> {
        let m1 = |v: &Field<S>| v.iter().map(|x| f(*x)).collect::<Field<S>>();
        let mm = |v: &Vec<Field<S>>| v.iter().map(m1).collect::<Vec<_>>();
        BfvFields {
            torus: self.torus,
            h: mm(&self.h),
            pi: mm(&self.pi),
            xi_n: m1(&self.xi_n),
            xi_d: mm(&self.xi_d),
            chi_n: m1(&self.chi_n),
            chi_d: mm(&self.chi_d),
        }
    }

    fn zip(&self, o: &BfvFields<S>, f: impl Fn(S, S) -> S) -> BfvFields<S> {
        let z1 = |a: &Field<S>, b: &Field<S>| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect::<Field<S>>();
        let zz = |a: &Vec<Field<S>>, b: &Vec<Field<S>>| a.iter().zip(b).map(|(x, y)| z1(x, y)).collect::<Vec<_>>();
        BfvFields {
            torus: self.torus,
            h: zz(&self.h, &o.h),
            pi: zz(&self.pi, &o.pi),
            xi_n: z1(&self.xi_n, &o.xi_n),
            xi_d: zz(&self.xi_d, &o.xi_d),
            chi_n: z1(&self.chi_n, &o.chi_n),
            chi_d: zz(&self.chi_d, &o.chi_d),
        }
    }

    /// Every component value, fields first, in a fixed order.
    pub fn values(&self) -> impl Iterator<Item = &S> {
        self.h
            .iter()
            .chain(&self.pi)
            .chain(core::iter::once(&self.xi_n))
            .chain(&self.xi_d)
            .chain(core::iter::once(&self.chi_n))
            .chain(&self.chi_d)
            .flatten()
    }
}

impl<const M: usize> BfvFields<Grass<M>> {
    /// Real fields with ghosts `xi = sum_a e_(offset + a) (phi_a, X_a)` and
    /// no antighosts.
    pub fn with_ghosts(g: &Geometry<f64>, ghosts: &GhostData, offset: usize) -> Result<Self, LatticeError> {
        let t = g.torus;
        let d = t.d();
        let available = Grass::<M>::GENERATORS;
        if offset + ghosts.k() > available {
            return Err(LatticeError::OddParameters {
                needed: offset + ghosts.k(),
                available,
            });
        }
        let mut xi_n = alloc::vec![Grass::<M>::zero(); t.sites()];
        let mut xi_d = zeros::<Grass<M>>(&t, d);
        for a in 0..ghosts.k() {
            let e = Grass::<M>::generator(offset + a);
            for s in 0..t.sites() {
                xi_n[s] += e.scale(ghosts.phi[a][s]);
                for c in 0..d {
                    xi_d[c][s] += e.scale(ghosts.x[a][c][s]);
                }
            }
        }
        Ok(BfvFields {
            torus: t,
            h: g.h.iter().map(|f| lift(f)).collect(),
            pi: g.pi.iter().map(|f| lift(f)).collect(),
            xi_n,
            xi_d,
            chi_n: alloc::vec![Grass::<M>::zero(); t.sites()],
            chi_d: zeros(&t, d),
        })
    }

    /// Component of every value along one blade.
    pub fn component(&self, blade: usize) -> BfvFields<f64> {
        let r = |v: &Field<Grass<M>>| v.iter().map(|x| x.coeff(blade)).collect::<Field<f64>>();
        let rr = |v: &Vec<Field<Grass<M>>>| v.iter().map(r).collect::<Vec<_>>();
        BfvFields {
            torus: self.torus,
            h: rr(&self.h),
            pi: rr(&self.pi),
            xi_n: r(&self.xi_n),
            xi_d: rr(&self.xi_d),
            chi_n: r(&self.chi_n),
            chi_d: rr(&self.chi_d),
        }
    }
}

/// The image of every field under `Q_BFV` or `Q_0`.
pub fn apply_q<S: Scalar>(z: &BfvFields<S>, opts: QOptions) -> Result<BfvFields<S>, LatticeError> {
    let t = &z.torus;
    let d = t.d();
    let n = t.sites();
    let k = compute_curvature(t, &z.h)?;
    let sx: Vec<Field<S>> = z
        .xi_d
        .iter()
        .map(|f| f.iter().map(|v| v.scale(opts.lie_sign)).collect())
        .collect();

    let mut h = lie_derivative(t, TensorKind::Metric, &sx, &z.h)?;
    let ht = h_tilde(t, &k, &z.pi);
    for i in 0..d * d {
        for s in 0..n {
            h[i][s] += ht[i][s] * z.xi_n[s];
        }
    }

    let mut pi = momentum_flow(t, &k, &z.pi, &z.xi_n, &sx)?;

    let xi_n = directional(t, &z.xi_d, &z.xi_n);

    let grad_xi = grad_sharp(t, &k, &z.xi_n);
    let xi_d: Vec<Field<S>> = (0..d)
        .map(|a| {
            let mut f = directional(t, &z.xi_d, &z.xi_d[a]);
            for s in 0..n {
                f[s] -= z.xi_n[s] * grad_xi[a][s];
            }
            f
        })
        .collect();

    let (chi_n, chi_d) = match opts.which {
        Which::Zero => (alloc::vec![S::zero(); n], zeros(t, d)),
        Which::Bfv => {
            let dxi: Vec<Field<S>> = (0..d).map(|c| t.diff(&z.xi_n, c)).collect();
            // -(chiD (x)_s d xiN)^## xiN
            let mut sym = zeros::<S>(t, d * d);
            for a in 0..d {
                for b in 0..d {
                    for s in 0..n {
                        sym[a * d + b][s] = (z.chi_d[a][s] * dxi[b][s] + z.chi_d[b][s] * dxi[a][s]).scale(0.5);
                    }
                }
            }
            let up = k.raise2(&sym);
            for i in 0..d * d {
                for s in 0..n {
                    pi[i][s] -= up[i][s] * z.xi_n[s];
                }
            }

            let mut chi_d = momentum_constraint(t, &z.h, &z.pi);
            let lchi = lie_derivative(t, TensorKind::CovectorDensity, &sx, &z.chi_d)?;
            for c in 0..d {
                for s in 0..n {
                    chi_d[c][s] += lchi[c][s] - z.chi_n[s] * dxi[c][s];
                }
            }

            let mut chi_n = energy_constraint(t, &k, &z.pi);
            let lchi = lie_derivative(t, TensorKind::ScalarDensity, &sx, core::slice::from_ref(&z.chi_n))?;
            let sharp = k.raise1(&z.chi_d);
            let along = directional(t, &sharp, &z.xi_n);
            let mut div = alloc::vec![S::zero(); n];
            for (c, sc) in sharp.iter().enumerate() {
                let g = t.diff(sc, c);
                for s in 0..n {
                    div[s] += g[s];
                }
            }
            for s in 0..n {
                chi_n[s] += lchi[0][s] - (along[s] + (div[s] * z.xi_n[s]).scale(0.5)).scale(2.0);
            }
            (chi_n, chi_d)
        }
    };

    Ok(BfvFields {
        torus: z.torus,
        h,
        pi,
        xi_n,
        xi_d,
        chi_n,
        chi_d,
    })
}

/// `Q^2` of every field. Generator 0 is reserved for the shift and must not
/// appear in `z`; the result has no generator-0 content.
pub fn q_squared<const M: usize>(z: &BfvFields<Grass<M>>, opts: QOptions) -> Result<BfvFields<Grass<M>>, LatticeError> {
    if z.values().any(|v| (0..M).any(|i| i & 1 == 1 && v.coeff(i) != 0.0)) {
        return Err(LatticeError::ShiftGeneratorInUse);
    }
    let eta = Grass::<M>::generator(0);
    let q = apply_q(z, opts)?;
    let shifted = z.zip(&q, |a, b| a + eta * b);
    let q2 = apply_q(&shifted, opts)?;
    // eta sits in front of every blade it appears in, so the eta component
    // of blade B | 1 is the coefficient of blade B without a sign
    Ok(q2.map(|v| {
        let mut out = [0.0; M];
        for (i, c) in out.iter_mut().enumerate() {
            if i & 1 == 0 {
                *c = v.coeff(i | 1);
            }
        }
        Grass(out)
    }))
}
