//! Curvature, Lie derivatives and the metric operators built from them.
//!
//! Tensors are stored as one [`Field`] per component: vectors by `a`,
//! matrices row-major by `a * d + b`, Christoffel symbols `Gamma^a_bc` by
//! `(a * d + b) * d + c`.

use alloc::vec::Vec;

use super::grass::Scalar;
use super::torus::{Field, Torus};
use super::LatticeError;

pub(crate) fn zeros<S: Scalar>(t: &Torus, count: usize) -> Vec<Field<S>> {
    alloc::vec![alloc::vec![S::zero(); t.sites()]; count]
}

/// Determinant and inverse of the matrix `m` (row-major, `d` = 2 or 3).
pub fn inverse<S: Scalar>(d: usize, m: &[S]) -> (S, Vec<S>) {
    if d == 2 {
        let det = m[0] * m[3] - m[1] * m[2];
        let r = det.recip();
        (det, alloc::vec![m[3] * r, -m[1] * r, -m[2] * r, m[0] * r])
    } else {
        let c = |i: usize, j: usize| m[i * 3 + j];
        let cof = [
            c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1),
            c(1, 2) * c(2, 0) - c(1, 0) * c(2, 2),
            c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0),
            c(0, 2) * c(2, 1) - c(0, 1) * c(2, 2),
            c(0, 0) * c(2, 2) - c(0, 2) * c(2, 0),
            c(0, 1) * c(2, 0) - c(0, 0) * c(2, 1),
            c(0, 1) * c(1, 2) - c(0, 2) * c(1, 1),
            c(0, 2) * c(1, 0) - c(0, 0) * c(1, 2),
            c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0),
        ];
        let det = c(0, 0) * cof[0] + c(0, 1) * cof[1] + c(0, 2) * cof[2];
        let r = det.recip();
        // inverse = adjugate / det, adjugate = cofactor transpose
        let mut inv = alloc::vec![S::zero(); 9];
        for i in 0..3 {
            for j in 0..3 {
                inv[i * 3 + j] = cof[j * 3 + i] * r;
            }
        }
        (det, inv)
    }
}

/// Leading principal minors of the body, all positive for an SPD matrix.
fn positive_definite(d: usize, m: &[f64]) -> bool {
    let m1 = m[0];
    let m2 = m[0] * m[d + 1] - m[1] * m[d];
    if d == 2 {
        return m1 > 0.0 && m2 > 0.0;
    }
    let (det, _) = inverse(3, m);
    m1 > 0.0 && m2 > 0.0 && det > 0.0
}

/// Everything derived from the metric alone.
#[derive(Clone, Debug)]
pub struct Curvature<S> {
    pub d: usize,
    pub h: Vec<Field<S>>,
    pub hinv: Vec<Field<S>>,
    /// `sqrt(det h)`.
    pub vol: Field<S>,
    pub gamma: Vec<Field<S>>,
    pub ricci: Vec<Field<S>>,
    pub scalar: Field<S>,
    /// `G_ab = R_ab - h_ab R / 2`, lower indices.
    pub einstein: Vec<Field<S>>,
}

impl<S: Scalar> Curvature<S> {
    pub fn at(&self, comps: &[Field<S>], s: usize) -> Vec<S> {
        comps.iter().map(|f| f[s]).collect()
    }

    /// `h^ac h^bd T_cd` at every site.
    pub fn raise2(&self, t: &[Field<S>]) -> Vec<Field<S>> {
        let d = self.d;
        let n = self.vol.len();
        let mut out = alloc::vec![alloc::vec![S::zero(); n]; d * d];
        for s in 0..n {
            for a in 0..d {
                for b in 0..d {
                    let mut acc = S::zero();
                    for c in 0..d {
                        for e in 0..d {
                            acc += self.hinv[a * d + c][s] * self.hinv[b * d + e][s] * t[c * d + e][s];
                        }
                    }
                    out[a * d + b][s] = acc;
                }
            }
        }
        out
    }

    /// `h^ab w_b`.
    pub fn raise1(&self, w: &[Field<S>]) -> Vec<Field<S>> {
        let d = self.d;
        (0..d)
            .map(|a| {
                (0..self.vol.len())
                    .map(|s| {
                        let mut acc = S::zero();
                        for b in 0..d {
                            acc += self.hinv[a * d + b][s] * w[b][s];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }
}

/// Christoffel symbols, Ricci tensor, scalar curvature and Einstein tensor of
/// `h`, all by composed second-order central differences.
pub fn compute_curvature<S: Scalar>(t: &Torus, h: &[Field<S>]) -> Result<Curvature<S>, LatticeError> {
    let d = t.d();
    let n = t.sites();
    if h.len() != d * d {
        return Err(LatticeError::Components {
            expected: d * d,
            found: h.len(),
        });
    }
    let mut hinv = zeros::<S>(t, d * d);
    let mut vol = alloc::vec![S::zero(); n];
    for s in 0..n {
        let m: Vec<S> = h.iter().map(|f| f[s]).collect();
        let body: Vec<f64> = m.iter().map(Scalar::body).collect();
        if !positive_definite(d, &body) {
            return Err(LatticeError::NotPositive {
                site: s,
                coords: t.coords(s),
            });
        }
        let (det, inv) = inverse(d, &m);
        for (i, v) in inv.into_iter().enumerate() {
            hinv[i][s] = v;
        }
        vol[s] = det.sqrt();
    }
    // dh[(a*d+b)*d + c] = d_c h_ab
    let mut dh = Vec::with_capacity(d * d * d);
    for f in h {
        for c in 0..d {
            dh.push(t.diff(f, c));
        }
    }
    let mut gamma = zeros::<S>(t, d * d * d);
    for s in 0..n {
        for a in 0..d {
            for b in 0..d {
                for c in b..d {
                    let mut acc = S::zero();
                    for e in 0..d {
                        let low = dh[(e * d + c) * d + b][s] + dh[(e * d + b) * d + c][s] - dh[(b * d + c) * d + e][s];
                        acc += hinv[a * d + e][s] * low;
                    }
                    let v = acc.scale(0.5);
                    gamma[(a * d + b) * d + c][s] = v;
                    gamma[(a * d + c) * d + b][s] = v;
                }
            }
        }
    }
    // d_a Gamma^a_bc and d_c Gamma^a_ba
    let mut div = zeros::<S>(t, d * d);
    for b in 0..d {
        for c in 0..d {
            for a in 0..d {
                let g = t.diff(&gamma[(a * d + b) * d + c], a);
                for s in 0..n {
                    div[b * d + c][s] += g[s];
                }
            }
        }
    }
    let mut dtrace = zeros::<S>(t, d * d);
    for b in 0..d {
        let tr: Field<S> = (0..n)
            .map(|s| {
                let mut acc = S::zero();
                for a in 0..d {
                    acc += gamma[(a * d + b) * d + a][s];
                }
                acc
            })
            .collect();
        for c in 0..d {
            dtrace[b * d + c] = t.diff(&tr, c);
        }
    }
    let mut ricci = zeros::<S>(t, d * d);
    let mut scalar = alloc::vec![S::zero(); n];
    let mut einstein = zeros::<S>(t, d * d);
    let g = |a: usize, b: usize, c: usize, s: usize| gamma[(a * d + b) * d + c][s];
    for s in 0..n {
        for b in 0..d {
            for c in b..d {
                let mut acc = div[b * d + c][s] - dtrace[b * d + c][s];
                for a in 0..d {
                    for e in 0..d {
                        acc += g(a, a, e, s) * g(e, b, c, s) - g(a, c, e, s) * g(e, b, a, s);
                    }
                }
                ricci[b * d + c][s] = acc;
                ricci[c * d + b][s] = acc;
            }
        }
        let mut r = S::zero();
        for i in 0..d * d {
            r += hinv[i][s] * ricci[i][s];
        }
        scalar[s] = r;
        for i in 0..d * d {
            einstein[i][s] = ricci[i][s] - h[i][s] * r.scale(0.5);
        }
    }
    Ok(Curvature {
        d,
        h: h.to_vec(),
        hinv,
        vol,
        gamma,
        ricci,
        scalar,
        einstein,
    })
}

/// The tensor types the Lie derivative acts on. Densities have weight one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Scalar,
    Vector,
    Metric,
    SymmetricDensity,
    ScalarDensity,
    CovectorDensity,
}

impl TensorKind {
    pub fn components(self, d: usize) -> usize {
        match self {
            TensorKind::Scalar | TensorKind::ScalarDensity => 1,
            TensorKind::Vector | TensorKind::CovectorDensity => d,
            TensorKind::Metric | TensorKind::SymmetricDensity => d * d,
        }
    }
}

/// `d_a X^c` stored at `c * d + a`.
fn jacobian<S: Scalar>(t: &Torus, x: &[Field<S>]) -> Vec<Field<S>> {
    let d = t.d();
    let mut out = Vec::with_capacity(d * d);
    for xc in x {
        for a in 0..d {
            out.push(t.diff(xc, a));
        }
    }
    out
}

/// `X^c d_c f`, with `X` to the left.
pub fn directional<S: Scalar>(t: &Torus, x: &[Field<S>], f: &[S]) -> Field<S> {
    let mut out = alloc::vec![S::zero(); t.sites()];
    for (c, xc) in x.iter().enumerate() {
        let df = t.diff(f, c);
        for s in 0..t.sites() {
            out[s] += xc[s] * df[s];
        }
    }
    out
}

/// `d_c (X^c f)`.
fn divergence_of_product<S: Scalar>(t: &Torus, x: &[Field<S>], f: &[S]) -> Field<S> {
    let mut out = alloc::vec![S::zero(); t.sites()];
    for (c, xc) in x.iter().enumerate() {
        let prod: Field<S> = xc.iter().zip(f).map(|(a, b)| *a * *b).collect();
        let g = t.diff(&prod, c);
        for s in 0..t.sites() {
            out[s] += g[s];
        }
    }
    out
}

/// Coordinate Lie derivative `L_X T`. Odd `X` is always multiplied from the
/// left.
pub fn lie_derivative<S: Scalar>(
    t: &Torus,
    kind: TensorKind,
    x: &[Field<S>],
    f: &[Field<S>],
) -> Result<Vec<Field<S>>, LatticeError> {
    let d = t.d();
    if x.len() != d {
        return Err(LatticeError::Components {
            expected: d,
            found: x.len(),
        });
    }
    if f.len() != kind.components(d) {
        return Err(LatticeError::Components {
            expected: kind.components(d),
            found: f.len(),
        });
    }
    let n = t.sites();
    Ok(match kind {
        TensorKind::Scalar => alloc::vec![directional(t, x, &f[0])],
        TensorKind::ScalarDensity => alloc::vec![divergence_of_product(t, x, &f[0])],
        TensorKind::Vector => {
            let jx = jacobian(t, x);
            (0..d)
                .map(|a| {
                    let mut out = directional(t, x, &f[a]);
                    for c in 0..d {
                        for s in 0..n {
                            out[s] -= f[c][s] * jx[a * d + c][s];
                        }
                    }
                    out
                })
                .collect()
        }
        TensorKind::Metric => {
            let jx = jacobian(t, x);
            let mut out: Vec<Field<S>> = f.iter().map(|fab| directional(t, x, fab)).collect();
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        for s in 0..n {
                            let v = jx[c * d + a][s] * f[c * d + b][s] + jx[c * d + b][s] * f[a * d + c][s];
                            out[a * d + b][s] += v;
                        }
                    }
                }
            }
            out
        }
        TensorKind::SymmetricDensity => {
            let jx = jacobian(t, x);
            let mut out: Vec<Field<S>> = f.iter().map(|fab| divergence_of_product(t, x, fab)).collect();
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        for s in 0..n {
                            let v = jx[a * d + c][s] * f[c * d + b][s] + jx[b * d + c][s] * f[a * d + c][s];
                            out[a * d + b][s] -= v;
                        }
                    }
                }
            }
            out
        }
        TensorKind::CovectorDensity => {
            let jx = jacobian(t, x);
            let mut out: Vec<Field<S>> = f.iter().map(|fa| divergence_of_product(t, x, fa)).collect();
            for a in 0..d {
                for c in 0..d {
                    for s in 0..n {
                        out[a][s] += jx[c * d + a][s] * f[c][s];
                    }
                }
            }
            out
        }
    })
}

/// `[X, Y]`, the Lie derivative of one vector field along another.
pub fn vector_bracket<S: Scalar>(t: &Torus, x: &[Field<S>], y: &[Field<S>]) -> Vec<Field<S>> {
    lie_derivative(t, TensorKind::Vector, x, y).expect("vector fields of matching dimension")
}

pub fn gradient<S: Scalar>(t: &Torus, f: &[S]) -> Vec<Field<S>> {
    (0..t.d()).map(|c| t.diff(f, c)).collect()
}

/// `nabla_a nabla_b f = d_a d_b f - Gamma^c_ab d_c f`.
pub fn hessian<S: Scalar>(t: &Torus, k: &Curvature<S>, f: &[S]) -> Vec<Field<S>> {
    let d = t.d();
    let df = gradient(t, f);
    let mut out = zeros::<S>(t, d * d);
    for a in 0..d {
        for b in a..d {
            let mut dd = t.diff(&df[a], b);
            for (s, v) in dd.iter_mut().enumerate() {
                for (c, dfc) in df.iter().enumerate() {
                    *v -= k.gamma[(c * d + a) * d + b][s] * dfc[s];
                }
            }
            out[b * d + a] = dd.clone();
            out[a * d + b] = dd;
        }
    }
    out
}

/// `D_h(f)` with both indices raised: `-(nabla nabla f)^## + h^-1 Tr_h nabla nabla f`.
pub fn dh_operator<S: Scalar>(t: &Torus, k: &Curvature<S>, f: &[S]) -> Vec<Field<S>> {
    let d = t.d();
    let hess = hessian(t, k, f);
    let up = k.raise2(&hess);
    let mut out = zeros::<S>(t, d * d);
    for s in 0..t.sites() {
        let mut lap = S::zero();
        for i in 0..d * d {
            lap += k.hinv[i][s] * hess[i][s];
        }
        for i in 0..d * d {
            out[i][s] = k.hinv[i][s] * lap - up[i][s];
        }
    }
    out
}

/// Metric gradient `h^ab d_b f`.
pub fn grad_sharp<S: Scalar>(t: &Torus, k: &Curvature<S>, f: &[S]) -> Vec<Field<S>> {
    k.raise1(&gradient(t, f))
}
