//! ADM constraint densities, their smeared functionals, hamiltonian flows and
//! the canonical Poisson bracket.
//!
//! `Pi` is stored as a weight-one density in the fixed coordinate volume, so
//! `Pi = pi vol_h` for the tensor `pi`. Functional derivatives are
//! `dx^-d` times partial derivatives by site values. The bracket is
//!
//! ```text
//! {F, G} = sum_x dx^d (dF/dh . dG/dPi - dF/dPi . dG/dh)
//! ```
//!
//! under which the flow of `G` is `(dG/dPi, -dG/dh)`.

use alloc::vec::Vec;

use super::geometry::{compute_curvature, dh_operator, lie_derivative, zeros, Curvature, TensorKind};
use super::grass::{Dual, Scalar};
use super::torus::{lift, Field, FieldPair, Torus, Wave};
use super::LatticeError;

/// Metric and momentum density on a torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry<S> {
    pub torus: Torus,
    pub h: Vec<Field<S>>,
    pub pi: Vec<Field<S>>,
}

impl Geometry<f64> {
    pub fn from_waves(torus: Torus, h: &[Wave], pi: &[Wave]) -> Geometry<f64> {
        Geometry {
            torus,
            h: h.iter().map(|w| w.sample(&torus)).collect(),
            pi: pi.iter().map(|w| w.sample(&torus)).collect(),
        }
    }

    pub fn flat(torus: Torus) -> Geometry<f64> {
        let d = torus.d();
        let h = super::torus::flat_metric(d);
        let pi = super::torus::zero_waves(d * d);
        Geometry::from_waves(torus, &h, &pi)
    }

    pub fn lift<T: Scalar>(&self) -> Geometry<T> {
        Geometry {
            torus: self.torus,
            h: self.h.iter().map(|f| lift(f)).collect(),
            pi: self.pi.iter().map(|f| lift(f)).collect(),
        }
    }
}

/// `Tr_h Pi = h_ab Pi^ab` and `Tr_h[Pi^2] = h_ab Pi^bc h_cd Pi^da` at a site.
fn traces<S: Scalar>(d: usize, h: &[Field<S>], pi: &[Field<S>], s: usize) -> (S, S) {
    let mut t1 = S::zero();
    let mut t2 = S::zero();
    for a in 0..d {
        for b in 0..d {
            t1 += h[a * d + b][s] * pi[a * d + b][s];
        }
    }
    let mut hp = alloc::vec![S::zero(); d * d];
    for a in 0..d {
        for c in 0..d {
            let mut acc = S::zero();
            for b in 0..d {
                acc += h[a * d + b][s] * pi[b * d + c][s];
            }
            hp[a * d + c] = acc;
        }
    }
    for a in 0..d {
        for c in 0..d {
            t2 += hp[a * d + c] * hp[c * d + a];
        }
    }
    (t1, t2)
}

/// The kinetic density `(Tr_h[Pi^2] - Tr_h[Pi]^2 / (d-1)) / vol_h`.
pub fn kinetic_density<S: Scalar>(t: &Torus, k: &Curvature<S>, pi: &[Field<S>]) -> Field<S> {
    let d = t.d();
    let c = 1.0 / (d as f64 - 1.0);
    (0..t.sites())
        .map(|s| {
            let (t1, t2) = traces(d, &k.h, pi, s);
            (t2 - (t1 * t1).scale(c)) * k.vol[s].recip()
        })
        .collect()
}

/// `H_n` with unit smearing: kinetic density plus `vol_h R(h)`.
pub fn energy_constraint<S: Scalar>(t: &Torus, k: &Curvature<S>, pi: &[Field<S>]) -> Field<S> {
    let mut out = kinetic_density(t, k, pi);
    for s in 0..t.sites() {
        out[s] += k.vol[s] * k.scalar[s];
    }
    out
}

/// `H_n(phi)` per site.
pub fn energy_density<S: Scalar>(t: &Torus, k: &Curvature<S>, pi: &[Field<S>], phi: &[S]) -> Field<S> {
    energy_constraint(t, k, pi)
        .into_iter()
        .zip(phi)
        .map(|(e, p)| e * *p)
        .collect()
}

/// `H_d(X) = <Pi, L_X h>` per site.
pub fn momentum_density<S: Scalar>(
    t: &Torus,
    h: &[Field<S>],
    pi: &[Field<S>],
    x: &[Field<S>],
) -> Result<Field<S>, LatticeError> {
    let lh = lie_derivative(t, TensorKind::Metric, x, h)?;
    let d = t.d();
    Ok((0..t.sites())
        .map(|s| {
            let mut acc = S::zero();
            for i in 0..d * d {
                acc += pi[i][s] * lh[i][s];
            }
            acc
        })
        .collect())
}

/// The momentum constraint as a 1-form density,
/// `(H_d)_c = Pi^ab d_c h_ab - 2 d_a(Pi^ab h_bc)`. Summation by parts is
/// exact for central differences, so `sum X^c (H_d)_c` equals the sum of
/// [`momentum_density`].
pub fn momentum_constraint<S: Scalar>(t: &Torus, h: &[Field<S>], pi: &[Field<S>]) -> Vec<Field<S>> {
    let d = t.d();
    let n = t.sites();
    let mut out = zeros::<S>(t, d);
    for c in 0..d {
        for ab in 0..d * d {
            let dh = t.diff(&h[ab], c);
            for s in 0..n {
                out[c][s] += pi[ab][s] * dh[s];
            }
        }
        for a in 0..d {
            let ph: Field<S> = (0..n)
                .map(|s| {
                    let mut acc = S::zero();
                    for b in 0..d {
                        acc += pi[a * d + b][s] * h[b * d + c][s];
                    }
                    acc
                })
                .collect();
            let dph = t.diff(&ph, a);
            for s in 0..n {
                out[c][s] -= dph[s].scale(2.0);
            }
        }
    }
    out
}

/// `h~ = dH_n/dPi = (2 / vol)(Pi_flat_flat - h Tr_h Pi / (d-1))`, lower indices.
/// It equals `-2K` for the extrinsic curvature `K`.
pub fn h_tilde<S: Scalar>(t: &Torus, k: &Curvature<S>, pi: &[Field<S>]) -> Vec<Field<S>> {
    let d = t.d();
    let c = 1.0 / (d as f64 - 1.0);
    let mut out = zeros::<S>(t, d * d);
    for s in 0..t.sites() {
        let (t1, _) = traces(d, &k.h, pi, s);
        let two_over_vol = k.vol[s].recip().scale(2.0);
        for a in 0..d {
            for b in 0..d {
                let mut low = S::zero();
                for c1 in 0..d {
                    for c2 in 0..d {
                        low += k.h[a * d + c1][s] * pi[c1 * d + c2][s] * k.h[c2 * d + b][s];
                    }
                }
                out[a * d + b][s] = two_over_vol * (low - k.h[a * d + b][s] * t1.scale(c));
            }
        }
    }
    out
}

/// `Pi~ = d/dh` of the kinetic density, upper indices:
/// `-h^-1 kinetic / 2 + (2 / vol)(Pi h Pi - Pi Tr_h Pi / (d-1))`.
pub fn pi_tilde<S: Scalar>(t: &Torus, k: &Curvature<S>, pi: &[Field<S>]) -> Vec<Field<S>> {
    let d = t.d();
    let c = 1.0 / (d as f64 - 1.0);
    let kin = kinetic_density(t, k, pi);
    let mut out = zeros::<S>(t, d * d);
    for s in 0..t.sites() {
        let (t1, _) = traces(d, &k.h, pi, s);
        let two_over_vol = k.vol[s].recip().scale(2.0);
        for a in 0..d {
            for b in 0..d {
                let mut php = S::zero();
                for c1 in 0..d {
                    for c2 in 0..d {
                        php += pi[a * d + c1][s] * k.h[c1 * d + c2][s] * pi[c2 * d + b][s];
                    }
                }
                out[a * d + b][s] =
                    two_over_vol * (php - pi[a * d + b][s] * t1.scale(c)) - k.hinv[a * d + b][s] * kin[s].scale(0.5);
            }
        }
    }
    out
}

/// Test data `(phi, X)` for the smeared constraint `H_n(phi) + H_d(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Smearing {
    pub phi: Field<f64>,
    pub x: Vec<Field<f64>>,
}

impl Smearing {
    pub fn new(phi: Field<f64>, x: Vec<Field<f64>>) -> Smearing {
        Smearing { phi, x }
    }

    pub fn energy(t: &Torus, phi: Field<f64>) -> Smearing {
        Smearing {
            phi,
            x: zeros::<f64>(t, t.d()),
        }
    }

    pub fn momentum(t: &Torus, x: Vec<Field<f64>>) -> Smearing {
        Smearing {
            phi: alloc::vec![0.0; t.sites()],
            x,
        }
    }

    pub fn from_waves(t: &Torus, phi: &Wave, x: &[Wave]) -> Smearing {
        Smearing {
            phi: phi.sample(t),
            x: x.iter().map(|w| w.sample(t)).collect(),
        }
    }

    pub fn plus(&self, other: &Smearing) -> Smearing {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Smearing {
            phi: add(&self.phi, &other.phi),
            x: self.x.iter().zip(&other.x).map(|(a, b)| add(a, b)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Smearing {
        Smearing {
            phi: self.phi.iter().map(|v| v * c).collect(),
            x: self.x.iter().map(|f| f.iter().map(|v| v * c).collect()).collect(),
        }
    }
}

fn smeared_with<S: Scalar>(t: &Torus, k: &Curvature<S>, pi: &[Field<S>], f: &Smearing) -> Result<S, LatticeError> {
    let phi: Field<S> = lift(&f.phi);
    let x: Vec<Field<S>> = f.x.iter().map(|c| lift(c)).collect();
    let mut dens = energy_density(t, k, pi, &phi);
    let mom = momentum_density(t, &k.h, pi, &x)?;
    for (a, b) in dens.iter_mut().zip(mom) {
        *a += b;
    }
    Ok(t.integrate(&dens))
}

/// `H_n(phi) + H_d(X)` integrated over the torus.
pub fn constraint_functional<S: Scalar>(g: &Geometry<S>, f: &Smearing) -> Result<S, LatticeError> {
    let k = compute_curvature(&g.torus, &g.h)?;
    smeared_with(&g.torus, &k, &g.pi, f)
}

/// The hamiltonian flow `(dG/dPi, -dG/dh)` of `G = H_n(phi) + H_d(X)`:
///
/// ```text
/// dh  = h~ phi + L_X h
/// dPi = -Pi~ phi + vol (G^## phi + D^##(phi)) + L_X Pi
/// ```
///
/// `dh` is the exact gradient of the discrete functional; `dPi` is the
/// continuum formula discretised, so it matches the discrete gradient up to
/// `O(dx^2)`.
pub fn hamiltonian_flow(g: &Geometry<f64>, f: &Smearing) -> Result<FieldPair, LatticeError> {
    let t = &g.torus;
    let k = compute_curvature(t, &g.h)?;
    Ok((
        metric_flow(t, &k, &g.pi, f)?,
        momentum_flow(t, &k, &g.pi, &f.phi, &f.x)?,
    ))
}

fn metric_flow(
    t: &Torus,
    k: &Curvature<f64>,
    pi: &[Field<f64>],
    f: &Smearing,
) -> Result<Vec<Field<f64>>, LatticeError> {
    let mut out = h_tilde(t, k, pi);
    let lh = lie_derivative(t, TensorKind::Metric, &f.x, &k.h)?;
    for (o, l) in out.iter_mut().zip(lh) {
        for s in 0..t.sites() {
            o[s] = o[s] * f.phi[s] + l[s];
        }
    }
    Ok(out)
}

/// `-Pi~ phi + vol (G^## phi + D^##(phi)) + L_X Pi`, generic so it can carry
/// odd `phi` and `X`; `phi` multiplies from the right, `X` from the left.
pub fn momentum_flow<S: Scalar>(
    t: &Torus,
    k: &Curvature<S>,
    pi: &[Field<S>],
    phi: &[S],
    x: &[Field<S>],
) -> Result<Vec<Field<S>>, LatticeError> {
    let d = t.d();
    let pt = pi_tilde(t, k, pi);
    let g_up = k.raise2(&k.einstein);
    let dphi = dh_operator(t, k, phi);
    let mut out = lie_derivative(t, TensorKind::SymmetricDensity, x, pi)?;
    for i in 0..d * d {
        for s in 0..t.sites() {
            out[i][s] += (k.vol[s] * g_up[i][s] - pt[i][s]) * phi[s] + k.vol[s] * dphi[i][s];
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BracketMode {
    /// `dF_h[dG/dPi] - dG_h[dF/dPi]`, with `dF/dPi` in closed form and the
    /// metric directional derivative taken exactly by dual numbers.
    Analytic,
    /// Central differences of size `step` in every independent component.
    FiniteDifference { step: f64 },
}

/// `dF/dPi` of `H_n(phi) + H_d(X)`: `h~ phi + L_X h`. Exact for the discrete
/// functional.
fn pi_gradient(
    t: &Torus,
    k: &Curvature<f64>,
    pi: &[Field<f64>],
    f: &Smearing,
) -> Result<Vec<Field<f64>>, LatticeError> {
    metric_flow(t, k, pi, f)
}

/// `dF_h[v]`, the metric directional derivative of the discrete functional.
fn metric_derivative(g: &Geometry<f64>, f: &Smearing, v: &[Field<f64>]) -> Result<f64, LatticeError> {
    let eta = Dual::generator(0);
    let h: Vec<Field<Dual>> =
        g.h.iter()
            .zip(v)
            .map(|(hf, vf)| {
                hf.iter()
                    .zip(vf)
                    .map(|(a, b)| Dual::from_f64(*a) + eta.scale(*b))
                    .collect()
            })
            .collect();
    let pi: Vec<Field<Dual>> = g.pi.iter().map(|f| lift(f)).collect();
    let k = compute_curvature(&g.torus, &h)?;
    Ok(smeared_with(&g.torus, &k, &pi, f)?.coeff(1))
}

/// Multiplicity of the independent component `(a, b)`, `a <= b`.
fn multiplicity(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        2.0
    }
}

pub fn poisson_bracket(g: &Geometry<f64>, f: &Smearing, gg: &Smearing, mode: BracketMode) -> Result<f64, LatticeError> {
    let t = &g.torus;
    match mode {
        BracketMode::Analytic => {
            let k = compute_curvature(t, &g.h)?;
            let dg_dpi = pi_gradient(t, &k, &g.pi, gg)?;
            let df_dpi = pi_gradient(t, &k, &g.pi, f)?;
            Ok(metric_derivative(g, f, &dg_dpi)? - metric_derivative(g, gg, &df_dpi)?)
        }
        BracketMode::FiniteDifference { step } => fd_bracket(g, f, gg, step),
    }
}

fn fd_bracket(g: &Geometry<f64>, f: &Smearing, gg: &Smearing, step: f64) -> Result<f64, LatticeError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(LatticeError::FdStep(step));
    }
    let t = &g.torus;
    let d = t.d();
    let k0 = compute_curvature(t, &g.h)?;
    let mut total = 0.0;
    let mut h = g.h.clone();
    let mut pi = g.pi.clone();
    for s in 0..t.sites() {
        for a in 0..d {
            for b in a..d {
                let (i, j) = (a * d + b, b * d + a);
                let mut dh = [0.0; 2];
                let mut dp = [0.0; 2];
                for (sign, w) in [(1.0, 0.5 / step), (-1.0, -0.5 / step)] {
                    let old = h[i][s];
                    h[i][s] = old + sign * step;
                    h[j][s] = old + sign * step;
                    let k = compute_curvature(t, &h)?;
                    dh[0] += w * smeared_with(t, &k, &g.pi, f)?;
                    dh[1] += w * smeared_with(t, &k, &g.pi, gg)?;
                    h[i][s] = old;
                    h[j][s] = old;

                    let old = pi[i][s];
                    pi[i][s] = old + sign * step;
                    pi[j][s] = old + sign * step;
                    dp[0] += w * smeared_with(t, &k0, &pi, f)?;
                    dp[1] += w * smeared_with(t, &k0, &pi, gg)?;
                    pi[i][s] = old;
                    pi[j][s] = old;
                }
                total += (dh[0] * dp[1] - dp[0] * dh[1]) / multiplicity(a, b);
            }
        }
    }
    Ok(total / libm::pow(t.dx(), d as f64))
}

/// Finite-difference brackets over a decreasing range of steps.
#[derive(Clone, Debug, PartialEq)]
pub struct FdSweep {
    pub steps: Vec<f64>,
    pub values: Vec<f64>,
    /// Index into `steps` of the chosen value.
    pub chosen: usize,
    /// Set when the differences between neighbouring values, up to the
    /// chosen step, do not shrink like `step^2`.
    pub non_quadratic: bool,
}

impl FdSweep {
    pub fn value(&self) -> f64 {
        self.values[self.chosen]
    }
}

pub const DEFAULT_FD_STEPS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Runs the finite-difference bracket at every step and picks the smaller
/// step of the neighbouring pair that agrees best.
pub fn fd_sweep(g: &Geometry<f64>, f: &Smearing, gg: &Smearing, steps: &[f64]) -> Result<FdSweep, LatticeError> {
    let values = steps
        .iter()
        .map(|s| fd_bracket(g, f, gg, *s))
        .collect::<Result<Vec<_>, _>>()?;
    let gaps: Vec<f64> = values.windows(2).map(|w| libm::fabs(w[0] - w[1])).collect();
    let mut best = 0;
    for (i, gap) in gaps.iter().enumerate() {
        if *gap < gaps[best] {
            best = i;
        }
    }
    // each gap should shrink by (step ratio)^2 while truncation dominates
    let non_quadratic = (1..=best).any(|i| {
        let expect = (steps[i - 1] / steps[i]) * (steps[i] / steps[i + 1]);
        let seen = gaps[i - 1] / gaps[i];
        !(seen > expect / 3.0 && seen < expect * 3.0)
    });
    Ok(FdSweep {
        steps: steps.to_vec(),
        chosen: if values.len() > 1 { best + 1 } else { 0 },
        values,
        non_quadratic,
    })
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let m = libm::fmax(libm::fabs(a), libm::fabs(b));
    if m == 0.0 {
        0.0
    } else {
        libm::fabs(a - b) / m
    }
}
