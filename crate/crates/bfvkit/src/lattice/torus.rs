//! The periodic unit torus, fields on it and band-limited analytic test data.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grass::Scalar;
use super::LatticeError;

/// One value per site.
pub type Field<S> = Vec<S>;

/// A pair of vector-valued fields, such as the metric and momentum parts of a flow.
pub type FieldPair = (Vec<Field<f64>>, Vec<Field<f64>>);

const TAU: f64 = 2.0 * core::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Torus {
    d: usize,
    n: usize,
}

impl Torus {
    pub fn new(d: usize, n: usize) -> Result<Torus, LatticeError> {
        if !(2..=3).contains(&d) {
            return Err(LatticeError::Dimension(d));
        }
        if n < 4 {
            return Err(LatticeError::Sites(n));
        }
        Ok(Torus { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn sites(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Coordinates of a site; unused axes are zero.
    pub fn coords(&self, site: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut s = site;
        for xa in x.iter_mut().take(self.d) {
            *xa = (s % self.n) as f64 * self.dx();
            s /= self.n;
        }
        x
    }

    /// The site `step` cells away along `axis`, with wraparound.
    pub fn neighbor(&self, site: usize, axis: usize, step: isize) -> usize {
        let stride = self.n.pow(axis as u32);
        let i = (site / stride) % self.n;
        let j = (i as isize + step).rem_euclid(self.n as isize) as usize;
        site + j * stride - i * stride
    }

    /// Second-order central difference along `axis`.
    pub fn diff<S: Scalar>(&self, f: &[S], axis: usize) -> Field<S> {
        let h = 0.5 * self.n as f64;
        (0..self.sites())
            .map(|s| (f[self.neighbor(s, axis, 1)] - f[self.neighbor(s, axis, -1)]).scale(h))
            .collect()
    }

    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Field<f64> {
        (0..self.sites()).map(|s| f(self.coords(s))).collect()
    }

    /// Riemann sum over the torus, in site order.
    pub fn integrate<S: Scalar>(&self, f: &[S]) -> S {
        let mut acc = S::zero();
        for v in f {
            acc += *v;
        }
        acc.scale(libm::pow(self.dx(), self.d as f64))
    }
}

/// A finite Fourier series `sum a cos(2 pi k.x) + b sin(2 pi k.x)` with exact
/// derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Wave {
    pub terms: Vec<([i32; 3], f64, f64)>,
}

impl Wave {
    pub fn constant(c: f64) -> Wave {
        Wave {
            terms: alloc::vec![([0; 3], c, 0.0)],
        }
    }

    pub fn zero() -> Wave {
        Wave { terms: Vec::new() }
    }

    /// `a sin(2 pi k.x)`.
    pub fn sin(k: [i32; 3], a: f64) -> Wave {
        Wave {
            terms: alloc::vec![(k, 0.0, a)],
        }
    }

    /// `a cos(2 pi k.x)`.
    pub fn cos(k: [i32; 3], a: f64) -> Wave {
        Wave {
            terms: alloc::vec![(k, a, 0.0)],
        }
    }

    /// Random coefficients on every mode with `|k_i| <= band`, scaled so
    /// that `|f| <= amplitude` everywhere.
    pub fn random(d: usize, band: i32, amplitude: f64, rng: &mut ChaCha8Rng) -> Wave {
        let mut terms = Vec::new();
        let mut total = 0.0;
        for k in half_modes(d, band) {
            let a = rng.gen_range(-1.0..1.0);
            let b = if k == [0; 3] { 0.0 } else { rng.gen_range(-1.0..1.0) };
            total += libm::fabs(a) + libm::fabs(b);
            terms.push((k, a, b));
        }
        let s = if total > 0.0 { amplitude / total } else { 0.0 };
        for t in &mut terms {
            t.1 *= s;
            t.2 *= s;
        }
        Wave { terms }
    }

    pub fn plus(&self, other: &Wave) -> Wave {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().copied());
        Wave { terms }
    }

    pub fn scaled(&self, c: f64) -> Wave {
        Wave {
            terms: self.terms.iter().map(|(k, a, b)| (*k, a * c, b * c)).collect(),
        }
    }

    fn phase(k: &[i32; 3], x: [f64; 3]) -> f64 {
        TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2])
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(k, a, b)| {
                let p = Self::phase(k, x);
                a * libm::cos(p) + b * libm::sin(p)
            })
            .sum()
    }

    pub fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (k, a, b) in &self.terms {
            let p = Self::phase(k, x);
            let w = -a * libm::sin(p) + b * libm::cos(p);
            for c in 0..3 {
                g[c] += TAU * k[c] as f64 * w;
            }
        }
        g
    }

    pub fn hessian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (k, a, b) in &self.terms {
            let p = Self::phase(k, x);
            let w = -(a * libm::cos(p) + b * libm::sin(p)) * TAU * TAU;
            for (i, row) in h.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += k[i] as f64 * k[j] as f64 * w;
                }
            }
        }
        h
    }

    pub fn sample(&self, t: &Torus) -> Field<f64> {
        t.sample(|x| self.value(x))
    }
}

/// One representative of each `{k, -k}` pair with `|k_i| <= band`, plus
/// `k = 0`.
fn half_modes(d: usize, band: i32) -> Vec<[i32; 3]> {
    let r = -band..=band;
    let mut out = Vec::new();
    for k0 in r.clone() {
        for k1 in r.clone() {
            for k2 in if d == 3 { r.clone() } else { 0..=0 } {
                let k = [k0, k1, k2];
                let first = k.iter().find(|c| **c != 0);
                if first.is_none_or(|c| *c > 0) {
                    out.push(k);
                }
            }
        }
    }
    out
}

/// Smooth random data for one seed: a metric `delta + A P` whose eigenvalues
/// stay above `0.5`, a unit-scale momentum density, and test sections.
pub struct Sampler {
    d: usize,
    band: i32,
    rng: ChaCha8Rng,
}

/// Amplitude of the metric perturbation; with `|P_ab| <= 1` Gershgorin keeps
/// every eigenvalue above `1 - 3 * 0.15 = 0.55`.
pub const METRIC_AMPLITUDE: f64 = 0.15;

impl Sampler {
    pub fn new(d: usize, seed: u64) -> Sampler {
        Sampler {
            d,
            band: 1,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn scalar(&mut self, amplitude: f64) -> Wave {
        Wave::random(self.d, self.band, amplitude, &mut self.rng)
    }

    pub fn vector(&mut self, amplitude: f64) -> Vec<Wave> {
        (0..self.d).map(|_| self.scalar(amplitude)).collect()
    }

    /// Symmetric matrix of waves in row-major order.
    pub fn symmetric(&mut self, amplitude: f64) -> Vec<Wave> {
        let d = self.d;
        let mut m = alloc::vec![Wave::zero(); d * d];
        for a in 0..d {
            for b in a..d {
                let w = self.scalar(amplitude);
                m[a * d + b] = w.clone();
                m[b * d + a] = w;
            }
        }
        m
    }

    pub fn metric(&mut self) -> Vec<Wave> {
        let d = self.d;
        let mut m = self.symmetric(METRIC_AMPLITUDE);
        for a in 0..d {
            m[a * d + a] = m[a * d + a].plus(&Wave::constant(1.0));
        }
        m
    }

    pub fn momentum(&mut self) -> Vec<Wave> {
        self.symmetric(1.0)
    }
}

/// Metric `delta` as waves.
pub fn flat_metric(d: usize) -> Vec<Wave> {
    (0..d * d)
        .map(|i| {
            if i / d == i % d {
                Wave::constant(1.0)
            } else {
                Wave::zero()
            }
        })
        .collect()
}

pub fn zero_waves(n: usize) -> Vec<Wave> {
    alloc::vec![Wave::zero(); n]
}

pub fn sample_all(waves: &[Wave], t: &Torus) -> Vec<Field<f64>> {
    waves.iter().map(|w| w.sample(t)).collect()
}

/// Lift a real field into any scalar type.
pub fn lift<S: Scalar>(f: &[f64]) -> Field<S> {
    f.iter().map(|x| S::from_f64(*x)).collect()
}
