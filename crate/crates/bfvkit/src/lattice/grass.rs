//! Scalars for lattice fields: plain reals and elements of a small exterior
//! algebra with real coefficients.

use core::fmt::Debug;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// What the lattice code needs from a field value.
///
/// `recip` and `sqrt` are only ever applied to even elements with a positive
/// body; for [`Grass`] they expand in the nilpotent part.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn from_f64(x: f64) -> Self;
    /// The coefficient of the unit.
    fn body(&self) -> f64;
    fn scale(self, c: f64) -> Self;
    fn recip(self) -> Self;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn body(&self) -> f64 {
        *self
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
}

/// An element of the exterior algebra on `log2 M` odd generators. Component
/// `i` multiplies the ordered product of the generators whose bits are set in
/// `i`, lowest bit first.
#[derive(Clone, Copy, PartialEq)]
pub struct Grass<const M: usize>(pub [f64; M]);

/// One generator, used for exact first-order directional derivatives.
pub type Dual = Grass<2>;

impl<const M: usize> Debug for Grass<M> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut first = true;
        for (i, c) in self.0.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for g in 0..Self::GENERATORS {
                if i >> g & 1 == 1 {
                    write!(f, "·e{g}")?;
                }
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Sign picked up when moving the blade `b` through the blade `a` to reach
/// canonical order in `a ∧ b`.
#[inline]
pub fn blade_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl<const M: usize> Grass<M> {
    pub const GENERATORS: usize = M.trailing_zeros() as usize;

    /// The generator with index `g`.
    pub fn generator(g: usize) -> Self {
        assert!(g < Self::GENERATORS, "generator {g} out of range");
        let mut c = [0.0; M];
        c[1 << g] = 1.0;
        Grass(c)
    }

    /// `x` times the ordered product of the generators in `blade`.
    pub fn blade(blade: usize, x: f64) -> Self {
        let mut c = [0.0; M];
        c[blade] = x;
        Grass(c)
    }

    pub fn coeff(&self, blade: usize) -> f64 {
        self.0[blade]
    }

    /// Parity of the highest nonzero grade, or `None` for mixed parity.
    pub fn parity(&self) -> Option<u32> {
        let mut p = None;
        for (i, c) in self.0.iter().enumerate() {
            if *c != 0.0 && i != 0 {
                let q = i.count_ones() % 2;
                match p {
                    None => p = Some(q),
                    Some(old) if old != q => return None,
                    _ => {}
                }
            }
        }
        Some(p.unwrap_or(0))
    }

    /// Sum of `c_k n^k` over the nilpotent part `n`, where `c_k` is supplied
    /// by `taylor(k)`, the k-th Taylor coefficient at the body.
    fn analytic(self, taylor: impl Fn(usize, f64) -> f64) -> Self {
        let a = self.0[0];
        let mut n = self;
        n.0[0] = 0.0;
        let mut out = Grass::from_f64(taylor(0, a));
        let mut pow = Grass::from_f64(1.0);
        for k in 1..=Self::GENERATORS {
            pow = pow * n;
            if pow.0.iter().all(|c| *c == 0.0) {
                break;
            }
            out += pow.scale(taylor(k, a));
        }
        out
    }
}

impl<const M: usize> Add for Grass<M> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        for i in 0..M {
            self.0[i] += o.0[i];
        }
        self
    }
}

impl<const M: usize> Sub for Grass<M> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        for i in 0..M {
            self.0[i] -= o.0[i];
        }
        self
    }
}

impl<const M: usize> Neg for Grass<M> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for c in &mut self.0 {
            *c = -*c;
        }
        self
    }
}

impl<const M: usize> AddAssign for Grass<M> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const M: usize> SubAssign for Grass<M> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<const M: usize> Mul for Grass<M> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut out = [0.0; M];
        for i in 0..M {
            let a = self.0[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..M {
                let b = o.0[j];
                if b == 0.0 || i & j != 0 {
                    continue;
                }
                out[i | j] += blade_sign(i, j) * a * b;
            }
        }
        Grass(out)
    }
}

impl<const M: usize> Scalar for Grass<M> {
    fn from_f64(x: f64) -> Self {
        let mut c = [0.0; M];
        c[0] = x;
        Grass(c)
    }
    fn body(&self) -> f64 {
        self.0[0]
    }
    fn scale(mut self, c: f64) -> Self {
        for x in &mut self.0 {
            *x *= c;
        }
        self
    }
    fn recip(self) -> Self {
        self.analytic(|k, a| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s * libm::pow(a, -(k as f64) - 1.0)
        })
    }
    fn sqrt(self) -> Self {
        self.analytic(|k, a| {
            // binomial(1/2, k) a^(1/2 - k)
            let mut b = 1.0;
            for j in 0..k {
                b *= (0.5 - j as f64) / (j as f64 + 1.0);
            }
            b * libm::pow(a, 0.5 - k as f64)
        })
    }
}
