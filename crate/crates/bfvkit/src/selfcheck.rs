//! Seeded random objects and the randomized identity suite for the graded
//! core.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bfv::PhaseSpace;
use crate::graded::{int, rat, Algebra, Derivation, GradedPoly, Monomial, Substitution};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Six generators with degrees in `-2..=3`, always including an even
/// degree-zero generator and odd generators of degree `1` and `-1`.
pub fn random_algebra(rng: &mut SeededRng) -> Arc<Algebra> {
    let mut decls: Vec<(String, i32)> = alloc::vec![("a0".into(), 0), ("a1".into(), 1), ("a2".into(), -1),];
    for k in 3..6 {
        decls.push((format!("a{k}"), rng.gen_range(-2..=3)));
    }
    Algebra::new(&decls).expect("distinct names")
}

pub fn random_monomial(rng: &mut SeededRng, alg: &Arc<Algebra>, max_factors: usize) -> GradedPoly {
    let mut p = GradedPoly::one(alg);
    for _ in 0..rng.gen_range(0..=max_factors) {
        p = p * GradedPoly::generator(alg, rng.gen_range(0..alg.len()));
    }
    p
}

fn small_rational(rng: &mut SeededRng) -> crate::graded::Rational {
    let mut n = rng.gen_range(-5i64..=5);
    if n == 0 {
        n = 1;
    }
    rat(n, rng.gen_range(1i64..=3))
}

pub fn random_poly(rng: &mut SeededRng, alg: &Arc<Algebra>, terms: usize) -> GradedPoly {
    let mut p = GradedPoly::zero(alg);
    for _ in 0..terms {
        p = p + random_monomial(rng, alg, 3).scale(&small_rational(rng));
    }
    p
}

/// A random polynomial all of whose terms have degree `degree`; zero when
/// sampling finds no monomial of that degree.
pub fn random_homogeneous(rng: &mut SeededRng, alg: &Arc<Algebra>, degree: i32, terms: usize) -> GradedPoly {
    let mut p = GradedPoly::zero(alg);
    let mut found = 0;
    for _ in 0..200 {
        if found == terms {
            break;
        }
        let m = random_monomial(rng, alg, 4);
        if m.is_zero() || m.degree() != Some(degree) {
            continue;
        }
        p = p + m.scale(&small_rational(rng));
        found += 1;
    }
    p
}

pub fn random_derivation(rng: &mut SeededRng, alg: &Arc<Algebra>, degree: i32) -> Derivation {
    let mut d = Derivation::new(alg, degree);
    for g in 0..alg.len() {
        let img = random_homogeneous(rng, alg, alg.degree(g) + degree, 2);
        d.set_image(g, img).expect("homogeneous of the right degree");
    }
    d
}

pub fn random_substitution(rng: &mut SeededRng, alg: &Arc<Algebra>) -> Substitution {
    let mut s = Substitution::new(alg, alg);
    for g in 0..alg.len() {
        let img = GradedPoly::generator(alg, g) + random_homogeneous(rng, alg, alg.degree(g), 2);
        s.set(g, img).expect("degree-preserving image");
    }
    s
}

/// A polynomial in the canonical variables of a phase space, of total
/// degree at most `max_degree`.
pub fn random_body_poly(rng: &mut SeededRng, sp: &PhaseSpace, max_degree: u32, terms: usize) -> GradedPoly {
    let basis: Vec<Monomial> = sp.body_monomials(max_degree);
    let mut p = GradedPoly::zero(sp.algebra());
    for _ in 0..terms {
        let m = basis[rng.gen_range(0..basis.len())].clone();
        p.add_term(m, int(rng.gen_range(-3i64..=3)));
    }
    p
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub koszul: usize,
    pub associativity: usize,
    pub leibniz: usize,
    pub homomorphism: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn total(&self) -> usize {
        self.koszul + self.associativity + self.leibniz + self.homomorphism
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `count` rounds; each round checks graded commutativity,
/// associativity, the Leibniz rule for a random derivation and
/// multiplicativity of a random substitution.
pub fn run_graded_suite(seed: u64, count: usize) -> SuiteReport {
    let mut rng = rng(seed);
    let mut rep = SuiteReport::default();
    for round in 0..count {
        let alg = random_algebra(&mut rng);
        let a = random_monomial(&mut rng, &alg, 3);
        let b = random_monomial(&mut rng, &alg, 3);
        let c = random_monomial(&mut rng, &alg, 3);

        let ab = &a * &b;
        let ba = &b * &a;
        let sign_odd = match (a.degree(), b.degree()) {
            (Some(x), Some(y)) => x & y & 1 != 0,
            _ => false,
        };
        let expected = if sign_odd { -&ba } else { ba };
        rep.koszul += 1;
        if ab != expected {
            rep.failures.push(format!("round {round}: koszul a={a} b={b}"));
        }

        rep.associativity += 1;
        if (&ab * &c) != (&a * &(&b * &c)) {
            rep.failures.push(format!("round {round}: associativity"));
        }

        let ddeg = rng.gen_range(-2..=2);
        let d = random_derivation(&mut rng, &alg, ddeg);
        let x = random_poly(&mut rng, &alg, 2).component(rng.gen_range(-2..=3));
        let y = random_poly(&mut rng, &alg, 2);
        let lhs = d.apply(&(&x * &y)).expect("total derivation");
        let mut rhs2 = &x * &d.apply(&y).expect("total derivation");
        if let Some(dx) = x.degree() {
            if dx & ddeg & 1 != 0 {
                rhs2 = -rhs2;
            }
        }
        let rhs = d.apply(&x).expect("total derivation") * &y + rhs2;
        rep.leibniz += 1;
        if lhs != rhs {
            rep.failures.push(format!("round {round}: leibniz x={x} y={y}"));
        }

        let s = random_substitution(&mut rng, &alg);
        let u = random_poly(&mut rng, &alg, 2);
        let v = random_poly(&mut rng, &alg, 2);
        rep.homomorphism += 1;
        let lhs = s.apply(&(&u * &v)).expect("total substitution");
        let rhs = s.apply(&u).expect("total substitution") * s.apply(&v).expect("total substitution");
        if lhs != rhs {
            rep.failures.push(format!("round {round}: homomorphism"));
        }
    }
    rep
}
