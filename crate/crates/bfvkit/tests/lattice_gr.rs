#![allow(clippy::needless_range_loop)]

use bfvkit::lattice::constraints::*;
use bfvkit::lattice::geometry::*;
use bfvkit::lattice::homological::*;
use bfvkit::lattice::study::*;
use bfvkit::lattice::torus::*;
use bfvkit::lattice::{Grass, LatticeError, Scalar};
use proptest::prelude::*;

use std::f64::consts::PI;

const NS: [usize; 3] = [8, 16, 32];

fn in_band(p: Option<f64>) -> bool {
    p.is_some_and(|p| (1.7..=2.3).contains(&p))
}

fn order(defects: &[f64]) -> f64 {
    (defects[defects.len() - 2] / defects[defects.len() - 1]).log2()
}

type G8 = Grass<8>;

// ---------- odd coefficients

fn arb_grass() -> impl Strategy<Value = G8> {
    proptest::array::uniform8(-4i32..=4).prop_map(|c| Grass(c.map(f64::from)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn grass_product_is_associative(a in arb_grass(), b in arb_grass(), c in arb_grass()) {
        // small integers keep every product exact
        prop_assert_eq!((a * b) * c, a * (b * c));
    }

    #[test]
    fn grass_distributes(a in arb_grass(), b in arb_grass(), c in arb_grass()) {
        prop_assert_eq!(a * (b + c), a * b + a * c);
    }

    #[test]
    fn even_reciprocal_and_root(a in arb_grass(), body in 1.0f64..4.0) {
        // keep only even blades and give a positive body
        let mut e = a;
        for i in 0..8 {
            if (i as u32).count_ones() % 2 == 1 {
                e.0[i] = 0.0;
            }
        }
        e.0[0] = body;
        let one = e * e.recip();
        let sq = e.sqrt() * e.sqrt();
        for i in 0..8 {
            let want = if i == 0 { 1.0 } else { 0.0 };
            prop_assert!((one.0[i] - want).abs() < 1e-12);
            prop_assert!((sq.0[i] - e.0[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn generators_anticommute_and_square_to_zero() {
    for a in 0..3 {
        let ea = G8::generator(a);
        assert_eq!(ea * ea, G8::zero());
        for b in 0..3 {
            let eb = G8::generator(b);
            assert_eq!(ea * eb, -(eb * ea));
        }
    }
    let (e1, e2, e3) = (G8::generator(0), G8::generator(1), G8::generator(2));
    assert_eq!(e3 * e1 * e2, G8::blade(0b111, 1.0));
    assert_eq!(e2 * e1 * e3, G8::blade(0b111, -1.0));
    assert_eq!((e1 * e2).parity(), Some(0));
    assert_eq!((e1 + e1 * e2).parity(), None);
}

// ---------- torus and operators

#[test]
fn torus_wraps_and_validates() {
    let t = Torus::new(2, 4).unwrap();
    assert_eq!(t.neighbor(3, 0, 1), 0);
    assert_eq!(t.neighbor(0, 1, -1), 12);
    assert_eq!(t.neighbor(t.neighbor(5, 1, 3), 1, -3), 5);
    assert_eq!(Torus::new(4, 8), Err(LatticeError::Dimension(4)));
    assert_eq!(Torus::new(2, 3), Err(LatticeError::Sites(3)));
}

#[test]
fn flat_metric_has_no_curvature() {
    for d in [2, 3] {
        let t = Torus::new(d, 6).unwrap();
        let k = compute_curvature(&t, &sample_all(&flat_metric(d), &t)).unwrap();
        assert!(k.gamma.iter().flatten().all(|v| *v == 0.0));
        assert!(k.scalar.iter().all(|v| *v == 0.0));
        assert!(k.vol.iter().all(|v| *v == 1.0));
    }
}

#[test]
fn non_positive_metric_is_reported_with_its_site() {
    let t = Torus::new(2, 4).unwrap();
    let mut h = sample_all(&flat_metric(2), &t);
    h[0][5] = -1.0;
    match compute_curvature(&t, &h) {
        Err(LatticeError::NotPositive { site, coords }) => {
            assert_eq!(site, 5);
            assert_eq!(coords, [0.25, 0.25, 0.0]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn conformal_scalar_curvature_converges() {
    // h = e^(2 l) delta, l = 0.2 sin(2 pi x) + 0.1 cos(2 pi y): R = -2 e^(-2l) lap l
    let l = |p: [f64; 3]| 0.2 * (2.0 * PI * p[0]).sin() + 0.1 * (2.0 * PI * p[1]).cos();
    let lap = |p: [f64; 3]| -4.0 * PI * PI * l(p);
    let mut defects = Vec::new();
    for n in NS {
        let t = Torus::new(2, n).unwrap();
        let e = t.sample(|p| (2.0 * l(p)).exp());
        let z = vec![0.0; t.sites()];
        let k = compute_curvature(&t, &[e.clone(), z.clone(), z, e]).unwrap();
        let exact = t.sample(|p| -2.0 * (-2.0 * l(p)).exp() * lap(p));
        defects.push(max_diff(&[k.scalar], &[exact]));
    }
    assert!(in_band(Some(order(&defects))), "{defects:?}");
    let study = curvature(&NS, 7).unwrap();
    assert!(study.conformal.order_in_band());
    assert!(study.einstein_2d.order_in_band(), "{:?}", study.einstein_2d);
    assert!(study.lie_bracket.order_in_band());
    assert_eq!(study.flat_residual, 0.0);
}

#[test]
fn lie_derivative_examples() {
    let t = Torus::new(2, 32).unwrap();
    let x = vec![vec![0.7; t.sites()], vec![-0.3; t.sites()]];
    let phi = t.sample(|p| (2.0 * PI * p[0]).sin());
    let lphi = lie_derivative(&t, TensorKind::Scalar, &x, &[phi]).unwrap();
    let want = t.sample(|p| 0.7 * 2.0 * PI * (2.0 * PI * p[0]).cos());
    assert!(max_diff(&lphi, &[want]) < 0.03);

    let h: Vec<Field<f64>> = [1.2, 0.1, 0.1, 0.9].iter().map(|c| vec![*c; t.sites()]).collect();
    let lh = lie_derivative(&t, TensorKind::Metric, &x, &h).unwrap();
    assert!(lh.iter().flatten().all(|v| *v == 0.0));

    let bad = lie_derivative(&t, TensorKind::Metric, &x, &h[..3]);
    assert_eq!(bad, Err(LatticeError::Components { expected: 4, found: 3 }));

    // [X, Y] for X = (sin 2 pi y, 0), Y = (0, 1) is (-2 pi cos 2 pi y, 0)
    let mut defects = Vec::new();
    for n in NS {
        let t = Torus::new(2, n).unwrap();
        let xv = vec![t.sample(|p| (2.0 * PI * p[1]).sin()), vec![0.0; t.sites()]];
        let yv = vec![vec![0.0; t.sites()], vec![1.0; t.sites()]];
        let b = vector_bracket(&t, &xv, &yv);
        let want = vec![t.sample(|p| -2.0 * PI * (2.0 * PI * p[1]).cos()), vec![0.0; t.sites()]];
        defects.push(max_diff(&b, &want));
    }
    assert!(in_band(Some(order(&defects))));
}

#[test]
fn density_lie_derivative_is_a_divergence() {
    // a weight-one scalar density integrates its Lie derivative to zero
    let t = Torus::new(2, 12).unwrap();
    let mut s = Sampler::new(2, 3);
    let x = sample_all(&s.vector(1.0), &t);
    let f = s.scalar(1.0).sample(&t);
    let l = lie_derivative(&t, TensorKind::ScalarDensity, &x, &[f]).unwrap();
    assert!(t.integrate(&l[0]).abs() < 1e-14);
}

// ---------- constraints and brackets

fn random_geometry(t: Torus, seed: u64) -> Geometry<f64> {
    let mut s = Sampler::new(t.d(), seed);
    let h = s.metric();
    let pi = s.momentum();
    Geometry::from_waves(t, &h, &pi)
}

#[test]
fn constraint_values_on_simple_states() {
    let t = Torus::new(2, 8).unwrap();
    let flat = Geometry::flat(t);
    let mut s = Sampler::new(2, 1);
    let f = Smearing::from_waves(&t, &s.scalar(1.0), &s.vector(1.0));
    assert_eq!(constraint_functional(&flat, &f).unwrap(), 0.0);

    // Pi = c delta: Tr[Pi^2] - Tr[Pi]^2 = 2c^2 - 4c^2
    let c = 0.7;
    let mut g = flat.clone();
    g.pi[0] = vec![c; t.sites()];
    g.pi[3] = vec![c; t.sites()];
    let one = Smearing::energy(&t, vec![1.0; t.sites()]);
    assert!((constraint_functional(&g, &one).unwrap() + 2.0 * c * c).abs() < 1e-14);

    // constant X on constant h, Pi
    let mut g = flat;
    g.h[1] = vec![0.2; t.sites()];
    g.h[2] = vec![0.2; t.sites()];
    g.pi = [0.3, -0.4, -0.4, 1.1].iter().map(|v| vec![*v; t.sites()]).collect();
    let x = Smearing::momentum(&t, vec![vec![0.5; t.sites()], vec![-1.5; t.sites()]]);
    assert_eq!(constraint_functional(&g, &x).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn functionals_are_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let t = Torus::new(2, 6).unwrap();
        let g = random_geometry(t, seed);
        let mut s = Sampler::new(2, seed + 1);
        let f1 = Smearing::from_waves(&t, &s.scalar(1.0), &s.vector(1.0));
        let f2 = Smearing::from_waves(&t, &s.scalar(1.0), &s.vector(1.0));
        let lhs = constraint_functional(&g, &f1.scaled(a).plus(&f2.scaled(b))).unwrap();
        let rhs = a * constraint_functional(&g, &f1).unwrap() + b * constraint_functional(&g, &f2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(seed in 0u64..1000, a in -2.0f64..2.0) {
        let t = Torus::new(2, 6).unwrap();
        let g = random_geometry(t, seed);
        let mut s = Sampler::new(2, seed + 1);
        let f = Smearing::from_waves(&t, &s.scalar(1.0), &s.vector(1.0));
        let g1 = Smearing::from_waves(&t, &s.scalar(1.0), &s.vector(1.0));
        let g2 = Smearing::from_waves(&t, &s.scalar(1.0), &s.vector(1.0));
        let br = |x: &Smearing, y: &Smearing| poisson_bracket(&g, x, y, BracketMode::Analytic).unwrap();
        let fg = br(&f, &g1);
        prop_assert!((fg + br(&g1, &f)).abs() <= 1e-12 * (1.0 + fg.abs()));
        prop_assert_eq!(br(&f, &f), 0.0);
        let lin = br(&f, &g1.scaled(a).plus(&g2));
        let sep = a * fg + br(&f, &g2);
        prop_assert!((lin - sep).abs() <= 1e-11 * (1.0 + sep.abs()));
    }
}

#[test]
fn flat_state_brackets_vanish() {
    let t = Torus::new(2, 8).unwrap();
    let g = Geometry::flat(t);
    let data = BracketData::random(2, 3);
    let f = Smearing::from_waves(&t, &data.phi, &data.x);
    let h = Smearing::from_waves(&t, &data.psi, &data.y);
    assert!(poisson_bracket(&g, &f, &h, BracketMode::Analytic).unwrap().abs() < 1e-13);
    let sides = relation_sides(&data, t).unwrap();
    let flat_sides = {
        let mut d = data.clone();
        d.h = flat_metric(2);
        d.pi = zero_waves(4);
        relation_sides(&d, t).unwrap()
    };
    assert!(sides.iter().any(|(l, _)| *l != 0.0));
    for (l, r) in flat_sides {
        assert!(l.abs() < 1e-13 && r.abs() < 1e-13, "{l} {r}");
    }
}

#[test]
fn constant_vector_fields_commute() {
    let t = Torus::new(2, 8).unwrap();
    let g = random_geometry(t, 4);
    let x = Smearing::momentum(&t, vec![vec![0.3; t.sites()], vec![1.0; t.sites()]]);
    let y = Smearing::momentum(&t, vec![vec![-2.0; t.sites()], vec![0.5; t.sites()]]);
    assert!(poisson_bracket(&g, &x, &y, BracketMode::Analytic).unwrap().abs() < 1e-12);
}

/// Exact `h^ab (f d_b g - g d_b f)` built here from the wave data.
fn antisymmetric_gradient(t: &Torus, h: &[Wave], f: &Wave, g: &Wave) -> Vec<Field<f64>> {
    let mut out = vec![vec![0.0; t.sites()]; 2];
    for s in 0..t.sites() {
        let p = t.coords(s);
        let m: Vec<f64> = h.iter().map(|w| w.value(p)).collect();
        let det = m[0] * m[3] - m[1] * m[2];
        let inv = [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det];
        let w = [0, 1].map(|b| f.value(p) * g.grad(p)[b] - g.value(p) * f.grad(p)[b]);
        for a in 0..2 {
            out[a][s] = inv[2 * a] * w[0] + inv[2 * a + 1] * w[1];
        }
    }
    out
}

#[test]
fn energy_bracket_closes_on_minus_momentum() {
    // {Hn(f), Hn(g)} = -Hd(f grad g - g grad f): the opposite sign is off by
    // twice the bracket and does not converge
    let data = BracketData::random(2, 11);
    let mut with_minus = Vec::new();
    let mut with_plus = Vec::new();
    for n in NS {
        let t = Torus::new(2, n).unwrap();
        let g = Geometry::from_waves(t, &data.h, &data.pi);
        let f = Smearing::energy(&t, data.phi.sample(&t));
        let h = Smearing::energy(&t, data.psi.sample(&t));
        let lhs = poisson_bracket(&g, &f, &h, BracketMode::Analytic).unwrap();
        let z = Smearing::momentum(&t, antisymmetric_gradient(&t, &data.h, &data.phi, &data.psi));
        let rhs = constraint_functional(&g, &z).unwrap();
        with_minus.push((lhs + rhs).abs());
        with_plus.push((lhs - rhs).abs());
    }
    assert!(in_band(Some(order(&with_minus))), "{with_minus:?}");
    assert!(with_plus[2] > 0.1 * with_plus[0]);
}

#[test]
fn bracket_relations_converge_at_second_order() {
    let studies = bracket_relations(2, &NS, 7).unwrap();
    assert_eq!(studies.len(), 3);
    for s in &studies {
        assert!(s.order_in_band(), "{s:?}");
        assert!(in_band(s.ls_order), "{s:?}");
    }
}

#[test]
fn three_dimensional_smoke() {
    let studies = bracket_relations(3, &[6, 12, 24], 5).unwrap();
    for s in &studies {
        assert!(s.order_in_band(), "{s:?}");
    }
    let t = Torus::new(3, 6).unwrap();
    let g = random_geometry(t, 2);
    let k = compute_curvature(&t, &g.h).unwrap();
    assert!(k.scalar.iter().all(|v| v.is_finite()));
}

#[test]
fn analytic_and_fd_brackets_agree() {
    let samples = oracle_equivalence(2, 8, 20, 100, None).unwrap();
    assert_eq!(samples.len(), 20);
    for s in &samples {
        assert!(s.relative <= 1e-6, "{s:?}");
        assert!(!s.non_quadratic, "{s:?}");
    }
    let fixed = oracle_equivalence(2, 8, 2, 100, Some(1e-4)).unwrap();
    assert!(fixed.iter().all(|s| s.relative <= 1e-6 && s.step == 1e-4));
    let t = Torus::new(2, 8).unwrap();
    let g = random_geometry(t, 1);
    let f = Smearing::energy(&t, vec![1.0; t.sites()]);
    assert_eq!(
        poisson_bracket(&g, &f, &f, BracketMode::FiniteDifference { step: 0.0 }),
        Err(LatticeError::FdStep(0.0))
    );
}

/// Gradient of the discrete functional by central differences, `dx^-d` and
/// multiplicity normalised, in the metric (`metric = true`) or momentum slot.
fn fd_gradient(g: &Geometry<f64>, f: &Smearing, metric: bool) -> Vec<Field<f64>> {
    let t = g.torus;
    let step = 1e-5;
    let scale = (t.n() * t.n()) as f64;
    let mut out = vec![vec![0.0; t.sites()]; 4];
    for s in 0..t.sites() {
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let mut v = [0.0; 2];
            for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut p = g.clone();
                let slot = if metric { &mut p.h } else { &mut p.pi };
                slot[2 * a + b][s] += sign * step;
                if a != b {
                    slot[2 * b + a][s] += sign * step;
                }
                v[i] = constraint_functional(&p, f).unwrap();
            }
            let m = if a == b { 1.0 } else { 2.0 };
            let d = (v[0] - v[1]) / (2.0 * step) / m * scale;
            out[2 * a + b][s] = d;
            out[2 * b + a][s] = d;
        }
    }
    out
}

#[test]
fn hamiltonian_flow_matches_functional_gradients() {
    let zero_x = |t: &Torus| vec![vec![0.0; t.sites()]; 2];
    let t = Torus::new(2, 8).unwrap();
    let g = random_geometry(t, 9);
    let (dh, dp) = hamiltonian_flow(&g, &Smearing::new(vec![0.0; t.sites()], zero_x(&t))).unwrap();
    assert!(dh.iter().chain(&dp).flatten().all(|v| *v == 0.0));

    // flat h, Pi = 0, X = 0: dh = 0 and dPi = D^##(phi) = -hess phi + delta lap phi
    let mut defects = Vec::new();
    for n in NS {
        let t = Torus::new(2, n).unwrap();
        let phi = Wave::sin([1, 1, 0], 0.5).plus(&Wave::cos([0, 1, 0], 0.3));
        let (dh, dp) = hamiltonian_flow(&Geometry::flat(t), &Smearing::energy(&t, phi.sample(&t))).unwrap();
        assert!(dh.iter().flatten().all(|v| *v == 0.0));
        let mut want = vec![vec![0.0; t.sites()]; 4];
        for s in 0..t.sites() {
            let hs = phi.hessian(t.coords(s));
            let lap = hs[0][0] + hs[1][1];
            for a in 0..2 {
                for b in 0..2 {
                    want[2 * a + b][s] = -hs[a][b] + if a == b { lap } else { 0.0 };
                }
            }
        }
        defects.push(max_diff(&dp, &want));
    }
    assert!(in_band(Some(order(&defects))), "{defects:?}");

    // the metric flow is the exact momentum gradient; the momentum flow is
    // the continuum formula and meets the discrete metric gradient at O(dx^2)
    let mut gaps = Vec::new();
    for n in NS {
        let t = Torus::new(2, n).unwrap();
        let data = BracketData::random(2, 21);
        let g = Geometry::from_waves(t, &data.h, &data.pi);
        let f = Smearing::from_waves(&t, &data.phi, &data.x);
        let (dh, dp) = hamiltonian_flow(&g, &f).unwrap();
        let want_h = fd_gradient(&g, &f, false);
        let scale = max_abs(&want_h);
        assert!(max_diff(&dh, &want_h) <= 1e-6 * scale, "{}", max_diff(&dh, &want_h));
        let want_p: Vec<Field<f64>> = fd_gradient(&g, &f, true)
            .into_iter()
            .map(|c| c.into_iter().map(|v| -v).collect())
            .collect();
        gaps.push(max_diff(&dp, &want_p));
    }
    assert!(in_band(Some(order(&gaps))), "{gaps:?}");
}

// ---------- the BFV vector field

fn ghosts_from(t: &Torus, phi: &[&Wave], x: &[Vec<Wave>]) -> GhostData {
    GhostData {
        phi: phi.iter().map(|w| w.sample(t)).collect(),
        x: x.iter().map(|v| sample_all(v, t)).collect(),
    }
}

#[test]
fn zero_ghosts_give_constraint_images() {
    let t = Torus::new(2, 8).unwrap();
    let g = random_geometry(t, 5);
    let none = GhostData { phi: vec![], x: vec![] };
    let z = BfvFields::<G8>::with_ghosts(&g, &none, 0).unwrap();
    let q = apply_q(&z, QOptions::bfv()).unwrap();
    let body = q.component(0);
    assert!(body
        .h
        .iter()
        .chain(&body.xi_d)
        .flatten()
        .chain(&body.xi_n)
        .all(|v| *v == 0.0));
    let k = compute_curvature(&t, &g.h).unwrap();
    assert_eq!(body.chi_n, energy_constraint(&t, &k, &g.pi));
    assert_eq!(body.chi_d, momentum_constraint(&t, &g.h, &g.pi));
    // and the momentum constraint pairs with X like the smeared functional
    let x = sample_all(&Sampler::new(2, 8).vector(1.0), &t);
    let paired: f64 = (0..t.sites())
        .map(|s| (0..2).map(|c| x[c][s] * body.chi_d[c][s]).sum::<f64>())
        .sum::<f64>()
        / t.sites() as f64;
    let direct = constraint_functional(&g, &Smearing::momentum(&t, x)).unwrap();
    assert!((paired - direct).abs() < 1e-12);
    let q0 = apply_q(&z, QOptions::zero()).unwrap().component(0);
    assert!(q0.chi_n.iter().chain(q0.chi_d.iter().flatten()).all(|v| *v == 0.0));
}

#[test]
fn q_of_normal_ghost_is_a_directional_derivative() {
    // xiD = e1 X1, xiN = e2 f2 gives Q(xiN) = e1 e2 X1.d f2
    let t = Torus::new(2, 8).unwrap();
    let g = random_geometry(t, 2);
    let mut s = Sampler::new(2, 6);
    let (x1, f2) = (s.vector(1.0), s.scalar(1.0));
    let ghosts = GhostData {
        phi: vec![vec![0.0; t.sites()], f2.sample(&t)],
        x: vec![sample_all(&x1, &t), vec![vec![0.0; t.sites()]; 2]],
    };
    let z = BfvFields::<G8>::with_ghosts(&g, &ghosts, 0).unwrap();
    let q = apply_q(&z, QOptions::zero()).unwrap().component(0b11);
    let x = sample_all(&x1, &t);
    let d0 = t.diff(&ghosts.phi[1], 0);
    let d1 = t.diff(&ghosts.phi[1], 1);
    let want: Vec<f64> = (0..t.sites()).map(|i| x[0][i] * d0[i] + x[1][i] * d1[i]).collect();
    assert!(max_diff(&[q.xi_n], &[want]) < 1e-12);
}

#[test]
fn odd_parameter_budget_is_checked() {
    let t = Torus::new(2, 8).unwrap();
    let g = Geometry::flat(t);
    let f = Wave::constant(1.0).sample(&t);
    let x = vec![vec![0.0; t.sites()]; 2];
    let ghosts = GhostData {
        phi: vec![f.clone(), f],
        x: vec![x.clone(), x],
    };
    let err = BfvFields::<Grass<4>>::with_ghosts(&g, &ghosts, 1).unwrap_err();
    assert_eq!(
        err,
        LatticeError::OddParameters {
            needed: 3,
            available: 2
        }
    );
    let z = BfvFields::<Grass<8>>::with_ghosts(&g, &ghosts, 0).unwrap();
    assert_eq!(
        q_squared(&z, QOptions::zero()).unwrap_err(),
        LatticeError::ShiftGeneratorInUse
    );
}

/// Christoffel symbols from exact wave derivatives.
fn exact_gamma(h: &[Wave], p: [f64; 3]) -> ([f64; 4], [[[f64; 2]; 2]; 2]) {
    let m: Vec<f64> = h.iter().map(|w| w.value(p)).collect();
    let det = m[0] * m[3] - m[1] * m[2];
    let inv = [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det];
    let dh = |a: usize, b: usize, c: usize| h[2 * a + b].grad(p)[c];
    let mut g = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                g[a][b][c] = (0..2)
                    .map(|e| 0.5 * inv[2 * a + e] * (dh(e, c, b) + dh(e, b, c) - dh(b, c, e)))
                    .sum();
            }
        }
    }
    (inv, g)
}

/// The e1 e2 component of `-(H_d (x)_s d xiN)^## xiN` for `xiN = e1 f1 + e2 f2`,
/// expanded in the odd algebra at every site, with the momentum constraint
/// in covariant form `(H_d)_c = -2 h_cb nabla_a Pi^ab`.
fn q0_square_pi_oracle(t: &Torus, h: &[Wave], pi: &[Wave], f1: &Wave, f2: &Wave) -> Vec<Field<f64>> {
    let mut out = vec![vec![0.0; t.sites()]; 4];
    let (e1, e2) = (G8::generator(0), G8::generator(1));
    for s in 0..t.sites() {
        let p = t.coords(s);
        let (inv, gam) = exact_gamma(h, p);
        let mut hd = [0.0; 2];
        for (c, hc) in hd.iter_mut().enumerate() {
            for b in 0..2 {
                let mut div = 0.0;
                for a in 0..2 {
                    div += pi[2 * a + b].grad(p)[a];
                    for e in 0..2 {
                        div += gam[b][a][e] * pi[2 * a + e].value(p);
                    }
                }
                *hc -= 2.0 * h[2 * c + b].value(p) * div;
            }
        }
        let xi = e1.scale(f1.value(p)) + e2.scale(f2.value(p));
        let dxi = [0, 1].map(|c| e1.scale(f1.grad(p)[c]) + e2.scale(f2.grad(p)[c]));
        let low = |a: usize, b: usize| (G8::from_f64(hd[a]) * dxi[b] + G8::from_f64(hd[b]) * dxi[a]).scale(0.5);
        for a in 0..2 {
            for b in 0..2 {
                let mut up = G8::zero();
                for c in 0..2 {
                    for d in 0..2 {
                        up += low(c, d).scale(inv[2 * a + c] * inv[2 * b + d]);
                    }
                }
                out[2 * a + b][s] = -(up * xi).coeff(0b11);
            }
        }
    }
    out
}

#[test]
fn q0_square_matches_expanded_oracle() {
    let mut s = Sampler::new(2, 31);
    let h = s.metric();
    let pi = s.momentum();
    let f: Vec<Wave> = (0..3).map(|_| s.scalar(1.0)).collect();
    let x: Vec<Vec<Wave>> = (0..3).map(|_| s.vector(1.0)).collect();
    let mut pi_defects = Vec::new();
    let mut h_defects = Vec::new();
    let mut xi_defects = Vec::new();
    let mut flipped = Vec::new();
    for n in NS {
        let t = Torus::new(2, n).unwrap();
        let g = Geometry::from_waves(t, &h, &pi);
        let ghosts = ghosts_from(&t, &[&f[0], &f[1], &f[2]], &x);
        let z = BfvFields::<Grass<16>>::with_ghosts(&g, &ghosts, 1).unwrap();
        let q2 = q_squared(&z, QOptions::zero()).unwrap();
        let e12 = q2.component(0b0110);
        let e123 = q2.component(0b1110);
        let oracle = q0_square_pi_oracle(&t, &h, &pi, &f[0], &f[1]);
        pi_defects.push(max_diff(&e12.pi, &oracle));
        h_defects.push(max_abs(&e12.h));
        xi_defects.push(max_abs(&e123.xi_d).max(max_abs(std::slice::from_ref(&e123.xi_n))));
        assert!(max_abs(&e12.xi_d) == 0.0 && max_abs(std::slice::from_ref(&e12.xi_n)) == 0.0);
        let q2f = q_squared(&z, QOptions::zero().with_lie_sign(-1.0)).unwrap();
        flipped.push(max_abs(&q2f.component(0b0110).h));
        assert!(max_abs(&oracle) > 1.0);
    }
    for d in [&pi_defects, &h_defects, &xi_defects] {
        assert!(in_band(Some(order(d))), "{d:?}");
    }
    // with the other sign on the vector-field action Q0^2(h) stays finite
    assert!(flipped[2] > 0.5 * flipped[0], "{flipped:?}");
}

#[test]
fn q0_square_pi_vanishes_for_equal_normal_ghosts() {
    let t = Torus::new(2, 8).unwrap();
    let g = random_geometry(t, 3);
    let f = Sampler::new(2, 4).scalar(1.0).sample(&t);
    let x = vec![vec![0.0; t.sites()]; 2];
    let ghosts = GhostData {
        phi: vec![f.clone(), f],
        x: vec![x.clone(), x],
    };
    let z = BfvFields::<Grass<8>>::with_ghosts(&g, &ghosts, 1).unwrap();
    let q2 = q_squared(&z, QOptions::zero()).unwrap().component(0b110);
    assert!(max_abs(&q2.pi) < 1e-10, "{}", max_abs(&q2.pi));
}

#[test]
fn q0_defect_report() {
    let r = q0_defect(2, &NS, 3, 7).unwrap();
    for s in &r.studies {
        assert!(s.order_in_band(), "{s:?}");
    }
    assert_eq!(r.ghost_e12, 0.0);
    assert!(r.off_shell > 1.0);
    assert!(r.ratio() >= 1e3);
    assert!(r.flipped_sign_h > 1.0);

    // two odd parameters: the ghost components are read at e1 e2 and vanish
    let two = q0_defect(2, &NS, 2, 7).unwrap();
    assert_eq!(two.studies[1].max_defect(), 0.0);
    assert_eq!(two.studies[2].max_defect(), 0.0);
    assert!(two.studies[0].order_in_band());
    assert!(matches!(
        q0_defect(2, &NS, 1, 7),
        Err(LatticeError::OddParameters { .. })
    ));
    assert!(matches!(
        q0_defect(2, &NS, 4, 7),
        Err(LatticeError::OddParameters { .. })
    ));
}

#[test]
fn anchor_matches_expanded_formula() {
    let mut s = Sampler::new(2, 17);
    let h = s.metric();
    let pi = s.momentum();
    let c = s.vector(1.0);
    let (f1, f2) = (s.scalar(1.0), s.scalar(1.0));
    let mut defects = Vec::new();
    for n in NS {
        let t = Torus::new(2, n).unwrap();
        let (lat, _) = anchor_component(t, &h, &pi, &c, &f1, &f2).unwrap();
        // c^# (.)_s (f1 grad f2 - f2 grad f1)
        let u = antisymmetric_gradient(&t, &h, &f1, &f2);
        let mut want = vec![vec![0.0; t.sites()]; 4];
        for st in 0..t.sites() {
            let p = t.coords(st);
            let (inv, _) = exact_gamma(&h, p);
            let cs = [0, 1].map(|a| inv[2 * a] * c[0].value(p) + inv[2 * a + 1] * c[1].value(p));
            for a in 0..2 {
                for b in 0..2 {
                    want[2 * a + b][st] = 0.5 * (cs[a] * u[b][st] + cs[b] * u[a][st]);
                }
            }
        }
        defects.push(max_diff(&lat, &want));
    }
    assert!(in_band(Some(order(&defects))), "{defects:?}");
    assert!(anchor(2, &NS, 7).unwrap().order_in_band());

    let t = Torus::new(2, 8).unwrap();
    let (same, _) = anchor_component(t, &h, &pi, &c, &f1, &f1).unwrap();
    assert!(max_abs(&same) < 1e-12);
    let (consts, _) = anchor_component(t, &h, &pi, &c, &Wave::constant(0.4), &Wave::constant(-1.0)).unwrap();
    assert_eq!(max_abs(&consts), 0.0);
}

#[test]
fn study_orders_and_size_checks() {
    let s = Study::new("x", &[8, 16, 32], &[1.0, 0.25, 0.0625]);
    assert!((s.order.unwrap() - 2.0).abs() < 1e-12);
    assert!((s.ls_order.unwrap() - 2.0).abs() < 1e-12);
    assert!(s.order_in_band());
    let z = Study::new("z", &[8, 16, 32], &[0.0, 0.0, 0.0]);
    assert_eq!(z.order, None);
    assert!(!z.order_in_band());
    assert_eq!(
        bracket_relations(2, &[8, 16], 1).unwrap_err(),
        LatticeError::TooFewSizes(2)
    );
}
