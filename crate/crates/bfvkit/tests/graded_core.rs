use bfvkit::graded::{
    int, rat, Algebra, AlgebraError, Derivation, GradedPoly, Monomial, Nilpotency, RelationSet, Substitution,
};
use bfvkit::linalg::solve_combination;
use bfvkit::selfcheck::{self, run_graded_suite};
use proptest::prelude::*;

fn alg() -> std::sync::Arc<Algebra> {
    Algebra::new(&[("x", 0), ("y", 0), ("c", 1), ("e", 1), ("b", -1), ("w", 2)]).unwrap()
}

#[test]
fn odd_generators_anticommute_and_square_to_zero() {
    let a = alg();
    let c = GradedPoly::var(&a, "c").unwrap();
    let e = GradedPoly::var(&a, "e").unwrap();
    let b = GradedPoly::var(&a, "b").unwrap();
    assert_eq!(&c * &e, -(&e * &c));
    assert!((&c * &c).is_zero());
    assert_eq!(&b * &c, -(&c * &b));
    let w = GradedPoly::var(&a, "w").unwrap();
    assert_eq!(&w * &c, &c * &w);
}

#[test]
fn mismatched_generator_sets_are_rejected() {
    let a = alg();
    let other = Algebra::new(&[("x", 0)]).unwrap();
    let p = GradedPoly::var(&a, "x").unwrap();
    let q = GradedPoly::var(&other, "x").unwrap();
    assert_eq!(p.try_mul(&q), Err(AlgebraError::GeneratorMismatch));
    assert_eq!(p.try_add(&q), Err(AlgebraError::GeneratorMismatch));
}

#[test]
fn duplicate_and_bad_names_are_rejected() {
    assert!(matches!(
        Algebra::new(&[("x", 0), ("x", 1)]),
        Err(AlgebraError::DuplicateGenerator(_))
    ));
    assert!(matches!(Algebra::new(&[("1x", 0)]), Err(AlgebraError::InvalidName(_))));
}

#[test]
fn parse_and_display_round_trip() {
    let a = alg();
    let p = GradedPoly::parse(&a, "1/2*x^2*c - 3*y*e*c + w - 7").unwrap();
    let shown = p.to_string();
    let back = GradedPoly::parse(&a, &shown).unwrap();
    assert_eq!(p, back);
    // e*c reorders to -c*e
    assert_eq!(
        p.coefficient(&(GradedPoly::parse(&a, "y*c*e").unwrap().terms().next().unwrap().0).clone()),
        int(3)
    );
}

#[test]
fn parse_errors_carry_positions() {
    let a = alg();
    match GradedPoly::parse(&a, "x + zz") {
        Err(AlgebraError::Parse { pos, .. }) => assert_eq!(pos, 4),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(GradedPoly::parse(&a, "x +"), Err(AlgebraError::Parse { .. })));
    assert!(matches!(GradedPoly::parse(&a, "(x"), Err(AlgebraError::Parse { .. })));
}

#[test]
fn degree_zero_derivation_nilpotency_witness() {
    let a = Algebra::new(&[("x", 0), ("c", 1)]).unwrap();
    let x = GradedPoly::var(&a, "x").unwrap();
    let c = GradedPoly::var(&a, "c").unwrap();
    let d = Derivation::from_images(&a, 0, [(0, GradedPoly::zero(&a)), (1, &x * &c)]).unwrap();
    match d.check_nilpotent().unwrap() {
        Nilpotency::Fails { generator, residue } => {
            assert_eq!(generator, 1);
            assert_eq!(residue, &(&x * &x) * &c);
        }
        Nilpotency::Nilpotent => panic!("D(c) = x c is not nilpotent"),
    }
}

#[test]
fn commutator_of_coordinate_derivations() {
    let a = Algebra::new(&[("x", 0)]).unwrap();
    let dx = Derivation::from_images(&a, 0, [(0, GradedPoly::one(&a))]).unwrap();
    let xdx = Derivation::from_images(&a, 0, [(0, GradedPoly::var(&a, "x").unwrap())]).unwrap();
    let br = dx.commutator(&xdx).unwrap();
    assert_eq!(br.image(0), dx.image(0));
}

#[test]
fn derivation_rejects_wrong_degree_and_missing_images() {
    let a = alg();
    let mut d = Derivation::new(&a, 1);
    let err = d.set_image(0, GradedPoly::var(&a, "x").unwrap()).unwrap_err();
    assert!(matches!(
        err,
        AlgebraError::DegreeMismatch {
            expected: 1,
            found: 0,
            ..
        }
    ));
    d.set_image(0, GradedPoly::var(&a, "c").unwrap()).unwrap();
    let y = GradedPoly::var(&a, "y").unwrap();
    assert!(matches!(d.apply(&y), Err(AlgebraError::MissingImage(_))));
}

#[test]
fn odd_derivation_leibniz_sign() {
    // Q = c d/dx: Q(c x) = -c Q(x) = -c c = 0 and Q(e x) = -e c
    let a = alg();
    let q = Derivation::from_images(&a, 1, [(0, GradedPoly::var(&a, "c").unwrap())])
        .unwrap()
        .zero_elsewhere();
    let ex = GradedPoly::parse(&a, "e*x").unwrap();
    assert_eq!(q.apply(&ex).unwrap(), GradedPoly::parse(&a, "-e*c").unwrap());
    let x2 = GradedPoly::parse(&a, "x^2").unwrap();
    assert_eq!(q.apply(&x2).unwrap(), GradedPoly::parse(&a, "2*x*c").unwrap());
}

#[test]
fn relations_reduce_and_respect_budget() {
    let a = alg();
    let mut rel = RelationSet::new(&a);
    let y2 = GradedPoly::parse(&a, "y^2").unwrap();
    let m = y2.terms().next().unwrap().0.clone();
    rel.rewrite(m.clone(), GradedPoly::parse(&a, "x").unwrap()).unwrap();
    let p = GradedPoly::parse(&a, "y^5 + y^2*c").unwrap();
    let r = rel.reduce(&p).unwrap();
    assert_eq!(r, GradedPoly::parse(&a, "x^2*y + x*c").unwrap());
    let tight = rel.clone().with_budget(1);
    assert_eq!(tight.reduce(&p), Err(AlgebraError::BudgetExceeded(1)));

    let mut bad = RelationSet::new(&a);
    let x = GradedPoly::parse(&a, "x").unwrap().terms().next().unwrap().0.clone();
    assert!(matches!(
        bad.rewrite(x, GradedPoly::parse(&a, "y^2").unwrap()),
        Err(AlgebraError::NonDecreasingRelation(_))
    ));
}

#[test]
fn annihilator_relations_with_odd_factors_keep_signs() {
    let a = alg();
    let mut rel = RelationSet::new(&a);
    let ce = GradedPoly::parse(&a, "c*e").unwrap().terms().next().unwrap().0.clone();
    rel.annihilate(ce);
    let p = GradedPoly::parse(&a, "b*c*e*x + c*x").unwrap();
    assert_eq!(rel.reduce(&p).unwrap(), GradedPoly::parse(&a, "c*x").unwrap());
}

#[test]
fn substitution_checks_degrees() {
    let a = alg();
    let mut s = Substitution::new(&a, &a);
    let err = s.set(0, GradedPoly::var(&a, "c").unwrap()).unwrap_err();
    assert!(matches!(err, AlgebraError::DegreeMismatch { .. }));
    s.set(0, GradedPoly::parse(&a, "x + y^2").unwrap()).unwrap();
    let p = GradedPoly::parse(&a, "x*c").unwrap();
    assert_eq!(s.apply(&p).unwrap(), GradedPoly::parse(&a, "x*c + y^2*c").unwrap());
}

#[test]
fn partial_derivatives_of_odd_generators() {
    let a = alg();
    let p = GradedPoly::parse(&a, "c*e").unwrap();
    let e = a.id("e").unwrap();
    let c = a.id("c").unwrap();
    assert_eq!(p.left_partial(e), GradedPoly::parse(&a, "-c").unwrap());
    assert_eq!(p.right_partial(e), GradedPoly::parse(&a, "c").unwrap());
    assert_eq!(p.left_partial(c), GradedPoly::parse(&a, "e").unwrap());
    assert_eq!(p.right_partial(c), GradedPoly::parse(&a, "-e").unwrap());
}

#[test]
fn exact_solver_finds_combinations() {
    let a = alg();
    let cols = vec![
        GradedPoly::parse(&a, "x + y").unwrap(),
        GradedPoly::parse(&a, "x - y").unwrap(),
        GradedPoly::parse(&a, "2*x").unwrap(),
    ];
    let rhs = GradedPoly::parse(&a, "3*x + y").unwrap();
    let sol = solve_combination(&cols, &rhs).unwrap();
    let mut acc = GradedPoly::zero(&a);
    for (c, x) in cols.iter().zip(&sol) {
        acc = acc + c.scale(x);
    }
    assert_eq!(acc, rhs);
    assert!(solve_combination(&cols, &GradedPoly::parse(&a, "w").unwrap()).is_none());
}

#[test]
fn randomized_suite_is_clean() {
    let rep = run_graded_suite(7, 200);
    assert!(rep.passed(), "{:?}", rep.failures);
    assert_eq!(rep.total(), 800);
}

#[test]
fn monomial_order_is_multiplicative() {
    let a = alg();
    let x = Monomial::generator(0);
    let y = Monomial::generator(1);
    let (xy, _) = x.mul(&y, &a).unwrap();
    assert_eq!(x.grlex_cmp(&xy), std::cmp::Ordering::Less);
    assert_eq!(rat(2, 4), rat(1, 2));
}

proptest! {
    #[test]
    fn prop_graded_commutativity(seed in any::<u64>()) {
        let mut rng = selfcheck::rng(seed);
        let a = selfcheck::random_algebra(&mut rng);
        let p = selfcheck::random_monomial(&mut rng, &a, 3);
        let q = selfcheck::random_monomial(&mut rng, &a, 3);
        let sign = match (p.degree(), q.degree()) {
            (Some(x), Some(y)) if x & y & 1 != 0 => -1,
            _ => 1,
        };
        prop_assert_eq!(&p * &q, (&q * &p).scale(&int(sign)));
    }

    #[test]
    fn prop_leibniz(seed in any::<u64>(), deg in -2i32..=2) {
        let mut rng = selfcheck::rng(seed);
        let a = selfcheck::random_algebra(&mut rng);
        let d = selfcheck::random_derivation(&mut rng, &a, deg);
        let x = selfcheck::random_monomial(&mut rng, &a, 3);
        let y = selfcheck::random_poly(&mut rng, &a, 3);
        let lhs = d.apply(&(&x * &y)).unwrap();
        let sx = match x.degree() { Some(dx) if dx & deg & 1 != 0 => -1, _ => 1 };
        let rhs = d.apply(&x).unwrap() * &y + (&x * &d.apply(&y).unwrap()).scale(&int(sx));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn prop_substitution_is_multiplicative(seed in any::<u64>()) {
        let mut rng = selfcheck::rng(seed);
        let a = selfcheck::random_algebra(&mut rng);
        let s = selfcheck::random_substitution(&mut rng, &a);
        let u = selfcheck::random_poly(&mut rng, &a, 3);
        let v = selfcheck::random_poly(&mut rng, &a, 3);
        prop_assert_eq!(s.apply(&(&u * &v)).unwrap(), s.apply(&u).unwrap() * s.apply(&v).unwrap());
    }

    #[test]
    fn prop_parse_display_round_trip(seed in any::<u64>()) {
        let mut rng = selfcheck::rng(seed);
        let a = selfcheck::random_algebra(&mut rng);
        let p = selfcheck::random_poly(&mut rng, &a, 4);
        prop_assert_eq!(GradedPoly::parse(&a, &p.to_string()).unwrap(), p);
    }

    #[test]
    fn prop_odd_commutator_of_odd_derivation_is_twice_square(seed in any::<u64>()) {
        let mut rng = selfcheck::rng(seed);
        let a = selfcheck::random_algebra(&mut rng);
        let d = selfcheck::random_derivation(&mut rng, &a, 1);
        let br = d.commutator(&d).unwrap();
        for g in 0..a.len() {
            let x = GradedPoly::generator(&a, g);
            let sq = d.apply(&d.apply(&x).unwrap()).unwrap();
            prop_assert_eq!(br.image(g).unwrap().clone(), sq.scale(&int(2)));
        }
    }
}
