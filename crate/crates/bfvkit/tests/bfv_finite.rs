use bfvkit::bfv::{
    build_initial_charge, check_coisotropy_identity, examples, solve_master_equation, BfvError, ConstraintSystem,
    PhaseSpace,
};
use bfvkit::graded::{GradedPoly, Nilpotency};
use bfvkit::selfcheck;
use proptest::prelude::*;

fn charge_is_nilpotent(cs: &ConstraintSystem) {
    let sol = solve_master_equation(cs, 4, None).unwrap();
    let s = sol.charge.total();
    let sp = cs.space();
    assert!(sp.bracket(&s, &s).is_zero());
    let q = sp.hamiltonian_derivation(&s).unwrap();
    assert_eq!(q.check_nilpotent().unwrap(), Nilpotency::Nilpotent);
}

#[test]
fn ghost_pairing_is_symmetric() {
    let sp = PhaseSpace::new(1, 1);
    let c = sp.gen(sp.c(0));
    let b = sp.gen(sp.b(0));
    let one = GradedPoly::one(sp.algebra());
    assert_eq!(sp.bracket(&c, &b), one);
    assert_eq!(sp.bracket(&b, &c), one);
    let x = sp.gen(sp.x(0));
    let p = sp.gen(sp.p(0));
    assert_eq!(sp.bracket(&x, &p), one);
    assert_eq!(sp.bracket(&p, &x), -&one);
}

#[test]
fn so3_charge_squares_to_zero() {
    let cs = examples::so3();
    assert!(cs.first_class_residues().is_empty());
    let charge = build_initial_charge(&cs);
    let s = charge.total();
    assert!(cs.space().bracket(&s, &s).is_zero());
    charge_is_nilpotent(&cs);
    assert!(check_coisotropy_identity(&cs, &charge).holds());
}

#[test]
fn so3_first_order_ghost_term_is_literal() {
    // S^1 = -1/2 eps_ijk b_k c_i c_j = -(b3 c1 c2 + b1 c2 c3 + b2 c3 c1)
    let cs = examples::so3();
    let charge = build_initial_charge(&cs);
    let expected = cs.space().parse("-b3*c1*c2 - b1*c2*c3 - b2*c3*c1").unwrap();
    assert_eq!(charge.components[1], expected);
}

#[test]
fn abelian_charge_is_linear() {
    let cs = examples::abelian();
    let charge = build_initial_charge(&cs);
    assert!(charge.components[1].is_zero());
    charge_is_nilpotent(&cs);
}

#[test]
fn nonconstant_structure_functions() {
    let cs = examples::nonconstant_pair();
    assert!(cs.first_class_residues().is_empty());
    assert!(!cs.has_constant_structure());
    let sol = solve_master_equation(&cs, 3, None).unwrap();
    assert!(sol.charge.order() <= 3);
    assert_eq!(sol.corrections, 0);
    charge_is_nilpotent(&cs);
    let rep = check_coisotropy_identity(&cs, &sol.charge);
    assert!(rep.holds(), "residue {}", rep.residue());
    // {S0, S0}_body = 2 x2 c1 c2 p1, worked out by hand
    assert_eq!(rep.lhs, cs.space().parse("2*x2*c1*c2*p1").unwrap());
}

#[test]
fn wrong_sign_of_ghost_term_breaks_the_master_equation() {
    let cs = examples::so3();
    let charge = build_initial_charge(&cs);
    let s = &charge.components[0] - &charge.components[1];
    assert!(!cs.space().bracket(&s, &s).is_zero());
}

#[test]
fn non_first_class_is_reported() {
    let cs = examples::not_first_class();
    let res = cs.first_class_residues();
    assert_eq!(res.len(), 1);
    assert_eq!(res[0].2, cs.space().parse("-p2").unwrap());
    assert!(matches!(
        solve_master_equation(&cs, 3, None),
        Err(BfvError::NotFirstClass(1))
    ));
}

#[test]
fn inconsistent_structure_data_is_rejected() {
    let sp = PhaseSpace::new(1, 2);
    let h = vec![sp.parse("p1").unwrap(), sp.parse("x1").unwrap()];
    let one = sp.parse("1").unwrap();
    let err = ConstraintSystem::new(sp, h, vec![((0, 1, 0), one.clone()), ((1, 0, 0), one)]);
    assert!(matches!(err, Err(BfvError::Invalid(_))));
}

#[test]
fn ideal_membership() {
    let cs = examples::nonconstant_pair();
    let t = cs.space().parse("x1*p1 + x2^2*p2 - x1*x2^3*p1").unwrap();
    let mult = cs.body_ideal_membership(&t, 3).unwrap();
    let mut acc = GradedPoly::zero(cs.algebra());
    for (a, g) in mult.iter().enumerate() {
        acc = acc + g * cs.h(a);
    }
    assert_eq!(acc, t);
    assert!(cs.body_ideal_membership(&cs.space().parse("x1").unwrap(), 3).is_none());
}

proptest! {
    #[test]
    fn prop_koszul_differential_squares_to_zero(seed in any::<u64>()) {
        let cs = examples::so3();
        let sp = cs.space();
        let mut rng = selfcheck::rng(seed);
        let body = selfcheck::random_body_poly(&mut rng, sp, 2, 3);
        let f = body * sp.gen(sp.b(0)) * sp.gen(sp.b(2)) * sp.gen(sp.c(1));
        prop_assert!(cs.koszul(&cs.koszul(&f)).is_zero());
    }

    #[test]
    fn prop_bracket_is_graded_antisymmetric(seed in any::<u64>()) {
        let cs = examples::so3();
        let sp = cs.space();
        let mut rng = selfcheck::rng(seed);
        let f = selfcheck::random_body_poly(&mut rng, sp, 2, 3) * sp.gen(sp.c(0));
        let g = selfcheck::random_body_poly(&mut rng, sp, 2, 3) * sp.gen(sp.b(1));
        // both odd: {F, G} = {G, F}
        prop_assert_eq!(sp.bracket(&f, &g), sp.bracket(&g, &f));
        let h = selfcheck::random_body_poly(&mut rng, sp, 2, 3);
        prop_assert_eq!(sp.bracket(&f, &h), -sp.bracket(&h, &f));
        let k = selfcheck::random_body_poly(&mut rng, sp, 2, 3);
        prop_assert_eq!(sp.bracket(&k, &h), -sp.bracket(&h, &k));
    }
}
