use bfvkit::bfv::{examples, ConstraintSystem};
use bfvkit::graded::{rat, GradedPoly, Nilpotency};
use bfvkit::selfcheck;
use bfvkit::toy::*;
use proptest::prelude::*;

fn random_section(rng: &mut selfcheck::SeededRng, cs: &ConstraintSystem) -> Section {
    Section(
        (0..cs.m())
            .map(|_| selfcheck::random_body_poly(rng, cs.space(), 2, 3))
            .collect(),
    )
}

#[test]
fn hamiltonian_fields_close_up_to_constraints() {
    let cs = examples::nonconstant_pair();
    let g = cs.space().parse("x1*p2 + x2^2").unwrap();
    assert_eq!(
        hamiltonian_commutator_defect(&cs, 0, 1, &g),
        hamiltonian_commutator_formula(&cs, 0, 1, &g)
    );
    assert!(!hamiltonian_commutator_formula(&cs, 0, 1, &g).is_zero());
}

#[test]
fn alt1_defect_on_the_worked_example() {
    // s1 = u1, s2 = u2, g = p2: {x2, p2} H1 = p1
    let cs = examples::nonconstant_pair();
    let s1 = Section::basis(&cs, 0);
    let s2 = Section::basis(&cs, 1);
    let g = cs.space().parse("p2").unwrap();
    let d = alt1_anchor_defect(&cs, &s1, &s2, &g);
    assert_eq!(d, cs.space().parse("p1").unwrap());
    assert_eq!(d, alt1_defect_formula(&cs, &s1, &s2, &g));
}

#[test]
fn alt1_defect_vanishes_for_so3() {
    let cs = examples::so3();
    let mut rng = selfcheck::rng(3);
    for _ in 0..10 {
        let s1 = random_section(&mut rng, &cs);
        let s2 = random_section(&mut rng, &cs);
        let g = selfcheck::random_body_poly(&mut rng, cs.space(), 2, 3);
        assert!(alt1_anchor_defect(&cs, &s1, &s2, &g).is_zero());
    }
}

#[test]
fn alt1_q_needs_minus_one_half() {
    let cs = examples::so3();
    let q = alt1_q(&cs, &rat(-1, 2)).unwrap();
    assert_eq!(q.check_nilpotent().unwrap(), Nilpotency::Nilpotent);
    let q1 = alt1_q(&cs, &rat(1, 1)).unwrap();
    assert!(!q1.check_nilpotent().unwrap().holds());
}

#[test]
fn alt1_q_square_matches_closed_forms() {
    let cs = examples::nonconstant_pair();
    let lambda = rat(-1, 2);
    let g = cs.space().parse("p2").unwrap();
    let sq = alt1_q_square(&cs, &lambda, &g).unwrap();
    assert_eq!(sq, alt1_q_square_formula(&cs, &g));
    assert_eq!(sq, cs.space().parse("p1*c1*c2").unwrap());
    assert!(cs.in_constraint_ideal(&sq, 2));
    for i in 0..cs.m() {
        let c = cs.space().gen(cs.space().c(i));
        assert_eq!(
            alt1_q_square(&cs, &lambda, &c).unwrap(),
            alt1_ghost_square_formula(&cs, &lambda, i)
        );
    }
}

#[test]
fn alt2_witness_is_p1() {
    let cs = examples::nonconstant_pair();
    let s = Section::basis(&cs, 0);
    let g = cs.space().parse("x1").unwrap();
    let (var, defect) = alt2_linearity_witness(&cs, &g, &s).unwrap();
    assert_eq!(var, cs.space().p(0));
    assert_eq!(defect, cs.space().parse("p1").unwrap());
    // constants never witness anything
    let one = GradedPoly::one(cs.algebra());
    assert!(alt2_linearity_witness(&cs, &one, &s).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn prop_alt1_defect_formula(seed in any::<u64>()) {
        let cs = examples::nonconstant_pair();
        let mut rng = selfcheck::rng(seed);
        let s1 = random_section(&mut rng, &cs);
        let s2 = random_section(&mut rng, &cs);
        let g = selfcheck::random_body_poly(&mut rng, cs.space(), 2, 3);
        prop_assert_eq!(
            alt1_anchor_defect(&cs, &s1, &s2, &g),
            alt1_defect_formula(&cs, &s1, &s2, &g)
        );
    }

    #[test]
    fn prop_alt1_bracket_is_leibniz(seed in any::<u64>()) {
        let cs = examples::nonconstant_pair();
        let mut rng = selfcheck::rng(seed);
        let s1 = random_section(&mut rng, &cs);
        let s2 = random_section(&mut rng, &cs);
        let g = selfcheck::random_body_poly(&mut rng, cs.space(), 2, 3);
        let lhs = alt1_bracket(&cs, &s1, &s2.scale_by(&g));
        let rho = alt1_anchor(&cs, &s1, &g);
        let rhs = Section(
            alt1_bracket(&cs, &s1, &s2).0.iter().zip(&s2.0)
                .map(|(b, s)| &g * b + &rho * s)
                .collect(),
        );
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn prop_alt2_checks(seed in any::<u64>()) {
        let cs = examples::nonconstant_pair();
        let mut rng = selfcheck::rng(seed);
        let s1 = random_section(&mut rng, &cs);
        let s2 = random_section(&mut rng, &cs);
        let g = selfcheck::random_body_poly(&mut rng, cs.space(), 2, 3);
        let rep = alt2_checks(&cs, &s1, &s2, &g);
        prop_assert!(rep.holds());
        // linearity defect has the closed form (s^i H_i) {g, a}
        let a = cs.space().gen(cs.space().x(1));
        prop_assert_eq!(
            alt2_linearity_defect(&cs, &g, &s1, &a),
            alt2_function(&cs, &s1) * cs.space().body_bracket(&g, &a)
        );
    }
}
