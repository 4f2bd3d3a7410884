//! The homological vector fields of the gravity model and the three
//! symbolic verifications, each with a negative control.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::engine::{normalize, Normalized, QDefinition, Rule, RuleSet};
use super::expr::Expr;
use super::parse::parse_expression;
use super::FormalError;

/// The BFV differential on the ADM fields, ghosts and antighosts.
pub const Q_BFV: &[(&str, &str)] = &[
    ("xiN", "Lie(xiD, xiN)"),
    ("xiD", "xiN*grad(xiN) + 1/2*bracket(xiD, xiD)"),
    ("h", "-2*K*xiN - Lie(xiD, h)"),
    (
        "Pi",
        "PiT*xiN + vol*(Gss*xiN + Dh(xiN)) - Lie(xiD, Pi) - sharp2(tens(chiD, d(xiN)))*xiN",
    ),
    ("chiD", "HD + Lie(xiD, chiD) - chiN*d(xiN)"),
    ("chiN", "HN + Lie(xiD, chiN) - 2*LieHalf(sharp(chiD), xiN)"),
];

/// The differential after trading the antighosts for `psiN = chiN xiN` and
/// `psiD = chiD xiN`.
pub const Q_TILDE: &[(&str, &str)] = &[
    ("xiN", "Lie(xiD, xiN)"),
    ("xiD", "xiN*grad(xiN) + 1/2*bracket(xiD, xiD)"),
    ("h", "-2*K*xiN - Lie(xiD, h)"),
    (
        "Pi",
        "PiT*xiN + vol*(Gss*xiN + Dh(xiN)) - Lie(xiD, Pi) + sharp2(tens(psiD, d(xiN)))",
    ),
    ("psiD", "HD*xiN + Lie(xiD, psiD) - psiN*d(xiN)"),
    ("psiN", "HN*xiN + Lie(xiD, psiN) - 2*Lie(sharp(psiD), xiN)"),
];

/// The antighost-free part, acting on fields and ghosts only. The signs of
/// the Lie-derivative terms follow [`Q_BFV`]; the lattice module uses the
/// opposite sign for the vector-field action, which is what makes its
/// square vanish with its bracket conventions.
pub const Q_ZERO: &[(&str, &str)] = &[
    ("xiN", "Lie(xiD, xiN)"),
    ("xiD", "xiN*grad(xiN) + 1/2*bracket(xiD, xiD)"),
    ("h", "-2*K*xiN - Lie(xiD, h)"),
    ("Pi", "PiT*xiN + vol*(Gss*xiN + Dh(xiN)) - Lie(xiD, Pi)"),
];

pub fn q_bfv() -> QDefinition {
    QDefinition::from_table("bfv", Q_BFV).expect("built-in table is well formed")
}

pub fn q_tilde() -> QDefinition {
    QDefinition::from_table("tilde", Q_TILDE).expect("built-in table is well formed")
}

pub fn q_zero() -> QDefinition {
    QDefinition::from_table("zero", Q_ZERO).expect("built-in table is well formed")
}

/// Ideal preservation: structural rules, `Q~` images, the ideal relations
/// and the two Lie-derivative identities.
pub fn ideal_rules() -> RuleSet {
    RuleSet::structural("ideal-preservation")
        .with(Rule::QImage)
        .with(Rule::QLinear)
        .with(Rule::QLeibniz)
        .with(Rule::Ideal)
        .with(Rule::SharpIdeal)
        .with(Rule::Recombine)
        .with(Rule::LieAbsorb)
        .with_q(q_tilde())
}

/// Nilpotency: `Q` stays abstract apart from `Q^2 = 0` on generators.
pub fn nilpotency_rules() -> RuleSet {
    RuleSet::structural("nilpotency")
        .with(Rule::QLinear)
        .with(Rule::QLeibniz)
        .with(Rule::QSquareAxiom)
}

/// The form of `Q(psiN)` computed from the BFV differential.
pub fn psi_form_rules() -> RuleSet {
    RuleSet::structural("psi-n-form")
        .with(Rule::QImage)
        .with(Rule::QLinear)
        .with(Rule::QLeibniz)
        .with(Rule::PsiIntro)
        .with(Rule::HalfDensity)
        .with(Rule::Recombine)
        .with(Rule::LieAbsorb)
        .with(Rule::SharpScalar)
        .with_q(q_bfv())
}

/// One identity `lhs = rhs`, decided by normalising `lhs - rhs`.
#[derive(Clone, Debug)]
pub struct Case {
    pub label: String,
    pub lhs: Expr,
    pub rhs: Expr,
    pub result: Normalized,
}

impl Case {
    pub fn run(label: &str, lhs: &str, rhs: &str, rules: &RuleSet) -> Result<Case, FormalError> {
        let l = parse_expression(lhs)?;
        let r = parse_expression(rhs)?;
        let diff = if r.is_zero() {
            l.clone()
        } else {
            Expr::Add(alloc::vec![
                l.clone(),
                Expr::Mul(alloc::vec![Expr::Num(-crate::graded::int(1)), r.clone()]),
            ])
        };
        Ok(Case {
            label: label.to_string(),
            lhs: l,
            rhs: r,
            result: normalize(&diff, rules)?,
        })
    }

    pub fn holds(&self) -> bool {
        self.result.is_zero()
    }

    pub fn residual(&self) -> &Expr {
        &self.result.expr
    }
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub id: &'static str,
    pub rule_set: String,
    pub cases: Vec<Case>,
}

impl Verification {
    pub fn holds(&self) -> bool {
        self.cases.iter().all(Case::holds)
    }

    pub fn steps(&self) -> usize {
        self.cases.iter().map(|c| c.result.trace.len()).sum()
    }
}

fn verification(id: &'static str, rules: &RuleSet, cases: &[(&str, &str, &str)]) -> Result<Verification, FormalError> {
    Ok(Verification {
        id,
        rule_set: rules.name().to_string(),
        cases: cases
            .iter()
            .map(|(l, a, b)| Case::run(l, a, b, rules))
            .collect::<Result<_, _>>()?,
    })
}

/// `Q~(psi xiN)` normalises to zero for both ideal generators.
pub fn check_ideal_preservation(rules: &RuleSet) -> Result<Verification, FormalError> {
    verification(
        "ideal-preservation",
        rules,
        &[("Q(psiD xiN)", "Q(psiD*xiN)", "0"), ("Q(psiN xiN)", "Q(psiN*xiN)", "0")],
    )
}

/// `Q^2` vanishes on the products defining `psi` and on the fields.
pub fn check_nilpotency(rules: &RuleSet) -> Result<Verification, FormalError> {
    verification(
        "nilpotency",
        rules,
        &[
            ("Q^2(chiN xiN)", "Q(Q(chiN*xiN))", "0"),
            ("Q^2(chiD xiN)", "Q(Q(chiD*xiN))", "0"),
            ("Q^2(xiN)", "Q(Q(xiN))", "0"),
            ("Q^2(xiD)", "Q(Q(xiD))", "0"),
            ("Q^2(h)", "Q(Q(h))", "0"),
        ],
    )
}

pub const PSI_N_TARGET: &str = "HN*xiN + Lie(xiD, psiN) - 2*Lie(sharp(psiD), xiN)";

/// `Q(chiN xiN)` from the BFV differential matches the `Q~` image of `psiN`.
pub fn check_psi_form(rules: &RuleSet) -> Result<Verification, FormalError> {
    verification("psi-n-form", rules, &[("Q(chiN xiN)", "Q(chiN*xiN)", PSI_N_TARGET)])
}

/// The expansion `Q(chiN) xiN + chiN Q(xiN)`, with a plus sign on the second
/// term. It is not a Leibniz expansion for odd `chiN`.
pub fn check_psi_form_plus_variant(rules: &RuleSet) -> Result<Verification, FormalError> {
    verification(
        "psi-n-form-plus",
        rules,
        &[("Q(chiN) xiN + chiN Q(xiN)", "Q(chiN)*xiN + chiN*Q(xiN)", PSI_N_TARGET)],
    )
}

/// A verification run next to a control that must fail.
#[derive(Clone, Debug)]
pub struct Checked {
    pub verification: Verification,
    pub control: Verification,
    pub control_change: &'static str,
}

impl Checked {
    pub fn passed(&self) -> bool {
        self.verification.holds() && !self.control.holds()
    }
}

pub fn run_all() -> Result<Vec<Checked>, FormalError> {
    Ok(alloc::vec![
        Checked {
            verification: check_ideal_preservation(&ideal_rules())?,
            control: check_ideal_preservation(&ideal_rules().without(Rule::SharpIdeal))?,
            control_change: "without sharp-ideal",
        },
        Checked {
            verification: check_nilpotency(&nilpotency_rules())?,
            control: check_nilpotency(&nilpotency_rules().with_flipped_leibniz_sign())?,
            control_change: "q-leibniz sign flipped for even factors",
        },
        Checked {
            verification: check_psi_form(&psi_form_rules())?,
            control: check_psi_form(&psi_form_rules().without(Rule::HalfDensity))?,
            control_change: "without half-density",
        },
    ])
}
