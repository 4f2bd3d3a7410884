//! Model files: one TOML document with optional sections per module.
//!
//! Unknown keys are rejected everywhere, and all values are validated
//! before anything is computed.

use std::collections::BTreeMap;
use std::path::Path;

use bfvkit::bfv::{BfvError, ConstraintSystem, PhaseSpace};
use bfvkit::lattice::study::{DEFAULT_SIZES, ORDER_BAND};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub name: Option<String>,
    pub algebra: Option<AlgebraSection>,
    pub constraints: Option<ConstraintSection>,
    pub toy: Option<ToySection>,
    pub formal: Option<FormalSection>,
    pub lattice: Option<LatticeSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSection {
    #[serde(default = "one")]
    pub seed: u64,
    /// Rounds of the randomized sign suite; each round makes four checks.
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default, rename = "generator")]
    pub generators: Vec<GeneratorDecl>,
    /// `"lhs -> rhs"` rewrites or `"lhs = 0"` annihilators.
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default, rename = "derivation")]
    pub derivations: Vec<DerivationDecl>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDecl {
    pub name: String,
    pub degree: i32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivationDecl {
    pub name: String,
    pub degree: i32,
    /// Images of generators; missing ones are zero.
    pub images: BTreeMap<String, String>,
    /// Whether `D^2` should vanish modulo the relations.
    #[serde(default = "yes")]
    pub nilpotent: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    /// Number of canonical pairs `(x_i, p_i)`.
    pub n: usize,
    /// Constraints in the variables `x1.., p1..`.
    pub h: Vec<String>,
    #[serde(default)]
    pub structure: Vec<StructureEntry>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    pub body_bound: Option<u32>,
}

/// `f_ij^k`, indices from 1.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub f: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySection {
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Basis section (from 1) and function for the non-linearity witness.
    #[serde(default = "one_usize")]
    pub witness_section: usize,
    #[serde(default = "default_witness_g")]
    pub witness_g: String,
    /// Expected witness variable and defect, checked when given.
    pub witness_variable: Option<String>,
    pub witness_defect: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormalSection {
    pub checks: Option<Vec<String>>,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(default = "two")]
    pub d: usize,
    #[serde(default = "default_sizes")]
    pub n: Vec<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub fd_step: Option<f64>,
    #[serde(default = "three")]
    pub k: usize,
    #[serde(default = "default_band")]
    pub band: [f64; 2],
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    #[serde(default = "default_oracle_states")]
    pub oracle_states: usize,
    #[serde(default = "default_oracle_tolerance")]
    pub oracle_tolerance: f64,
    /// Required ratio of off-shell to on-shell `Q0^2(Pi)`.
    #[serde(default = "default_min_ratio")]
    pub min_ratio: f64,
    pub checks: Option<Vec<String>>,
}

fn one() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn yes() -> bool {
    true
}
fn default_rounds() -> usize {
    1000
}
fn default_max_order() -> usize {
    3
}
fn default_trials() -> usize {
    100
}
fn default_witness_g() -> String {
    "x1".into()
}
fn default_budget() -> usize {
    bfvkit::formal::engine::DEFAULT_STEP_BUDGET
}
fn default_sizes() -> Vec<usize> {
    DEFAULT_SIZES.to_vec()
}
fn default_seed() -> u64 {
    7
}
fn default_band() -> [f64; 2] {
    [ORDER_BAND.0, ORDER_BAND.1]
}
fn default_oracle_n() -> usize {
    8
}
fn default_oracle_states() -> usize {
    20
}
fn default_oracle_tolerance() -> f64 {
    1e-6
}
fn default_min_ratio() -> f64 {
    1e3
}

impl Default for AlgebraSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl Default for ToySection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl Default for FormalSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl Default for LatticeSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// A parsed model and the SHA-256 of its bytes (`None` without a file).
#[derive(Clone, Debug, Default)]
pub struct Loaded {
    pub path: Option<String>,
    pub sha256: Option<String>,
    pub model: Model,
}

pub fn parse(text: &str) -> Result<Model, CliError> {
    let model: Model = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
    let model = parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(Loaded {
        path: Some(path.display().to_string()),
        sha256: Some(hex::encode(Sha256::digest(&bytes))),
        model,
    })
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Model {
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(a) = &self.algebra {
            a.algebra()?;
            a.relation_set(&a.algebra()?)?;
            a.derivation_list(&a.algebra()?)?;
        }
        if let Some(c) = &self.constraints {
            c.system()?;
        }
        if let Some(t) = &self.toy {
            if self.constraints.is_none() {
                return Err(config("[toy] needs a [constraints] section"));
            }
            t.validate(self.constraints.as_ref().expect("checked").n)?;
        }
        if let Some(l) = &self.lattice {
            l.validate()?;
        }
        Ok(())
    }
}

impl AlgebraSection {
    pub fn algebra(&self) -> Result<std::sync::Arc<bfvkit::Algebra>, CliError> {
        let decls: Vec<(&str, i32)> = self.generators.iter().map(|g| (g.name.as_str(), g.degree)).collect();
        bfvkit::Algebra::new(&decls).map_err(|e| config(format!("[algebra] {e}")))
    }

    pub fn relation_set(&self, alg: &std::sync::Arc<bfvkit::Algebra>) -> Result<bfvkit::graded::RelationSet, CliError> {
        let mut rs = bfvkit::graded::RelationSet::new(alg);
        for r in &self.relations {
            let bad = |m: &str| config(format!("[algebra] relation `{r}`: {m}"));
            let (lhs, rhs) = r
                .split_once("->")
                .or_else(|| r.split_once('='))
                .ok_or_else(|| bad("expected `lhs -> rhs` or `lhs = 0`"))?;
            let lhs = bfvkit::GradedPoly::parse(alg, lhs.trim()).map_err(|e| bad(&e.to_string()))?;
            let rhs = bfvkit::GradedPoly::parse(alg, rhs.trim()).map_err(|e| bad(&e.to_string()))?;
            let mut terms = lhs.terms();
            let m = match (terms.next(), terms.next()) {
                (Some((m, c)), None) if *c == bfvkit::graded::int(1) => m.clone(),
                _ => return Err(bad("left side must be a single monomial")),
            };
            if rhs.is_zero() {
                rs.annihilate(m);
            } else {
                rs.rewrite(m, rhs).map_err(|e| bad(&e.to_string()))?;
            }
        }
        Ok(rs)
    }

    pub fn derivation_list(
        &self,
        alg: &std::sync::Arc<bfvkit::Algebra>,
    ) -> Result<Vec<(String, bfvkit::Derivation, bool)>, CliError> {
        let mut out = Vec::new();
        for d in &self.derivations {
            let bad = |m: &str| config(format!("[algebra] derivation `{}`: {m}", d.name));
            let mut images = Vec::new();
            for (g, text) in &d.images {
                let id = alg.id(g).map_err(|e| bad(&e.to_string()))?;
                let img = bfvkit::GradedPoly::parse(alg, text).map_err(|e| bad(&e.to_string()))?;
                images.push((id, img));
            }
            let der = bfvkit::Derivation::from_images(alg, d.degree, images)
                .map_err(|e| bad(&e.to_string()))?
                .zero_elsewhere();
            out.push((d.name.clone(), der, d.nilpotent));
        }
        Ok(out)
    }
}

impl ConstraintSection {
    pub fn system(&self) -> Result<ConstraintSystem, CliError> {
        let bad = |m: String| config(format!("[constraints] {m}"));
        if self.n == 0 || self.h.is_empty() {
            return Err(bad("need n >= 1 and at least one constraint".into()));
        }
        let sp = PhaseSpace::new(self.n, self.h.len());
        let h = self
            .h
            .iter()
            .map(|t| sp.parse(t).map_err(|e| bad(format!("`{t}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut structure = Vec::new();
        for e in &self.structure {
            let m = self.h.len();
            if [e.i, e.j, e.k].iter().any(|v| *v == 0 || *v > m) {
                return Err(bad(format!(
                    "structure index ({}, {}, {}) out of 1..={m}",
                    e.i, e.j, e.k
                )));
            }
            let f = sp.parse(&e.f).map_err(|err| bad(format!("`{}`: {err}", e.f)))?;
            structure.push(((e.i - 1, e.j - 1, e.k - 1), f));
        }
        ConstraintSystem::new(sp, h, structure).map_err(|e: BfvError| bad(e.to_string()))
    }
}

impl ToySection {
    fn validate(&self, n: usize) -> Result<(), CliError> {
        if self.witness_section == 0 {
            return Err(config("[toy] witness_section counts from 1"));
        }
        if let Some(v) = &self.witness_variable {
            let ok = (1..=n).any(|i| *v == format!("x{i}") || *v == format!("p{i}"));
            if !ok {
                return Err(config(format!(
                    "[toy] witness_variable `{v}` is not a canonical variable"
                )));
            }
        }
        Ok(())
    }
}

impl LatticeSection {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| config(format!("[lattice] {m}"));
        if !(2..=3).contains(&self.d) {
            return Err(bad(format!("d must be 2 or 3, got {}", self.d)));
        }
        if self.n.len() < 3 {
            return Err(bad(format!(
                "a convergence study needs at least 3 grid sizes, got {}",
                self.n.len()
            )));
        }
        if let Some(n) = self.n.iter().find(|n| **n < 4) {
            return Err(bad(format!("grid sizes must be at least 4, got {n}")));
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("grid sizes must increase".into()));
        }
        if !(2..=3).contains(&self.k) {
            return Err(bad(format!("k must be 2 or 3 odd parameters, got {}", self.k)));
        }
        if let Some(s) = self.fd_step {
            if !(s.is_finite() && s > 0.0) {
                return Err(bad(format!("fd step must be positive and finite, got {s}")));
            }
        }
        if self.band[0].partial_cmp(&self.band[1]) != Some(std::cmp::Ordering::Less) {
            return Err(bad(format!("empty order band {:?}", self.band)));
        }
        if self.oracle_n < 4 || self.oracle_states == 0 {
            return Err(bad("oracle needs N >= 4 and at least one state".into()));
        }
        Ok(())
    }
}
