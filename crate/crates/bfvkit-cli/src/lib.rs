//! Model-driven runner for the `bfvkit` checks.
//!
//! A run loads a TOML model (see `fixtures/`), applies command-line
//! overrides, executes the selected suites and assembles a [`Summary`] whose
//! JSON form is byte-identical across reruns at a fixed seed.

use std::path::PathBuf;

pub mod model;
pub mod report;
pub mod run;

pub use model::{Loaded, Model};
pub use report::{CheckRecord, Outcome, Status, Summary};
pub use run::{Overrides, Suite};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lattice computation failed: {0}")]
    Lattice(bfvkit::lattice::LatticeError),
}

impl CliError {
    /// 2 for configuration and I/O problems, 3 for computations that could
    /// not complete.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Lattice(_) => 3,
        }
    }
}

/// What to run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Suites(Vec<Suite>),
    /// Every suite the model has a section for.
    Report,
}

#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub command: String,
    pub model: Option<PathBuf>,
    pub overrides: Overrides,
}

/// Suites run by `report`: those with a model section, or the ones that need
/// no model data when the model has none.
pub fn report_suites(m: &Model) -> Vec<Suite> {
    let any = m.algebra.is_some() || m.constraints.is_some() || m.formal.is_some() || m.lattice.is_some();
    let mut out = Vec::new();
    if m.algebra.is_some() || !any {
        out.push(Suite::Algebra);
    }
    if m.constraints.is_some() {
        out.push(Suite::Bfv);
        out.push(Suite::Toy);
    }
    if m.formal.is_some() || !any {
        out.push(Suite::Formal);
    }
    if m.lattice.is_some() || !any {
        out.extend([Suite::Brackets, Suite::Q0Defect, Suite::Anchor, Suite::Curvature]);
    }
    out
}

pub fn execute(target: &Target, inv: &Invocation) -> Result<(Summary, Outcome), CliError> {
    let loaded = match &inv.model {
        Some(p) => model::load(p)?,
        None => Loaded::default(),
    };
    let suites = match target {
        Target::Suites(s) => s.clone(),
        Target::Report => report_suites(&loaded.model),
    };
    if suites.iter().any(|s| Suite::ALL[4..].contains(s)) {
        run::lattice_settings(&loaded.model, &inv.overrides)?;
    }
    let sel = run::selection(&loaded.model, &suites, &inv.overrides.checks)?;
    let mut outcome = Outcome::default();
    for s in &suites {
        outcome.extend(run::run_suite(*s, &loaded.model, &inv.overrides, &sel)?);
    }
    let summary = Summary::new(&inv.command, loaded.path, loaded.sha256, &outcome);
    Ok((summary, outcome))
}
