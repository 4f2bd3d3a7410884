//! Check records, the JSON summary, the transcript and convergence CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use bfvkit::lattice::study::Study;
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// An exact residual is printed as the polynomial or expression it is; a
/// numerical one as a float.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Residual {
    Exact(String),
    Float(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub suite: String,
    pub status: Status,
    pub max_residual: Option<Residual>,
    pub est_order: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub notes: Vec<String>,
}

impl CheckRecord {
    pub fn new(suite: &str, check: &str, ok: bool) -> CheckRecord {
        CheckRecord {
            check: check.to_string(),
            suite: suite.to_string(),
            status: Status::from_bool(ok),
            max_residual: None,
            est_order: None,
            runtime_ms: None,
            notes: Vec::new(),
        }
    }

    pub fn exact(mut self, r: impl ToString) -> Self {
        self.max_residual = Some(Residual::Exact(r.to_string()));
        self
    }

    pub fn float(mut self, r: f64) -> Self {
        self.max_residual = Some(Residual::Float(r));
        self
    }

    pub fn order(mut self, p: Option<f64>) -> Self {
        self.est_order = p;
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// One CSV row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub check: String,
    pub n: usize,
    pub defect: f64,
    pub est_order: Option<f64>,
}

impl CsvRow {
    pub fn from_study(s: &Study) -> Vec<CsvRow> {
        s.rows
            .iter()
            .map(|r| CsvRow {
                check: r.check.clone(),
                n: r.n,
                defect: r.defect,
                est_order: r.est_order,
            })
            .collect()
    }
}

pub fn csv(rows: &[CsvRow]) -> String {
    let mut out = String::from("check,N,defect_norm,est_order\n");
    for r in rows {
        let order = r.est_order.map(|p| format!("{p:e}")).unwrap_or_default();
        writeln!(out, "{},{},{:e},{}", r.check, r.n, r.defect, order).expect("writing to a String");
    }
    out
}

/// Everything one invocation produced.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub checks: Vec<CheckRecord>,
    /// Convergence tables by suite name.
    pub tables: BTreeMap<String, Vec<CsvRow>>,
    /// Additional JSON documents by file name, such as rewrite traces.
    pub attachments: BTreeMap<String, serde_json::Value>,
    pub conventions: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
}

impl Outcome {
    pub fn extend(&mut self, other: Outcome) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
        self.attachments.extend(other.attachments);
        for c in other.conventions {
            if !self.conventions.contains(&c) {
                self.conventions.push(c);
            }
        }
        self.seeds.extend(other.seeds);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckRecord::passed)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub model: Option<String>,
    pub model_sha256: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub status: Status,
    pub passed: usize,
    pub failed: usize,
    pub conventions: Vec<String>,
    /// Failures first, otherwise in execution order.
    pub checks: Vec<CheckRecord>,
}

impl Summary {
    pub fn new(command: &str, model: Option<String>, sha: Option<String>, outcome: &Outcome) -> Summary {
        let (fail, pass): (Vec<_>, Vec<_>) = outcome.checks.iter().cloned().partition(|c| !c.passed());
        Summary {
            tool: "bfvkit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            model,
            model_sha256: sha,
            seeds: outcome.seeds.clone(),
            status: Status::from_bool(fail.is_empty()),
            passed: pass.len(),
            failed: fail.len(),
            conventions: outcome.conventions.clone(),
            checks: fail.into_iter().chain(pass).collect(),
        }
    }

    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn transcript(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "bfvkit {} :: {}", self.version, self.command);
        match (&self.model, &self.model_sha256) {
            (Some(m), Some(h)) => {
                let _ = writeln!(w, "model {m} sha256 {h}");
            }
            _ => {
                let _ = writeln!(w, "model (built-in defaults)");
            }
        }
        for (k, v) in &self.seeds {
            let _ = writeln!(w, "seed {k} = {v}");
        }
        if !self.conventions.is_empty() {
            let _ = writeln!(w, "conventions:");
            for c in &self.conventions {
                let _ = writeln!(w, "  - {c}");
            }
        }
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            let _ = write!(w, "{status} {}/{}", c.suite, c.check);
            match &c.max_residual {
                Some(Residual::Exact(r)) => {
                    let _ = write!(w, "  residual {r}");
                }
                Some(Residual::Float(r)) => {
                    let _ = write!(w, "  residual {r:e}");
                }
                None => {}
            }
            if let Some(p) = c.est_order {
                let _ = write!(w, "  order {p:.3}");
            }
            if let Some(t) = c.runtime_ms {
                let _ = write!(w, "  {t:.1} ms");
            }
            let _ = writeln!(w);
            for n in &c.notes {
                let _ = writeln!(w, "    {n}");
            }
        }
        let _ = writeln!(
            w,
            "{}: {} passed, {} failed",
            if self.failed == 0 { "PASS" } else { "FAIL" },
            self.passed,
            self.failed
        );
        out
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes `summary.json`, `transcript.txt`, one `<suite>.csv` per
/// convergence table and every attachment.
pub fn emit(dir: &Path, summary: &Summary, outcome: &Outcome) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_file(dir, "summary.json", &summary.json())?;
    write_file(dir, "transcript.txt", &summary.transcript())?;
    for (suite, rows) in &outcome.tables {
        write_file(dir, &format!("{suite}.csv"), &csv(rows))?;
    }
    for (name, doc) in &outcome.attachments {
        let mut s = serde_json::to_string_pretty(doc).expect("attachment serializes");
        s.push('\n');
        write_file(dir, name, &s)?;
    }
    Ok(())
}
