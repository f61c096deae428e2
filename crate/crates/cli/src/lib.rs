//! Declarative experiment runner for `actstab`.
//!
//! A run reads an [`ExperimentConfig`], resolves its defaults, executes one
//! experiment and writes `summary.json` plus `detail.csv` into the output
//! directory.

// `!(x > y)` comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;

use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, Check, Outcome};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] actstab::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug)]
pub struct RunSummary {
    pub passed: bool,
    pub outcome: Outcome,
    pub summary_path: PathBuf,
    pub detail_path: PathBuf,
}

pub fn summary_json(config: &ExperimentConfig, outcome: &Outcome) -> serde_json::Value {
    json!({
        "experiment": config.experiment.name(),
        "passed": outcome.passed(),
        "checks": outcome.checks,
        "statistics": outcome.statistics,
        "config": config,
    })
}

/// Runs a resolved config and writes its reports under `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, RunError> {
    let outcome = run_experiment(config)?;
    std::fs::create_dir_all(out_dir)?;
    let summary_path = out_dir.join("summary.json");
    let detail_path = out_dir.join("detail.csv");
    let mut text = serde_json::to_string_pretty(&summary_json(config, &outcome))?;
    text.push('\n');
    std::fs::write(&summary_path, text)?;
    let mut w = csv::Writer::from_path(&detail_path)?;
    w.write_record(&outcome.header)?;
    for row in &outcome.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(RunSummary {
        passed: outcome.passed(),
        outcome,
        summary_path,
        detail_path,
    })
}

/// Human-readable model catalogue.
pub fn list_models() -> String {
    let mut s = String::new();
    for m in actstab::models::catalog() {
        s.push_str(&format!("{}  [{}]\n  {}\n", m.name, m.group, m.description));
        for (p, d) in &m.parameters {
            s.push_str(&format!("  {p}: {d}\n"));
        }
        s.push_str(&format!("  experiments: {}\n", m.experiments.join(", ")));
    }
    s.push_str("isometric  [Z]\n  the identity action on R^n (not expansive)\n  n: dimension, default 1\n");
    s.push_str(
        "diagonal  [any family]\n  custom diagonal-linear action\n  family: group family, scales: one vector per generator\n",
    );
    s
}
