//! Experiment runner: configs in, CSV and JSON records out.

pub mod config;
pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anticonc::stats::Verdict;
use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;
pub use experiments::{Check, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("replay differs at row {row}: expected `{expected}`, got `{actual}`")]
    ReplayMismatch { row: usize, expected: String, actual: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Law(#[from] anticonc::laws::LawError),
    #[error(transparent)]
    Gap(#[from] anticonc::gap::GapError),
    #[error(transparent)]
    SmallBall(#[from] anticonc::smallball::SmallBallError),
    #[error(transparent)]
    Structure(#[from] anticonc::structure::StructureError),
    #[error(transparent)]
    Ensemble(#[from] anticonc::ensembles::EnsembleError),
    #[error(transparent)]
    DetConc(#[from] anticonc::detconc::DetConcError),
    #[error(transparent)]
    Eigen(#[from] anticonc::eigen::EigenError),
}

impl CliError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub wall_clock_secs: f64,
}

impl ResultRecord {
    /// Process exit code: 0 pass, 2 fail, 3 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
            Verdict::Inconclusive => 3,
        }
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<out>/<experiment>.csv` and `<out>/<experiment>.json`.
    pub fn write(&self, out: &Path) -> Result<(PathBuf, PathBuf), CliError> {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let csv_path = out.join(format!("{}.csv", self.experiment));
        let json_path = out.join(format!("{}.json", self.experiment));
        fs::write(&csv_path, self.to_csv()?).map_err(|e| CliError::io(&csv_path, e))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&json_path, json).map_err(|e| CliError::io(&json_path, e))?;
        Ok((csv_path, json_path))
    }
}

/// Runs the experiment on a pool of `workers` threads (rayon's default when
/// unset), writing outputs when `out` is set. Results do not depend on the
/// worker count.
pub fn run(config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    config.validate()?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    let outcome = pool.install(|| experiments::dispatch(config))?;
    let verdict = Verdict::combine(outcome.checks.iter().map(|c| c.verdict));
    let record = ResultRecord {
        experiment: config.experiment.clone(),
        config: config.clone(),
        config_hash: config.hash(),
        header: outcome.header,
        rows: outcome.rows,
        summary: outcome.summary,
        checks: outcome.checks,
        verdict,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(out) = &config.out {
        record.write(out)?;
    }
    Ok(record)
}

pub fn read_record(path: &Path) -> Result<ResultRecord, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Reruns the stored config (optionally on a different worker count) and
/// requires bit-identical rows.
pub fn replay(record_path: &Path, workers: Option<usize>) -> Result<ResultRecord, CliError> {
    let stored = read_record(record_path)?;
    let mut config = stored.config.clone();
    config.out = None;
    if workers.is_some() {
        config.workers = workers;
    }
    let fresh = run(&config)?;
    compare_rows(&stored, &fresh)?;
    Ok(fresh)
}

pub fn compare_rows(expected: &ResultRecord, actual: &ResultRecord) -> Result<(), CliError> {
    let join = |r: Option<&Vec<String>>| r.map(|r| r.join(",")).unwrap_or_else(|| "<missing>".into());
    if expected.header != actual.header {
        return Err(CliError::ReplayMismatch { row: 0, expected: expected.header.join(","), actual: actual.header.join(",") });
    }
    let len = expected.rows.len().max(actual.rows.len());
    for i in 0..len {
        let (e, a) = (expected.rows.get(i), actual.rows.get(i));
        if e != a {
            return Err(CliError::ReplayMismatch { row: i + 1, expected: join(e), actual: join(a) });
        }
    }
    Ok(())
}
