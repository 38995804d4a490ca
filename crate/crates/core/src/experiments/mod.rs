//! Sensitivity studies on Manhattan networks and convergence checks.
//!
//! Every study compares a "supply" scenario with a "demand" scenario that
//! differs in one ingredient (initial data, fundamental diagram,
//! distribution at junctions, or a closed road) and records the normalized
//! transport distance and the normalized L1 distance over time.

mod config;
mod output;
mod runners;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lwr::LwrError;
use crate::metric::MetricError;
use crate::network::NetworkError;
use crate::reference::ReferenceError;
use crate::transport::TransportError;

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{line_chart, series_csv};
pub use runners::{
    aligned_dt, compare, line_transport_cost, perturb_all, perturb_center, quartic, rightward_data,
    split_initial_data, DiagramStudy, GridConvergenceRow, LineConvergenceRow, Outcome, PairRun, SeriesPoint,
    SweepPoint, FLAT_LEVEL,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Lwr(#[from] LwrError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("config file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Resolves defaults, validates, and runs the study on a worker pool of
/// `workers` threads (all cores when unset). Nothing is written.
pub fn run(config: &ExperimentConfig) -> Result<(ExperimentConfig, Outcome), ExperimentError> {
    let cfg = config.resolved();
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
    let outcome = pool.install(|| runners::run_kind(&cfg))?;
    Ok((cfg, outcome))
}

#[derive(Debug)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub outcome: Outcome,
    pub directory: PathBuf,
    /// Written files relative to `directory`, manifest last.
    pub files: Vec<PathBuf>,
}

/// Runs the study and writes CSV tables, charts, optional snapshots and a
/// `manifest.json` holding the resolved config into `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunReport, ExperimentError> {
    let (mut cfg, outcome) = run(config)?;
    cfg.output = Some(out.to_path_buf());
    let mut writer = output::Writer::new(out)?;
    output::write_outcome(&mut writer, &cfg, &outcome)?;
    output::write_manifest(&mut writer, &cfg)?;
    Ok(RunReport { config: cfg, outcome, directory: out.to_path_buf(), files: writer.files })
}
