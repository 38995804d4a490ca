//! LWR traffic dynamics on a discretized network.

mod flux;
mod scheme;
mod snapshot;
mod state;

use thiserror::Error;

use crate::network::NetworkError;

pub use flux::{cfl_dt, flux, godunov_flux, FundamentalDiagram, DENSITY_TOL};
pub use scheme::{
    apply_closure, simulate, simulate_with, step, FluxModel, InitialState, Scenario, ScenarioBuilder, Trajectory,
    DEFAULT_SAFETY,
};
pub use snapshot::{read_snapshot, snapshot_file_name, write_snapshot};
pub use state::{init_subdensities, DensityField, SubDensities};

#[derive(Debug, Error)]
pub enum LwrError {
    #[error("density {0} outside [0, 1]")]
    DensityOutOfRange(f64),
    #[error("invalid fundamental diagram: sigma = {sigma}, f_max = {f_max}")]
    InvalidDiagram { sigma: f64, f_max: f64 },
    #[error("CFL safety factor {0} outside (0, 1]")]
    InvalidSafety(f64),
    #[error("invalid cell width {0}")]
    InvalidCellWidth(f64),
    #[error("time step {dt} violates the CFL bound {limit}")]
    TimeStep { dt: f64, limit: f64 },
    #[error("invalid final time {0}")]
    FinalTime(f64),
    #[error("snapshot time {0} outside [0, T]")]
    SnapshotTime(f64),
    #[error("vertex {0} has no incoming or no outgoing edge; sources and sinks are not supported")]
    SourceOrSink(u32),
    #[error("edge {0} has fewer than 2 cells")]
    ShortEdge(u32),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("sub-densities do not sum to the total density (defect {0:e})")]
    Coupling(f64),
    #[error("CFL violation at step {step}: density {value} on edge {edge}, cell {j}")]
    CflViolation { edge: u32, j: usize, value: f64, step: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
