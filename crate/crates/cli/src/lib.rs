//! Experiment harness for `lsrecovery`: phase-transition grids, convergence
//! traces, file-based recovery jobs and isometry probes. Per-trial data is
//! written as CSV and summaries as JSON.

pub mod config;
pub mod convergence;
pub mod error;
pub mod generate;
pub mod grid;
pub mod recover;
pub mod ric;
pub mod trial;

pub use config::{
    ConvergenceConfig, GenerateConfig, GridConfig, RecoverConfig, RicProbeConfig, SolverKind,
};
pub use error::{CliError, CliResult};
pub use grid::{run_phase_grid, GridSummary, PhaseCellResult};
pub use trial::{relative_error, success};
