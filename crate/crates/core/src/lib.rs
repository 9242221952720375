//! Recovery of matrices that are the sum of a low-rank and a sparse component
//! from compressed linear measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`ls_model`]: the LS(r, s, μ) model, incoherence, norm bounds and
//!   synthetic problem generation.
//! * [`measurement`]: Gaussian and FJLT measurement operators with adjoints,
//!   plus Monte-Carlo isometry probes.
//! * [`projections`]: hard thresholds, the oblique projector and the
//!   alternating Robust-PCA projection.
//! * [`solvers`]: NIHT, NAHT and a first-order solver for the convex
//!   relaxation.
//! * [`io`]: dense CSV, binary `LSMX` and sparse triple files.

pub mod error;
pub mod io;
pub mod ls_model;
pub mod matrix;
pub mod measurement;
pub mod projections;
pub mod rng;
pub mod solvers;

pub use error::{LsError, Result};
pub use ls_model::{
    closedness_bounds, generate_problem, measured_incoherence, params_from_ratios,
    rank_sparsity_correlation_bound, LsPair, ModelParams, Problem, Ratios,
};
pub use matrix::{DenseMatrix, SparseMatrix};
pub use measurement::{
    empirical_ric, make_fjlt, make_gaussian, near_isometry_stats, IsometryStats, MeasurementOp,
    OperatorKind, OperatorSpec,
};
pub use projections::{
    ht_lowrank, ht_sparse, oblique_project, rpca_project, truncated_svd, SupportSet, SvdTriple,
};
pub use solvers::{
    check_termination, convex_relax, naht, niht, Budgets, ConvexConfig, ConvexReport,
    ConvexTermination, SolverConfig, SolverReport, Termination,
};
