//! Recovery algorithms.
//!
//! [`niht`] and [`naht`] are the hard-thresholding gradient methods; both use
//! step sizes normalized on the oblique projection of the gradient.
//! [`convex_relax`] solves the nuclear-norm plus ℓ1 relaxation with a
//! first-order method.

mod convex;
mod naht;
mod niht;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{LsError, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::measurement::MeasurementOp;
use crate::projections::{oblique_project, SupportSet};

pub use convex::{
    convex_lambda, convex_relax, convex_relax_observed, ConvexConfig, ConvexReport, ConvexSummary,
    ConvexTermination,
};
pub use naht::{naht, naht_observed};
pub use niht::{niht, niht_observed};

/// Projected residuals at or below this norm count as stationary.
pub const STATIONARY_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖A(X) − b‖₂ ≤ rel_residual_tol · ‖b‖₂`.
    pub rel_residual_tol: f64,
    pub stagnation_window: usize,
    /// Stop once the per-iteration geometric mean residual ratio over the
    /// window exceeds this value.
    pub stagnation_ratio: f64,
    /// Accuracy of the Robust-PCA projection.
    pub rpca_eps: f64,
    /// Passes of the oblique projector used in the step sizes.
    pub oblique_iters: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 300,
            rel_residual_tol: 1e-6,
            stagnation_window: 15,
            stagnation_ratio: 0.999,
            rpca_eps: 1e-8,
            oblique_iters: 1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_residual_tol > 0.0 && self.stagnation_ratio > 0.0 && self.rpca_eps > 0.0) {
            return Err(LsError::invalid("solver tolerances must be positive"));
        }
        if self.stagnation_window < 2 {
            return Err(LsError::invalid("stagnation window must be at least 2"));
        }
        if self.oblique_iters == 0 {
            return Err(LsError::invalid("oblique_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Rank, sparsity and incoherence budgets of the target set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub rank: usize,
    pub sparsity: usize,
    pub mu: f64,
}

impl Budgets {
    pub fn new(rank: usize, sparsity: usize, mu: f64) -> Self {
        Budgets { rank, sparsity, mu }
    }

    fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.rank > m.min(n) {
            return Err(LsError::invalid(format!(
                "rank budget {} exceeds min({m}, {n})",
                self.rank
            )));
        }
        if self.sparsity > m * n {
            return Err(LsError::invalid(format!(
                "sparsity budget {} exceeds {m}*{n}",
                self.sparsity
            )));
        }
        Ok(())
    }

    /// `γ = μ·4r√(2s)/√(mn)`
    pub fn gamma(&self, mu: f64, m: usize, n: usize) -> f64 {
        mu * 4.0 * self.rank as f64 * (2.0 * self.sparsity as f64).sqrt() / ((m * n) as f64).sqrt()
    }

    /// `γ₂ = μ·2r√(2s)/√(mn)`
    pub fn gamma2(&self, mu: f64, m: usize, n: usize) -> f64 {
        0.5 * self.gamma(mu, m, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ResidualTol,
    Stagnation,
    MaxIters,
    /// The projected gradient vanished, so no descent direction remains.
    Stationary,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ResidualTol => "residual_tol",
            Termination::Stagnation => "stagnation",
            Termination::MaxIters => "max_iters",
            Termination::Stationary => "stationary",
        })
    }
}

/// Stopping rule on a residual trace `‖A(X^ℓ) − b‖₂`, ℓ = 0, 1, ….
///
/// Returns `None` to continue. Checked in order: residual tolerance relative
/// to `‖b‖₂`, stagnation `(r_ℓ / r_{ℓ−w})^{1/w} > ratio`, iteration cap.
pub fn check_termination(trace: &[f64], b_norm: f64, cfg: &SolverConfig) -> Option<Termination> {
    let &last = trace.last()?;
    if last <= cfg.rel_residual_tol * b_norm {
        return Some(Termination::ResidualTol);
    }
    let w = cfg.stagnation_window;
    if trace.len() > w {
        let earlier = trace[trace.len() - 1 - w];
        if earlier > 0.0 && (last / earlier).powf(1.0 / w as f64) > cfg.stagnation_ratio {
            return Some(Termination::Stagnation);
        }
    }
    if trace.len() > cfg.max_iters {
        return Some(Termination::MaxIters);
    }
    None
}

/// Step sizes recorded by a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepTrace {
    /// NIHT: one `α_j` per iteration.
    Joint(Vec<f64>),
    /// NAHT: `α_j^L` and `α_j^S` per iteration (0 for a skipped half-step).
    Alternating {
        low_rank: Vec<f64>,
        sparse: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Measured incoherence of the final low-rank factors.
    pub mu_hat: f64,
    /// `γ` evaluated with `mu_hat`.
    pub gamma: f64,
    /// `γ₂` evaluated with `mu_hat`.
    pub gamma2: f64,
    /// Iterations whose low-rank factors exceeded the incoherence cap.
    pub mu_cap_exceeded: usize,
    pub rpca_alternations: usize,
    pub rpca_unconverged: usize,
}

#[derive(Clone, Debug)]
pub struct SolverReport {
    pub low_rank: DenseMatrix,
    pub sparse: SparseMatrix,
    pub estimate: DenseMatrix,
    pub iterations: usize,
    /// `‖A(X^j) − b‖₂` for j = 0..=iterations.
    pub residual_trace: Vec<f64>,
    pub step_sizes: StepTrace,
    pub wall_time: f64,
    pub termination: Termination,
    pub diagnostics: Diagnostics,
}

/// Serializable part of a [`SolverReport`] (everything except the matrices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub iterations: usize,
    pub residual_trace: Vec<f64>,
    pub step_sizes: StepTrace,
    pub wall_time: f64,
    pub termination: Termination,
    pub diagnostics: Diagnostics,
    pub final_residual: f64,
}

impl SolverReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            iterations: self.iterations,
            residual_trace: self.residual_trace.clone(),
            step_sizes: self.step_sizes.clone(),
            wall_time: self.wall_time,
            termination: self.termination,
            diagnostics: self.diagnostics,
            final_residual: self.residual_trace.last().copied().unwrap_or(0.0),
        }
    }
}

/// Current iterate handed to observers once per residual evaluation.
pub struct IterateView<'a> {
    pub iteration: usize,
    /// Seconds since the solver started.
    pub elapsed: f64,
    pub low_rank: &'a DenseMatrix,
    pub sparse: &'a DenseMatrix,
    pub residual: f64,
}

pub(crate) fn add_sparse(dense: &DenseMatrix, sparse: &SparseMatrix) -> DenseMatrix {
    let mut out = dense.clone();
    for &(i, j, v) in sparse.entries() {
        out.set(i, j, out.get(i, j) + v);
    }
    out
}

pub(crate) fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn residual(op: &MeasurementOp, x: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut ax = op.apply(x)?;
    for (a, bi) in ax.iter_mut().zip(b) {
        *a -= bi;
    }
    Ok(ax)
}

pub(crate) fn check_inputs(
    b: &[f64],
    op: &MeasurementOp,
    budgets: &Budgets,
    cfg: &SolverConfig,
) -> Result<()> {
    if b.len() != op.output_len() {
        return Err(LsError::shape(
            format!("{} measurements", op.output_len()),
            b.len(),
        ));
    }
    if let Some(k) = b.iter().position(|v| !v.is_finite()) {
        return Err(LsError::invalid(format!(
            "non-finite measurement at index {k}"
        )));
    }
    let (m, n) = op.input_shape();
    budgets.validate(m, n)?;
    cfg.validate()
}

pub(crate) enum Step {
    Length(f64),
    Stationary,
}

/// `α = ‖Proj(R)‖²_F / ‖A(Proj(R))‖²₂` with `Proj` the oblique projector on
/// `(U, Ω)`.
pub(crate) fn normalized_step(
    op: &MeasurementOp,
    gradient: &DenseMatrix,
    u: &DenseMatrix,
    omega: &SupportSet,
    oblique_iters: usize,
) -> Result<Step> {
    let projected = oblique_project(gradient, u, omega, oblique_iters)?;
    let numerator = projected.frobenius_norm_sq();
    let image = op.apply(&projected)?;
    let denominator: f64 = image.iter().map(|v| v * v).sum();
    if denominator > 0.0 && denominator.is_finite() {
        return Ok(Step::Length(numerator / denominator));
    }
    let projected_norm = numerator.sqrt();
    if projected_norm <= STATIONARY_TOL {
        Ok(Step::Stationary)
    } else {
        Err(LsError::DegenerateStep { projected_norm })
    }
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Clock(Instant::now())
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_tolerance_triggers() {
        let cfg = SolverConfig::default();
        let b_norm = 3.0;
        assert_eq!(
            check_termination(&[1.0, 1e-7 * b_norm], b_norm, &cfg),
            Some(Termination::ResidualTol)
        );
        assert_eq!(check_termination(&[1.0], b_norm, &cfg), None);
    }

    #[test]
    fn flat_trace_stagnates() {
        let cfg = SolverConfig::default();
        assert_eq!(
            check_termination(&[2.0; 16], 1.0, &cfg),
            Some(Termination::Stagnation)
        );
        assert_eq!(check_termination(&[2.0; 15], 1.0, &cfg), None);
    }

    #[test]
    fn geometric_decay_continues_until_tolerance() {
        let cfg = SolverConfig::default();
        let mut trace = Vec::new();
        let mut stop = None;
        for k in 0..100 {
            trace.push(0.5f64.powi(k));
            stop = check_termination(&trace, 1.0, &cfg);
            if stop.is_some() {
                break;
            }
        }
        // 0.5^20 ≈ 9.5e-7 is the first value at or below 1e-6
        assert_eq!(stop, Some(Termination::ResidualTol));
        assert_eq!(trace.len(), 21);
    }

    #[test]
    fn iteration_cap() {
        let cfg = SolverConfig {
            max_iters: 3,
            ..SolverConfig::default()
        };
        let trace = [8.0, 4.0, 2.0, 1.0];
        assert_eq!(
            check_termination(&trace, 1e-3, &cfg),
            Some(Termination::MaxIters)
        );
        assert_eq!(check_termination(&trace[..3], 1e-3, &cfg), None);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            stagnation_window: 1,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let cfg: SolverConfig = serde_json::from_str(r#"{"max_iters": 12}"#).unwrap();
        assert_eq!(cfg.max_iters, 12);
        assert_eq!(cfg.stagnation_window, 15);
    }
}
