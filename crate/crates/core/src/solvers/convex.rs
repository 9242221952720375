use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LsError, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::measurement::MeasurementOp;
use crate::projections::truncated_svd;

use super::{residual, vec_norm, Clock, IterateView};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvexConfig {
    /// Cap on proximal iterations summed over all rounds.
    pub max_iters: usize,
    /// A round ends once the relative objective change drops to this value.
    pub objective_tol: f64,
    /// Stop once `‖A(X) − b‖₂ ≤ rel_residual_tol · ‖b‖₂` (or `≤ eps_b`).
    pub rel_residual_tol: f64,
    /// `β = beta_scale / σ_max(A)`.
    pub beta_scale: f64,
    /// Cap on residual add-back rounds; 1 solves the penalized problem once.
    pub max_rounds: usize,
    /// Power iterations used to estimate `σ_max(A)`.
    pub norm_iters: usize,
    pub seed: u64,
}

impl Default for ConvexConfig {
    fn default() -> Self {
        ConvexConfig {
            max_iters: 2000,
            objective_tol: 1e-7,
            rel_residual_tol: 1e-6,
            beta_scale: 10.0,
            max_rounds: 40,
            norm_iters: 50,
            seed: 0,
        }
    }
}

impl ConvexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.objective_tol > 0.0 && self.rel_residual_tol > 0.0 && self.beta_scale > 0.0) {
            return Err(LsError::invalid(
                "convex tolerances and beta_scale must be positive",
            ));
        }
        if self.max_rounds == 0 {
            return Err(LsError::invalid("max_rounds must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvexTermination {
    /// The measurement residual reached the requested tolerance.
    ResidualTol,
    /// The last round made no progress on the measurement residual.
    Stalled,
    MaxRounds,
    MaxIters,
}

impl fmt::Display for ConvexTermination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvexTermination::ResidualTol => "residual_tol",
            ConvexTermination::Stalled => "stalled",
            ConvexTermination::MaxRounds => "max_rounds",
            ConvexTermination::MaxIters => "max_iters",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConvexReport {
    pub low_rank: DenseMatrix,
    pub sparse: SparseMatrix,
    pub estimate: DenseMatrix,
    pub lambda: f64,
    pub beta: f64,
    /// Step length `1/(β σ_max²)` of each proximal block update.
    pub step: f64,
    /// Penalized objective after every proximal iteration; one inner vector
    /// per round, each evaluated against that round's data vector.
    pub objective_trace: Vec<Vec<f64>>,
    /// `‖A(L+S) − b‖₂` at the start and after every accepted round. A round
    /// that fails to lower it is discarded and ends the run, so the trace is
    /// strictly decreasing.
    pub residual_trace: Vec<f64>,
    /// Rounds run, including a final discarded one.
    pub rounds: usize,
    pub iterations: usize,
    /// Whether every round met the objective tolerance and the run ended on
    /// the residual tolerance.
    pub converged: bool,
    pub termination: ConvexTermination,
    pub wall_time: f64,
}

/// Summary of a [`ConvexReport`] without the matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexSummary {
    pub lambda: f64,
    pub beta: f64,
    /// Rounds run, including a final discarded one.
    pub rounds: usize,
    pub iterations: usize,
    pub residual_trace: Vec<f64>,
    pub converged: bool,
    pub termination: ConvexTermination,
    pub wall_time: f64,
}

impl ConvexReport {
    pub fn summary(&self) -> ConvexSummary {
        ConvexSummary {
            lambda: self.lambda,
            beta: self.beta,
            rounds: self.rounds,
            iterations: self.iterations,
            residual_trace: self.residual_trace.clone(),
            converged: self.converged,
            termination: self.termination,
            wall_time: self.wall_time,
        }
    }
}

/// `λ = √(2r/s)`, with the rank hint floored at 1; `None` when `s = 0`.
pub fn convex_lambda(r_hint: usize, s_hint: usize) -> Option<f64> {
    (s_hint > 0).then(|| (2.0 * r_hint.max(1) as f64 / s_hint as f64).sqrt())
}

/// Singular-value soft thresholding; returns the result and its nuclear norm.
fn svt(w: &DenseMatrix, tau: f64) -> Result<(DenseMatrix, f64)> {
    let (m, n) = w.shape();
    let svd = truncated_svd(w, m.min(n))?;
    let mut out = DenseMatrix::zeros(m, n);
    let mut nuclear = 0.0;
    for (c, &sigma) in svd.sigma.iter().enumerate() {
        let shrunk = sigma - tau;
        if shrunk <= 0.0 {
            break;
        }
        nuclear += shrunk;
        let data = out.as_mut_slice();
        for i in 0..m {
            let ui = svd.u.get(i, c) * shrunk;
            if ui == 0.0 {
                continue;
            }
            let row = &mut data[i * n..(i + 1) * n];
            for (j, o) in row.iter_mut().enumerate() {
                *o += ui * svd.v.get(j, c);
            }
        }
    }
    Ok((out, nuclear))
}

fn soft_threshold(w: &DenseMatrix, tau: f64) -> DenseMatrix {
    w.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// Nuclear-norm plus weighted ℓ1 recovery.
///
/// Minimizes `‖L‖_* + λ‖S‖₁ + (β/2)‖A(L+S) − b_k‖²₂` by alternating proximal
/// gradient steps: singular-value soft thresholding on `L`, then entrywise
/// soft thresholding on `S`, each with step `1/(β σ_max(A)²)`. β is fixed at
/// `beta_scale / σ_max(A)` and λ comes from [`convex_lambda`]; with
/// `s_hint = 0` the sparse block is held at zero.
///
/// The penalized minimizer is biased towards zero, so rounds are repeated
/// with the unexplained residual added back to the data
/// (`b_{k+1} = b_k + b − A(L_k + S_k)`), which drives the iterates towards the
/// constrained problem `‖A(L+S) − b‖₂ ≤ eps_b`. Within a round the objective
/// is non-increasing.
pub fn convex_relax(
    b: &[f64],
    op: &MeasurementOp,
    r_hint: usize,
    s_hint: usize,
    eps_b: f64,
    cfg: &ConvexConfig,
) -> Result<ConvexReport> {
    convex_relax_observed(b, op, r_hint, s_hint, eps_b, cfg, &mut |_| {})
}

/// [`convex_relax`] with a callback invoked after every proximal iteration.
pub fn convex_relax_observed(
    b: &[f64],
    op: &MeasurementOp,
    r_hint: usize,
    s_hint: usize,
    eps_b: f64,
    cfg: &ConvexConfig,
    observer: &mut dyn FnMut(&IterateView<'_>),
) -> Result<ConvexReport> {
    cfg.validate()?;
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
    if !(eps_b >= 0.0 && eps_b.is_finite()) {
        return Err(LsError::invalid(format!(
            "eps_b must be finite and non-negative, got {eps_b}"
        )));
    }
    let clock = Clock::start();
    let (m, n) = op.input_shape();
    let lambda = convex_lambda(r_hint, s_hint);
    let sigma = op.norm_estimate(cfg.norm_iters, cfg.seed)?;
    if sigma == 0.0 {
        return Err(LsError::invalid("measurement operator is identically zero"));
    }
    // power iteration approaches σ_max from below; pad so the step stays safe
    let lipschitz_sigma = sigma * 1.01;
    let beta = cfg.beta_scale / sigma;
    let step = 1.0 / (beta * lipschitz_sigma * lipschitz_sigma);

    let b_norm = vec_norm(b);
    let target = eps_b.max(cfg.rel_residual_tol * b_norm);

    let mut low = DenseMatrix::zeros(m, n);
    let mut sparse = DenseMatrix::zeros(m, n);
    let mut data = b.to_vec();
    let mut residual_trace = vec![b_norm];
    let mut objective_trace = Vec::new();
    let mut iterations = 0;
    let mut rounds_converged = true;

    let termination = loop {
        let &res_norm = residual_trace.last().expect("trace starts non-empty");
        if res_norm <= target {
            break ConvexTermination::ResidualTol;
        }
        if objective_trace.len() == cfg.max_rounds {
            break ConvexTermination::MaxRounds;
        }
        if iterations >= cfg.max_iters {
            break ConvexTermination::MaxIters;
        }

        let accepted = (low.clone(), sparse.clone());
        let mut round = Vec::new();
        let mut nuclear = svt(&low, 0.0)?.1;
        let mut l1 = sparse.l1_norm();
        let objective = |nuclear: f64, l1: f64, res: &[f64]| {
            nuclear + lambda.unwrap_or(0.0) * l1 + 0.5 * beta * vec_norm(res).powi(2)
        };
        let mut x = low.add(&sparse);
        let mut previous = objective(nuclear, l1, &residual(op, &x, &data)?);
        let mut round_converged = false;
        while iterations < cfg.max_iters {
            let grad = op.adjoint(&residual(op, &x, &data)?)?.scale(beta);
            let mut w = low.clone();
            w.axpy(-step, &grad);
            (low, nuclear) = svt(&w, step)?;
            x = low.add(&sparse);

            if let Some(lambda) = lambda {
                let grad = op.adjoint(&residual(op, &x, &data)?)?.scale(beta);
                let mut w = sparse.clone();
                w.axpy(-step, &grad);
                sparse = soft_threshold(&w, lambda * step);
                l1 = sparse.l1_norm();
                x = low.add(&sparse);
            }
            iterations += 1;

            let res_data = residual(op, &x, &data)?;
            let current = objective(nuclear, l1, &res_data);
            round.push(current);
            observer(&IterateView {
                iteration: iterations,
                elapsed: clock.elapsed(),
                low_rank: &low,
                sparse: &sparse,
                residual: vec_norm(&residual(op, &x, b)?),
            });
            let change = (previous - current).abs() / previous.abs().max(f64::MIN_POSITIVE);
            previous = current;
            if change <= cfg.objective_tol {
                round_converged = true;
                break;
            }
        }
        rounds_converged &= round_converged;
        objective_trace.push(round);

        let res = residual(op, &x, b)?;
        let res_norm_new = vec_norm(&res);
        if res_norm_new >= res_norm && res_norm_new > target {
            // keep the last round that improved the residual
            (low, sparse) = accepted;
            break ConvexTermination::Stalled;
        }
        residual_trace.push(res_norm_new);
        for (d, r) in data.iter_mut().zip(&res) {
            *d -= r;
        }
    };

    let sparse_out = SparseMatrix::from_dense(&sparse);
    Ok(ConvexReport {
        estimate: low.add(&sparse),
        low_rank: low,
        sparse: sparse_out,
        lambda: lambda.unwrap_or(0.0),
        beta,
        step,
        rounds: objective_trace.len(),
        objective_trace,
        residual_trace,
        iterations,
        converged: rounds_converged && termination == ConvexTermination::ResidualTol,
        termination,
        wall_time: clock.elapsed(),
    })
}
