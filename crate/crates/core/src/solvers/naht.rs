use crate::error::Result;
use crate::measurement::MeasurementOp;
use crate::projections::{ht_lowrank, ht_sparse, rpca_project};

use super::{
    add_sparse, check_inputs, check_termination, normalized_step, residual, vec_norm, Budgets,
    Clock, Diagnostics, IterateView, SolverConfig, SolverReport, Step, StepTrace, Termination,
};

/// Normalized Alternating Hard Thresholding.
///
/// Alternates a normalized gradient half-step on the low-rank component,
/// followed by a rank-`r` hard threshold, with a half-step on the sparse
/// component followed by an `s`-sparse hard threshold. The residual is
/// recomputed at `X^{j+1/2} = L^{j+1} + S^j` between the two half-steps. A
/// half-step whose budget is zero is skipped and records a step size of 0.
pub fn naht(
    b: &[f64],
    op: &MeasurementOp,
    budgets: Budgets,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    naht_observed(b, op, budgets, cfg, &mut |_| {})
}

/// [`naht`] with a callback invoked on every iterate, including the initial one.
pub fn naht_observed(
    b: &[f64],
    op: &MeasurementOp,
    budgets: Budgets,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&IterateView<'_>),
) -> Result<SolverReport> {
    check_inputs(b, op, &budgets, cfg)?;
    let clock = Clock::start();
    let (m, n) = op.input_shape();
    let Budgets { rank, sparsity, mu } = budgets;
    let b_norm = vec_norm(b);
    let mut diagnostics = Diagnostics::default();

    let init = rpca_project(&op.adjoint(b)?, rank, sparsity, mu, cfg.rpca_eps)?;
    diagnostics.rpca_alternations += init.alternations;
    diagnostics.rpca_unconverged += usize::from(!init.converged);
    diagnostics.mu_cap_exceeded += usize::from(init.low_rank.exceeds_cap);
    let mut low_rank = init.low_rank;
    let mut sparse = init.sparse;
    let mut x = add_sparse(&low_rank.matrix, &sparse);

    let mut residual_trace = Vec::new();
    let mut low_rank_steps = Vec::new();
    let mut sparse_steps = Vec::new();
    let termination = loop {
        let res = residual(op, &x, b)?;
        let res_norm = vec_norm(&res);
        residual_trace.push(res_norm);
        observer(&IterateView {
            iteration: residual_trace.len() - 1,
            elapsed: clock.elapsed(),
            low_rank: &low_rank.matrix,
            sparse: &sparse.to_dense(),
            residual: res_norm,
        });
        if let Some(t) = check_termination(&residual_trace, b_norm, cfg) {
            break t;
        }

        let omega = sparse.support();
        let mut stationary = 0;

        // low-rank half-step
        let alpha_l = if rank == 0 {
            0.0
        } else {
            let gradient = op.adjoint(&res)?;
            match normalized_step(
                op,
                &gradient,
                &low_rank.factors.u,
                &omega,
                cfg.oblique_iters,
            )? {
                Step::Length(alpha) => {
                    let mut v = low_rank.matrix.clone();
                    v.axpy(-alpha, &gradient);
                    low_rank = ht_lowrank(&v, rank, mu)?;
                    diagnostics.mu_cap_exceeded += usize::from(low_rank.exceeds_cap);
                    alpha
                }
                Step::Stationary => {
                    stationary += 1;
                    0.0
                }
            }
        };

        // sparse half-step at X^{j+1/2} = L^{j+1} + S^j
        let alpha_s = if sparsity == 0 {
            0.0
        } else {
            let half = add_sparse(&low_rank.matrix, &sparse);
            let gradient = op.adjoint(&residual(op, &half, b)?)?;
            match normalized_step(
                op,
                &gradient,
                &low_rank.factors.u,
                &omega,
                cfg.oblique_iters,
            )? {
                Step::Length(alpha) => {
                    let mut w = sparse.to_dense();
                    w.axpy(-alpha, &gradient);
                    sparse = ht_sparse(&w, sparsity);
                    alpha
                }
                Step::Stationary => {
                    stationary += 1;
                    0.0
                }
            }
        };

        let active = usize::from(rank > 0) + usize::from(sparsity > 0);
        if stationary == active {
            break Termination::Stationary;
        }
        low_rank_steps.push(alpha_l);
        sparse_steps.push(alpha_s);
        x = add_sparse(&low_rank.matrix, &sparse);
    };

    diagnostics.mu_hat = low_rank.mu_hat;
    diagnostics.gamma = budgets.gamma(diagnostics.mu_hat, m, n);
    diagnostics.gamma2 = budgets.gamma2(diagnostics.mu_hat, m, n);
    Ok(SolverReport {
        estimate: add_sparse(&low_rank.matrix, &sparse),
        low_rank: low_rank.matrix,
        sparse,
        iterations: residual_trace.len() - 1,
        residual_trace,
        step_sizes: StepTrace::Alternating {
            low_rank: low_rank_steps,
            sparse: sparse_steps,
        },
        wall_time: clock.elapsed(),
        termination,
        diagnostics,
    })
}
