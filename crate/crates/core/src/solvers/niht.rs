use crate::error::Result;
use crate::measurement::MeasurementOp;
use crate::projections::{rpca_project, rpca_project_from, RpcaOutcome};

use super::{
    add_sparse, check_inputs, check_termination, normalized_step, residual, vec_norm, Budgets,
    Clock, Diagnostics, IterateView, SolverConfig, SolverReport, Step, StepTrace, Termination,
};

/// Normalized Iterative Hard Thresholding.
///
/// Each iteration takes a gradient step on `‖A(X) − b‖²/2` whose length is
/// normalized on the oblique projection of the gradient onto the current
/// `(U, Ω)`, then projects back onto LS(r, s, μ) with the alternating RPCA
/// projection (warm-started from the current sparse component).
pub fn niht(
    b: &[f64],
    op: &MeasurementOp,
    budgets: Budgets,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    niht_observed(b, op, budgets, cfg, &mut |_| {})
}

/// [`niht`] with a callback invoked on every iterate, including the initial one.
pub fn niht_observed(
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

    let mut current = rpca_project(&op.adjoint(b)?, rank, sparsity, mu, cfg.rpca_eps)?;
    record(&current, &mut diagnostics);
    let mut x = current.sum();

    let mut residual_trace = Vec::new();
    let mut steps = Vec::new();
    let termination = loop {
        let res = residual(op, &x, b)?;
        let res_norm = vec_norm(&res);
        residual_trace.push(res_norm);
        observer(&IterateView {
            iteration: residual_trace.len() - 1,
            elapsed: clock.elapsed(),
            low_rank: &current.low_rank.matrix,
            sparse: &current.sparse.to_dense(),
            residual: res_norm,
        });
        if let Some(t) = check_termination(&residual_trace, b_norm, cfg) {
            break t;
        }

        let gradient = op.adjoint(&res)?;
        let omega = current.sparse.support();
        let alpha = match normalized_step(
            op,
            &gradient,
            &current.low_rank.factors.u,
            &omega,
            cfg.oblique_iters,
        )? {
            Step::Length(alpha) => alpha,
            Step::Stationary => break Termination::Stationary,
        };
        steps.push(alpha);

        let mut w = x.clone();
        w.axpy(-alpha, &gradient);
        let next = rpca_project_from(&w, rank, sparsity, mu, cfg.rpca_eps, Some(&current.sparse))?;
        record(&next, &mut diagnostics);
        current = next;
        x = current.sum();
    };

    diagnostics.mu_hat = current.low_rank.mu_hat;
    diagnostics.gamma = budgets.gamma(diagnostics.mu_hat, m, n);
    diagnostics.gamma2 = budgets.gamma2(diagnostics.mu_hat, m, n);
    let low_rank = current.low_rank.matrix;
    let estimate = add_sparse(&low_rank, &current.sparse);
    Ok(SolverReport {
        low_rank,
        sparse: current.sparse,
        estimate,
        iterations: residual_trace.len() - 1,
        residual_trace,
        step_sizes: StepTrace::Joint(steps),
        wall_time: clock.elapsed(),
        termination,
        diagnostics,
    })
}

fn record(outcome: &RpcaOutcome, diagnostics: &mut Diagnostics) {
    diagnostics.rpca_alternations += outcome.alternations;
    diagnostics.rpca_unconverged += usize::from(!outcome.converged);
    diagnostics.mu_cap_exceeded += usize::from(outcome.low_rank.exceeds_cap);
}
