//! Error-versus-time traces for one synthetic instance.

use std::fs;
use std::path::Path;
use std::time::Instant;

use lsrecovery::solvers::{convex_relax_observed, naht_observed, niht_observed, IterateView};
use lsrecovery::{
    generate_problem, params_from_ratios, Budgets, DenseMatrix, OperatorSpec, Problem,
};
use serde::{Deserialize, Serialize};

use crate::config::{ConvergenceConfig, SolverKind};
use crate::error::{CliError, CliResult};
use crate::trial::relative_error;

pub const CONVERGENCE_CSV: &str = "convergence.csv";

/// Plot-ready row: one per solver iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub solver: String,
    pub iteration: usize,
    /// Seconds since the solver was called.
    pub wall_clock: f64,
    pub rel_err_x: f64,
    pub rel_err_l: f64,
    pub rel_err_s: f64,
}

pub const TRACE_CSV_HEADER: &str = "solver,iteration,wall_clock,rel_err_x,rel_err_l,rel_err_s";

fn row(
    solver: SolverKind,
    view: &IterateView<'_>,
    problem: &Problem,
    s0: &DenseMatrix,
) -> CliResult<TraceRow> {
    let x = view.low_rank.add(view.sparse);
    Ok(TraceRow {
        solver: solver.name().to_string(),
        iteration: view.iteration,
        wall_clock: view.elapsed,
        rel_err_x: relative_error(&x, &problem.sum)?,
        rel_err_l: relative_error(view.low_rank, &problem.low_rank)?,
        rel_err_s: relative_error(view.sparse, s0)?,
    })
}

/// Runs each configured solver on the same instance and records component
/// errors at every iterate.
pub fn trace_convergence(cfg: &ConvergenceConfig) -> CliResult<Vec<TraceRow>> {
    let pc = &cfg.problem;
    let mut params = params_from_ratios(pc.m, pc.n, pc.delta, pc.rho_r, pc.rho_s)?;
    params.mu = cfg.mu.unwrap_or(f64::INFINITY);
    let problem = generate_problem(&params, pc.seed)?;
    let s0 = problem.sparse.to_dense();
    let op = OperatorSpec {
        kind: pc.operator,
        m: pc.m,
        n: pc.n,
        p: params.p,
        seed: pc.seed.wrapping_add(1),
    }
    .build()?;
    let b = op.apply(&problem.sum)?;
    let budgets = Budgets::new(params.r, params.s, params.mu);

    let mut rows = Vec::new();
    for &solver in &cfg.solvers {
        let mut local: Vec<CliResult<TraceRow>> = Vec::new();
        let mut observe = |view: &IterateView<'_>| local.push(row(solver, view, &problem, &s0));
        match solver {
            SolverKind::Niht => {
                niht_observed(&b, &op, budgets, &cfg.solver_config, &mut observe)?;
            }
            SolverKind::Naht => {
                naht_observed(&b, &op, budgets, &cfg.solver_config, &mut observe)?;
            }
            SolverKind::Convex => {
                let zero = DenseMatrix::zeros(pc.m, pc.n);
                let start = Instant::now();
                observe(&IterateView {
                    iteration: 0,
                    elapsed: start.elapsed().as_secs_f64(),
                    low_rank: &zero,
                    sparse: &zero,
                    residual: b.iter().map(|v| v * v).sum::<f64>().sqrt(),
                });
                convex_relax_observed(
                    &b,
                    &op,
                    params.r,
                    params.s,
                    0.0,
                    &cfg.convex_config,
                    &mut observe,
                )?;
            }
        }
        for r in local {
            rows.push(r?);
        }
    }
    Ok(rows)
}

pub fn run_convergence(cfg: &ConvergenceConfig, out_dir: &Path) -> CliResult<Vec<TraceRow>> {
    if cfg.solvers.is_empty() {
        return Err(CliError::Config("no solvers listed".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let rows = trace_convergence(cfg)?;
    let path = out_dir.join(CONVERGENCE_CSV);
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for r in &rows {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}
