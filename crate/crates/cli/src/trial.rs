//! One synthetic recovery trial.

use lsrecovery::{
    convex_relax, naht, niht, Budgets, ConvexConfig, DenseMatrix, LsError, MeasurementOp,
    SolverConfig, SparseMatrix,
};

use crate::config::SolverKind;
use crate::error::{CliError, CliResult};

/// `‖X − X0‖_F ≤ tol·‖X0‖_F`, or `‖X‖_F ≤ tol` when `X0 = 0`.
pub fn success(x: &DenseMatrix, x0: &DenseMatrix, tol: f64) -> CliResult<bool> {
    Ok(relative_error(x, x0)? <= tol)
}

/// `‖X − X0‖_F / ‖X0‖_F`, falling back to the absolute error when `X0 = 0`.
pub fn relative_error(x: &DenseMatrix, x0: &DenseMatrix) -> CliResult<f64> {
    if x.shape() != x0.shape() {
        return Err(CliError::Config(format!(
            "shape mismatch: {}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            x0.rows(),
            x0.cols()
        )));
    }
    let diff = x.sub(x0).frobenius_norm();
    let norm = x0.frobenius_norm();
    Ok(if norm == 0.0 { diff } else { diff / norm })
}

/// Recovered components plus the run statistics the harness records.
pub struct Recovery {
    pub low_rank: DenseMatrix,
    pub sparse: SparseMatrix,
    pub estimate: DenseMatrix,
    pub iterations: usize,
    pub termination: String,
    pub final_residual: f64,
    pub wall_time: f64,
    pub report: serde_json::Value,
}

pub struct SolverSettings<'a> {
    pub kind: SolverKind,
    pub rank: usize,
    pub sparsity: usize,
    pub mu: f64,
    pub solver: &'a SolverConfig,
    pub convex: &'a ConvexConfig,
}

pub fn recover(
    b: &[f64],
    op: &MeasurementOp,
    settings: &SolverSettings<'_>,
) -> Result<Recovery, LsError> {
    let budgets = Budgets::new(settings.rank, settings.sparsity, settings.mu);
    match settings.kind {
        SolverKind::Niht | SolverKind::Naht => {
            let report = if settings.kind == SolverKind::Niht {
                niht(b, op, budgets, settings.solver)?
            } else {
                naht(b, op, budgets, settings.solver)?
            };
            let summary = report.summary();
            Ok(Recovery {
                iterations: report.iterations,
                termination: report.termination.to_string(),
                final_residual: summary.final_residual,
                wall_time: report.wall_time,
                report: serde_json::to_value(&summary).expect("report summary serializes"),
                low_rank: report.low_rank,
                sparse: report.sparse,
                estimate: report.estimate,
            })
        }
        SolverKind::Convex => {
            let report = convex_relax(
                b,
                op,
                settings.rank,
                settings.sparsity,
                0.0,
                settings.convex,
            )?;
            let summary = report.summary();
            Ok(Recovery {
                iterations: report.iterations,
                termination: report.termination.to_string(),
                final_residual: report.residual_trace.last().copied().unwrap_or(0.0),
                wall_time: report.wall_time,
                report: serde_json::to_value(&summary).expect("report summary serializes"),
                low_rank: report.low_rank,
                sparse: report.sparse,
                estimate: report.estimate,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_examples() {
        let x0 = DenseMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert!(success(&x0, &x0, 1e-2).unwrap());
        // perturbation of relative norm 0.02
        let x = DenseMatrix::from_rows(&[vec![3.0, 4.1]]).unwrap();
        assert!(!success(&x, &x0, 1e-2).unwrap());
        let zero = DenseMatrix::zeros(1, 2);
        assert!(success(&zero, &zero, 1e-2).unwrap());
        assert!(!success(&x0, &zero, 1e-2).unwrap());
        assert!(success(&zero, &DenseMatrix::zeros(2, 1), 1e-2).is_err());
    }
}
