//! Recovery of a matrix read from disk.

use std::fs;
use std::path::{Path, PathBuf};

use lsrecovery::io::{decode_triples, read_matrix, write_matrix, write_triples};
use lsrecovery::{DenseMatrix, OperatorSpec};
use serde::{Deserialize, Serialize};

use crate::config::RecoverConfig;
use crate::error::{CliError, CliResult};
use crate::trial::{recover, relative_error, SolverSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverReport {
    pub input: PathBuf,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub solver: String,
    pub residual: f64,
    pub relative_residual: f64,
    /// Error of the recovered sum against the input matrix.
    pub rel_err_x: f64,
    pub rel_err_l: Option<f64>,
    pub rel_err_s: Option<f64>,
    pub iterations: usize,
    pub termination: String,
    pub outputs: Vec<PathBuf>,
    pub solver_report: serde_json::Value,
}

fn read(path: &Path) -> CliResult<(DenseMatrix, lsrecovery::io::MatrixFormat)> {
    read_matrix(path).map_err(|source| match source {
        lsrecovery::LsError::Io(e) => CliError::io(path, e),
        source => CliError::Matrix {
            path: path.to_path_buf(),
            source,
        },
    })
}

/// Measures the input with the configured operator, recovers it, and writes
/// `low_rank`, `sparse` and `estimate` in the input's format plus
/// `sparse_triples.csv` and `report.json`.
pub fn recover_file(cfg: &RecoverConfig, out_dir: &Path) -> CliResult<RecoverReport> {
    let (x, format) = read(&cfg.input)?;
    let (m, n) = x.shape();
    let op = OperatorSpec {
        kind: cfg.operator.kind,
        m,
        n,
        p: cfg.operator.p,
        seed: cfg.operator.seed,
    }
    .build()?;
    let b = op.apply(&x)?;
    let settings = SolverSettings {
        kind: cfg.solver,
        rank: cfg.rank,
        sparsity: cfg.sparsity,
        mu: cfg.mu.unwrap_or(f64::INFINITY),
        solver: &cfg.solver_config,
        convex: &cfg.convex_config,
    };
    let rec = recover(&b, &op, &settings)?;

    let rel_err_l = match &cfg.truth_low_rank {
        Some(path) => Some(relative_error(&rec.low_rank, &read(path)?.0)?),
        None => None,
    };
    let rel_err_s = match &cfg.truth_sparse {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let truth = decode_triples(&text, m, n).map_err(|source| CliError::Matrix {
                path: path.clone(),
                source,
            })?;
            Some(relative_error(&rec.sparse.to_dense(), &truth.to_dense())?)
        }
        None => None,
    };

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let ext = format.extension();
    let mut outputs = Vec::new();
    for (name, matrix) in [
        ("low_rank", &rec.low_rank),
        ("sparse", &rec.sparse.to_dense()),
        ("estimate", &rec.estimate),
    ] {
        let path = out_dir.join(format!("{name}.{ext}"));
        write_matrix(&path, matrix, format).map_err(|e| wrap_io(&path, e))?;
        outputs.push(path);
    }
    let triples = out_dir.join("sparse_triples.csv");
    write_triples(&triples, &rec.sparse).map_err(|e| wrap_io(&triples, e))?;
    outputs.push(triples);

    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let report = RecoverReport {
        input: cfg.input.clone(),
        m,
        n,
        p: cfg.operator.p,
        solver: cfg.solver.name().to_string(),
        residual: rec.final_residual,
        relative_residual: if b_norm == 0.0 {
            rec.final_residual
        } else {
            rec.final_residual / b_norm
        },
        rel_err_x: relative_error(&rec.estimate, &x)?,
        rel_err_l,
        rel_err_s,
        iterations: rec.iterations,
        termination: rec.termination,
        outputs,
        solver_report: rec.report,
    };
    let path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

fn wrap_io(path: &Path, e: lsrecovery::LsError) -> CliError {
    match e {
        lsrecovery::LsError::Io(source) => CliError::io(path, source),
        other => other.into(),
    }
}
