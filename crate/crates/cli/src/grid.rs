//! Phase-transition grids.
//!
//! Cells are enumerated with `rho_r` outermost, then `rho_s`, then `delta`,
//! skipping cells with `rho_r + rho_s > 1`. Trial `t` of cell `c` uses the
//! seed `derive_seed(base_seed, [c, t])`; the problem is drawn from
//! `derive_seed(trial_seed, [0])` and the operator from
//! `derive_seed(trial_seed, [1])`, so any cell can be replayed on its own.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use lsrecovery::rng::derive_seed;
use lsrecovery::{generate_problem, params_from_ratios, LsError, ModelParams, OperatorSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GridConfig, SolverKind};
use crate::error::{CliError, CliResult};
use crate::trial::{recover, relative_error, SolverSettings};

pub const GRID_CSV: &str = "phase_grid.csv";
pub const GRID_SUMMARY: &str = "phase_grid_summary.json";

/// Slack when testing `rho_r + rho_s <= 1` on decimal grid values.
const RHO_SUM_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub delta: f64,
    pub rho_r: f64,
    pub rho_s: f64,
    pub params: ModelParams,
}

pub fn enumerate_cells(cfg: &GridConfig) -> CliResult<Vec<Cell>> {
    let mut cells = Vec::new();
    for &rho_r in &cfg.rho_r_list {
        for &rho_s in &cfg.rho_s_list {
            if rho_r + rho_s > 1.0 + RHO_SUM_SLACK {
                continue;
            }
            for &delta in &cfg.delta_list {
                let mut params = params_from_ratios(cfg.m, cfg.n, delta, rho_r, rho_s)?;
                params.mu = cfg.mu_cap();
                cells.push(Cell {
                    index: cells.len(),
                    delta,
                    rho_r,
                    rho_s,
                    params,
                });
            }
        }
    }
    if cells.is_empty() {
        return Err(CliError::Config(
            "grid has no cell with rho_r + rho_s <= 1".into(),
        ));
    }
    Ok(cells)
}

pub fn trial_seed(base_seed: u64, cell: usize, trial: usize) -> u64 {
    derive_seed(base_seed, &[cell as u64, trial as u64])
}

/// One CSV row per (cell, trial). Wall time is left out so that reruns are
/// byte-identical; it is reported in the JSON summary instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub delta: f64,
    pub rho_r: f64,
    pub rho_s: f64,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub seed: u64,
    pub success: bool,
    pub rel_error: f64,
    pub iterations: usize,
    pub termination: String,
    pub final_residual: f64,
}

/// Column order of the per-trial CSV.
pub const TRIAL_CSV_HEADER: &str =
    "cell,trial,delta,rho_r,rho_s,m,n,p,r,s,seed,success,rel_error,iterations,termination,final_residual";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCellResult {
    pub cell: usize,
    pub delta: f64,
    pub rho_r: f64,
    pub rho_s: f64,
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub successes: usize,
    pub trials: usize,
    pub mean_iterations: f64,
    pub mean_wall_time: f64,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRatio {
    pub rho_r: f64,
    pub rho_s: f64,
    /// Smallest δ on the grid with successes/trials > 1/2, if any.
    pub delta_star: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub config: GridConfig,
    pub cells: Vec<PhaseCellResult>,
    pub delta_star: Vec<CriticalRatio>,
    pub csv: PathBuf,
}

struct TrialRun {
    record: TrialRecord,
    wall_time: f64,
}

fn run_trial(cfg: &GridConfig, cell: &Cell, trial: usize) -> CliResult<TrialRun> {
    let seed = trial_seed(cfg.base_seed, cell.index, trial);
    let params = cell.params;
    let problem = generate_problem(&params, derive_seed(seed, &[0]))?;
    let op = OperatorSpec {
        kind: cfg.operator,
        m: params.m,
        n: params.n,
        p: params.p,
        seed: derive_seed(seed, &[1]),
    }
    .build()?;
    let b = op.apply(&problem.sum)?;
    let settings = SolverSettings {
        kind: cfg.solver,
        rank: params.r,
        sparsity: params.s,
        mu: cfg.mu_cap(),
        solver: &cfg.solver_config,
        convex: &cfg.convex_config,
    };
    let (rel_error, iterations, termination, final_residual, wall_time) =
        match recover(&b, &op, &settings) {
            Ok(rec) => (
                relative_error(&rec.estimate, &problem.sum)?,
                rec.iterations,
                rec.termination,
                rec.final_residual,
                rec.wall_time,
            ),
            Err(e @ LsError::DegenerateStep { .. }) => {
                warn!("cell {} trial {trial}: {e}", cell.index);
                (
                    f64::INFINITY,
                    0,
                    "degenerate_step".to_string(),
                    f64::NAN,
                    0.0,
                )
            }
            Err(e) => return Err(e.into()),
        };
    Ok(TrialRun {
        record: TrialRecord {
            cell: cell.index,
            trial,
            delta: cell.delta,
            rho_r: cell.rho_r,
            rho_s: cell.rho_s,
            m: params.m,
            n: params.n,
            p: params.p,
            r: params.r,
            s: params.s,
            seed,
            success: rel_error <= cfg.success_tol,
            rel_error,
            iterations,
            termination,
            final_residual,
        },
        wall_time,
    })
}

fn summarize(cells: &[Cell], runs: &[TrialRun], trials: usize) -> Vec<PhaseCellResult> {
    cells
        .iter()
        .zip(runs.chunks(trials))
        .map(|(cell, chunk)| PhaseCellResult {
            cell: cell.index,
            delta: cell.delta,
            rho_r: cell.rho_r,
            rho_s: cell.rho_s,
            p: cell.params.p,
            r: cell.params.r,
            s: cell.params.s,
            successes: chunk.iter().filter(|t| t.record.success).count(),
            trials: chunk.len(),
            mean_iterations: chunk
                .iter()
                .map(|t| t.record.iterations as f64)
                .sum::<f64>()
                / chunk.len() as f64,
            mean_wall_time: chunk.iter().map(|t| t.wall_time).sum::<f64>() / chunk.len() as f64,
            seeds: chunk.iter().map(|t| t.record.seed).collect(),
        })
        .collect()
}

/// δ* for every (ρ_r, ρ_s) pair, in first-appearance order.
pub fn critical_ratios(cells: &[PhaseCellResult]) -> Vec<CriticalRatio> {
    let mut out: Vec<CriticalRatio> = Vec::new();
    for c in cells {
        let pos = match out
            .iter()
            .position(|x| x.rho_r == c.rho_r && x.rho_s == c.rho_s)
        {
            Some(pos) => pos,
            None => {
                out.push(CriticalRatio {
                    rho_r: c.rho_r,
                    rho_s: c.rho_s,
                    delta_star: None,
                });
                out.len() - 1
            }
        };
        if 2 * c.successes > c.trials {
            let slot = &mut out[pos].delta_star;
            *slot = Some(slot.map_or(c.delta, |d: f64| d.min(c.delta)));
        }
    }
    out
}

pub fn write_trial_csv(
    path: &Path,
    records: impl IntoIterator<Item = TrialRecord>,
) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Runs every (cell, trial) on a pool of `workers` threads and writes
/// `phase_grid.csv` and `phase_grid_summary.json` into `out_dir`. Output order
/// is (cell, trial) regardless of completion order.
pub fn run_phase_grid(
    cfg: &GridConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> CliResult<GridSummary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let cells = enumerate_cells(cfg)?;
    let trials = cfg.trials();
    info!(
        "phase grid: {} cells x {trials} trials, solver {}, operator {}",
        cells.len(),
        cfg.solver.name(),
        cfg.operator
    );
    if cfg.solver == SolverKind::Convex && cfg.trials_per_cell.is_none() {
        info!("convex solver: defaulting to {trials} trials per cell");
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let runs: Vec<TrialRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(cfg, &cells[c], t))
            .collect::<CliResult<Vec<_>>>()
    })?;

    let csv_path = out_dir.join(GRID_CSV);
    let cell_results = summarize(&cells, &runs, trials);
    write_trial_csv(&csv_path, runs.into_iter().map(|r| r.record))?;
    let summary = GridSummary {
        config: cfg.clone(),
        delta_star: critical_ratios(&cell_results),
        cells: cell_results,
        csv: csv_path,
    };
    let summary_path = out_dir.join(GRID_SUMMARY);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, json).map_err(|e| CliError::io(&summary_path, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(delta: f64, successes: usize) -> PhaseCellResult {
        PhaseCellResult {
            cell: 0,
            delta,
            rho_r: 0.1,
            rho_s: 0.2,
            p: 1,
            r: 0,
            s: 0,
            successes,
            trials: 10,
            mean_iterations: 0.0,
            mean_wall_time: 0.0,
            seeds: vec![],
        }
    }

    #[test]
    fn delta_star_needs_strict_majority() {
        let cells = vec![cell(0.2, 5), cell(0.4, 6), cell(0.6, 10)];
        let ratios = critical_ratios(&cells);
        assert_eq!(ratios.len(), 1);
        assert_eq!(ratios[0].delta_star, Some(0.4));
        assert_eq!(critical_ratios(&[cell(0.5, 5)])[0].delta_star, None);
    }

    #[test]
    fn cells_skip_infeasible_ratio_pairs() {
        let cfg = GridConfig {
            m: 10,
            n: 10,
            delta_list: vec![0.5, 1.0],
            rho_r_list: vec![0.2, 0.9],
            rho_s_list: vec![0.1, 0.5],
            ..GridConfig::default()
        };
        let cells = enumerate_cells(&cfg).unwrap();
        // (0.9, 0.5) is dropped
        assert_eq!(cells.len(), 6);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
        assert_eq!(
            (cells[0].rho_r, cells[0].rho_s, cells[0].delta),
            (0.2, 0.1, 0.5)
        );
        assert_eq!(
            (cells[1].rho_r, cells[1].rho_s, cells[1].delta),
            (0.2, 0.1, 1.0)
        );
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seeds: Vec<u64> = (0..4)
            .flat_map(|c| (0..5).map(move |t| trial_seed(9, c, t)))
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 20);
    }
}
