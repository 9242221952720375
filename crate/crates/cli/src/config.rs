//! JSON experiment configurations.

use std::fs;
use std::path::Path;

use lsrecovery::{ConvexConfig, OperatorKind, SolverConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Niht,
    Naht,
    Convex,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Niht => "niht",
            SolverKind::Naht => "naht",
            SolverKind::Convex => "convex",
        }
    }
}

/// `lo, lo + step, …` up to `hi` inclusive, rounded to 12 decimals so grid
/// values print cleanly.
pub fn grid_steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

/// Phase-transition grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub m: usize,
    pub n: usize,
    pub delta_list: Vec<f64>,
    pub rho_r_list: Vec<f64>,
    pub rho_s_list: Vec<f64>,
    /// Defaults to 20, or 10 for the convex solver.
    pub trials_per_cell: Option<usize>,
    pub operator: OperatorKind,
    pub solver: SolverKind,
    pub success_tol: f64,
    pub base_seed: u64,
    /// Incoherence cap handed to the solvers; absent means uncapped.
    pub mu: Option<f64>,
    pub solver_config: SolverConfig,
    pub convex_config: ConvexConfig,
}

impl Default for GridConfig {
    /// Desk-scale grid: m = n = 64 with 0.1 steps.
    fn default() -> Self {
        GridConfig {
            m: 64,
            n: 64,
            delta_list: grid_steps(0.1, 1.0, 0.1),
            rho_r_list: grid_steps(0.1, 0.5, 0.1),
            rho_s_list: grid_steps(0.1, 0.5, 0.1),
            trials_per_cell: None,
            operator: OperatorKind::Gaussian,
            solver: SolverKind::Niht,
            success_tol: 1e-2,
            base_seed: 0,
            mu: None,
            solver_config: SolverConfig::default(),
            convex_config: ConvexConfig::default(),
        }
    }
}

impl GridConfig {
    /// Full-resolution grid: m = n = 100, δ and ρ in steps of 0.02.
    pub fn full_scale() -> Self {
        GridConfig {
            m: 100,
            n: 100,
            delta_list: grid_steps(0.02, 1.0, 0.02),
            rho_r_list: grid_steps(0.0, 1.0, 0.02),
            rho_s_list: grid_steps(0.0, 1.0, 0.02),
            ..GridConfig::default()
        }
    }

    pub fn trials(&self) -> usize {
        self.trials_per_cell.unwrap_or(match self.solver {
            SolverKind::Convex => 10,
            _ => 20,
        })
    }

    pub fn mu_cap(&self) -> f64 {
        self.mu.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.m == 0 || self.n == 0 {
            return Err(CliError::Config(format!(
                "dimensions must be positive, got {}x{}",
                self.m, self.n
            )));
        }
        if self.delta_list.is_empty() || self.rho_r_list.is_empty() || self.rho_s_list.is_empty() {
            return Err(CliError::Config("grid lists must be non-empty".into()));
        }
        if let Some(d) = self.delta_list.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return Err(CliError::Config(format!(
                "delta values must lie in (0, 1], got {d}"
            )));
        }
        let rhos = self.rho_r_list.iter().chain(&self.rho_s_list);
        if let Some(r) = rhos.clone().find(|r| !(**r >= 0.0 && **r <= 1.0)) {
            return Err(CliError::Config(format!(
                "rho values must lie in [0, 1], got {r}"
            )));
        }
        if self.trials() == 0 {
            return Err(CliError::Config("trials_per_cell must be positive".into()));
        }
        if !(self.success_tol > 0.0) {
            return Err(CliError::Config("success_tol must be positive".into()));
        }
        if let Some(mu) = self.mu {
            if !(mu >= 1.0) {
                return Err(CliError::Config(format!("mu must be >= 1, got {mu}")));
            }
        }
        self.solver_config
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.convex_config
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Single synthetic instance described by sampling ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    pub rho_r: f64,
    pub rho_s: f64,
    pub operator: OperatorKind,
    pub seed: u64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            m: 100,
            n: 100,
            delta: 0.5,
            rho_r: 0.05,
            rho_s: 0.05,
            operator: OperatorKind::Gaussian,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub problem: ProblemConfig,
    pub solvers: Vec<SolverKind>,
    pub mu: Option<f64>,
    pub solver_config: SolverConfig,
    pub convex_config: ConvexConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            problem: ProblemConfig::default(),
            solvers: vec![SolverKind::Niht, SolverKind::Naht],
            mu: None,
            solver_config: SolverConfig::default(),
            convex_config: ConvexConfig::default(),
        }
    }
}

/// Writes `x0`, `l0` (dense) and `s0` (triples) for one synthetic instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub problem: ProblemConfig,
    pub format: lsrecovery::io::MatrixFormat,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            problem: ProblemConfig::default(),
            format: lsrecovery::io::MatrixFormat::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    pub p: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverConfig {
    /// Matrix to be measured and recovered (CSV or LSMX).
    pub input: std::path::PathBuf,
    pub operator: OperatorConfig,
    pub rank: usize,
    pub sparsity: usize,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    /// Optional ground-truth low-rank component (dense, same format rules).
    #[serde(default)]
    pub truth_low_rank: Option<std::path::PathBuf>,
    /// Optional ground-truth sparse component as `i,j,value` triples.
    #[serde(default)]
    pub truth_sparse: Option<std::path::PathBuf>,
    #[serde(default)]
    pub solver_config: SolverConfig,
    #[serde(default)]
    pub convex_config: ConvexConfig,
}

fn default_solver() -> SolverKind {
    SolverKind::Niht
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RicProbeConfig {
    pub m: usize,
    pub n: usize,
    pub operator: OperatorKind,
    /// Sampling ratios `p/mn` to probe.
    pub delta_list: Vec<f64>,
    pub r: usize,
    pub s: usize,
    pub mu: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RicProbeConfig {
    fn default() -> Self {
        RicProbeConfig {
            m: 16,
            n: 16,
            operator: OperatorKind::Gaussian,
            delta_list: vec![0.2, 0.4, 0.6, 0.8],
            r: 1,
            s: 5,
            mu: None,
            trials: 500,
            seed: 0,
        }
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
