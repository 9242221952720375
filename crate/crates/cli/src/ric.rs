//! Monte-Carlo isometry probes over a range of sampling ratios.

use std::fs;
use std::path::Path;

use lsrecovery::measurement::ls_sampler;
use lsrecovery::{near_isometry_stats, IsometryStats, OperatorSpec};
use serde::{Deserialize, Serialize};

use crate::config::RicProbeConfig;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicLevel {
    pub delta: f64,
    pub p: usize,
    pub stats: IsometryStats,
}

/// Estimates `delta_hat` at each sampling ratio. Every level uses the same
/// operator seed and the same stream of sampled matrices.
pub fn probe_ric(cfg: &RicProbeConfig) -> CliResult<Vec<RicLevel>> {
    if cfg.trials == 0 || cfg.delta_list.is_empty() {
        return Err(CliError::Config(
            "ric-probe needs trials > 0 and a non-empty delta_list".into(),
        ));
    }
    let mn = cfg.m * cfg.n;
    cfg.delta_list
        .iter()
        .map(|&delta| {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(CliError::Config(format!(
                    "delta must lie in (0, 1], got {delta}"
                )));
            }
            let p = ((delta * mn as f64).round() as usize).max(1);
            let op = OperatorSpec {
                kind: cfg.operator,
                m: cfg.m,
                n: cfg.n,
                p,
                seed: cfg.seed,
            }
            .build()?;
            let mu = cfg.mu.unwrap_or(f64::INFINITY);
            let sampler = ls_sampler(cfg.m, cfg.n, cfg.r, cfg.s, mu, cfg.seed.wrapping_add(1));
            let stats = near_isometry_stats(&op, cfg.trials, sampler)?;
            Ok(RicLevel { delta, p, stats })
        })
        .collect()
}

pub fn run_ric_probe(cfg: &RicProbeConfig, out_dir: &Path) -> CliResult<Vec<RicLevel>> {
    let levels = probe_ric(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let path = out_dir.join("ric_probe.json");
    let json = serde_json::to_string_pretty(&levels).expect("ric levels serialize");
    fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    Ok(levels)
}
