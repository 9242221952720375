//! Synthetic instance files.

use std::fs;
use std::path::{Path, PathBuf};

use lsrecovery::io::{write_matrix, write_triples};
use lsrecovery::{generate_problem, params_from_ratios};
use serde::{Deserialize, Serialize};

use crate::config::GenerateConfig;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedFiles {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub seed: u64,
    pub amplitude: f64,
    pub x0: PathBuf,
    pub l0: PathBuf,
    pub s0: PathBuf,
}

/// Writes `x0.<ext>`, `l0.<ext>`, `s0_triples.csv` and `instance.json`.
pub fn generate_files(cfg: &GenerateConfig, out_dir: &Path) -> CliResult<GeneratedFiles> {
    let pc = &cfg.problem;
    let params = params_from_ratios(pc.m, pc.n, pc.delta, pc.rho_r, pc.rho_s)?;
    let problem = generate_problem(&params, pc.seed)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let ext = cfg.format.extension();
    let x0 = out_dir.join(format!("x0.{ext}"));
    let l0 = out_dir.join(format!("l0.{ext}"));
    let s0 = out_dir.join("s0_triples.csv");
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: lsrecovery::LsError| match e {
            lsrecovery::LsError::Io(source) => CliError::io(path, source),
            other => other.into(),
        }
    };
    write_matrix(&x0, &problem.sum, cfg.format).map_err(io(&x0))?;
    write_matrix(&l0, &problem.low_rank, cfg.format).map_err(io(&l0))?;
    write_triples(&s0, &problem.sparse).map_err(io(&s0))?;
    let files = GeneratedFiles {
        m: params.m,
        n: params.n,
        p: params.p,
        r: params.r,
        s: params.s,
        seed: pc.seed,
        amplitude: problem.amplitude,
        x0,
        l0,
        s0,
    };
    let meta = out_dir.join("instance.json");
    let json = serde_json::to_string_pretty(&files).expect("instance metadata serializes");
    fs::write(&meta, json).map_err(|e| CliError::io(&meta, e))?;
    Ok(files)
}
