//! Linear measurement operators `A: R^{m×n} → R^p` and empirical isometry
//! probes.
//!
//! Two ensembles are provided:
//!
//! * **Gaussian**: `p` sensing matrices with i.i.d. `N(0, 1/p)` entries, stored
//!   densely as a `p × mn` array whose row `ℓ` is `vec(A^(ℓ))`.
//! * **FJLT**: `A(X) = √(mn/p) · R H D vec(X)` with `D` a random ±1 diagonal,
//!   `H` the orthonormal DCT-II on `R^{mn}` and `R` a uniformly random
//!   restriction to `p` distinct rows (kept sorted). The `√(mn/p)` factor makes
//!   `E‖A(X)‖² = ‖X‖²_F`.
//!
//! `vec(X)` is the row-major flattening throughout. Operators are immutable
//! after construction and may be shared between threads.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use crate::error::{LsError, Result};
use crate::ls_model::{generate_problem, measured_incoherence, ModelParams};
use crate::matrix::DenseMatrix;
use crate::projections::truncated_svd;
use crate::rng::{derive_seed, seeded_rng, standard_normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Gaussian,
    Fjlt,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Gaussian => "gaussian",
            OperatorKind::Fjlt => "fjlt",
        })
    }
}

/// Serializable description of an operator; the payload is regenerated from
/// the seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl OperatorSpec {
    pub fn build(&self) -> Result<MeasurementOp> {
        match self.kind {
            OperatorKind::Gaussian => make_gaussian(self.m, self.n, self.p, self.seed),
            OperatorKind::Fjlt => make_fjlt(self.m, self.n, self.p, self.seed),
        }
    }
}

struct Fjlt {
    signs: Vec<f64>,
    selection: Vec<usize>,
    scale: f64,
    dct: Arc<dyn TransformType2And3<f64>>,
}

enum Payload {
    Gaussian(Vec<f64>),
    Fjlt(Fjlt),
}

pub struct MeasurementOp {
    spec: OperatorSpec,
    payload: Payload,
}

impl fmt::Debug for MeasurementOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasurementOp")
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

fn check_dims(m: usize, n: usize, p: usize) -> Result<()> {
    if m == 0 || n == 0 || p == 0 {
        return Err(LsError::invalid(format!(
            "operator dimensions must be positive, got m={m}, n={n}, p={p}"
        )));
    }
    Ok(())
}

/// Dense Gaussian ensemble with `N(0, 1/p)` entries.
///
/// `p > mn` is allowed. Entries are drawn row by row from the seeded stream.
pub fn make_gaussian(m: usize, n: usize, p: usize, seed: u64) -> Result<MeasurementOp> {
    check_dims(m, n, p)?;
    let mut rng = seeded_rng(seed);
    let sd = 1.0 / (p as f64).sqrt();
    let data = (0..p * m * n)
        .map(|_| sd * standard_normal(&mut rng))
        .collect();
    Ok(MeasurementOp {
        spec: OperatorSpec {
            kind: OperatorKind::Gaussian,
            m,
            n,
            p,
            seed,
        },
        payload: Payload::Gaussian(data),
    })
}

/// Subsampled randomized DCT. Signs are drawn first, then the row selection.
pub fn make_fjlt(m: usize, n: usize, p: usize, seed: u64) -> Result<MeasurementOp> {
    check_dims(m, n, p)?;
    let mn = m * n;
    if p > mn {
        return Err(LsError::invalid(format!(
            "FJLT needs p <= mn for distinct rows, got p={p} > {mn}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let signs = (0..mn)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut rows: Vec<usize> = (0..mn).collect();
    let (chosen, _) = rows.partial_shuffle(&mut rng, p);
    let mut selection = chosen.to_vec();
    selection.sort_unstable();
    let dct = DctPlanner::new().plan_dct2(mn);
    Ok(MeasurementOp {
        spec: OperatorSpec {
            kind: OperatorKind::Fjlt,
            m,
            n,
            p,
            seed,
        },
        payload: Payload::Fjlt(Fjlt {
            signs,
            selection,
            scale: (mn as f64 / p as f64).sqrt(),
            dct,
        }),
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Rescales an unnormalized DCT-II output into the orthonormal DCT-II.
fn normalize_dct2(buf: &mut [f64]) {
    let len = buf.len() as f64;
    buf[0] *= (1.0 / len).sqrt();
    let other = (2.0 / len).sqrt();
    for v in &mut buf[1..] {
        *v *= other;
    }
}

/// Prepares coefficients so that the unnormalized DCT-III computes the
/// inverse orthonormal DCT-II.
fn prescale_dct3(buf: &mut [f64]) {
    let len = buf.len() as f64;
    buf[0] *= 2.0 * (1.0 / len).sqrt();
    let other = (2.0 / len).sqrt();
    for v in &mut buf[1..] {
        *v *= other;
    }
}

impl MeasurementOp {
    pub fn spec(&self) -> OperatorSpec {
        self.spec
    }

    pub fn kind(&self) -> OperatorKind {
        self.spec.kind
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.spec.m, self.spec.n)
    }

    /// Number of measurements `p`.
    pub fn output_len(&self) -> usize {
        self.spec.p
    }

    /// Row `ℓ` of the Gaussian sensing array, i.e. `vec(A^(ℓ))`.
    pub fn gaussian_row(&self, row: usize) -> Option<&[f64]> {
        match &self.payload {
            Payload::Gaussian(data) => {
                let mn = self.spec.m * self.spec.n;
                data.get(row * mn..(row + 1) * mn)
            }
            Payload::Fjlt(_) => None,
        }
    }

    /// Sign diagonal of an FJLT operator.
    pub fn fjlt_signs(&self) -> Option<&[f64]> {
        match &self.payload {
            Payload::Fjlt(f) => Some(&f.signs),
            Payload::Gaussian(_) => None,
        }
    }

    /// Sorted selected DCT rows of an FJLT operator.
    pub fn fjlt_selection(&self) -> Option<&[usize]> {
        match &self.payload {
            Payload::Fjlt(f) => Some(&f.selection),
            Payload::Gaussian(_) => None,
        }
    }

    /// Overall scale of an FJLT operator (`√(mn/p)`).
    pub fn fjlt_scale(&self) -> Option<f64> {
        match &self.payload {
            Payload::Fjlt(f) => Some(f.scale),
            Payload::Gaussian(_) => None,
        }
    }

    /// `b = A(X)`.
    pub fn apply(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        x.ensure_shape(self.spec.m, self.spec.n)?;
        let v = x.as_slice();
        Ok(match &self.payload {
            Payload::Gaussian(data) => data.chunks_exact(v.len()).map(|row| dot(row, v)).collect(),
            Payload::Fjlt(f) => {
                let mut buf: Vec<f64> = v.iter().zip(&f.signs).map(|(a, d)| a * d).collect();
                f.dct.process_dct2(&mut buf);
                normalize_dct2(&mut buf);
                f.selection.iter().map(|&k| f.scale * buf[k]).collect()
            }
        })
    }

    /// `A*(y)`, the adjoint applied to a measurement vector.
    pub fn adjoint(&self, y: &[f64]) -> Result<DenseMatrix> {
        if y.len() != self.spec.p {
            return Err(LsError::shape(
                format!("vector of length {}", self.spec.p),
                y.len(),
            ));
        }
        let (m, n) = (self.spec.m, self.spec.n);
        let mut out = vec![0.0; m * n];
        match &self.payload {
            Payload::Gaussian(data) => {
                for (row, &yl) in data.chunks_exact(m * n).zip(y) {
                    if yl == 0.0 {
                        continue;
                    }
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += yl * a;
                    }
                }
            }
            Payload::Fjlt(f) => {
                for (&k, &yl) in f.selection.iter().zip(y) {
                    out[k] = f.scale * yl;
                }
                prescale_dct3(&mut out);
                f.dct.process_dct3(&mut out);
                for (o, d) in out.iter_mut().zip(&f.signs) {
                    *o *= d;
                }
            }
        }
        DenseMatrix::from_vec(m, n, out)
    }

    /// Power-iteration estimate of the spectral norm `σ_max(A)`.
    pub fn norm_estimate(&self, iterations: usize, seed: u64) -> Result<f64> {
        let (m, n) = self.input_shape();
        let mut rng = seeded_rng(seed);
        let mut x = DenseMatrix::from_fn(m, n, |_, _| standard_normal(&mut rng));
        let mut sigma = 0.0;
        for _ in 0..iterations.max(1) {
            let nx = x.frobenius_norm();
            if nx == 0.0 {
                return Ok(0.0);
            }
            x = x.scale(1.0 / nx);
            let ax = self.apply(&x)?;
            sigma = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = self.adjoint(&ax)?;
        }
        Ok(sigma)
    }
}

/// Empirical distortion of `‖A(X)‖²/‖X‖²_F` over sampled matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryStats {
    pub trials: usize,
    pub worst_lower: f64,
    pub worst_upper: f64,
    pub mean_ratio: f64,
    /// `max(1 − worst_lower, worst_upper − 1)`
    pub delta_hat: f64,
}

impl IsometryStats {
    fn from_ratios(ratios: &[f64]) -> Self {
        if ratios.is_empty() {
            return IsometryStats {
                trials: 0,
                worst_lower: 1.0,
                worst_upper: 1.0,
                mean_ratio: 1.0,
                delta_hat: 0.0,
            };
        }
        let worst_lower = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let worst_upper = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_ratio =
            (ratios.iter().sum::<f64>() / ratios.len() as f64).clamp(worst_lower, worst_upper);
        IsometryStats {
            trials: ratios.len(),
            worst_lower,
            worst_upper,
            mean_ratio,
            delta_hat: (1.0 - worst_lower).max(worst_upper - 1.0).max(0.0),
        }
    }
}

fn energy_ratio(op: &MeasurementOp, x: &DenseMatrix) -> Result<Option<f64>> {
    let norm_sq = x.frobenius_norm_sq();
    if norm_sq == 0.0 {
        return Ok(None);
    }
    let unit = x.scale(1.0 / norm_sq.sqrt());
    let b = op.apply(&unit)?;
    Ok(Some(b.iter().map(|v| v * v).sum::<f64>()))
}

/// Distortion statistics over `trials` samples; `sampler(t)` returns the
/// `t`-th matrix or `None` to skip it. Zero matrices are skipped as well.
pub fn near_isometry_stats<F>(
    op: &MeasurementOp,
    trials: usize,
    mut sampler: F,
) -> Result<IsometryStats>
where
    F: FnMut(usize) -> Result<Option<DenseMatrix>>,
{
    let mut ratios = Vec::with_capacity(trials);
    for t in 0..trials {
        if let Some(x) = sampler(t)? {
            if let Some(ratio) = energy_ratio(op, &x)? {
                ratios.push(ratio);
            }
        }
    }
    Ok(IsometryStats::from_ratios(&ratios))
}

/// Sampler drawing the `t`-th LS matrix from `generate_problem` with seed
/// `derive_seed(seed, [t])`, keeping only draws whose low-rank part has
/// measured incoherence at most `mu`.
pub fn ls_sampler(
    m: usize,
    n: usize,
    r: usize,
    s: usize,
    mu: f64,
    seed: u64,
) -> impl FnMut(usize) -> Result<Option<DenseMatrix>> {
    let params = ModelParams {
        m,
        n,
        p: 1,
        r,
        s,
        mu: mu.max(1.0),
    };
    move |t| {
        let problem = generate_problem(&params, derive_seed(seed, &[t as u64]))?;
        if r > 0 && mu.is_finite() {
            let f = truncated_svd(&problem.low_rank, r)?;
            if measured_incoherence(&f.u, &f.v)? > mu {
                return Ok(None);
            }
        }
        Ok(Some(problem.sum))
    }
}

/// Monte-Carlo lower bound on the `(r, s, μ)` restricted isometry constant.
///
/// Sample `t` depends only on `(seed, t)`, so increasing `trials` can only
/// increase the estimate.
pub fn empirical_ric(
    op: &MeasurementOp,
    r: usize,
    s: usize,
    mu: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let (m, n) = op.input_shape();
    let stats = near_isometry_stats(op, trials, ls_sampler(m, n, r, s, mu, seed))?;
    Ok(stats.delta_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded_rng(seed);
        DenseMatrix::from_fn(m, n, |_, _| standard_normal(&mut rng))
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(make_gaussian(0, 3, 2, 1).is_err());
        assert!(make_fjlt(3, 3, 0, 1).is_err());
        assert!(make_fjlt(3, 3, 10, 1).is_err());
        assert!(make_gaussian(2, 2, 10, 1).is_ok());
    }

    #[test]
    fn zero_in_zero_out() {
        for op in [
            make_gaussian(4, 5, 7, 1).unwrap(),
            make_fjlt(4, 5, 7, 1).unwrap(),
        ] {
            assert!(op
                .apply(&DenseMatrix::zeros(4, 5))
                .unwrap()
                .iter()
                .all(|v| *v == 0.0));
            assert_eq!(op.adjoint(&[0.0; 7]).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn gaussian_single_entry_reads_sensing_entry() {
        let op = make_gaussian(3, 4, 6, 5).unwrap();
        let mut x = DenseMatrix::zeros(3, 4);
        x.set(0, 0, 1.0);
        let b = op.apply(&x).unwrap();
        for (l, bl) in b.iter().enumerate() {
            assert_eq!(*bl, op.gaussian_row(l).unwrap()[0]);
        }
    }

    #[test]
    fn gaussian_adjoint_of_basis_vector_is_sensing_matrix() {
        let op = make_gaussian(3, 4, 6, 5).unwrap();
        let mut e = vec![0.0; 6];
        e[2] = 1.0;
        let a2 = op.adjoint(&e).unwrap();
        assert_eq!(a2.as_slice(), op.gaussian_row(2).unwrap());
    }

    #[test]
    fn gaussian_apply_matches_naive_inner_products() {
        let op = make_gaussian(5, 3, 9, 8).unwrap();
        let x = random(5, 3, 2);
        let b = op.apply(&x).unwrap();
        for l in 0..9 {
            let row = op.gaussian_row(l).unwrap();
            let mut naive = 0.0;
            for i in 0..5 {
                for j in 0..3 {
                    naive += row[i * 3 + j] * x.get(i, j);
                }
            }
            assert!((naive - b[l]).abs() <= 1e-12 * (1.0 + naive.abs()));
        }
    }

    #[test]
    fn same_seed_same_payload() {
        let a = make_gaussian(4, 4, 5, 77).unwrap();
        let b = make_gaussian(4, 4, 5, 77).unwrap();
        assert_eq!(a.gaussian_row(4), b.gaussian_row(4));
        let f = make_fjlt(4, 4, 5, 77).unwrap();
        let g = make_fjlt(4, 4, 5, 77).unwrap();
        assert_eq!(f.fjlt_signs(), g.fjlt_signs());
        assert_eq!(f.fjlt_selection(), g.fjlt_selection());
    }

    #[test]
    fn gaussian_entry_variance() {
        let (m, n, p) = (32, 32, 512);
        let op = make_gaussian(m, n, p, 2024).unwrap();
        let all: Vec<f64> = (0..p)
            .flat_map(|l| op.gaussian_row(l).unwrap().to_vec())
            .collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (all.len() - 1) as f64;
        let target = 1.0 / p as f64;
        assert!(
            (var - target).abs() <= 0.05 * target,
            "variance {var} vs {target}"
        );
    }

    #[test]
    fn full_fjlt_is_an_isometry() {
        let op = make_fjlt(6, 5, 30, 3).unwrap();
        assert_eq!(op.fjlt_scale(), Some(1.0));
        let x = random(6, 5, 4);
        let b = op.apply(&x).unwrap();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((nb - x.frobenius_norm()).abs() <= 1e-12 * x.frobenius_norm());
        let back = op.adjoint(&b).unwrap();
        assert!(back.sub(&x).max_abs() < 1e-12);
    }

    #[test]
    fn fjlt_selection_unique_and_sorted() {
        let op = make_fjlt(7, 9, 40, 12).unwrap();
        let sel = op.fjlt_selection().unwrap();
        assert_eq!(sel.len(), 40);
        assert!(sel.windows(2).all(|w| w[0] < w[1]));
        assert!(*sel.last().unwrap() < 63);
    }

    #[test]
    fn single_trial_stats_collapse() {
        let op = make_gaussian(4, 4, 8, 1).unwrap();
        let x = random(4, 4, 9);
        let stats = near_isometry_stats(&op, 1, |_| Ok(Some(x.clone()))).unwrap();
        assert_eq!(stats.trials, 1);
        assert_eq!(stats.worst_lower, stats.worst_upper);
        assert_eq!(stats.mean_ratio, stats.worst_lower);
    }

    #[test]
    fn ric_of_full_fjlt_vanishes() {
        let op = make_fjlt(8, 8, 64, 5).unwrap();
        let d = empirical_ric(&op, 1, 4, f64::INFINITY, 50, 6).unwrap();
        assert!(d <= 1e-10, "{d}");
    }

    #[test]
    fn ric_monotone_in_trials() {
        let op = make_gaussian(8, 8, 24, 5).unwrap();
        let short = empirical_ric(&op, 1, 3, f64::INFINITY, 40, 17).unwrap();
        let long = empirical_ric(&op, 1, 3, f64::INFINITY, 80, 17).unwrap();
        assert!(long >= short);
    }

    #[test]
    fn incoherence_filter_can_reject_everything() {
        let op = make_gaussian(8, 8, 24, 5).unwrap();
        let stats = near_isometry_stats(&op, 20, ls_sampler(8, 8, 2, 3, 1.0, 3)).unwrap();
        assert_eq!(stats.trials, 0);
        assert_eq!(stats.delta_hat, 0.0);
    }

    #[test]
    fn norm_estimate_of_full_fjlt_is_one() {
        let op = make_fjlt(4, 4, 16, 1).unwrap();
        assert!((op.norm_estimate(5, 2).unwrap() - 1.0).abs() < 1e-12);
    }
}
