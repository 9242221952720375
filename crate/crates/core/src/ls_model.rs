//! The LS(r, s, μ) model: incoherence, closedness bounds and synthetic
//! problem generation.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LsError, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::projections::{truncated_svd, SvdTriple};
use crate::rng::{seeded_rng, standard_normal};

/// Orthonormality tolerance accepted by [`measured_incoherence`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Slack used when rounding ratio products to integers.
const RATIO_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: usize,
    pub n: usize,
    /// Number of measurements.
    pub p: usize,
    /// Rank budget.
    pub r: usize,
    /// Sparsity budget.
    pub s: usize,
    /// Incoherence cap.
    pub mu: f64,
}

/// Undersampling and oversampling ratios `(δ, ρ_r, ρ_s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub delta: f64,
    pub rho_r: f64,
    pub rho_s: f64,
}

impl ModelParams {
    /// Checks the hard invariants. A violated closedness margin is only
    /// logged; see [`ModelParams::closedness_margin`].
    pub fn validate(&self) -> Result<()> {
        let ModelParams { m, n, p, r, s, mu } = *self;
        if m == 0 || n == 0 {
            return Err(LsError::invalid(format!(
                "dimensions must be positive, got {m}x{n}"
            )));
        }
        if r > m.min(n) {
            return Err(LsError::invalid(format!(
                "rank budget {r} exceeds min({m}, {n})"
            )));
        }
        if s > m * n {
            return Err(LsError::invalid(format!(
                "sparsity budget {s} exceeds {m}*{n}"
            )));
        }
        if p == 0 {
            return Err(LsError::invalid("measurement count must be positive"));
        }
        if !(mu >= 1.0) {
            return Err(LsError::invalid(format!(
                "incoherence cap must be >= 1, got {mu}"
            )));
        }
        if let Some(margin) = self.closedness_margin() {
            if margin <= 0.0 {
                warn!(
                    "mu = {mu} is not below sqrt(mn)/(r sqrt(s)) = {}; the LS set is not provably closed",
                    mu - margin
                );
            }
        }
        Ok(())
    }

    /// `√(mn)/(r√s) − μ`, or `None` when r or s is zero.
    pub fn closedness_margin(&self) -> Option<f64> {
        if self.r == 0 || self.s == 0 {
            return None;
        }
        Some(mu_max(self.m, self.n, self.r, self.s) - self.mu)
    }

    pub fn ratios(&self) -> Ratios {
        let (m, n, p) = (self.m as f64, self.n as f64, self.p as f64);
        let r = self.r as f64;
        Ratios {
            delta: p / (m * n),
            rho_r: r * (m + n - r) / p,
            rho_s: self.s as f64 / p,
        }
    }

    /// `γ = μ·4r√(2s)/√(mn)` for a given incoherence.
    pub fn gamma(&self, mu: f64) -> f64 {
        mu * 4.0 * self.r as f64 * (2.0 * self.s as f64).sqrt() / ((self.m * self.n) as f64).sqrt()
    }

    /// `γ₂ = μ·2r√(2s)/√(mn)` for a given incoherence.
    pub fn gamma2(&self, mu: f64) -> f64 {
        0.5 * self.gamma(mu)
    }
}

/// An explicit decomposition `X = U diag(σ) Vᵀ + S`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LsPair {
    pub factors: SvdTriple,
    pub sparse: SparseMatrix,
    pub s: usize,
    pub mu_cap: f64,
}

impl LsPair {
    pub fn new(factors: SvdTriple, sparse: SparseMatrix, s: usize, mu_cap: f64) -> Result<Self> {
        let pair = LsPair {
            factors,
            sparse,
            s,
            mu_cap,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    pub fn low_rank(&self) -> DenseMatrix {
        self.factors.reconstruct()
    }

    pub fn sum(&self) -> DenseMatrix {
        let mut x = self.low_rank();
        for &(i, j, v) in self.sparse.entries() {
            x.set(i, j, x.get(i, j) + v);
        }
        x
    }

    /// Measured incoherence of the low-rank factors.
    pub fn mu_hat(&self) -> Result<f64> {
        if self.rank() == 0 {
            return Ok(1.0);
        }
        measured_incoherence(&self.factors.u, &self.factors.v)
    }

    fn validate(&self) -> Result<()> {
        let SvdTriple { u, sigma, v } = &self.factors;
        let k = sigma.len();
        if u.cols() != k || v.cols() != k {
            return Err(LsError::shape(
                format!("{k} factor columns"),
                format!("{} and {}", u.cols(), v.cols()),
            ));
        }
        if self.sparse.shape() != (u.rows(), v.rows()) {
            return Err(LsError::shape(
                format!("{}x{} sparse part", u.rows(), v.rows()),
                format!("{}x{}", self.sparse.rows(), self.sparse.cols()),
            ));
        }
        if sigma.iter().any(|s| *s < 0.0) || sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(LsError::invalid(
                "singular values must be nonnegative and non-increasing",
            ));
        }
        if self.sparse.nnz() > self.s {
            return Err(LsError::invalid(format!(
                "{} sparse entries exceed the budget {}",
                self.sparse.nnz(),
                self.s
            )));
        }
        check_orthonormal(u, 1e-10)?;
        check_orthonormal(v, 1e-10)?;
        Ok(())
    }
}

fn check_orthonormal(q: &DenseMatrix, tol: f64) -> Result<()> {
    let k = q.cols();
    let gram = q.t_matmul(q);
    let dev = gram.sub(&DenseMatrix::identity(k)).max_abs();
    if dev > tol {
        return Err(LsError::invalid(format!(
            "columns are not orthonormal (max deviation {dev:e})"
        )));
    }
    Ok(())
}

/// `μ̂ = max((m/r)·max_i ‖Uᵀe_i‖², (n/r)·max_j ‖Vᵀf_j‖²)`.
pub fn measured_incoherence(u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    let r = u.cols();
    if v.cols() != r {
        return Err(LsError::shape(format!("V with {r} columns"), v.cols()));
    }
    if r == 0 {
        return Err(LsError::invalid(
            "incoherence needs at least one singular vector",
        ));
    }
    check_orthonormal(u, ORTHONORMAL_TOL)?;
    check_orthonormal(v, ORTHONORMAL_TOL)?;
    let row_energy = |q: &DenseMatrix| {
        (0..q.rows())
            .map(|i| q.row(i).iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mu_u = u.rows() as f64 / r as f64 * row_energy(u);
    let mu_v = v.rows() as f64 / r as f64 * row_energy(v);
    Ok(mu_u.max(mu_v))
}

fn mu_max(m: usize, n: usize, r: usize, s: usize) -> f64 {
    ((m * n) as f64).sqrt() / (r as f64 * (s as f64).sqrt())
}

/// Norm-inflation factor `τ = (1 − μ²r²s/mn)^{−1/2}`; `None` outside the
/// closed regime.
pub fn tau(m: usize, n: usize, r: usize, s: usize, mu: f64) -> Option<f64> {
    let g2 = mu * mu * (r * r * s) as f64 / (m * n) as f64;
    (g2 < 1.0).then(|| (1.0 - g2).powf(-0.5))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosednessBounds {
    pub mu_max: f64,
    pub tau: f64,
}

/// Largest admissible incoherence and the matching norm-inflation factor.
pub fn closedness_bounds(params: &ModelParams) -> Result<ClosednessBounds> {
    let ModelParams { m, n, r, s, mu, .. } = *params;
    if s == 0 || r == 0 {
        return Ok(ClosednessBounds {
            mu_max: f64::INFINITY,
            tau: 1.0,
        });
    }
    let bound = mu_max(m, n, r, s);
    if mu >= bound {
        return Err(LsError::OutOfRegime { mu, mu_max: bound });
    }
    let tau = tau(m, n, r, s, mu).ok_or(LsError::OutOfRegime { mu, mu_max: bound })?;
    Ok(ClosednessBounds { mu_max: bound, tau })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBound {
    /// `‖abs(U)abs(Vᵀ)‖_∞ · σ_max(L) · ‖S‖₁`
    pub general_bound: f64,
    /// `μ̂ (r√s/√mn) ‖L‖_F ‖S‖_F`
    pub mu_bound: f64,
    /// `|⟨L, S⟩|`
    pub actual: f64,
    pub mu_hat: f64,
    pub rank: usize,
}

/// Evaluates both rank-sparsity correlation bounds for a concrete pair.
pub fn rank_sparsity_correlation_bound(
    l: &DenseMatrix,
    s: &SparseMatrix,
) -> Result<CorrelationBound> {
    let (m, n) = l.shape();
    if s.shape() != (m, n) {
        return Err(LsError::shape(
            format!("{m}x{n}"),
            format!("{}x{}", s.rows(), s.cols()),
        ));
    }
    let actual = s.inner_dense(l).abs();
    let full = truncated_svd(l, m.min(n))?;
    let tol = full.sigma.first().copied().unwrap_or(0.0) * 1e-12 * m.max(n) as f64;
    let rank = full
        .sigma
        .iter()
        .take_while(|&&x| x > tol && x > 0.0)
        .count();
    if rank == 0 {
        return Ok(CorrelationBound {
            general_bound: 0.0,
            mu_bound: 0.0,
            actual,
            mu_hat: 1.0,
            rank,
        });
    }
    let f = full.truncate(rank);
    let mut coupling = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let c: f64 = (0..rank)
                .map(|k| f.u.get(i, k).abs() * f.v.get(j, k).abs())
                .sum();
            coupling = coupling.max(c);
        }
    }
    let general_bound = coupling * f.sigma[0] * s.l1_norm();
    let mu_hat = measured_incoherence(&f.u, &f.v)?;
    let mu_bound = mu_hat * rank as f64 * (s.nnz() as f64).sqrt() / ((m * n) as f64).sqrt()
        * l.frobenius_norm()
        * s.frobenius_norm();
    Ok(CorrelationBound {
        general_bound,
        mu_bound,
        actual,
        mu_hat,
        rank,
    })
}

/// A synthetic instance `X0 = L0 + S0`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub low_rank: DenseMatrix,
    pub sparse: SparseMatrix,
    pub sum: DenseMatrix,
    /// Half-width of the interval the sparse values were drawn from.
    pub amplitude: f64,
}

/// Draws `L0 = UVᵀ` with standard normal factors and an `s`-sparse `S0` on a
/// uniformly random support with values uniform on `[−c, c]`, where `c` is the
/// mean absolute entry of `L0` (or 1 when `L0` is zero).
///
/// Draw order from the seeded stream: U row-major, V row-major, support,
/// sparse values in row-major support order.
pub fn generate_problem(params: &ModelParams, seed: u64) -> Result<Problem> {
    let ModelParams { m, n, r, s, .. } = *params;
    if m == 0 || n == 0 {
        return Err(LsError::invalid(format!(
            "dimensions must be positive, got {m}x{n}"
        )));
    }
    if s > m * n {
        return Err(LsError::invalid(format!(
            "sparsity budget {s} exceeds {m}*{n}"
        )));
    }
    if r > m.min(n) {
        return Err(LsError::invalid(format!(
            "rank budget {r} exceeds min({m}, {n})"
        )));
    }
    let mut rng = seeded_rng(seed);
    let u = DenseMatrix::from_fn(m, r, |_, _| standard_normal(&mut rng));
    let v = DenseMatrix::from_fn(n, r, |_, _| standard_normal(&mut rng));
    let low_rank = if r == 0 {
        DenseMatrix::zeros(m, n)
    } else {
        u.matmul(&v.transpose())
    };

    let mut cells: Vec<usize> = (0..m * n).collect();
    let (chosen, _) = cells.partial_shuffle(&mut rng, s);
    let mut support = chosen.to_vec();
    support.sort_unstable();

    let amplitude = if r == 0 {
        1.0
    } else {
        low_rank.l1_norm() / (m * n) as f64
    };
    let entries: Vec<(usize, usize, f64)> = support
        .into_iter()
        .map(|k| (k / n, k % n, rng.random_range(-amplitude..=amplitude)))
        .collect();
    let sparse = SparseMatrix::from_triples(m, n, entries)?;

    let mut sum = low_rank.clone();
    for &(i, j, x) in sparse.entries() {
        sum.set(i, j, sum.get(i, j) + x);
    }
    Ok(Problem {
        low_rank,
        sparse,
        sum,
        amplitude,
    })
}

/// Converts `(δ, ρ_r, ρ_s)` into integer budgets: `p = round(δmn)`,
/// `s = ⌊ρ_s p⌋`, and `r` the largest rank in `0..=min(m, n)` with
/// `r(m + n − r) ≤ ρ_r p`.
pub fn params_from_ratios(
    m: usize,
    n: usize,
    delta: f64,
    rho_r: f64,
    rho_s: f64,
) -> Result<ModelParams> {
    if m == 0 || n == 0 {
        return Err(LsError::invalid(format!(
            "dimensions must be positive, got {m}x{n}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(LsError::invalid(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if !(rho_r >= 0.0 && rho_s >= 0.0) || rho_r + rho_s > 1.0 + RATIO_SLACK {
        return Err(LsError::invalid(format!(
            "need rho_r, rho_s >= 0 and rho_r + rho_s <= 1, got ({rho_r}, {rho_s})"
        )));
    }
    let mn = m * n;
    let p = ((delta * mn as f64).round() as usize).clamp(1, mn);
    let s = ((rho_s * p as f64 + RATIO_SLACK).floor() as usize).min(mn);
    let rank_budget = rho_r * p as f64 + RATIO_SLACK;
    let r = (0..=m.min(n))
        .take_while(|&r| (r * (m + n - r)) as f64 <= rank_budget)
        .last()
        .unwrap_or(0);
    let params = ModelParams {
        m,
        n,
        p,
        r,
        s,
        mu: f64::INFINITY,
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal(m: usize, r: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded_rng(seed);
        let g = DenseMatrix::from_fn(m, r, |_, _| standard_normal(&mut rng));
        truncated_svd(&g, r).unwrap().u
    }

    #[test]
    fn spike_basis_is_maximally_coherent() {
        let u = DenseMatrix::from_fn(4, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
        assert_eq!(measured_incoherence(&u, &u).unwrap(), 4.0);
    }

    #[test]
    fn flat_vectors_attain_lower_bound() {
        let u = DenseMatrix::from_fn(16, 1, |_, _| 0.25);
        let mu = measured_incoherence(&u, &u).unwrap();
        assert!((mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incoherence_matches_double_loop() {
        let u = orthonormal(8, 2, 1);
        let v = orthonormal(8, 2, 2);
        let mut best = 0.0f64;
        for q in [&u, &v] {
            for i in 0..8 {
                let mut e = 0.0;
                for k in 0..2 {
                    e += q.get(i, k) * q.get(i, k);
                }
                best = best.max(8.0 / 2.0 * e);
            }
        }
        assert_eq!(measured_incoherence(&u, &v).unwrap(), best);
        assert!(best >= 1.0 - 1e-12 && best <= 4.0 + 1e-12);
    }

    #[test]
    fn incoherence_rejects_non_orthonormal() {
        let u = DenseMatrix::from_fn(4, 1, |_, _| 1.0);
        assert!(matches!(
            measured_incoherence(&u, &u),
            Err(LsError::InvalidInput(_))
        ));
    }

    #[test]
    fn closedness_bounds_examples() {
        let p = ModelParams {
            m: 100,
            n: 100,
            p: 1,
            r: 1,
            s: 1,
            mu: 1.0,
        };
        let b = closedness_bounds(&p).unwrap();
        assert!((b.mu_max - 100.0).abs() < 1e-12);
        // (1 - 1e-4)^(-1/2) = 1.0000500037503125...
        assert!((b.tau - 1.000_050_003_750_312_5).abs() < 1e-15);

        let p = ModelParams {
            m: 4,
            n: 4,
            p: 1,
            r: 2,
            s: 4,
            mu: 1.0,
        };
        assert!(
            matches!(closedness_bounds(&p), Err(LsError::OutOfRegime { mu_max, .. }) if mu_max == 1.0)
        );

        let p = ModelParams {
            m: 4,
            n: 4,
            p: 1,
            r: 2,
            s: 0,
            mu: 3.0,
        };
        assert_eq!(closedness_bounds(&p).unwrap().tau, 1.0);
    }

    #[test]
    fn correlation_bound_disjoint_supports() {
        let mut l = DenseMatrix::zeros(4, 4);
        l.set(0, 0, 2.0);
        let s = SparseMatrix::from_triples(4, 4, vec![(3, 3, 1.5)]).unwrap();
        let c = rank_sparsity_correlation_bound(&l, &s).unwrap();
        assert_eq!(c.actual, 0.0);
        assert!(c.actual <= c.general_bound && c.actual <= c.mu_bound);
    }

    #[test]
    fn correlation_bound_all_ones() {
        let l = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
        let s = SparseMatrix::from_triples(4, 4, vec![(0, 0, 1.0)]).unwrap();
        let c = rank_sparsity_correlation_bound(&l, &s).unwrap();
        assert_eq!(c.rank, 1);
        assert!((c.actual - 1.0).abs() < 1e-12);
        assert!((c.mu_hat - 1.0).abs() < 1e-12);
        assert!((c.mu_bound - 1.0).abs() < 1e-12);
        assert!((c.general_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_model_is_zero() {
        let p = ModelParams {
            m: 5,
            n: 6,
            p: 10,
            r: 0,
            s: 0,
            mu: 1.0,
        };
        let prob = generate_problem(&p, 3).unwrap();
        assert_eq!(prob.sum.max_abs(), 0.0);
        assert_eq!(prob.low_rank.max_abs(), 0.0);
        assert_eq!(prob.sparse.nnz(), 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = ModelParams {
            m: 12,
            n: 9,
            p: 50,
            r: 2,
            s: 10,
            mu: 1.0,
        };
        let a = generate_problem(&p, 99).unwrap();
        let b = generate_problem(&p, 99).unwrap();
        assert_eq!(a.low_rank, b.low_rank);
        assert_eq!(a.sparse, b.sparse);
        let c = generate_problem(&p, 100).unwrap();
        assert_ne!(a.sparse, c.sparse);
    }

    #[test]
    fn generation_rejects_oversized_support() {
        let p = ModelParams {
            m: 2,
            n: 2,
            p: 4,
            r: 0,
            s: 5,
            mu: 1.0,
        };
        assert!(generate_problem(&p, 0).is_err());
    }

    #[test]
    fn ratio_conversion_examples() {
        let p = params_from_ratios(100, 100, 0.5, 0.1, 0.1).unwrap();
        assert_eq!((p.p, p.s, p.r), (5000, 500, 2));
        let p = params_from_ratios(100, 100, 0.5, 0.0, 0.1).unwrap();
        assert_eq!(p.r, 0);
        let p = params_from_ratios(10, 10, 1.0, 0.0, 1.0).unwrap();
        assert_eq!((p.p, p.s, p.r), (100, 100, 0));
        let achieved = params_from_ratios(100, 100, 0.5, 0.1, 0.1)
            .unwrap()
            .ratios();
        assert!(achieved.rho_r <= 0.1 && achieved.rho_s <= 0.1);
        assert!((achieved.delta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ratio_conversion_rejects_bad_ratios() {
        assert!(params_from_ratios(10, 10, 0.0, 0.1, 0.1).is_err());
        assert!(params_from_ratios(10, 10, 1.5, 0.1, 0.1).is_err());
        assert!(params_from_ratios(10, 10, 0.5, 0.7, 0.7).is_err());
        assert!(params_from_ratios(10, 10, 0.5, -0.1, 0.1).is_err());
    }
}
