//! Thresholding and projection primitives.
//!
//! Everything here is a pure function of its inputs. Ties between entries of
//! equal magnitude are always broken towards the lowest row-major linear index.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{LsError, Result};
use crate::ls_model::measured_incoherence;
use crate::matrix::{DenseMatrix, SparseMatrix};

/// Maximum number of low-rank/sparse alternations in [`rpca_project`].
pub const RPCA_MAX_ALTERNATIONS: usize = 100;

/// Top-k singular triplets `U · diag(sigma) · Vᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn empty(m: usize, n: usize) -> Self {
        SvdTriple {
            u: DenseMatrix::zeros(m, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(n, 0),
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for (k, &s) in self.sigma.iter().enumerate() {
            for i in 0..m {
                let a = s * self.u.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + a * self.v.get(j, k));
                }
            }
        }
        out
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdTriple {
        let k = k.min(self.rank());
        SvdTriple {
            u: self.u.leading_columns(k),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.leading_columns(k),
        }
    }
}

/// Sorted, duplicate-free set of `(i, j)` positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    rows: usize,
    cols: usize,
    indices: Vec<(usize, usize)>,
}

impl SupportSet {
    pub fn new(rows: usize, cols: usize, mut indices: Vec<(usize, usize)>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&(i, j)) = indices.iter().find(|&&(i, j)| i >= rows || j >= cols) {
            return Err(LsError::invalid(format!(
                "support index ({i}, {j}) out of range for {rows}x{cols}"
            )));
        }
        Ok(SupportSet {
            rows,
            cols,
            indices,
        })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        SupportSet {
            rows,
            cols,
            indices: Vec::new(),
        }
    }

    pub(crate) fn from_sorted_unchecked(
        rows: usize,
        cols: usize,
        indices: Vec<(usize, usize)>,
    ) -> Self {
        SupportSet {
            rows,
            cols,
            indices,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.indices.binary_search(&(i, j)).is_ok()
    }

    /// Row-major boolean mask of the support.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.rows * self.cols];
        for &(i, j) in &self.indices {
            mask[i * self.cols + j] = true;
        }
        mask
    }
}

/// Best rank-`k` approximation factors of `w`.
pub fn truncated_svd(w: &DenseMatrix, k: usize) -> Result<SvdTriple> {
    let (m, n) = w.shape();
    if k > m.min(n) {
        return Err(LsError::invalid(format!("rank {k} exceeds min({m}, {n})")));
    }
    if k == 0 {
        return Ok(SvdTriple::empty(m, n));
    }
    let svd = w.to_nalgebra().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    order.truncate(k);

    Ok(SvdTriple {
        u: DenseMatrix::from_fn(m, k, |i, c| u[(i, order[c])]),
        sigma: order.iter().map(|&c| sv[c].max(0.0)).collect(),
        v: DenseMatrix::from_fn(n, k, |j, c| v_t[(order[c], j)]),
    })
}

/// Total order used by hard thresholding: larger magnitude first, then lower
/// linear index.
#[inline]
fn magnitude_order(values: &[f64], a: usize, b: usize) -> Ordering {
    values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b))
}

/// Keeps the `s` largest-magnitude entries of `w`.
///
/// Entries equal to zero are never stored, so the result can hold fewer than
/// `s` triples.
pub fn ht_sparse(w: &DenseMatrix, s: usize) -> SparseMatrix {
    let (m, n) = w.shape();
    let values = w.as_slice();
    if s >= values.len() {
        return SparseMatrix::from_dense(w);
    }
    if s == 0 {
        return SparseMatrix::zeros(m, n);
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.select_nth_unstable_by(s - 1, |&a, &b| magnitude_order(values, a, b));
    let mut kept: Vec<usize> = idx[..s]
        .iter()
        .copied()
        .filter(|&k| values[k] != 0.0)
        .collect();
    kept.sort_unstable();
    let entries = kept
        .into_iter()
        .map(|k| (k / n, k % n, values[k]))
        .collect();
    SparseMatrix::from_sorted_unchecked(m, n, entries)
}

/// Output of the incoherence-aware low-rank hard threshold.
#[derive(Clone, Debug)]
pub struct LowRankProjection {
    /// Factors restricted to the nonzero singular values among the top `r`.
    pub factors: SvdTriple,
    pub matrix: DenseMatrix,
    /// Measured incoherence of the factors (1 when the result is zero).
    pub mu_hat: f64,
    /// `mu_hat` exceeds the requested cap; the factors are left untouched.
    pub exceeds_cap: bool,
}

/// Rank-`r` hard threshold `HT(W; r, mu)`.
///
/// Incoherence is measured and flagged against `mu_cap`, never enforced.
pub fn ht_lowrank(w: &DenseMatrix, r: usize, mu_cap: f64) -> Result<LowRankProjection> {
    let (m, n) = w.shape();
    let full = truncated_svd(w, r)?;
    let tol = full.sigma.first().copied().unwrap_or(0.0) * f64::EPSILON * m.max(n) as f64;
    let numerical_rank = full
        .sigma
        .iter()
        .take_while(|&&s| s > tol && s > 0.0)
        .count();
    let factors = full.truncate(numerical_rank);
    let mu_hat = if numerical_rank == 0 {
        1.0
    } else {
        measured_incoherence(&factors.u, &factors.v)?
    };
    Ok(LowRankProjection {
        matrix: factors.reconstruct(),
        factors,
        mu_hat,
        exceeds_cap: mu_hat > mu_cap,
    })
}

/// `P_U X = U (Uᵀ X)`.
pub fn project_columns(u: &DenseMatrix, x: &DenseMatrix) -> DenseMatrix {
    if u.cols() == 0 {
        return DenseMatrix::zeros(x.rows(), x.cols());
    }
    u.matmul(&u.t_matmul(x))
}

/// Oblique projection split into its two structural parts.
#[derive(Clone, Debug)]
pub struct ObliqueSplit {
    /// Part whose column space lies in span(U).
    pub column_part: DenseMatrix,
    /// Part supported on Ω.
    pub support_part: DenseMatrix,
}

impl ObliqueSplit {
    pub fn sum(&self) -> DenseMatrix {
        self.column_part.add(&self.support_part)
    }
}

/// Oblique projection of `r` onto the sum of span(U) and matrices supported on
/// `omega`.
///
/// One pass is `P_U R + 1_Ω ∘ (R − P_U R)`. Further passes add the same map
/// applied to the remaining residual `R − X_k`.
pub fn oblique_project(
    r: &DenseMatrix,
    u: &DenseMatrix,
    omega: &SupportSet,
    iters: usize,
) -> Result<DenseMatrix> {
    oblique_project_split(r, u, omega, iters).map(|split| split.sum())
}

pub fn oblique_project_split(
    r: &DenseMatrix,
    u: &DenseMatrix,
    omega: &SupportSet,
    iters: usize,
) -> Result<ObliqueSplit> {
    let (m, n) = r.shape();
    if u.rows() != m {
        return Err(LsError::shape(format!("U with {m} rows"), u.rows()));
    }
    if (omega.rows, omega.cols) != (m, n) {
        return Err(LsError::shape(
            format!("support over {m}x{n}"),
            format!("{}x{}", omega.rows, omega.cols),
        ));
    }
    if iters == 0 {
        return Err(LsError::invalid(
            "oblique projection needs at least one pass",
        ));
    }
    let mut column_part = DenseMatrix::zeros(m, n);
    let mut support_part = DenseMatrix::zeros(m, n);
    let mut residual = r.clone();
    for pass in 0..iters {
        let pu = project_columns(u, &residual);
        {
            let out = support_part.as_mut_slice();
            let res = residual.as_slice();
            let p = pu.as_slice();
            for &(i, j) in omega.indices() {
                let k = i * n + j;
                out[k] += res[k] - p[k];
            }
        }
        column_part.axpy(1.0, &pu);
        if pass + 1 < iters {
            residual = r.sub(&column_part).sub(&support_part);
        }
    }
    Ok(ObliqueSplit {
        column_part,
        support_part,
    })
}

/// Result of the alternating Robust-PCA projection.
#[derive(Clone, Debug)]
pub struct RpcaOutcome {
    pub low_rank: LowRankProjection,
    pub sparse: SparseMatrix,
    pub alternations: usize,
    pub converged: bool,
    /// `‖W − L − S‖_F` after each alternation.
    pub residual_trace: Vec<f64>,
}

impl RpcaOutcome {
    pub fn sum(&self) -> DenseMatrix {
        let mut x = self.low_rank.matrix.clone();
        for &(i, j, v) in self.sparse.entries() {
            x.set(i, j, x.get(i, j) + v);
        }
        x
    }
}

/// ε-accurate projection of `w` onto LS(r, s, μ) by alternating hard
/// thresholds, starting from a zero sparse component.
pub fn rpca_project(w: &DenseMatrix, r: usize, s: usize, mu: f64, eps: f64) -> Result<RpcaOutcome> {
    rpca_project_from(w, r, s, mu, eps, None)
}

/// As [`rpca_project`], with the alternation seeded by a previous sparse
/// estimate.
pub fn rpca_project_from(
    w: &DenseMatrix,
    r: usize,
    s: usize,
    mu: f64,
    eps: f64,
    initial_sparse: Option<&SparseMatrix>,
) -> Result<RpcaOutcome> {
    let (m, n) = w.shape();
    if !(eps > 0.0) {
        return Err(LsError::invalid(format!(
            "rpca tolerance must be positive, got {eps}"
        )));
    }
    if r > m.min(n) {
        return Err(LsError::invalid(format!("rank {r} exceeds min({m}, {n})")));
    }
    let mut sparse = match initial_sparse {
        Some(s0) if s0.shape() == (m, n) => s0.clone(),
        Some(s0) => {
            return Err(LsError::shape(
                format!("{m}x{n}"),
                format!("{}x{}", s0.rows(), s0.cols()),
            ))
        }
        None => SparseMatrix::zeros(m, n),
    };
    let threshold = eps * w.frobenius_norm().max(1.0);
    let mut previous = sparse.to_dense();
    let mut residual_trace = Vec::new();
    let mut low_rank = None;
    let mut converged = false;
    let mut alternations = 0;

    while alternations < RPCA_MAX_ALTERNATIONS {
        alternations += 1;
        let lr = ht_lowrank(&w.sub(&sparse.to_dense()), r, mu)?;
        sparse = ht_sparse(&w.sub(&lr.matrix), s);

        let mut current = lr.matrix.clone();
        for &(i, j, v) in sparse.entries() {
            current.set(i, j, current.get(i, j) + v);
        }
        residual_trace.push(w.sub(&current).frobenius_norm());
        let change = current.sub(&previous).frobenius_norm();
        low_rank = Some(lr);
        previous = current;
        if change <= threshold {
            converged = true;
            break;
        }
    }

    Ok(RpcaOutcome {
        low_rank: low_rank.expect("at least one alternation runs"),
        sparse,
        alternations,
        converged,
        residual_trace,
    })
}
