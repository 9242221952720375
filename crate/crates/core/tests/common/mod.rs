//! Reference implementations used as test oracles. Nothing here calls into
//! the library's numerical routines.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Singular values of a dense row-major `rows x cols` matrix by one-sided
/// Jacobi rotations, sorted descending.
pub fn jacobi_singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    // work on the tall orientation so columns are orthogonalized
    let (m, n, a) = if rows >= cols {
        (rows, cols, data.to_vec())
    } else {
        let mut t = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                t[j * rows + i] = data[i * cols + j];
            }
        }
        (cols, rows, t)
    };
    let mut cols_v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a[i * n + j]).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols_v[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols_v[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols_v[p].iter().zip(&cols_v[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-300 || gamma.abs() <= 1e-17 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let xp = cols_v[p][i];
                    let xq = cols_v[q][i];
                    cols_v[p][i] = c * xp - s * xq;
                    cols_v[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols_v
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Orthonormal DCT-II matrix of size `n` from the cosine formula.
pub fn dct2_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let w = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| w * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Solves a square linear system by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Smallest `‖w − z‖²` over all `z` supported on at most `s` entries, by
/// enumerating every support of size exactly `s`.
pub fn brute_force_sparse_residual(w: &[f64], s: usize) -> f64 {
    let n = w.len();
    let total: f64 = w.iter().map(|v| v * v).sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != s {
            continue;
        }
        let kept: f64 = (0..n)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| w[i] * w[i])
            .sum();
        best = best.min(total - kept);
    }
    best
}

/// Modified Gram–Schmidt on the columns of a row-major `rows x cols` matrix.
pub fn orthonormalize(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| data[i * cols + j]).collect())
        .collect();
    for j in 0..cols {
        for k in 0..j {
            let d: f64 = q[j].iter().zip(&q[k]).map(|(a, b)| a * b).sum();
            let qk = q[k].clone();
            for (a, b) in q[j].iter_mut().zip(&qk) {
                *a -= d * b;
            }
        }
        let norm: f64 = q[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        for a in q[j].iter_mut() {
            *a /= norm;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            out[i * cols + j] = q[j][i];
        }
    }
    out
}

/// `max((m/r) max_i ‖Uᵀe_i‖², (n/r) max_j ‖Vᵀf_j‖²)` by explicit loops.
pub fn incoherence_loops(m: usize, n: usize, r: usize, u: &[f64], v: &[f64]) -> f64 {
    let mut best_u: f64 = 0.0;
    for i in 0..m {
        let mut acc = 0.0;
        for c in 0..r {
            acc += u[i * r + c] * u[i * r + c];
        }
        best_u = best_u.max(acc);
    }
    let mut best_v: f64 = 0.0;
    for j in 0..n {
        let mut acc = 0.0;
        for c in 0..r {
            acc += v[j * r + c] * v[j * r + c];
        }
        best_v = best_v.max(acc);
    }
    (m as f64 / r as f64 * best_u).max(n as f64 / r as f64 * best_v)
}

pub fn rel_err(x: &[f64], x0: &[f64]) -> f64 {
    let d: f64 = x
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let n: f64 = x0.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n == 0.0 {
        d
    } else {
        d / n
    }
}
