//! Small dense linear algebra for fitting (row-major square matrices).

use alloc::vec;
use alloc::vec::Vec;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` for a numerically singular matrix.
pub(crate) fn solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .expect("non-empty range");
        if m[pivot * n + col].abs() <= scale * 1e-15 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

/// Inverse via column-by-column solves.
pub(crate) fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = solve(a, &e)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

/// Weighted linear least squares `min Σ w_i (y_i − Σ_k A_ik x_k)²`.
/// `design` is row-major with `n_params` columns. Returns the solution and
/// the covariance `(AᵀWA)⁻¹`.
pub(crate) fn weighted_least_squares(
    design: &[f64],
    n_params: usize,
    y: &[f64],
    weights: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut ata = vec![0.0; n_params * n_params];
    let mut aty = vec![0.0; n_params];
    for (i, (&yi, &wi)) in y.iter().zip(weights).enumerate() {
        let row = &design[i * n_params..(i + 1) * n_params];
        for (j, &rj) in row.iter().enumerate() {
            if rj == 0.0 {
                continue;
            }
            aty[j] += wi * rj * yi;
            for (k, &rk) in row.iter().enumerate() {
                ata[j * n_params + k] += wi * rj * rk;
            }
        }
    }
    // unit-diagonal scaling
    let d: Vec<f64> = (0..n_params).map(|j| libm::sqrt(ata[j * n_params + j])).collect();
    if d.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    for j in 0..n_params {
        aty[j] /= d[j];
        for k in 0..n_params {
            ata[j * n_params + k] /= d[j] * d[k];
        }
    }
    let x = solve(&ata, &aty)?;
    let mut cov = invert(&ata, n_params)?;
    for j in 0..n_params {
        for k in 0..n_params {
            cov[j * n_params + k] /= d[j] * d[k];
        }
    }
    Some((x.iter().zip(&d).map(|(v, s)| v / s).collect(), cov))
}
