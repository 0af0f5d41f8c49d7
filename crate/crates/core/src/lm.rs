//! Bounded Levenberg-Marquardt least squares with a finite-difference Jacobian.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;

pub(crate) struct Problem<'a> {
    pub initial: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Typical magnitude of each parameter; the solver works in `p / scale`.
    pub scale: Vec<f64>,
    pub residuals: &'a dyn Fn(&[f64], &mut [f64]),
    pub n_residuals: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub params: Vec<f64>,
    /// Standard errors from `s² (JᵀJ)⁻¹`, zero when unavailable.
    pub std_errors: Vec<f64>,
    pub residual_norm: f64,
    #[allow(dead_code)]
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 200;

fn clamp(p: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in p.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub(crate) fn minimize(problem: &Problem<'_>) -> Result<Solution> {
    let n = problem.initial.len();
    let m = problem.n_residuals;
    let eval = problem.residuals;
    let mut p = problem.initial.clone();
    clamp(&mut p, &problem.lower, &problem.upper);

    let mut r = vec![0.0; m];
    eval(&p, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::FitNonConvergence { iterations: 0, residual_norm: cost });
    }

    let mut jac = vec![0.0; m * n];
    let mut r_step = vec![0.0; m];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    let jacobian = |p: &[f64], r: &[f64], jac: &mut [f64], r_step: &mut [f64]| {
        let mut q = p.to_vec();
        for k in 0..n {
            let h = problem.scale[k] * 1e-6;
            let mut dir = 1.0;
            if p[k] + h > problem.upper[k] {
                dir = -1.0;
            }
            q[k] = p[k] + dir * h;
            eval(&q, r_step);
            for i in 0..m {
                // derivative with respect to the scaled variable p_k / scale_k
                jac[i * n + k] = (r_step[i] - r[i]) / (dir * 1e-6);
            }
            q[k] = p[k];
        }
    };

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        jacobian(&p, &r, &mut jac, &mut r_step);
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for a in 0..n {
                jtr[a] -= row[a] * r[i];
                for b in 0..n {
                    jtj[a * n + b] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for a in 0..n {
                damped[a * n + a] += lambda * jtj[a * n + a].max(1e-12);
            }
            let Some(step) = linalg::solve(&damped, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(&step).zip(&problem.scale).map(|((v, s), sc)| v + s * sc).collect();
            clamp(&mut trial, &problem.lower, &problem.upper);
            eval(&trial, &mut r_step);
            let trial_cost = sum_sq(&r_step);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                let moved = trial
                    .iter()
                    .zip(&p)
                    .zip(&problem.scale)
                    .map(|((a, b), s)| ((a - b) / s).abs())
                    .fold(0.0, f64::max);
                p = trial;
                core::mem::swap(&mut r, &mut r_step);
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-12 || moved < 1e-10 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: a (possibly bound-constrained) minimum
            converged = true;
        }
        if converged {
            break;
        }
    }

    if !converged {
        return Err(Error::FitNonConvergence { iterations, residual_norm: libm::sqrt(cost) });
    }

    jacobian(&p, &r, &mut jac, &mut r_step);
    let mut jtj = vec![0.0; n * n];
    for i in 0..m {
        let row = &jac[i * n..(i + 1) * n];
        for a in 0..n {
            for b in 0..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = cost / dof;
    let std_errors = match linalg::invert(&jtj, n) {
        Some(cov) => (0..n).map(|k| libm::sqrt((cov[k * n + k] * s2).max(0.0)) * problem.scale[k]).collect(),
        None => vec![0.0; n],
    };
    Ok(Solution { params: p, std_errors, residual_norm: libm::sqrt(cost), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * libm::exp(-1.7 * x) + 0.2).collect();
        let f = |p: &[f64], r: &mut [f64]| {
            for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
                r[i] = p[0] * libm::exp(-p[1] * x) + p[2] - y;
            }
        };
        let sol = minimize(&Problem {
            initial: vec![1.0, 1.0, 0.0],
            lower: vec![0.0, 0.0, -1.0],
            upper: vec![10.0, 10.0, 1.0],
            scale: vec![1.0, 1.0, 1.0],
            residuals: &f,
            n_residuals: xs.len(),
        })
        .unwrap();
        assert!((sol.params[0] - 3.0).abs() < 1e-6);
        assert!((sol.params[1] - 1.7).abs() < 1e-6);
        assert!((sol.params[2] - 0.2).abs() < 1e-6);
    }

    #[test]
    fn respects_bounds() {
        let f = |p: &[f64], r: &mut [f64]| r[0] = p[0] + 1.0;
        let sol = minimize(&Problem {
            initial: vec![2.0],
            lower: vec![0.0],
            upper: vec![5.0],
            scale: vec![1.0],
            residuals: &f,
            n_residuals: 1,
        })
        .unwrap();
        assert_eq!(sol.params[0], 0.0);
    }
}
