//! Levenberg–Marquardt for small dense problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when ‖δ‖ ≤ tol · (‖x‖ + tol).
    pub rel_step_tol: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            rel_step_tol: 1e-10,
            rel_cost_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    /// Σ r², with the residuals as returned by the model (already weighted).
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// JᵀJ at the solution.
    pub jtj: DMatrix<f64>,
}

/// Minimize Σ rᵢ(x)² where `model(x)` returns the residual vector and its
/// Jacobian. A model error at a trial point rejects that step.
pub fn levenberg_marquardt<F>(model: F, x0: &[f64], options: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    let mut x = DVector::from_column_slice(x0);
    let (mut r, mut j) = model(x.as_slice())?;
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::Fit("non-finite cost at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = -chol.solve(&g);
            let trial = &x + &delta;
            match model(trial.as_slice()) {
                Ok((rt, jt)) if rt.norm_squared().is_finite() && rt.norm_squared() <= cost => {
                    let new_cost = rt.norm_squared();
                    let small_step = delta.norm() <= options.rel_step_tol * (x.norm() + options.rel_step_tol);
                    let small_gain = cost - new_cost <= options.rel_cost_tol * cost;
                    x = trial;
                    r = rt;
                    j = jt;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if small_step || small_gain {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    let jtj = j.transpose() * &j;
    Ok(LmOutcome {
        params: x,
        cost,
        iterations,
        converged,
        jtj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let model = |p: &[f64]| -> Result<(DVector<f64>, DMatrix<f64>)> {
            let r = DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
            let j = DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0]);
            Ok((r, j))
        };
        let out = levenberg_marquardt(model, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-8 && (out.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_fit() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        let model = |p: &[f64]| -> Result<(DVector<f64>, DMatrix<f64>)> {
            let r = DVector::from_iterator(xs.len(), xs.iter().zip(&ys).map(|(x, y)| p[0] * (-p[1] * x).exp() - y));
            let j = DMatrix::from_fn(xs.len(), 2, |i, k| {
                let e = (-p[1] * xs[i]).exp();
                if k == 0 {
                    e
                } else {
                    -p[0] * xs[i] * e
                }
            });
            Ok((r, j))
        };
        let out = levenberg_marquardt(model, &[1.0, 0.1], &LmOptions::default()).unwrap();
        assert!((out.params[0] - 3.0).abs() < 1e-9);
        assert!((out.params[1] - 0.7).abs() < 1e-9);
    }
}
