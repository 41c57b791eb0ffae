//! Active-set least squares with non-negativity on a subset of variables.
//!
//! Works on the normal equations `G x = h` (G = AᵀWA, h = AᵀWb), which is
//! adequate for the handful of columns a spectrum decomposition needs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimize ½xᵀGx − hᵀx subject to x[i] ≥ 0 wherever `constrained[i]`.
/// `G` must be symmetric positive definite.
pub fn solve_bounded(g: &DMatrix<f64>, h: &DVector<f64>, constrained: &[bool]) -> Result<DVector<f64>> {
    let n = h.len();
    assert_eq!(g.nrows(), n);
    assert_eq!(constrained.len(), n);

    // Jacobi scaling keeps the subproblems well conditioned.
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)].sqrt()).collect();
    if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::RankDeficient("zero design column".into()));
    }
    let gs = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (d[i] * d[j]));
    let hs = DVector::from_fn(n, |i, _| h[i] / d[i]);

    let mut passive: Vec<bool> = constrained.iter().map(|c| !c).collect();
    let mut x = DVector::zeros(n);
    if passive.iter().any(|p| *p) {
        x = sub_solve(&gs, &hs, &passive)?;
    }

    let tol = 1e-12 * (1.0 + hs.amax());
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let w = &hs - &gs * &x;
        let candidate = (0..n)
            .filter(|&i| constrained[i] && !passive[i])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;

        for _ in 0..(3 * n + 10) {
            let z = sub_solve(&gs, &hs, &passive)?;
            let infeasible: Vec<usize> = (0..n)
                .filter(|&i| passive[i] && constrained[i] && z[i] <= 0.0)
                .collect();
            if infeasible.is_empty() {
                x = z;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&i| {
                    let denom = x[i] - z[i];
                    if denom > 0.0 {
                        x[i] / denom
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min)
                .clamp(0.0, 1.0);
            x += alpha * (&z - &x);
            for i in 0..n {
                if passive[i] && constrained[i] && x[i] <= 1e-14 * (1.0 + x.amax()) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    for i in 0..n {
        if constrained[i] && x[i] < 0.0 {
            x[i] = 0.0;
        }
    }
    Ok(DVector::from_fn(n, |i, _| x[i] / d[i]))
}

fn sub_solve(g: &DMatrix<f64>, h: &DVector<f64>, passive: &[bool]) -> Result<DVector<f64>> {
    let idx: Vec<usize> = (0..h.len()).filter(|&i| passive[i]).collect();
    let mut out = DVector::zeros(h.len());
    if idx.is_empty() {
        return Ok(out);
    }
    let m = idx.len();
    let sub = DMatrix::from_fn(m, m, |a, b| g[(idx[a], idx[b])]);
    let rhs = DVector::from_fn(m, |a, _| h[idx[a]]);
    let chol = sub
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("normal matrix is not positive definite".into()))?;
    let sol = chol.solve(&rhs);
    for (a, &i) in idx.iter().enumerate() {
        out[i] = sol[a];
    }
    Ok(out)
}
