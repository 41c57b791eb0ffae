//! Parameter estimation for the magnetoconductance models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::hln::{combine_tilt, delta_sigma_perp_jacobian, sigma0, tilt_components, TiltConvention, WlParams};
use super::lm::{levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};
use crate::model::Measured;

/// Fewest points accepted by any fit.
pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Orientation {
    Perpendicular,
    Parallel,
    /// Field swept in magnitude at a fixed angle above the plane.
    Tilt {
        angle_deg: f64,
    },
    /// Field of fixed magnitude swept in angle; point abscissae are angles.
    AngleSweep {
        field_t: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Δσ, S per square.
    DeltaSigma,
    /// Transverse resistance, Ω.
    Rxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetoPoint {
    /// Field in T, or angle in degrees for an angle sweep.
    pub x: f64,
    pub value: f64,
    /// One-sigma error of `value`.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetoTrace {
    pub orientation: Orientation,
    pub quantity: Quantity,
    pub temperature_k: Option<f64>,
    pub points: Vec<MagnetoPoint>,
}

impl MagnetoTrace {
    pub fn new(orientation: Orientation, quantity: Quantity, points: Vec<MagnetoPoint>) -> Result<Self> {
        let t = MagnetoTrace {
            orientation,
            quantity,
            temperature_k: None,
            points,
        };
        t.validate()?;
        Ok(t)
    }

    /// Trace from (x, value) pairs without per-point errors.
    pub fn from_pairs(orientation: Orientation, quantity: Quantity, pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            orientation,
            quantity,
            pairs
                .iter()
                .map(|&(x, value)| MagnetoPoint { x, value, error: None })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < MIN_POINTS {
            return Err(Error::InsufficientData {
                needed: MIN_POINTS,
                got: self.points.len(),
            });
        }
        for (i, p) in self.points.iter().enumerate() {
            if !p.x.is_finite() || !p.value.is_finite() {
                return Err(Error::Domain(format!("point {i} is not finite")));
            }
            if let Some(e) = p.error {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(Error::Domain(format!("point {i} has error {e}; errors must be > 0")));
                }
            }
        }
        match self.orientation {
            Orientation::Tilt { angle_deg } if !(0.0..=90.0).contains(&angle_deg) => {
                Err(Error::Domain(format!("tilt angle {angle_deg} not in [0, 90]")))
            }
            Orientation::AngleSweep { field_t } if !(field_t > 0.0) => {
                Err(Error::Domain(format!("sweep field {field_t} T must be > 0")))
            }
            _ => Ok(()),
        }
    }

    /// Per-point residual weights 1/error when every point carries an error,
    /// otherwise `None` (uniform weighting).
    pub fn weights(&self) -> Option<Vec<f64>> {
        self.points.iter().map(|p| p.error.map(|e| 1.0 / e)).collect()
    }

    fn require(&self, orientation_ok: bool, quantity: Quantity, what: &str) -> Result<()> {
        self.validate()?;
        if !orientation_ok {
            return Err(Error::Config(format!(
                "{what} needs a different orientation, got {:?}",
                self.orientation
            )));
        }
        if self.quantity != quantity {
            return Err(Error::Config(format!(
                "{what} needs {quantity:?} data, got {:?}",
                self.quantity
            )));
        }
        Ok(())
    }
}

/// Covariance scale: 1 with supplied errors, else the residual variance.
fn variance_scale(weighted: bool, chi_square: f64, dof: usize) -> f64 {
    if weighted {
        1.0
    } else if dof > 0 {
        chi_square / dof as f64
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerpFitOptions {
    /// Starting values for L, nm.
    pub l_starts_nm: Vec<f64>,
    /// Starting values for L_φ, nm.
    pub lphi_starts_nm: Vec<f64>,
    pub max_iterations: usize,
    pub rel_step_tol: f64,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

impl Default for PerpFitOptions {
    fn default() -> Self {
        PerpFitOptions {
            l_starts_nm: log_spaced(1.0, 50.0, 5),
            lphi_starts_nm: log_spaced(10.0, 500.0, 5),
            max_iterations: 200,
            rel_step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerpFit {
    pub l_nm: Measured,
    pub lphi_nm: Measured,
    /// Covariance of (L, L_φ), nm².
    pub covariance_nm2: [[f64; 2]; 2],
    /// Weighted sum of squared residuals (S² with uniform weights).
    pub chi_square: f64,
    pub dof: usize,
    pub iterations: usize,
    /// False when L_φ ≤ L at the optimum; the values are still reported.
    pub valid: bool,
    pub weighted: bool,
}

/// Weighted nonlinear least squares of the perpendicular response in (ln L, ln L_φ), started
/// from every pair of the options' start grid; the lowest converged cost wins.
pub fn fit_perp(trace: &MagnetoTrace, options: &PerpFitOptions) -> Result<PerpFit> {
    trace.require(
        matches!(trace.orientation, Orientation::Perpendicular),
        Quantity::DeltaSigma,
        "perpendicular fit",
    )?;
    let positive: Vec<f64> = trace.points.iter().map(|p| p.x).filter(|b| *b > 0.0).collect();
    if trace.points.iter().any(|p| p.x < 0.0) {
        return Err(Error::Domain("perpendicular fit takes |B| >= 0".into()));
    }
    let (bmin, bmax) = positive
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), b| (lo.min(*b), hi.max(*b)));
    if positive.is_empty() || bmax < 10.0 * bmin {
        return Err(Error::Domain(format!(
            "field values must span at least a factor 10 (got {bmin} to {bmax} T)"
        )));
    }
    let weights = trace.weights();
    let weighted = weights.is_some();
    // uniform weights are 1/σ0 so residuals are O(1)
    let w: Vec<f64> = weights.unwrap_or_else(|| vec![1.0 / sigma0(); trace.points.len()]);
    let n = trace.points.len();

    let model = |p: &[f64]| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (l, lphi) = (p[0].exp(), p[1].exp());
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 2);
        for (i, pt) in trace.points.iter().enumerate() {
            let (v, dl, dphi) = delta_sigma_perp_jacobian(pt.x, l, lphi)?;
            r[i] = w[i] * (v - pt.value);
            j[(i, 0)] = w[i] * dl;
            j[(i, 1)] = w[i] * dphi;
        }
        Ok((r, j))
    };
    let lm = LmOptions {
        max_iterations: options.max_iterations,
        rel_step_tol: options.rel_step_tol,
        ..LmOptions::default()
    };

    let mut best: Option<super::lm::LmOutcome> = None;
    let mut attempts = 0;
    let mut failures = Vec::new();
    for &l0 in &options.l_starts_nm {
        for &p0 in &options.lphi_starts_nm {
            attempts += 1;
            match levenberg_marquardt(model, &[l0.ln(), p0.ln()], &lm) {
                Ok(out) if out.converged => {
                    if best.as_ref().is_none_or(|b| out.cost < b.cost) {
                        best = Some(out);
                    }
                }
                Ok(out) => failures.push(format!(
                    "start ({l0:.3}, {p0:.3}) nm: no convergence, cost {:.3e}",
                    out.cost
                )),
                Err(e) => failures.push(format!("start ({l0:.3}, {p0:.3}) nm: {e}")),
            }
        }
    }
    let Some(out) = best else {
        return Err(Error::Fit(format!(
            "none of {attempts} starts converged; {}",
            failures.first().cloned().unwrap_or_default()
        )));
    };
    let dof = n.saturating_sub(2);
    let chi_square = if weighted {
        out.cost
    } else {
        out.cost * sigma0().powi(2)
    };
    let scale = variance_scale(weighted, out.cost, dof);
    let cov_log = out.jtj.clone().try_inverse().ok_or_else(|| {
        Error::Fit(format!(
            "singular Jacobian at the optimum (L = {:.3e} nm, L_phi = {:.3e} nm); \
                 the field range does not constrain both lengths",
            out.params[0].exp(),
            out.params[1].exp()
        ))
    })? * scale;
    let (l, lphi) = (out.params[0].exp(), out.params[1].exp());
    let d = [l, lphi];
    let mut cov = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            cov[a][b] = cov_log[(a, b)] * d[a] * d[b];
        }
    }
    Ok(PerpFit {
        l_nm: Measured::new(l, cov[0][0].max(0.0).sqrt()),
        lphi_nm: Measured::new(lphi, cov[1][1].max(0.0).sqrt()),
        covariance_nm2: cov,
        chi_square,
        dof,
        iterations: out.iterations,
        valid: lphi > l,
        weighted,
    })
}

/// Minimize a unimodal `f` on [a, b] by golden-section search.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (c.abs() + d.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Grid scan followed by golden-section refinement between the neighbours
/// of the best grid point. `grid` must be increasing.
fn bracket_minimum(cost: &impl Fn(f64) -> f64, grid: &[f64], log: bool) -> f64 {
    let costs: Vec<f64> = grid.iter().map(|g| cost(*g)).collect();
    let k = (0..grid.len())
        .min_by(|&a, &b| costs[a].total_cmp(&costs[b]))
        .expect("nonempty grid");
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(grid.len() - 1)];
    if log && lo > 0.0 {
        golden_section(|u| cost(u.exp()), lo.ln(), hi.ln(), 1e-14).exp()
    } else {
        golden_section(cost, lo, hi, 1e-14)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelFit {
    pub gamma_t2: Measured,
    pub chi_square: f64,
    pub dof: usize,
    /// Set when the data carry no information on γ (identically zero
    /// response); the relative error is then infinite.
    pub unconstrained: bool,
}

/// One-parameter fit of Δσ∥ = σ0 ln(1 + γB²) with γ ≥ 0.
pub fn fit_parallel(trace: &MagnetoTrace) -> Result<ParallelFit> {
    trace.require(
        matches!(trace.orientation, Orientation::Parallel),
        Quantity::DeltaSigma,
        "parallel fit",
    )?;
    let n = trace.points.len();
    let dof = n - 1;
    if trace.points.iter().all(|p| p.value == 0.0) {
        return Ok(ParallelFit {
            gamma_t2: Measured::new(0.0, f64::INFINITY),
            chi_square: 0.0,
            dof,
            unconstrained: true,
        });
    }
    let weights = trace.weights();
    let weighted = weights.is_some();
    let s0 = sigma0();
    let w: Vec<f64> = weights.unwrap_or_else(|| vec![1.0 / s0; n]);
    let b2: Vec<f64> = trace.points.iter().map(|p| p.x * p.x).collect();
    let cost = |g: f64| -> f64 {
        trace
            .points
            .iter()
            .zip(&b2)
            .zip(&w)
            .map(|((p, bb), wi)| (wi * (s0 * (g * bb).ln_1p() - p.value)).powi(2))
            .sum()
    };
    let mut grid = vec![0.0];
    grid.extend((0..=120).map(|i| 1e-8 * 10f64.powf(i as f64 / 10.0)));
    let mut g = bracket_minimum(&cost, &grid, true);

    // Gauss–Newton polish; also supplies the curvature for the error
    let jac = |g: f64| -> Vec<f64> {
        b2.iter()
            .zip(&w)
            .map(|(bb, wi)| wi * s0 * bb / (1.0 + g * bb))
            .collect()
    };
    for _ in 0..20 {
        let j = jac(g);
        let r: Vec<f64> = trace
            .points
            .iter()
            .zip(&b2)
            .zip(&w)
            .map(|((p, bb), wi)| wi * (s0 * (g * bb).ln_1p() - p.value))
            .collect();
        let jj: f64 = j.iter().map(|v| v * v).sum();
        let jr: f64 = j.iter().zip(&r).map(|(a, b)| a * b).sum();
        if jj == 0.0 {
            break;
        }
        let next = (g - jr / jj).max(0.0);
        if cost(next) <= cost(g) {
            let done = (next - g).abs() <= 1e-14 * g.abs().max(1e-300);
            g = next;
            if done {
                break;
            }
        } else {
            break;
        }
    }
    let c = cost(g);
    let jj: f64 = jac(g).iter().map(|v| v * v).sum();
    let sigma = (variance_scale(weighted, c, dof) / jj).sqrt();
    Ok(ParallelFit {
        gamma_t2: Measured::new(g, sigma),
        chi_square: if weighted { c } else { c * s0 * s0 },
        dof,
        unconstrained: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltFit {
    pub p: Measured,
    pub chi_square: f64,
    pub dof: usize,
}

/// One-parameter fit of the tilt-mixing exponent p to a fixed-magnitude
/// angle sweep, with L, L_φ and γ held at the given values.
pub fn fit_tilt(
    trace: &MagnetoTrace,
    l_nm: f64,
    lphi_nm: f64,
    gamma_t2: f64,
    convention: TiltConvention,
) -> Result<TiltFit> {
    let Orientation::AngleSweep { field_t } = trace.orientation else {
        trace.validate()?;
        return Err(Error::Config(format!(
            "tilt fit needs an angle sweep, got {:?}",
            trace.orientation
        )));
    };
    trace.require(true, Quantity::DeltaSigma, "tilt fit")?;
    let mut angles: Vec<f64> = trace.points.iter().map(|p| p.x).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    if angles.len() < 2 {
        return Err(Error::Fit(format!("degenerate sweep: all points at {} deg", angles[0])));
    }
    let params = WlParams {
        l_nm: Measured::exact(l_nm),
        lphi_nm: Measured::exact(lphi_nm),
        gamma_t2: Measured::exact(gamma_t2),
        p: Measured::exact(1.0),
        t_nm: None,
    };
    let s0 = sigma0();
    let comps: Vec<(f64, f64)> = trace
        .points
        .iter()
        .map(|pt| tilt_components(field_t, pt.x, &params, convention).map(|(a, b)| (a / s0, b / s0)))
        .collect::<Result<_>>()?;
    if !comps.iter().any(|(a, b)| *a > 0.0 && *b > 0.0) {
        return Err(Error::Fit(
            "degenerate sweep: no angle mixes both field components, p is unconstrained".into(),
        ));
    }
    let weights = trace.weights();
    let weighted = weights.is_some();
    // in units of σ0 throughout
    let w: Vec<f64> = match weights {
        Some(w) => w.iter().map(|v| v * s0).collect(),
        None => vec![1.0; comps.len()],
    };
    let y: Vec<f64> = trace.points.iter().map(|p| p.value / s0).collect();
    let cost = |p: f64| -> f64 {
        comps
            .iter()
            .zip(&y)
            .zip(&w)
            .map(|(((a, b), yi), wi)| (wi * (combine_tilt(*a * s0, *b * s0, p) / s0 - yi)).powi(2))
            .sum()
    };
    let grid = (0..=80).map(|i| 0.2 * 50f64.powf(i as f64 / 80.0)).collect::<Vec<_>>();
    let p = bracket_minimum(&cost, &grid, true);

    // d/dp of (aᵖ + bᵖ)^(1/p)
    let jj: f64 = comps
        .iter()
        .zip(&w)
        .map(|((a, b), wi)| {
            if *a == 0.0 || *b == 0.0 {
                return 0.0;
            }
            let (ap, bp) = (a.powf(p), b.powf(p));
            let u = ap + bp;
            let d = u.powf(1.0 / p);
            let dd = d * (-u.ln() / (p * p) + (ap * a.ln() + bp * b.ln()) / (p * u));
            (wi * dd).powi(2)
        })
        .sum();
    if !(jj > 0.0) {
        return Err(Error::Fit("degenerate sweep: data insensitive to p".into()));
    }
    let dof = comps.len() - 1;
    let c = cost(p);
    let sigma = (variance_scale(weighted, c, dof) / jj).sqrt();
    Ok(TiltFit {
        p: Measured::new(p, sigma),
        chi_square: c * s0 * s0,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::hln::{delta_sigma_parallel, delta_sigma_perp, delta_sigma_tilt};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn perp_trace(l: f64, lphi: f64, noise: f64, seed: u64, with_errors: bool) -> MagnetoTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let points = (0..50)
            .map(|i| {
                let b = 0.01 + (9.0 - 0.01) * i as f64 / 49.0;
                let v = delta_sigma_perp(b, l, lphi).unwrap();
                let sd = noise * v;
                MagnetoPoint {
                    x: b,
                    value: v + sd * normal.sample(&mut rng),
                    error: if with_errors { Some(sd) } else { None },
                }
            })
            .collect();
        MagnetoTrace::new(Orientation::Perpendicular, Quantity::DeltaSigma, points).unwrap()
    }

    #[test]
    fn noise_free_perp_recovery() {
        let t = perp_trace(4.8, 73.6, 0.0, 0, false);
        let f = fit_perp(&t, &PerpFitOptions::default()).unwrap();
        assert!((f.l_nm.value / 4.8 - 1.0).abs() < 1e-6, "{:?}", f.l_nm);
        assert!((f.lphi_nm.value / 73.6 - 1.0).abs() < 1e-6, "{:?}", f.lphi_nm);
        assert!(f.valid);
    }

    #[test]
    fn errors_shrink_with_noise() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for noise in [1e-2, 1e-3, 1e-4] {
            let f = fit_perp(&perp_trace(4.8, 73.6, noise, 7, true), &PerpFitOptions::default()).unwrap();
            let err = ((f.l_nm.value / 4.8 - 1.0).abs(), (f.lphi_nm.value / 73.6 - 1.0).abs());
            assert!(f.l_nm.sigma < prev.0 && f.lphi_nm.sigma < prev.1);
            // within 4σ of truth at every noise level
            assert!(err.0 * 4.8 < 4.0 * f.l_nm.sigma && err.1 * 73.6 < 4.0 * f.lphi_nm.sigma);
            prev = (f.l_nm.sigma, f.lphi_nm.sigma);
        }
    }

    #[test]
    fn lphi_below_l_is_flagged_not_clamped() {
        let t = perp_trace(30.0, 20.0, 0.0, 0, false);
        let f = fit_perp(&t, &PerpFitOptions::default()).unwrap();
        assert!(!f.valid);
        assert!((f.lphi_nm.value / 20.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn perp_preconditions() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (1.0 + 0.1 * i as f64, 1e-5)).collect();
        let t = MagnetoTrace::from_pairs(Orientation::Perpendicular, Quantity::DeltaSigma, &pts).unwrap();
        assert!(matches!(
            fit_perp(&t, &PerpFitOptions::default()),
            Err(Error::Domain(_))
        ));
        let t = MagnetoTrace::from_pairs(Orientation::Parallel, Quantity::DeltaSigma, &pts).unwrap();
        assert!(matches!(
            fit_perp(&t, &PerpFitOptions::default()),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            MagnetoTrace::from_pairs(Orientation::Perpendicular, Quantity::DeltaSigma, &pts[..3]),
            Err(Error::InsufficientData { needed: 5, got: 3 })
        ));
    }

    fn parallel_trace(gamma: f64, noise: f64, seed: u64) -> MagnetoTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let pts: Vec<(f64, f64)> = (1..=40)
            .map(|i| {
                let b = 9.0 * i as f64 / 40.0;
                let v = delta_sigma_parallel(b, gamma).unwrap();
                (b, v * (1.0 + noise * normal.sample(&mut rng)))
            })
            .collect();
        MagnetoTrace::from_pairs(Orientation::Parallel, Quantity::DeltaSigma, &pts).unwrap()
    }

    #[test]
    fn parallel_recovery() {
        let f = fit_parallel(&parallel_trace(0.05, 0.0, 0)).unwrap();
        assert!((f.gamma_t2.value / 0.05 - 1.0).abs() < 1e-10);
        let f = fit_parallel(&parallel_trace(0.05, 0.01, 4)).unwrap();
        assert!((f.gamma_t2.value / 0.05 - 1.0).abs() < 0.03);
        assert!(f.gamma_t2.sigma > 0.0 && !f.unconstrained);
    }

    #[test]
    fn parallel_null_response() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 0.0)).collect();
        let t = MagnetoTrace::from_pairs(Orientation::Parallel, Quantity::DeltaSigma, &pts).unwrap();
        let f = fit_parallel(&t).unwrap();
        assert_eq!(f.gamma_t2.value, 0.0);
        assert!(f.unconstrained && f.gamma_t2.rel().is_infinite());
    }

    #[test]
    fn parallel_permutation_invariant() {
        let t = parallel_trace(0.02, 0.01, 9);
        let mut r = t.clone();
        r.points.reverse();
        r.points.swap(3, 17);
        let a = fit_parallel(&t).unwrap().gamma_t2.value;
        let b = fit_parallel(&r).unwrap().gamma_t2.value;
        assert!((a / b - 1.0).abs() < 1e-10);
    }

    fn sweep(p: f64, angles: &[f64]) -> MagnetoTrace {
        let params = WlParams {
            l_nm: Measured::exact(4.8),
            lphi_nm: Measured::exact(73.6),
            gamma_t2: Measured::exact(0.00775),
            p: Measured::exact(p),
            t_nm: None,
        };
        let pts: Vec<(f64, f64)> = angles
            .iter()
            .map(|&a| (a, delta_sigma_tilt(9.0, a, &params, TiltConvention::Geometric).unwrap()))
            .collect();
        MagnetoTrace::from_pairs(Orientation::AngleSweep { field_t: 9.0 }, Quantity::DeltaSigma, &pts).unwrap()
    }

    #[test]
    fn tilt_noise_free() {
        let angles: Vec<f64> = (0..=90).map(|a| a as f64).collect();
        let f = fit_tilt(&sweep(2.0, &angles), 4.8, 73.6, 0.00775, TiltConvention::Geometric).unwrap();
        assert!((f.p.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn tilt_single_angle_is_degenerate() {
        let t = sweep(2.0, &[90.0; 6]);
        assert!(matches!(
            fit_tilt(&t, 4.8, 73.6, 0.00775, TiltConvention::Geometric),
            Err(Error::Fit(_))
        ));
        // endpoints only: p never enters
        let t = sweep(2.0, &[0.0, 0.0, 0.0, 90.0, 90.0]);
        assert!(matches!(
            fit_tilt(&t, 4.8, 73.6, 0.00775, TiltConvention::Geometric),
            Err(Error::Fit(_))
        ));
    }
}
