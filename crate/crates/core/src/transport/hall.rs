//! Carrier density, mobility and mean free path from Hall data.

use serde::{Deserialize, Serialize};

use super::fit::{MagnetoTrace, Quantity};
use crate::error::{Error, Result};
use crate::model::{Measured, CODATA_2018};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallResult {
    /// Sheet carrier density, cm⁻².
    pub n_cm2: Measured,
    /// cm²/(V·s)
    pub mu_cm2_vs: Measured,
    /// Mean free path ħ√(2πn)·μ/e, nm.
    pub l_nm: Measured,
    /// Zero-field sheet conductance, S per square.
    pub sigma_sheet_s: Measured,
    /// dR_xy/dB, Ω/T.
    pub slope_ohm_t: Measured,
    pub intercept_ohm: f64,
    /// RMS of the unweighted regression residuals, Ω.
    pub residual_rms_ohm: f64,
}

/// Hall slope 1/(n·e) for a sheet density in cm⁻², Ω/T.
pub fn hall_slope(n_cm2: f64) -> f64 {
    1.0 / (n_cm2 * 1e4 * CODATA_2018.e)
}

/// Mean free path ħ√(2πn)·μ/e, nm, from n in cm⁻² and μ in cm²/(V·s).
pub fn mean_free_path_nm(n_cm2: f64, mu_cm2_vs: f64) -> f64 {
    let c = CODATA_2018;
    let n = n_cm2 * 1e4;
    let mu = mu_cm2_vs * 1e-4;
    c.hbar * (2.0 * std::f64::consts::PI * n).sqrt() * mu / c.e * 1e9
}

/// Mobility implied by a density and mean free path, cm²/(V·s).
pub fn mobility_for_mean_free_path(n_cm2: f64, l_nm: f64) -> f64 {
    l_nm / mean_free_path_nm(n_cm2, 1.0)
}

/// Weighted straight-line fit y = a + s·x; returns (s, σ_s, a, rms).
fn linear_regression(trace: &MagnetoTrace) -> Result<(f64, f64, f64, f64)> {
    let weights = trace.weights();
    let w: Vec<f64> = match &weights {
        Some(w) => w.iter().map(|v| v * v).collect(),
        None => vec![1.0; trace.points.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = trace.points.iter().zip(&w).map(|(p, wi)| wi * p.x).sum::<f64>() / sw;
    let my = trace.points.iter().zip(&w).map(|(p, wi)| wi * p.value).sum::<f64>() / sw;
    let sxx: f64 = trace.points.iter().zip(&w).map(|(p, wi)| wi * (p.x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("all field values are equal".into()));
    }
    let sxy: f64 = trace
        .points
        .iter()
        .zip(&w)
        .map(|(p, wi)| wi * (p.x - mx) * (p.value - my))
        .sum();
    let s = sxy / sxx;
    let a = my - s * mx;
    let resid: Vec<f64> = trace.points.iter().map(|p| p.value - a - s * p.x).collect();
    let chi2: f64 = resid.iter().zip(&w).map(|(r, wi)| wi * r * r).sum();
    let dof = trace.points.len() - 2;
    let var_s = if weights.is_some() {
        1.0 / sxx
    } else {
        chi2 / dof as f64 / sxx
    };
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    Ok((s, var_s.sqrt(), a, rms))
}

/// n = 1/(s·e), μ = σ_sheet/(n·e), L = ħ√(2πn)·μ/e, with
/// uncertainties propagated from the slope and the sheet conductance.
pub fn hall_analysis(trace: &MagnetoTrace, sigma_sheet_s: Measured) -> Result<HallResult> {
    trace.validate()?;
    if trace.quantity != Quantity::Rxy {
        return Err(Error::Config("Hall analysis needs R_xy data".into()));
    }
    if !(sigma_sheet_s.value > 0.0) {
        return Err(Error::Domain("sheet conductance must be > 0".into()));
    }
    let (s, s_err, a, rms) = linear_regression(trace)?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!(
            "Hall slope {s:.4e} ohm/T is not positive: wrong carrier sign or reversed wiring"
        )));
    }
    let e = CODATA_2018.e;
    let n_m2 = 1.0 / (s * e);
    let n_cm2 = n_m2 * 1e-4;
    let mu_cm2 = sigma_sheet_s.value / (n_m2 * e) * 1e4;
    let rel_n = s_err / s;
    let rel_sig = sigma_sheet_s.rel();
    let rel_mu = rel_n.hypot(rel_sig);
    // L ∝ σ_sheet · n^(-1/2)
    let rel_l = rel_sig.hypot(0.5 * rel_n);
    let l = mean_free_path_nm(n_cm2, mu_cm2);
    Ok(HallResult {
        n_cm2: Measured::new(n_cm2, n_cm2 * rel_n),
        mu_cm2_vs: Measured::new(mu_cm2, mu_cm2 * rel_mu),
        l_nm: Measured::new(l, l * rel_l),
        sigma_sheet_s,
        slope_ohm_t: Measured::new(s, s_err),
        intercept_ohm: a,
        residual_rms_ohm: rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::fit::Orientation;
    use approx::assert_relative_eq;

    fn rxy(slope: f64, offset: f64) -> MagnetoTrace {
        let pts: Vec<(f64, f64)> = (-9..=9).map(|i| (i as f64, offset + slope * i as f64)).collect();
        MagnetoTrace::from_pairs(Orientation::Perpendicular, Quantity::Rxy, &pts).unwrap()
    }

    #[test]
    fn slope_for_device_density() {
        assert_relative_eq!(hall_slope(1.31e14), 4.764_510_743_863_177_563, max_relative = 1e-13);
    }

    #[test]
    fn mobility_inversion() {
        assert_relative_eq!(
            mobility_for_mean_free_path(1.31e14, 4.8),
            25.418_498_242_193_609_65,
            max_relative = 1e-12
        );
    }

    #[test]
    fn analysis_round_trip() {
        let mu = 25.4;
        let n = 1.31e14;
        let sigma = n * 1e4 * CODATA_2018.e * mu * 1e-4;
        let r = hall_analysis(&rxy(hall_slope(n), 0.3), Measured::new(sigma, 0.01 * sigma)).unwrap();
        assert_relative_eq!(r.n_cm2.value, n, max_relative = 1e-12);
        assert_relative_eq!(r.mu_cm2_vs.value, mu, max_relative = 1e-12);
        assert_relative_eq!(r.l_nm.value, mean_free_path_nm(n, mu), max_relative = 1e-12);
        assert_relative_eq!(r.intercept_ohm, 0.3, max_relative = 1e-10);
        // exact line: only the conductance error remains
        assert_relative_eq!(r.l_nm.rel(), 0.01, max_relative = 1e-6);
    }

    #[test]
    fn negative_slope_is_sign_error() {
        assert!(matches!(
            hall_analysis(&rxy(-4.7, 0.0), Measured::exact(1e-3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn needs_rxy() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, i as f64)).collect();
        let t = MagnetoTrace::from_pairs(Orientation::Perpendicular, Quantity::DeltaSigma, &pts).unwrap();
        assert!(matches!(
            hall_analysis(&t, Measured::exact(1e-3)),
            Err(Error::Config(_))
        ));
    }
}
