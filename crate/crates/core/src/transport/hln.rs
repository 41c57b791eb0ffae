//! Weak-localization magnetoconductance of a thin two-dimensional channel.
//!
//! Perpendicular field (HLN):
//!   Δσ⊥ = σ0 [ψ(½ + Bφ/B) − ψ(½ + B_L/B) + ln(B_L/Bφ)],
//! written here as σ0 [f(Bφ/B) − f(B_L/B)] with f(x) = ψ(½ + x) − ln x,
//! which is well conditioned at every field and tends to zero as x → ∞.
//! Parallel field: Δσ∥ = σ0 ln(1 + γB²).

use serde::{Deserialize, Serialize};

use super::special::{digamma, trigamma};
use crate::error::{Error, Result};
use crate::model::{Measured, CODATA_2018};

/// e² / (2π²ħ), S.
pub fn sigma0() -> f64 {
    let c = CODATA_2018;
    c.e * c.e / (2.0 * std::f64::consts::PI.powi(2) * c.hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicFields {
    /// ħ / (4e L_φ²), T.
    pub b_phi_t: f64,
    /// ħ / (2e L²), T.
    pub b_l_t: f64,
    /// e² / (2π²ħ), S.
    pub sigma0_s: f64,
}

pub fn characteristic_fields(l_nm: f64, lphi_nm: f64) -> Result<CharacteristicFields> {
    if !(l_nm > 0.0 && lphi_nm > 0.0) || !l_nm.is_finite() || !lphi_nm.is_finite() {
        return Err(Error::Domain(format!(
            "lengths must be finite and > 0 (L = {l_nm} nm, L_phi = {lphi_nm} nm)"
        )));
    }
    let c = CODATA_2018;
    let l = l_nm * 1e-9;
    let lphi = lphi_nm * 1e-9;
    Ok(CharacteristicFields {
        b_phi_t: c.hbar / (4.0 * c.e * lphi * lphi),
        b_l_t: c.hbar / (2.0 * c.e * l * l),
        sigma0_s: sigma0(),
    })
}

// Beyond this argument f and f' use their asymptotic expansions, avoiding
// cancellation between ψ(½ + x) and ln x.
const F_ASYMPTOTIC_FROM: f64 = 20.0;

/// f(x) = ψ(½ + x) − ln x for x > 0.
fn hln_f(x: f64) -> f64 {
    if x >= F_ASYMPTOTIC_FROM {
        let z = 1.0 / (x * x);
        z * (1.0 / 24.0 - z * (7.0 / 960.0 - z * (31.0 / 8064.0 - z * (127.0 / 30720.0 - z * 2555.0 / 337920.0))))
    } else {
        digamma(0.5 + x).expect("argument above 1/2") - x.ln()
    }
}

/// f'(x) = ψ'(½ + x) − 1/x.
fn hln_f_prime(x: f64) -> f64 {
    if x >= F_ASYMPTOTIC_FROM {
        let z = 1.0 / (x * x);
        -z / x * (1.0 / 12.0 - z * (7.0 / 240.0 - z * (31.0 / 1344.0 - z * (127.0 / 3840.0 - z * 2555.0 / 33792.0))))
    } else {
        trigamma(0.5 + x).expect("argument above 1/2") - 1.0 / x
    }
}

fn check_field(b: f64) -> Result<()> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("field {b} T must be finite and >= 0")));
    }
    Ok(())
}

/// Δσ for a perpendicular field, S per square. Returns the analytic limit 0
/// at B = 0.
pub fn delta_sigma_perp(b_t: f64, l_nm: f64, lphi_nm: f64) -> Result<f64> {
    Ok(delta_sigma_perp_jacobian(b_t, l_nm, lphi_nm)?.0)
}

/// Δσ⊥ together with its derivatives with respect to ln L and ln L_φ.
pub fn delta_sigma_perp_jacobian(b_t: f64, l_nm: f64, lphi_nm: f64) -> Result<(f64, f64, f64)> {
    check_field(b_t)?;
    let f = characteristic_fields(l_nm, lphi_nm)?;
    if b_t == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let a = f.b_phi_t / b_t;
    let b = f.b_l_t / b_t;
    let s0 = f.sigma0_s;
    let value = s0 * (hln_f(a) - hln_f(b));
    // a ∝ L_φ⁻², b ∝ L⁻²
    let d_ln_l = 2.0 * s0 * b * hln_f_prime(b);
    let d_ln_lphi = -2.0 * s0 * a * hln_f_prime(a);
    Ok((value, d_ln_l, d_ln_lphi))
}

/// Δσ for an in-plane field, S per square.
pub fn delta_sigma_parallel(b_t: f64, gamma_t2: f64) -> Result<f64> {
    check_field(b_t)?;
    if !(gamma_t2 >= 0.0) || !gamma_t2.is_finite() {
        return Err(Error::Domain(format!("gamma {gamma_t2} must be finite and >= 0")));
    }
    Ok(sigma0() * (gamma_t2 * b_t * b_t).ln_1p())
}

/// How a field of magnitude B at angle θ above the plane is split between
/// the perpendicular and in-plane responses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltConvention {
    /// B⊥ = B sin θ, B∥ = B cos θ.
    #[default]
    Geometric,
    /// B⊥ = B sin θ, B∥ = B: the in-plane response is taken at the full
    /// field magnitude.
    FullParallel,
}

/// Weak-localization parameter set with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlParams {
    pub l_nm: Measured,
    pub lphi_nm: Measured,
    pub gamma_t2: Measured,
    pub p: Measured,
    pub t_nm: Option<Measured>,
}

impl WlParams {
    /// Weak localization requires the coherence length to exceed the mean
    /// free path.
    pub fn is_valid(&self) -> bool {
        self.lphi_nm.value > self.l_nm.value
    }
}

/// sin and cos of an angle in degrees, exact at 0° and 90°.
fn sin_cos_deg(angle_deg: f64) -> (f64, f64) {
    if angle_deg == 90.0 {
        (1.0, 0.0)
    } else if angle_deg == 0.0 {
        (0.0, 1.0)
    } else {
        angle_deg.to_radians().sin_cos()
    }
}

/// Both orientation responses for a tilted field.
pub fn tilt_components(b_t: f64, angle_deg: f64, params: &WlParams, convention: TiltConvention) -> Result<(f64, f64)> {
    check_field(b_t)?;
    if !(0.0..=90.0).contains(&angle_deg) {
        return Err(Error::Domain(format!("angle {angle_deg} deg not in [0, 90]")));
    }
    let (s, c) = sin_cos_deg(angle_deg);
    let b_par = match convention {
        TiltConvention::Geometric => b_t * c,
        TiltConvention::FullParallel => b_t,
    };
    let perp = delta_sigma_perp(b_t * s, params.l_nm.value, params.lphi_nm.value)?;
    let par = delta_sigma_parallel(b_par, params.gamma_t2.value)?;
    Ok((perp, par))
}

/// (Δσ⊥^p + Δσ∥^p)^(1/p). A vanishing component returns the other exactly.
pub fn combine_tilt(perp: f64, par: f64, p: f64) -> f64 {
    if perp == 0.0 {
        return par;
    }
    if par == 0.0 {
        return perp;
    }
    // scale out σ0 to keep the powers in range
    let s0 = sigma0();
    let (x, y) = (perp / s0, par / s0);
    s0 * (x.powf(p) + y.powf(p)).powf(1.0 / p)
}

/// Δσ at field magnitude `b_t` tilted `angle_deg` above the plane
/// (90° = perpendicular).
pub fn delta_sigma_tilt(b_t: f64, angle_deg: f64, params: &WlParams, convention: TiltConvention) -> Result<f64> {
    let p = params.p.value;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p = {p} must be > 0")));
    }
    let (perp, par) = tilt_components(b_t, angle_deg, params, convention)?;
    Ok(combine_tilt(perp, par, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const L: f64 = 4.8;
    const LPHI: f64 = 73.6;

    fn params(p: f64, gamma: f64) -> WlParams {
        WlParams {
            l_nm: Measured::exact(L),
            lphi_nm: Measured::exact(LPHI),
            gamma_t2: Measured::exact(gamma),
            p: Measured::exact(p),
            t_nm: None,
        }
    }

    #[test]
    fn sigma0_value() {
        assert_relative_eq!(sigma0(), 1.233_147_099_092_807e-5, max_relative = 1e-13);
    }

    #[test]
    fn characteristic_field_values() {
        let f = characteristic_fields(L, LPHI).unwrap();
        assert_relative_eq!(f.b_phi_t, 0.030_377_368_327_789_363, max_relative = 1e-13);
        assert_relative_eq!(f.b_l_t, 14.284_113_640_356_064_927, max_relative = 1e-13);
        assert!(characteristic_fields(0.0, LPHI).is_err());
        assert!(characteristic_fields(L, -1.0).is_err());
    }

    #[test]
    fn perp_reference_values() {
        let want = [
            (0.01, 5.467_872_120_885_367_44e-8),
            (0.1, 2.899_224_881_231_316_623e-6),
            (1.0, 2.062_949_362_885_653_523e-5),
            (9.0, 4.598_114_890_813_971_310e-5),
        ];
        for (b, v) in want {
            assert_relative_eq!(delta_sigma_perp(b, L, LPHI).unwrap(), v, max_relative = 1e-11);
        }
    }

    #[test]
    fn asymptotic_branch_is_continuous() {
        for x in [F_ASYMPTOTIC_FROM, 25.0, 40.0] {
            let direct = digamma(0.5 + x).unwrap() - x.ln();
            assert_relative_eq!(hln_f(x), direct, max_relative = 1e-9);
            let direct_p = trigamma(0.5 + x).unwrap() - 1.0 / x;
            assert_relative_eq!(hln_f_prime(x), direct_p, max_relative = 1e-8);
        }
    }

    #[test]
    fn zero_field_and_saturation() {
        assert_eq!(delta_sigma_perp(0.0, L, LPHI).unwrap(), 0.0);
        assert_eq!(delta_sigma_parallel(0.0, 0.3).unwrap(), 0.0);
        let f = characteristic_fields(L, LPHI).unwrap();
        let high = delta_sigma_perp(1e6 * f.b_l_t, L, LPHI).unwrap();
        let limit = sigma0() * 6.153_205_396_201_915_927;
        assert!((high / limit - 1.0).abs() < 1e-3);
    }

    #[test]
    fn perp_monotone() {
        let mut prev = 0.0;
        for i in 1..=400 {
            let b = 1e-4 * 1.05f64.powi(i);
            let v = delta_sigma_perp(b, L, LPHI).unwrap();
            assert!(v > prev, "not increasing at {b} T");
            prev = v;
        }
    }

    #[test]
    fn parallel_examples() {
        assert_eq!(delta_sigma_parallel(5.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            delta_sigma_parallel(3.0, 1.0).unwrap(),
            sigma0() * 10f64.ln(),
            max_relative = 1e-15
        );
        assert!(delta_sigma_parallel(1.0, -0.1).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for &(b, l, lphi) in &[
            (0.05, 4.8, 73.6),
            (2.0, 3.0, 40.0),
            (8.5, 12.0, 300.0),
            (0.3, 1.5, 15.0),
        ] {
            let (_, dl, dphi) = delta_sigma_perp_jacobian(b, l, lphi).unwrap();
            let h: f64 = 1e-5;
            let fd_l = (delta_sigma_perp(b, l * h.exp(), lphi).unwrap()
                - delta_sigma_perp(b, l * (-h).exp(), lphi).unwrap())
                / (2.0 * h);
            let fd_phi = (delta_sigma_perp(b, l, lphi * h.exp()).unwrap()
                - delta_sigma_perp(b, l, lphi * (-h).exp()).unwrap())
                / (2.0 * h);
            assert_relative_eq!(dl, fd_l, max_relative = 1e-6);
            assert_relative_eq!(dphi, fd_phi, max_relative = 1e-6);
        }
    }

    #[test]
    fn tilt_endpoints_exact() {
        for p in [0.5, 1.0, 1.9, 2.0, 7.0] {
            let pr = params(p, 0.00775);
            for b in [0.5, 3.0, 9.0] {
                assert_eq!(
                    delta_sigma_tilt(b, 90.0, &pr, TiltConvention::Geometric).unwrap(),
                    delta_sigma_perp(b, L, LPHI).unwrap()
                );
                assert_eq!(
                    delta_sigma_tilt(b, 0.0, &pr, TiltConvention::Geometric).unwrap(),
                    delta_sigma_parallel(b, 0.00775).unwrap()
                );
            }
        }
    }

    #[test]
    fn tilt_sweep_rises_toward_perpendicular() {
        let pr = params(1.9, 0.00775);
        let vals: Vec<f64> = (0..=90)
            .map(|a| delta_sigma_tilt(9.0, a as f64, &pr, TiltConvention::Geometric).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
        // B⊥ = B sin θ passes B_φ within a fraction of a degree: a cusp at
        // in-plane and a flat top at perpendicular
        assert!(vals[5] - vals[0] > 5.0 * (vals[90] - vals[85]));
    }

    #[test]
    fn full_parallel_convention_differs() {
        let pr = params(2.0, 0.00775);
        let g = delta_sigma_tilt(9.0, 45.0, &pr, TiltConvention::Geometric).unwrap();
        let f = delta_sigma_tilt(9.0, 45.0, &pr, TiltConvention::FullParallel).unwrap();
        assert!(f > g);
    }
}
