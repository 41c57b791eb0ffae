//! Layer thickness from the perpendicular and in-plane responses.
//!
//! t = (4π)^(−1/4) · (ħ / (e·L_φ)) · (√n · L · γ)^(1/2)
//!
//! evaluated in SI: ħ/(e·L_φ) is in T·m, √n·L is dimensionless and γ is in
//! T⁻², so the last factor is in T⁻¹ and t comes out in metres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Measured, CODATA_2018};

/// (4π)^(−1/4) · ħ/(e·L_φ) in T·m.
fn prefactor(lphi_nm: f64) -> f64 {
    let c = CODATA_2018;
    (4.0 * std::f64::consts::PI).powf(-0.25) * c.hbar / (c.e * lphi_nm * 1e-9)
}

/// √n · L with n in cm⁻² and L in nm, dimensionless.
fn sqrt_n_l(n_cm2: f64, l_nm: f64) -> f64 {
    (n_cm2 * 1e4).sqrt() * l_nm * 1e-9
}

fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} = {v} must be finite and > 0")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessInputs {
    pub lphi_nm: Measured,
    pub l_nm: Measured,
    pub n_cm2: Measured,
    pub gamma_t2: Measured,
}

/// Thickness in nm with its propagated error. γ = 0 gives t = 0; every
/// other input must be positive.
pub fn thickness(inputs: &ThicknessInputs) -> Result<Measured> {
    let ThicknessInputs {
        lphi_nm,
        l_nm,
        n_cm2,
        gamma_t2,
    } = *inputs;
    check_positive(&[("L_phi", lphi_nm.value), ("L", l_nm.value), ("n", n_cm2.value)])?;
    if !(gamma_t2.value >= 0.0) || !gamma_t2.value.is_finite() {
        return Err(Error::Domain(format!("gamma = {} must be >= 0", gamma_t2.value)));
    }
    let t_m = prefactor(lphi_nm.value) * (sqrt_n_l(n_cm2.value, l_nm.value) * gamma_t2.value).sqrt();
    let t = t_m * 1e9;
    if t == 0.0 {
        return Ok(Measured::exact(0.0));
    }
    // t ∝ L_φ⁻¹ · L^½ · n^¼ · γ^½
    let rel = (lphi_nm.rel().powi(2)
        + (0.5 * l_nm.rel()).powi(2)
        + (0.25 * n_cm2.rel()).powi(2)
        + (0.5 * gamma_t2.rel()).powi(2))
    .sqrt();
    Ok(Measured::new(t, t * rel))
}

/// γ in T⁻² that yields thickness `t_nm` for the given L_φ, L and n.
pub fn gamma_for_thickness(t_nm: f64, lphi_nm: f64, l_nm: f64, n_cm2: f64) -> Result<f64> {
    check_positive(&[("L_phi", lphi_nm), ("L", l_nm), ("n", n_cm2)])?;
    if !(t_nm >= 0.0) {
        return Err(Error::Domain(format!("t = {t_nm} must be >= 0")));
    }
    let ratio = t_nm * 1e-9 / prefactor(lphi_nm);
    Ok(ratio * ratio / sqrt_n_l(n_cm2, l_nm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inputs(gamma: f64) -> ThicknessInputs {
        ThicknessInputs {
            lphi_nm: Measured::exact(73.6),
            l_nm: Measured::exact(4.8),
            n_cm2: Measured::exact(1.31e14),
            gamma_t2: Measured::exact(gamma),
        }
    }

    #[test]
    fn round_trip_at_device_values() {
        let g = gamma_for_thickness(0.98, 73.6, 4.8, 1.31e14).unwrap();
        assert_relative_eq!(g, 0.007_748_261_913_949_909_640, max_relative = 1e-12);
        let t = thickness(&inputs(g)).unwrap();
        assert!((t.value / 0.98 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_gamma_zero_thickness() {
        assert_eq!(thickness(&inputs(0.0)).unwrap().value, 0.0);
    }

    #[test]
    fn nonpositive_inputs_rejected() {
        let mut i = inputs(0.01);
        i.l_nm = Measured::exact(0.0);
        assert!(matches!(thickness(&i), Err(Error::Domain(_))));
        assert!(matches!(thickness(&inputs(-0.01)), Err(Error::Domain(_))));
        assert!(gamma_for_thickness(1.0, 73.6, 4.8, -1.0).is_err());
    }

    #[test]
    fn error_propagation_exponents() {
        let mut i = inputs(0.0077);
        i.n_cm2 = Measured::new(1.31e14, 0.04 * 1.31e14);
        let t = thickness(&i).unwrap();
        assert_relative_eq!(t.rel(), 0.01, max_relative = 1e-12);
        i.n_cm2 = Measured::exact(1.31e14);
        i.lphi_nm = Measured::new(73.6, 0.736);
        assert_relative_eq!(thickness(&i).unwrap().rel(), 0.01, max_relative = 1e-12);
    }

    /// Exponents of (kg, m, s, A) carried through the formula symbolically.
    #[derive(Debug, Clone, Copy, PartialEq)]
    struct Dim([i32; 4]);

    impl Dim {
        const NONE: Dim = Dim([0; 4]);
        fn mul(self, o: Dim) -> Dim {
            Dim(std::array::from_fn(|i| self.0[i] + o.0[i]))
        }
        fn div(self, o: Dim) -> Dim {
            Dim(std::array::from_fn(|i| self.0[i] - o.0[i]))
        }
        /// Halve; every exponent must be even.
        fn sqrt(self) -> Dim {
            assert!(self.0.iter().all(|e| e % 2 == 0), "odd exponent under sqrt: {self:?}");
            Dim(self.0.map(|e| e / 2))
        }
    }

    #[test]
    fn dimensional_analysis() {
        let metre = Dim([0, 1, 0, 0]);
        let second = Dim([0, 0, 1, 0]);
        let kg = Dim([1, 0, 0, 0]);
        let ampere = Dim([0, 0, 0, 1]);
        let coulomb = ampere.mul(second);
        let joule = kg.mul(metre).mul(metre).div(second).div(second);
        // T = kg / (A s²)
        let tesla = kg.div(ampere).div(second).div(second);

        let hbar = joule.mul(second);
        let flux_per_length = hbar.div(coulomb.mul(metre));
        assert_eq!(flux_per_length, tesla.mul(metre));

        let n = Dim::NONE.div(metre.mul(metre));
        let gamma = Dim::NONE.div(tesla.mul(tesla));
        let inner = n.sqrt().mul(metre).mul(gamma);
        let t = flux_per_length.mul(inner.sqrt());
        assert_eq!(t, metre);
    }
}
