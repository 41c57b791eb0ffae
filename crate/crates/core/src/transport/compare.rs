//! Before/after consistency check of two measurement runs.

use serde::{Deserialize, Serialize};

use super::hall::HallResult;
use super::hln::WlParams;
use crate::model::Measured;

/// Quantities characterizing one run. Any may be missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_cm2: Option<Measured>,
    pub mu_cm2_vs: Option<Measured>,
    pub l_nm: Option<Measured>,
    pub lphi_nm: Option<Measured>,
    pub gamma_t2: Option<Measured>,
    pub p: Option<Measured>,
    pub t_nm: Option<Measured>,
}

impl RunSummary {
    /// Hall quantities take precedence for L.
    pub fn from_results(hall: Option<&HallResult>, wl: Option<&WlParams>) -> Self {
        RunSummary {
            n_cm2: hall.map(|h| h.n_cm2),
            mu_cm2_vs: hall.map(|h| h.mu_cm2_vs),
            l_nm: hall.map(|h| h.l_nm).or(wl.map(|w| w.l_nm)),
            lphi_nm: wl.map(|w| w.lphi_nm),
            gamma_t2: wl.map(|w| w.gamma_t2),
            p: wl.map(|w| w.p),
            t_nm: wl.and_then(|w| w.t_nm),
        }
    }

    fn entries(&self) -> [(&'static str, &'static str, Option<Measured>); 7] {
        [
            ("n", "cm^-2", self.n_cm2),
            ("mu", "cm^2/(V s)", self.mu_cm2_vs),
            ("L", "nm", self.l_nm),
            ("L_phi", "nm", self.lphi_nm),
            ("gamma", "T^-2", self.gamma_t2),
            ("p", "1", self.p),
            ("t", "nm", self.t_nm),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityComparison {
    pub quantity: String,
    pub unit: String,
    pub before: Option<Measured>,
    pub after: Option<Measured>,
    /// after − before
    pub difference: Option<f64>,
    pub combined_sigma: Option<f64>,
    pub z_score: Option<f64>,
    pub consistent: Option<bool>,
    /// True when either run lacks this quantity.
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub k_sigma: f64,
    pub quantities: Vec<QuantityComparison>,
    /// Thickness change in Å with its combined error.
    pub thickness_change_angstrom: Option<Measured>,
    /// Every quantity present in both runs agrees within k·σ.
    pub all_consistent: bool,
    pub missing: Vec<String>,
}

pub const DEFAULT_K_SIGMA: f64 = 2.0;

/// Per-quantity difference, combined standard error √(σ_b² + σ_a²),
/// z-score and a consistency verdict at `k_sigma`.
pub fn compare_runs(before: &RunSummary, after: &RunSummary, k_sigma: f64) -> ComparisonReport {
    let mut quantities = Vec::new();
    let mut missing = Vec::new();
    for ((name, unit, b), (_, _, a)) in before.entries().into_iter().zip(after.entries()) {
        let mut q = QuantityComparison {
            quantity: name.into(),
            unit: unit.into(),
            before: b,
            after: a,
            difference: None,
            combined_sigma: None,
            z_score: None,
            consistent: None,
            missing: false,
        };
        match (b, a) {
            (Some(b), Some(a)) => {
                let diff = a.value - b.value;
                let sigma = b.sigma.hypot(a.sigma);
                let z = if sigma > 0.0 {
                    diff / sigma
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY.copysign(diff)
                };
                q.difference = Some(diff);
                q.combined_sigma = Some(sigma);
                q.z_score = Some(z);
                q.consistent = Some(z.abs() < k_sigma);
            }
            _ => {
                q.missing = true;
                missing.push(name.to_string());
            }
        }
        quantities.push(q);
    }
    let thickness_change_angstrom = match (before.t_nm, after.t_nm) {
        (Some(b), Some(a)) => Some(Measured::new((a.value - b.value) * 10.0, b.sigma.hypot(a.sigma) * 10.0)),
        _ => None,
    };
    let all_consistent = quantities.iter().all(|q| q.consistent != Some(false));
    ComparisonReport {
        k_sigma,
        quantities,
        thickness_change_angstrom,
        all_consistent,
        missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device_before() -> RunSummary {
        RunSummary {
            n_cm2: Some(Measured::new(1.31e14, 0.03e14)),
            l_nm: Some(Measured::new(4.8, 0.1)),
            lphi_nm: Some(Measured::new(73.6, 0.4)),
            p: Some(Measured::new(1.9, 0.3)),
            t_nm: Some(Measured::new(0.98, 0.02)),
            ..RunSummary::default()
        }
    }

    fn device_after() -> RunSummary {
        RunSummary {
            n_cm2: Some(Measured::new(1.27e14, 0.06e14)),
            l_nm: Some(Measured::new(4.9, 0.2)),
            lphi_nm: Some(Measured::new(74.2, 0.3)),
            p: Some(Measured::new(2.3, 0.5)),
            t_nm: Some(Measured::new(0.97, 0.02)),
            ..RunSummary::default()
        }
    }

    #[test]
    fn identical_runs_zero_z() {
        let r = compare_runs(&device_before(), &device_before(), DEFAULT_K_SIGMA);
        assert!(r.quantities.iter().filter_map(|q| q.z_score).all(|z| z == 0.0));
        assert!(r.all_consistent);
    }

    #[test]
    fn device_runs_consistent() {
        let r = compare_runs(&device_before(), &device_after(), DEFAULT_K_SIGMA);
        for q in &r.quantities {
            if let Some(z) = q.z_score {
                assert!(z.abs() < 2.0, "{} z = {z}", q.quantity);
            }
        }
        assert!(r.all_consistent);
        let dt = r.thickness_change_angstrom.unwrap();
        assert!((dt.value.abs() - 0.1).abs() < 1e-12);
        assert_eq!(r.missing, vec!["mu".to_string(), "gamma".to_string()]);
    }

    #[test]
    fn exact_but_different_is_inconsistent() {
        let b = RunSummary {
            p: Some(Measured::exact(1.0)),
            ..RunSummary::default()
        };
        let a = RunSummary {
            p: Some(Measured::exact(2.0)),
            ..RunSummary::default()
        };
        let r = compare_runs(&b, &a, DEFAULT_K_SIGMA);
        assert!(!r.all_consistent);
    }
}
