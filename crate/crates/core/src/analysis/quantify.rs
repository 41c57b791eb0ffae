//! Absolute quantification against a reference sample of known density.

use serde::{Deserialize, Serialize};

use super::map::IntensityMap;
use crate::error::{Error, Result};
use crate::model::Measured;

/// Counts-to-density conversion valid under one set of acquisition conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFactor {
    pub element: String,
    /// cm⁻² per count.
    pub factor: f64,
    pub rel_uncertainty: f64,
    pub fingerprint: String,
}

/// Areal-density map, cm⁻². Counting and calibration uncertainties are kept
/// apart; `sigma` combines them in quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    pub element: String,
    pub nx: usize,
    pub ny: usize,
    pub pitch_x_um: f64,
    pub pitch_y_um: f64,
    pub origin_um: (f64, f64),
    pub density_cm2: Vec<f64>,
    pub sigma_counting: Vec<f64>,
    pub sigma_calibration: Vec<f64>,
    pub sigma: Vec<f64>,
    pub flags: Vec<Option<String>>,
}

impl DensityMap {
    /// Mean density over the unflagged pixels whose centers satisfy `select`,
    /// with counting and total standard errors of the mean. The calibration
    /// part is fully correlated between pixels and does not average down.
    pub fn region_mean(&self, select: impl Fn(f64, f64) -> bool) -> Option<RegionMean> {
        let mut n = 0usize;
        let (mut sum, mut var_count, mut cal) = (0.0, 0.0, 0.0);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let k = iy * self.nx + ix;
                let x = self.origin_um.0 + ix as f64 * self.pitch_x_um;
                let y = self.origin_um.1 + iy as f64 * self.pitch_y_um;
                if self.flags[k].is_some() || !select(x, y) {
                    continue;
                }
                n += 1;
                sum += self.density_cm2[k];
                var_count += self.sigma_counting[k].powi(2);
                cal += self.sigma_calibration[k];
            }
        }
        if n == 0 {
            return None;
        }
        let nf = n as f64;
        let sigma_counting = var_count.sqrt() / nf;
        let sigma_calibration = cal / nf;
        Some(RegionMean {
            pixels: n,
            mean: sum / nf,
            sigma_counting,
            sigma_calibration,
            sigma: sigma_counting.hypot(sigma_calibration),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMean {
    pub pixels: usize,
    pub mean: f64,
    pub sigma_counting: f64,
    pub sigma_calibration: f64,
    pub sigma: f64,
}

/// Mean amplitude of a uniform reference scan with its standard error.
pub fn reference_amplitude(map: &IntensityMap) -> Result<Measured> {
    let good: Vec<usize> = (0..map.values.len()).filter(|&k| map.flags[k].is_none()).collect();
    if good.is_empty() {
        return Err(Error::Calibration("reference map has no valid pixels".into()));
    }
    let n = good.len() as f64;
    let mean = good.iter().map(|&k| map.values[k]).sum::<f64>() / n;
    let sigma = good.iter().map(|&k| map.sigma[k].powi(2)).sum::<f64>().sqrt() / n;
    Ok(Measured::new(mean, sigma))
}

/// factor = known_density / reference_amplitude, relative errors in quadrature.
pub fn calibrate_reference(
    element: &str,
    ref_amplitude: Measured,
    known_density_cm2: Measured,
    fingerprint: &str,
) -> Result<CalibrationFactor> {
    if !(ref_amplitude.value > 0.0) || !(known_density_cm2.value > 0.0) {
        return Err(Error::Domain(
            "reference amplitude and known density must both be > 0".into(),
        ));
    }
    if !(ref_amplitude.sigma >= 0.0 && known_density_cm2.sigma >= 0.0) {
        return Err(Error::Domain("uncertainties must be >= 0".into()));
    }
    Ok(CalibrationFactor {
        element: element.to_string(),
        factor: known_density_cm2.value / ref_amplitude.value,
        rel_uncertainty: ref_amplitude.rel().hypot(known_density_cm2.rel()),
        fingerprint: fingerprint.to_string(),
    })
}

/// Convert an intensity map to areal density. Negative-free by construction
/// since fitted amplitudes are non-negative.
pub fn quantify_map(map: &IntensityMap, calibration: &CalibrationFactor) -> Result<DensityMap> {
    if map.element != calibration.element {
        return Err(Error::Calibration(format!(
            "calibration is for {} but the map is {}",
            calibration.element, map.element
        )));
    }
    if map.fingerprint != calibration.fingerprint {
        return Err(Error::Calibration(format!(
            "acquisition conditions differ: map [{}] vs reference [{}]",
            map.fingerprint, calibration.fingerprint
        )));
    }
    let f = calibration.factor;
    let density: Vec<f64> = map.values.iter().map(|v| v * f).collect();
    let sigma_counting: Vec<f64> = map.sigma.iter().map(|s| s * f).collect();
    let sigma_calibration: Vec<f64> = density.iter().map(|d| d * calibration.rel_uncertainty).collect();
    let sigma = sigma_counting
        .iter()
        .zip(&sigma_calibration)
        .map(|(a, b)| a.hypot(*b))
        .collect();
    Ok(DensityMap {
        element: map.element.clone(),
        nx: map.nx,
        ny: map.ny,
        pitch_x_um: map.pitch_x_um,
        pitch_y_um: map.pitch_y_um,
        origin_um: map.origin_um,
        density_cm2: density,
        sigma_counting,
        sigma_calibration,
        sigma,
        flags: map.flags.clone(),
    })
}

/// Fraction of dopants that are electrically active, percent:
/// 100 · n_hall / n_xrf with relative errors in quadrature.
pub fn activation(n_xrf: Measured, n_hall: Measured) -> Result<Measured> {
    if !(n_xrf.value > 0.0 && n_hall.value > 0.0) {
        return Err(Error::Domain("densities must be > 0".into()));
    }
    let pct = 100.0 * n_hall.value / n_xrf.value;
    Ok(Measured::new(pct, pct * n_xrf.rel().hypot(n_hall.rel())))
}
