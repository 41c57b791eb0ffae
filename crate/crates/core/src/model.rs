//! Shared domain types, physical constants and unit conversions.
//!
//! Units follow the field names: energies in keV, beam spot in μm, detector
//! distance in cm, detector area in mm², areal densities in cm⁻².

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values. Not configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Elementary charge, C.
    pub e: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Electron rest energy, keV.
    pub m_e_c2: f64,
}

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    e: 1.602_176_634e-19,
    hbar: 1.054_571_817e-34,
    m_e_c2: 510.998_950_00,
};

pub const AVOGADRO: f64 = 6.022_140_76e23;
pub const KEV_TO_J: f64 = 1.602_176_634e-16;

/// A value with its one-sigma standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Measured { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Measured { value, sigma: 0.0 }
    }

    /// Relative uncertainty; infinite for a zero value with nonzero sigma.
    pub fn rel(&self) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            (self.sigma / self.value).abs()
        }
    }

    pub fn scale(&self, k: f64) -> Measured {
        Measured::new(self.value * k, self.sigma * k.abs())
    }
}

/// Incident beam conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub photon_energy_kev: f64,
    pub flux_photons_s: f64,
    pub spot_width_um: f64,
    pub spot_height_um: f64,
    /// ΔE/E of the monochromator.
    pub energy_resolution: f64,
    pub dwell_s: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            photon_energy_kev: 11.88,
            flux_photons_s: 1e10,
            spot_width_um: 1.0,
            spot_height_um: 1.0,
            energy_resolution: 1e-4,
            dwell_s: 0.2,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("beam: {what}")));
        if !(self.photon_energy_kev > 0.0) {
            return bad("photon_energy_kev must be > 0");
        }
        if !(self.flux_photons_s > 0.0) {
            return bad("flux_photons_s must be > 0");
        }
        if !(self.spot_width_um > 0.0 && self.spot_height_um > 0.0) {
            return bad("spot dimensions must be > 0");
        }
        if !(self.energy_resolution > 0.0 && self.energy_resolution < 1.0) {
            return bad("energy_resolution must lie in (0, 1)");
        }
        if !(self.dwell_s > 0.0) {
            return bad("dwell_s must be > 0");
        }
        Ok(())
    }

    pub fn spot_area_um2(&self) -> f64 {
        self.spot_width_um * self.spot_height_um
    }

    /// Incident photons during one dwell.
    pub fn photons_per_dwell(&self) -> f64 {
        self.flux_photons_s * self.dwell_s
    }
}

/// Energy-dispersive detector geometry and response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub distance_cm: f64,
    pub active_area_mm2: f64,
    pub energy_bins: usize,
    pub bin_width_kev: f64,
    pub first_edge_kev: f64,
    pub noise_fwhm_kev: f64,
    pub fano_factor: f64,
    pub pair_energy_kev: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            distance_cm: 2.0,
            active_area_mm2: 50.0,
            energy_bins: 1300,
            bin_width_kev: 0.01,
            first_edge_kev: 0.0,
            noise_fwhm_kev: 0.05,
            fano_factor: 0.115,
            pair_energy_kev: 0.003_85,
        }
    }
}

/// 2·sqrt(2·ln 2), FWHM of a unit-sigma Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("detector: {what}")));
        if !(self.distance_cm > 0.0) {
            return bad("distance_cm must be > 0");
        }
        if !(self.active_area_mm2 > 0.0) {
            return bad("active_area_mm2 must be > 0");
        }
        if self.energy_bins < 2 {
            return bad("energy_bins must be >= 2");
        }
        if !(self.bin_width_kev > 0.0) {
            return bad("bin_width_kev must be > 0");
        }
        if !(self.noise_fwhm_kev >= 0.0 && self.fano_factor >= 0.0 && self.pair_energy_kev >= 0.0) {
            return bad("resolution parameters must be >= 0");
        }
        if self.noise_fwhm_kev == 0.0 && (self.fano_factor == 0.0 || self.pair_energy_kev == 0.0) {
            return bad("detector resolution is identically zero");
        }
        Ok(())
    }

    /// Radius of the (circular) active area, mm.
    pub fn radius_mm(&self) -> f64 {
        (self.active_area_mm2 / PI).sqrt()
    }

    /// Ω = 2π(1 − d/√(d² + r²)), sr.
    pub fn solid_angle_sr(&self) -> f64 {
        let d = self.distance_cm * 10.0;
        let r = self.radius_mm();
        2.0 * PI * (1.0 - d / (d * d + r * r).sqrt())
    }

    /// Fraction of isotropic emission intercepted, Ω/4π.
    pub fn acceptance(&self) -> f64 {
        self.solid_angle_sr() / (4.0 * PI)
    }

    /// Peak FWHM at `energy_kev`: sqrt(noise² + 2.355²·F·ε·E).
    pub fn fwhm_kev(&self, energy_kev: f64) -> f64 {
        let stat = FWHM_PER_SIGMA * FWHM_PER_SIGMA * self.fano_factor * self.pair_energy_kev * energy_kev.max(0.0);
        (self.noise_fwhm_kev * self.noise_fwhm_kev + stat).sqrt()
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        uniform_edges(self.first_edge_kev, self.bin_width_kev, self.energy_bins)
    }

    pub fn last_edge_kev(&self) -> f64 {
        self.first_edge_kev + self.bin_width_kev * self.energy_bins as f64
    }

    pub fn empty_spectrum(&self) -> Spectrum {
        Spectrum {
            bin_edges: self.bin_edges(),
            counts: vec![0.0; self.energy_bins],
        }
    }
}

/// Bin-center energy of `channel`, keV.
pub fn channel_to_energy(channel: usize, detector: &DetectorConfig) -> Result<f64> {
    if channel >= detector.energy_bins {
        return Err(Error::range(
            "channel",
            format!("{channel} not in [0, {})", detector.energy_bins),
        ));
    }
    Ok(detector.first_edge_kev + (channel as f64 + 0.5) * detector.bin_width_kev)
}

fn uniform_edges(first: f64, width: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| first + i as f64 * width).collect()
}

/// Binned photon-count histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    bin_edges: Vec<f64>,
    counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Domain("spectrum has no bins".into()));
        }
        if bin_edges.len() != counts.len() + 1 {
            return Err(Error::Domain(format!(
                "{} edges for {} bins",
                bin_edges.len(),
                counts.len()
            )));
        }
        if let Some(i) = bin_edges.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "bin edges not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = counts.iter().position(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::Domain(format!(
                "count {} at bin {i} is negative or not finite",
                counts[i]
            )));
        }
        Ok(Spectrum { bin_edges, counts })
    }

    /// Uniform binning starting at `first_edge` with `width` per bin.
    pub fn uniform(first_edge: f64, width: f64, counts: Vec<f64>) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Domain("bin width must be > 0".into()));
        }
        let edges = uniform_edges(first_edge, width, counts.len());
        Spectrum::new(edges, counts)
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn energy_range(&self) -> (f64, f64) {
        (self.bin_edges[0], self.bin_edges[self.bin_edges.len() - 1])
    }

    /// Bin width if the binning is uniform to 1e-9 relative.
    pub fn uniform_width(&self) -> Option<f64> {
        let (lo, hi) = self.energy_range();
        let w = (hi - lo) / self.len() as f64;
        self.bin_edges
            .windows(2)
            .all(|e| ((e[1] - e[0]) - w).abs() <= 1e-9 * w)
            .then_some(w)
    }

    pub fn same_binning(&self, other: &Spectrum) -> bool {
        self.bin_edges == other.bin_edges
    }

    /// Replace counts, keeping binning. Counts must be valid.
    pub fn with_counts(&self, counts: Vec<f64>) -> Result<Spectrum> {
        Spectrum::new(self.bin_edges.clone(), counts)
    }

    pub(crate) fn counts_mut(&mut self) -> &mut [f64] {
        &mut self.counts
    }

    /// Add `other` bin-by-bin; binnings must match.
    pub fn accumulate(&mut self, other: &Spectrum) -> Result<()> {
        if !self.same_binning(other) {
            return Err(Error::Domain("cannot add spectra with different binning".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Result<Spectrum> {
        self.with_counts(self.counts.iter().map(|c| c * k).collect())
    }
}

/// A 2-D raster of spectra. Pixel (ix, iy) sits at
/// `origin + (ix·pitch_x, iy·pitch_y)` and is stored row-major (`iy·nx + ix`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub nx: usize,
    pub ny: usize,
    pub pitch_x_um: f64,
    pub pitch_y_um: f64,
    pub origin_um: (f64, f64),
    pub pixels: Vec<Spectrum>,
    pub beam: BeamConfig,
    pub detector: DetectorConfig,
    pub seed: Option<u64>,
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Domain("scan grid must have nx, ny >= 1".into()));
        }
        if self.pixels.len() != self.nx * self.ny {
            return Err(Error::Domain(format!(
                "{} pixels for a {}x{} grid",
                self.pixels.len(),
                self.nx,
                self.ny
            )));
        }
        if !(self.pitch_x_um > 0.0 && self.pitch_y_um > 0.0) {
            return Err(Error::Domain("pitch must be > 0".into()));
        }
        Ok(())
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn pixel(&self, ix: usize, iy: usize) -> &Spectrum {
        &self.pixels[self.index(ix, iy)]
    }

    pub fn position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin_um.0 + ix as f64 * self.pitch_x_um,
            self.origin_um.1 + iy as f64 * self.pitch_y_um,
        )
    }

    /// Bin-wise sum of all pixel spectra.
    pub fn sum_spectrum(&self) -> Spectrum {
        let mut acc = self.pixels[0].clone();
        for p in &self.pixels[1..] {
            for (a, b) in acc.counts_mut().iter_mut().zip(p.counts()) {
                *a += b;
            }
        }
        acc
    }
}

/// Densities and thicknesses measured by other techniques.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalReference {
    /// cm⁻²
    pub n_stm: Option<Measured>,
    /// cm⁻²
    pub n_sims: Option<Measured>,
    /// nm
    pub t_sims: Option<Measured>,
}

impl ExternalReference {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("n_stm", self.n_stm), ("n_sims", self.n_sims), ("t_sims", self.t_sims)] {
            if let Some(m) = m {
                if !(m.value > 0.0) || !(m.sigma >= 0.0) {
                    return Err(Error::Config(format!(
                        "external reference {name} must be > 0 with sigma >= 0"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Areal density units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArealUnit {
    #[serde(rename = "cm-2")]
    PerCm2,
    #[serde(rename = "um-2")]
    PerUm2,
    #[serde(rename = "nm-2")]
    PerNm2,
}

impl ArealUnit {
    /// Multiplier taking a cm⁻² value into this unit.
    fn per_cm2_multiplier(self) -> f64 {
        match self {
            ArealUnit::PerCm2 => 1.0,
            ArealUnit::PerUm2 => 1e-8,
            ArealUnit::PerNm2 => 1e-14,
        }
    }
}

impl FromStr for ArealUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cm-2" | "cm^-2" | "/cm2" => Ok(ArealUnit::PerCm2),
            "um-2" | "um^-2" | "/um2" => Ok(ArealUnit::PerUm2),
            "nm-2" | "nm^-2" | "/nm2" => Ok(ArealUnit::PerNm2),
            other => Err(Error::Config(format!("unknown areal density unit '{other}'"))),
        }
    }
}

/// Convert an areal density in cm⁻² to `target`.
pub fn areal_density_convert(value_cm2: f64, target: ArealUnit) -> Result<f64> {
    if !(value_cm2 >= 0.0) {
        return Err(Error::Domain(format!("areal density {value_cm2} is negative")));
    }
    Ok(value_cm2 * target.per_cm2_multiplier())
}

/// Convert an areal density in `unit` back to cm⁻².
pub fn areal_density_to_cm2(value: f64, unit: ArealUnit) -> Result<f64> {
    if !(value >= 0.0) {
        return Err(Error::Domain(format!("areal density {value} is negative")));
    }
    Ok(value / unit.per_cm2_multiplier())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn channel_centers() {
        let det = DetectorConfig::default();
        assert_relative_eq!(channel_to_energy(0, &det).unwrap(), 0.005, max_relative = 1e-12);
        assert_relative_eq!(channel_to_energy(1187, &det).unwrap(), 11.875, max_relative = 1e-12);
        assert!(matches!(
            channel_to_energy(det.energy_bins, &det),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn channel_energy_increases() {
        let det = DetectorConfig::default();
        let e: Vec<f64> = (0..det.energy_bins)
            .map(|c| channel_to_energy(c, &det).unwrap())
            .collect();
        assert!(e.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn areal_units() {
        assert_relative_eq!(
            areal_density_convert(1.4e14, ArealUnit::PerUm2).unwrap(),
            1.4e6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            areal_density_convert(5.6e12, ArealUnit::PerUm2).unwrap(),
            5.6e4,
            max_relative = 1e-12
        );
        assert_eq!(areal_density_convert(0.0, ArealUnit::PerNm2).unwrap(), 0.0);
        assert!(matches!("furlong-2".parse::<ArealUnit>(), Err(Error::Config(_))));
        assert!(areal_density_convert(-1.0, ArealUnit::PerCm2).is_err());
    }

    #[test]
    fn detector_radius_and_solid_angle() {
        let det = DetectorConfig::default();
        // r = sqrt(A/π) for A = 50 mm²
        assert!((det.radius_mm() - 3.989).abs() < 1e-3);
        // Ω/π ≈ 0.04 for d = 2 cm
        assert!((det.solid_angle_sr() / PI - 0.04).abs() < 0.002);
        assert_relative_eq!(det.solid_angle_sr(), 0.121_389_331_837_459_16, max_relative = 1e-12);
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0]).is_ok());
        assert!(Spectrum::new(vec![0.0, 1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0, 2.0], vec![1.0, -2.0]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(BeamConfig::default().validate().is_ok());
        let b = BeamConfig {
            energy_resolution: 1.5,
            ..BeamConfig::default()
        };
        assert!(b.validate().is_err());
        let d = DetectorConfig {
            energy_bins: 1,
            ..DetectorConfig::default()
        };
        assert!(d.validate().is_err());
    }

    proptest! {
        #[test]
        fn areal_round_trip(v in 0.0f64..1e20, unit in prop_oneof![
            Just(ArealUnit::PerCm2), Just(ArealUnit::PerUm2), Just(ArealUnit::PerNm2)]) {
            let there = areal_density_convert(v, unit).unwrap();
            let back = areal_density_to_cm2(there, unit).unwrap();
            prop_assert!((back - v).abs() <= 1e-12 * v.max(f64::MIN_POSITIVE));
        }
    }
}
