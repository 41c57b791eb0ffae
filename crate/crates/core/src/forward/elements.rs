//! Emission-line templates and the embedded line table.
//!
//! Line energies and edges are from the standard X-ray emission/absorption
//! tabulations (keV). Relative intensities are normalized per series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BeamConfig, DetectorConfig, AVOGADRO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionLine {
    pub label: String,
    pub energy_kev: f64,
    pub relative_intensity: f64,
    /// Absorption edge that must be exceeded by the beam for this line to emit.
    pub edge_kev: f64,
    /// Transmission from sample to detector (air/He path, window).
    #[serde(default = "unit")]
    pub transmission: f64,
}

fn unit() -> f64 {
    1.0
}

impl EmissionLine {
    pub fn new(label: &str, energy_kev: f64, relative_intensity: f64, edge_kev: f64) -> Self {
        EmissionLine {
            label: label.to_string(),
            energy_kev,
            relative_intensity,
            edge_kev,
            transmission: 1.0,
        }
    }

    pub fn with_transmission(mut self, t: f64) -> Self {
        self.transmission = t;
        self
    }

    pub fn is_excited(&self, beam_energy_kev: f64) -> bool {
        self.edge_kev <= beam_energy_kev
    }

    /// Detected fraction of the element's emission carried by this line.
    pub fn weight(&self) -> f64 {
        self.relative_intensity * self.transmission
    }
}

/// Per-element fluorescence template.
///
/// `sensitivity_cm2` is the effective detection cross-section per atom:
/// counts = density · sensitivity · photons · Ω/4π · Σ(relative_intensity · transmission)
/// over excited lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementTemplate {
    pub symbol: String,
    pub lines: Vec<EmissionLine>,
    pub sensitivity_cm2: f64,
    /// Photoabsorption mass attenuation at the reference beam energy, cm²/g.
    pub mass_attenuation_cm2_g: f64,
}

impl ElementTemplate {
    /// Sensitivity from mass attenuation μ/ρ (cm²/g), molar mass (g/mol) and
    /// fluorescence yield: σ = μ/ρ · M / N_A · ω.
    pub fn from_attenuation(
        symbol: &str,
        lines: Vec<EmissionLine>,
        mass_attenuation_cm2_g: f64,
        molar_mass_g_mol: f64,
        fluorescence_yield: f64,
    ) -> Self {
        ElementTemplate {
            symbol: symbol.to_string(),
            lines,
            sensitivity_cm2: mass_attenuation_cm2_g * molar_mass_g_mol / AVOGADRO * fluorescence_yield,
            mass_attenuation_cm2_g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::Config(format!("template {} has no lines", self.symbol)));
        }
        if !(self.sensitivity_cm2 > 0.0) {
            return Err(Error::Config(format!(
                "template {} sensitivity must be > 0",
                self.symbol
            )));
        }
        for l in &self.lines {
            if !(l.energy_kev > 0.0)
                || !(l.relative_intensity > 0.0 && l.relative_intensity <= 1.0)
                || !(l.transmission > 0.0 && l.transmission <= 1.0)
                || !(l.edge_kev >= l.energy_kev)
            {
                return Err(Error::Config(format!(
                    "template {} line {} is malformed",
                    self.symbol, l.label
                )));
            }
        }
        Ok(())
    }

    pub fn excited_lines(&self, beam_energy_kev: f64) -> impl Iterator<Item = &EmissionLine> {
        self.lines.iter().filter(move |l| l.is_excited(beam_energy_kev))
    }

    /// Σ relative_intensity · transmission over excited lines.
    pub fn detected_fraction(&self, beam_energy_kev: f64) -> f64 {
        self.excited_lines(beam_energy_kev).map(|l| l.weight()).sum()
    }

    /// Expected detected counts (area of the whole template) at `density_cm2`.
    pub fn expected_counts(&self, density_cm2: f64, beam: &BeamConfig, detector: &DetectorConfig) -> f64 {
        density_cm2
            * self.sensitivity_cm2
            * beam.photons_per_dwell()
            * detector.acceptance()
            * self.detected_fraction(beam.photon_energy_kev)
    }

    /// Energy of the strongest excited line.
    pub fn principal_line(&self, beam_energy_kev: f64) -> Option<&EmissionLine> {
        self.excited_lines(beam_energy_kev)
            .max_by(|a, b| a.weight().total_cmp(&b.weight()))
    }
}

fn k_series(ka1: f64, ka2: f64, kb1: f64, edge: f64, rel: [f64; 3], transmission: f64) -> Vec<EmissionLine> {
    vec![
        EmissionLine::new("Ka1", ka1, rel[0], edge).with_transmission(transmission),
        EmissionLine::new("Ka2", ka2, rel[1], edge).with_transmission(transmission),
        EmissionLine::new("Kb1", kb1, rel[2], edge).with_transmission(transmission),
    ]
}

/// Built-in templates: Al, Si, Ar, Fe, As, Au.
pub fn builtin_templates() -> Vec<ElementTemplate> {
    let al = ElementTemplate::from_attenuation(
        "Al",
        k_series(1.486_70, 1.486_27, 1.557_45, 1.5596, [0.6623, 0.3311, 0.0066], 0.10),
        14.76,
        26.982,
        0.0387,
    );
    let si = ElementTemplate::from_attenuation(
        "Si",
        k_series(1.739_98, 1.739_38, 1.835_94, 1.8389, [0.6579, 0.3289, 0.0132], 0.15),
        20.9,
        28.086,
        0.050,
    );
    let ar = ElementTemplate::from_attenuation(
        "Ar",
        k_series(2.957_70, 2.955_63, 3.190_5, 3.2059, [0.625, 0.3125, 0.0625], 0.60),
        38.0,
        39.948,
        0.118,
    );
    let fe = ElementTemplate::from_attenuation(
        "Fe",
        k_series(6.403_84, 6.390_84, 7.057_98, 7.1120, [0.5988, 0.2994, 0.1018], 1.0),
        107.3,
        55.845,
        0.351,
    );
    // Effective detection cross-section of the dopant line set; the absolute
    // value cancels in reference-based quantification.
    let as_ = ElementTemplate {
        symbol: "As".into(),
        lines: k_series(10.543_72, 10.507_99, 11.726_23, 11.8667, [0.6098, 0.3110, 0.0792], 1.0),
        sensitivity_cm2: AS_SENSITIVITY_CM2,
        mass_attenuation_cm2_g: 190.0,
    };
    let au = ElementTemplate {
        symbol: "Au".into(),
        lines: vec![
            EmissionLine::new("Ma1", 2.1229, 0.63, 2.2057).with_transmission(0.3),
            EmissionLine::new("Mb", 2.2047, 0.37, 2.2911).with_transmission(0.3),
            EmissionLine::new("La1", 9.7133, 0.467, 11.9187),
            EmissionLine::new("La2", 9.6280, 0.051, 11.9187),
            EmissionLine::new("Lb1", 11.4423, 0.313, 13.7336),
            EmissionLine::new("Lb2", 11.5847, 0.107, 11.9187),
            EmissionLine::new("Lg1", 13.3817, 0.061, 13.7336),
        ],
        sensitivity_cm2: 5.4e-22,
        mass_attenuation_cm2_g: 74.0,
    };
    vec![al, si, ar, fe, as_, au]
}

/// As effective detection cross-section, cm².
pub const AS_SENSITIVITY_CM2: f64 = 2.2e-20;

pub fn builtin_template(symbol: &str) -> Option<ElementTemplate> {
    builtin_templates().into_iter().find(|t| t.symbol == symbol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_is_valid() {
        let t = builtin_templates();
        assert!(t.len() >= 6);
        for e in &t {
            e.validate().unwrap();
            for l in &e.lines {
                assert!(l.energy_kev < l.edge_kev, "{} {}", e.symbol, l.label);
            }
        }
    }

    #[test]
    fn gold_l_lines_not_excited_at_11_88() {
        let au = builtin_template("Au").unwrap();
        let excited: Vec<_> = au.excited_lines(11.88).map(|l| l.label.as_str()).collect();
        assert_eq!(excited, vec!["Ma1", "Mb"]);
        let as_ = builtin_template("As").unwrap();
        assert_eq!(as_.excited_lines(11.88).count(), 3);
        assert_eq!(as_.excited_lines(11.80).count(), 0);
    }

    #[test]
    fn attenuation_derived_sensitivity() {
        let fe = builtin_template("Fe").unwrap();
        let expect = 107.3 * 55.845 / AVOGADRO * 0.351;
        assert!((fe.sensitivity_cm2 / expect - 1.0).abs() < 1e-12);
    }
}
