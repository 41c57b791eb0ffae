//! The run report: one JSON document per invocation. Struct fields and
//! `BTreeMap` keys give a fixed key order, so equal runs give equal bytes.

use std::collections::BTreeMap;
use std::path::Path;

use delta_core::analysis::{CalibrationFactor, DecompositionResult, RegionMean};
use delta_core::forward::DoseReport;
use delta_core::transport::{
    CharacteristicFields, ComparisonReport, HallResult, ParallelFit, PerpFit, RunSummary, TiltFit,
};
use delta_core::Measured;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const TOOL: &str = "delta-metrology";

/// A number with its unit and, when known, its one-sigma error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qty {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub unit: String,
}

impl Qty {
    pub fn new(value: f64, unit: &str) -> Self {
        Qty {
            value,
            sigma: None,
            unit: unit.into(),
        }
    }

    pub fn measured(m: Measured, unit: &str) -> Self {
        Qty {
            value: m.value,
            sigma: Some(m.sigma),
            unit: unit.into(),
        }
    }

    pub fn to_measured(&self) -> Measured {
        Measured::new(self.value, self.sigma.unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFingerprint {
    /// As written in the config.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

fn hash_into(path: &Path, rel: &str, hasher: &mut Sha256, bytes: &mut u64) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<std::io::Result<_>>()
            .map_err(|e| CliError::io(path, e))?;
        entries.sort();
        for name in entries {
            let name = name.to_string_lossy().to_string();
            hash_into(&path.join(&name), &format!("{rel}/{name}"), hasher, bytes)?;
        }
    } else {
        let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update(&data);
        *bytes += data.len() as u64;
    }
    Ok(())
}

/// SHA-256 of a file, or of every file below a directory (names included,
/// sorted).
pub fn fingerprint(shown: &Path, resolved: &Path) -> Result<InputFingerprint> {
    let mut hasher = Sha256::new();
    let mut bytes = 0;
    if resolved.is_dir() {
        hash_into(resolved, ".", &mut hasher, &mut bytes)?;
    } else {
        let data = std::fs::read(resolved).map_err(|e| CliError::io(resolved, e))?;
        hasher.update(&data);
        bytes = data.len() as u64;
    }
    let digest = hasher.finalize();
    Ok(InputFingerprint {
        path: shown.display().to_string(),
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        bytes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSection {
    pub scan_path: String,
    pub nx: usize,
    pub ny: usize,
    pub total_counts: Qty,
    pub mean_counts_per_pixel: Qty,
    pub dose: DoseSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseSection {
    pub fluence: Qty,
    pub accumulated_fluence: Qty,
    pub energy_density: Qty,
    pub dose: Qty,
    pub photons_absorbed_per_atom: Qty,
}

impl From<&DoseReport> for DoseSection {
    fn from(d: &DoseReport) -> Self {
        DoseSection {
            fluence: Qty::new(d.fluence_per_nm2, "nm-2"),
            accumulated_fluence: Qty::new(d.accumulated_fluence_per_nm2, "nm-2"),
            energy_density: Qty::new(d.energy_density_j_nm3, "J nm-3"),
            dose: Qty::new(d.dose_gy, "Gy"),
            photons_absorbed_per_atom: Qty::new(d.photons_absorbed_per_atom, "1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFitSection {
    pub elements: BTreeMap<String, Qty>,
    pub elastic: Option<Qty>,
    pub compton: Option<Qty>,
    pub background_coefficients: Vec<Qty>,
    pub residual_norm: Qty,
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub dof: usize,
}

impl From<&DecompositionResult> for SpectrumFitSection {
    fn from(r: &DecompositionResult) -> Self {
        SpectrumFitSection {
            elements: r
                .elements
                .iter()
                .map(|e| (e.symbol.clone(), Qty::measured(e.amplitude, "counts")))
                .collect(),
            elastic: r.elastic.map(|m| Qty::measured(m, "counts")),
            compton: r.compton.map(|m| Qty::measured(m, "counts")),
            background_coefficients: r.background.iter().map(|&c| Qty::new(c, "counts/bin")).collect(),
            residual_norm: Qty::new(r.residual_norm, "counts"),
            chi_square: r.chi_square,
            reduced_chi_square: r.reduced_chi_square,
            dof: r.dof,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSection {
    pub files: Vec<String>,
    pub nx: usize,
    pub ny: usize,
    pub flagged_pixels: usize,
    pub mean: Qty,
    pub max: Qty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySection {
    pub reference_amplitude: Qty,
    pub known_density: Qty,
    pub calibration_factor: Qty,
    pub files: Vec<String>,
    pub flagged_pixels: usize,
    pub region: Option<RegionSection>,
}

impl DensitySection {
    pub fn calibration(cal: &CalibrationFactor) -> Qty {
        Qty::measured(
            Measured::new(cal.factor, cal.factor * cal.rel_uncertainty),
            "cm-2/count",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSection {
    pub pixels: usize,
    pub mean: Qty,
    pub sigma_counting: Qty,
    pub sigma_calibration: Qty,
}

impl From<&RegionMean> for RegionSection {
    fn from(r: &RegionMean) -> Self {
        RegionSection {
            pixels: r.pixels,
            mean: Qty::measured(Measured::new(r.mean, r.sigma), "cm-2"),
            sigma_counting: Qty::new(r.sigma_counting, "cm-2"),
            sigma_calibration: Qty::new(r.sigma_calibration, "cm-2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSection {
    pub element: String,
    pub on_points: usize,
    pub off_points: usize,
    pub mean_on: Qty,
    pub mean_off: Qty,
    pub snr: Qty,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerpSection {
    pub l: Qty,
    pub l_phi: Qty,
    pub covariance_l_lphi: Qty,
    pub b_phi: Qty,
    pub b_l: Qty,
    pub sigma0: Qty,
    pub chi_square: f64,
    pub dof: usize,
    pub iterations: usize,
    pub weighted: bool,
    /// False when L_phi <= L at the optimum.
    pub valid: bool,
}

impl PerpSection {
    pub fn new(f: &PerpFit, fields: &CharacteristicFields) -> Self {
        PerpSection {
            l: Qty::measured(f.l_nm, "nm"),
            l_phi: Qty::measured(f.lphi_nm, "nm"),
            covariance_l_lphi: Qty::new(f.covariance_nm2[0][1], "nm2"),
            b_phi: Qty::new(fields.b_phi_t, "T"),
            b_l: Qty::new(fields.b_l_t, "T"),
            sigma0: Qty::new(fields.sigma0_s, "S"),
            chi_square: f.chi_square,
            dof: f.dof,
            iterations: f.iterations,
            weighted: f.weighted,
            valid: f.valid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelSection {
    pub gamma: Qty,
    pub chi_square: f64,
    pub dof: usize,
    pub unconstrained: bool,
}

impl From<&ParallelFit> for ParallelSection {
    fn from(f: &ParallelFit) -> Self {
        ParallelSection {
            gamma: Qty::measured(f.gamma_t2, "T-2"),
            chi_square: f.chi_square,
            dof: f.dof,
            unconstrained: f.unconstrained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltSection {
    pub p: Qty,
    pub chi_square: f64,
    pub dof: usize,
}

impl From<&TiltFit> for TiltSection {
    fn from(f: &TiltFit) -> Self {
        TiltSection {
            p: Qty::measured(f.p, "1"),
            chi_square: f.chi_square,
            dof: f.dof,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLocalizationSection {
    pub perpendicular: PerpSection,
    pub parallel: Option<ParallelSection>,
    pub tilt: Option<TiltSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallSection {
    pub n: Qty,
    pub mu: Qty,
    pub l: Qty,
    pub sheet_conductance: Qty,
    pub slope: Qty,
    pub intercept: Qty,
    pub residual_rms: Qty,
}

impl From<&HallResult> for HallSection {
    fn from(h: &HallResult) -> Self {
        HallSection {
            n: Qty::measured(h.n_cm2, "cm-2"),
            mu: Qty::measured(h.mu_cm2_vs, "cm2/(V s)"),
            l: Qty::measured(h.l_nm, "nm"),
            sheet_conductance: Qty::measured(h.sigma_sheet_s, "S"),
            slope: Qty::measured(h.slope_ohm_t, "ohm/T"),
            intercept: Qty::new(h.intercept_ohm, "ohm"),
            residual_rms: Qty::new(h.residual_rms_ohm, "ohm"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessSection {
    pub t: Qty,
    pub l_phi: Qty,
    pub l: Qty,
    pub n: Qty,
    pub gamma: Qty,
}

/// Transport quantities of one run, the unit of comparison.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportSummary {
    pub n: Option<Qty>,
    pub mu: Option<Qty>,
    pub l: Option<Qty>,
    pub l_phi: Option<Qty>,
    pub gamma: Option<Qty>,
    pub p: Option<Qty>,
    pub t: Option<Qty>,
}

impl From<&RunSummary> for TransportSummary {
    fn from(s: &RunSummary) -> Self {
        let q = |m: Option<Measured>, u: &str| m.map(|m| Qty::measured(m, u));
        TransportSummary {
            n: q(s.n_cm2, "cm-2"),
            mu: q(s.mu_cm2_vs, "cm2/(V s)"),
            l: q(s.l_nm, "nm"),
            l_phi: q(s.lphi_nm, "nm"),
            gamma: q(s.gamma_t2, "T-2"),
            p: q(s.p, "1"),
            t: q(s.t_nm, "nm"),
        }
    }
}

impl TransportSummary {
    pub fn to_run_summary(&self) -> RunSummary {
        let m = |q: &Option<Qty>| q.as_ref().map(Qty::to_measured);
        RunSummary {
            n_cm2: m(&self.n),
            mu_cm2_vs: m(&self.mu),
            l_nm: m(&self.l),
            lphi_nm: m(&self.l_phi),
            gamma_t2: m(&self.gamma),
            p: m(&self.p),
            t_nm: m(&self.t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSection {
    pub k_sigma: f64,
    pub quantities: Vec<ComparedQuantity>,
    pub thickness_change: Option<Qty>,
    pub all_consistent: bool,
    pub missing: Vec<String>,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparedQuantity {
    pub quantity: String,
    pub before: Option<Qty>,
    pub after: Option<Qty>,
    pub difference: Option<Qty>,
    pub z_score: Option<f64>,
    pub consistent: Option<bool>,
}

impl From<&ComparisonReport> for ComparisonSection {
    fn from(c: &ComparisonReport) -> Self {
        let quantities = c
            .quantities
            .iter()
            .map(|q| ComparedQuantity {
                quantity: q.quantity.clone(),
                before: q.before.map(|m| Qty::measured(m, &q.unit)),
                after: q.after.map(|m| Qty::measured(m, &q.unit)),
                difference: q.difference.map(|d| Qty {
                    value: d,
                    sigma: q.combined_sigma,
                    unit: q.unit.clone(),
                }),
                z_score: q.z_score,
                consistent: q.consistent,
            })
            .collect();
        ComparisonSection {
            k_sigma: c.k_sigma,
            quantities,
            thickness_change: c.thickness_change_angstrom.map(|m| Qty::measured(m, "angstrom")),
            all_consistent: c.all_consistent,
            missing: c.missing.clone(),
            verdict: verdict_line(c),
        }
    }
}

/// One-line outcome of a comparison.
pub fn verdict_line(c: &ComparisonReport) -> String {
    let compared = c.quantities.iter().filter(|q| !q.missing).count();
    let failing: Vec<&str> = c
        .quantities
        .iter()
        .filter(|q| q.consistent == Some(false))
        .map(|q| q.quantity.as_str())
        .collect();
    if failing.is_empty() {
        format!("consistent: {compared} quantities agree within {} sigma", c.k_sigma)
    } else {
        format!(
            "inconsistent: {} differ by {} sigma or more",
            failing.join(", "),
            c.k_sigma
        )
    }
}

/// Columns of the density and thickness summary table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub n_xrf: Option<Qty>,
    pub n_hall: Option<Qty>,
    pub t_mr: Option<Qty>,
    pub n_stm: Option<Qty>,
    pub n_sims: Option<Qty>,
    pub t_sims: Option<Qty>,
    pub activation: Option<Qty>,
}

impl SummaryTable {
    /// Fixed-width text rendering, one line per column.
    pub fn render(&self) -> String {
        let rows = [
            ("n_XRF", &self.n_xrf),
            ("n_Hall", &self.n_hall),
            ("t_MR", &self.t_mr),
            ("n_STM", &self.n_stm),
            ("n_SIMS", &self.n_sims),
            ("t_SIMS", &self.t_sims),
            ("activation", &self.activation),
        ];
        let mut out = String::new();
        for (name, q) in rows {
            let cell = match q {
                None => "-".to_string(),
                Some(Qty {
                    value,
                    sigma: Some(s),
                    unit,
                }) => format!("{value:.4e} +/- {s:.2e} {unit}"),
                Some(Qty {
                    value,
                    sigma: None,
                    unit,
                }) => format!("{value:.4e} {unit}"),
            };
            out.push_str(&format!("{name:<11}{cell}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, InputFingerprint>,
    pub conditions_fingerprint: Option<String>,
    pub simulation: Option<SimulationSection>,
    pub spectrum_fit: Option<SpectrumFitSection>,
    pub maps: BTreeMap<String, MapSection>,
    pub densities: BTreeMap<String, DensitySection>,
    pub snr: Option<SnrSection>,
    pub weak_localization: Option<WeakLocalizationSection>,
    pub hall: Option<HallSection>,
    pub thickness: Option<ThicknessSection>,
    pub transport_summary: Option<TransportSummary>,
    pub comparison: Option<ComparisonSection>,
    pub summary: Option<SummaryTable>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Report {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
            inputs: BTreeMap::new(),
            conditions_fingerprint: None,
            simulation: None,
            spectrum_fit: None,
            maps: BTreeMap::new(),
            densities: BTreeMap::new(),
            snr: None,
            weak_localization: None,
            hall: None,
            thickness: None,
            transport_summary: None,
            comparison: None,
            summary: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json()).map_err(|e| CliError::io(&path, e))
    }
}

/// The transport summary of a report file, for `compare`.
pub fn summary_from_report_json(path: &Path, text: &str) -> Result<RunSummary> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::parse(path, Some(e.line()), e.to_string()))?;
    let s = v
        .get("transport_summary")
        .filter(|s| !s.is_null())
        .ok_or_else(|| CliError::parse(path, None, "report has no transport_summary"))?;
    let s: TransportSummary =
        serde_json::from_value(s.clone()).map_err(|e| CliError::parse(path, None, e.to_string()))?;
    Ok(s.to_run_summary())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trip_through_report() {
        let run = RunSummary {
            n_cm2: Some(Measured::new(1.31e14, 3e12)),
            l_nm: Some(Measured::new(4.8, 0.2)),
            t_nm: Some(Measured::new(0.98, 0.05)),
            ..RunSummary::default()
        };
        let mut r = Report::new("wl-fit", &RunConfig::default());
        r.transport_summary = Some(TransportSummary::from(&run));
        let back = summary_from_report_json(Path::new("r.json"), &r.to_json()).unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn report_json_is_stable() {
        let r = Report::new("map", &RunConfig::default());
        assert_eq!(r.to_json(), r.clone().to_json());
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(v["config"].get("output_dir").is_none());
        assert_eq!(v["tool"], TOOL);
    }

    #[test]
    fn fingerprint_of_file_and_dir() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        std::fs::write(&f, b"abc").unwrap();
        let fp = fingerprint(Path::new("a.txt"), &f).unwrap();
        assert_eq!(
            fp.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let d1 = fingerprint(Path::new("d"), dir.path()).unwrap();
        std::fs::write(dir.path().join("b.txt"), b"").unwrap();
        let d2 = fingerprint(Path::new("d"), dir.path()).unwrap();
        assert_ne!(d1.sha256, d2.sha256);
    }
}
