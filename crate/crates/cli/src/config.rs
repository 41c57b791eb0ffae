//! Run configuration (TOML). Every key with a physical value names its unit.
//! Relative paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use delta_core::analysis::{FitOptions, MapOptions, MapWeighting, StdConvention, TraceAxis, Weighting};
use delta_core::forward::{builtin_templates, DeviceLayout, ElementTemplate, ScanPlan, ScatterModel, SimulationModel};
use delta_core::transport::{PerpFitOptions, RunSummary, ThicknessInputs, TiltConvention, DEFAULT_K_SIGMA};
use delta_core::{BeamConfig, DetectorConfig, ExternalReference, Measured};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Not echoed into reports so that outputs do not depend on where they go.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// JSON array of element templates replacing the built-in table.
    pub element_table: Option<PathBuf>,
    pub beam: BeamConfig,
    pub detector: DetectorConfig,
    pub layout: LayoutConfig,
    pub scan: ScanConfig,
    pub simulation: SimulationConfig,
    pub analysis: AnalysisConfig,
    pub inputs: InputsConfig,
    pub reference: ReferenceConfig,
    pub region: RegionConfig,
    pub snr: SnrConfig,
    pub transport: TransportConfig,
    pub thickness: Option<ThicknessConfig>,
    pub external: ExternalReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutPreset {
    HallBar,
    UniformReference,
    /// Read from `layout.path` (JSON).
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub preset: LayoutPreset,
    pub dopant: String,
    pub density_cm2: f64,
    pub path: Option<PathBuf>,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            preset: LayoutPreset::HallBar,
            dopant: "As".into(),
            density_cm2: 1.4e14,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub origin_x_um: f64,
    pub origin_y_um: f64,
    pub nx: usize,
    pub ny: usize,
    pub pitch_x_um: f64,
    pub pitch_y_um: f64,
}

impl Default for ScanConfig {
    /// 40 × 80 pixels at 500 nm across one side of the bar.
    fn default() -> Self {
        ScanConfig {
            origin_x_um: 100.0,
            origin_y_um: 60.0,
            nx: 40,
            ny: 80,
            pitch_x_um: 0.5,
            pitch_y_um: 0.5,
        }
    }
}

impl ScanConfig {
    pub fn plan(&self) -> ScanPlan {
        ScanPlan {
            origin_um: (self.origin_x_um, self.origin_y_um),
            nx: self.nx,
            ny: self.ny,
            pitch_x_um: self.pitch_x_um,
            pitch_y_um: self.pitch_y_um,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub scatter_angle_deg: f64,
    pub elastic_per_photon: f64,
    pub compton_per_photon: f64,
    /// Polynomial in E (keV), counts per keV per incident photon.
    pub continuum_per_photon_per_kev: Vec<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let m = SimulationModel::default();
        SimulationConfig {
            scatter_angle_deg: m.scatter.angle_deg,
            elastic_per_photon: m.scatter.elastic_per_photon,
            compton_per_photon: m.scatter.compton_per_photon,
            continuum_per_photon_per_kev: m.continuum_per_photon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingChoice {
    Poisson,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Elements reported and mapped.
    pub elements: Vec<String>,
    /// Templates in the decomposition; empty means the whole element table.
    pub fit_elements: Vec<String>,
    pub background_order: usize,
    pub weighting: WeightingChoice,
    pub map_weighting: MapWeighting,
    pub fit_scatter: bool,
    pub scatter_angle_deg: f64,
    pub window_min_kev: Option<f64>,
    pub window_max_kev: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            elements: vec!["As".into()],
            fit_elements: Vec::new(),
            background_order: 2,
            weighting: WeightingChoice::Poisson,
            map_weighting: MapWeighting::Pooled,
            fit_scatter: true,
            scatter_angle_deg: 90.0,
            window_min_kev: None,
            window_max_kev: None,
        }
    }
}

impl AnalysisConfig {
    pub fn fit_options(&self) -> Result<FitOptions> {
        let window_kev = match (self.window_min_kev, self.window_max_kev) {
            (None, None) => None,
            (Some(a), Some(b)) => Some((a, b)),
            _ => {
                return Err(CliError::Config(
                    "analysis.window_min_kev and window_max_kev go together".into(),
                ))
            }
        };
        Ok(FitOptions {
            scatter_angle_deg: self.fit_scatter.then_some(self.scatter_angle_deg),
            background_order: self.background_order,
            weighting: match self.weighting {
                WeightingChoice::Poisson => Weighting::Poisson,
                WeightingChoice::Uniform => Weighting::Uniform,
            },
            window_kev,
        })
    }

    pub fn map_options(&self) -> Result<MapOptions> {
        Ok(MapOptions {
            fit: self.fit_options()?,
            weighting: self.map_weighting,
        })
    }
}

/// Input files. Subcommands read the ones they need.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsConfig {
    pub spectrum: Option<PathBuf>,
    pub scan: Option<PathBuf>,
    pub reference_scan: Option<PathBuf>,
    pub perpendicular: Option<PathBuf>,
    pub parallel: Option<PathBuf>,
    pub angle_sweep: Option<PathBuf>,
    pub hall: Option<PathBuf>,
    /// Run summaries (TOML) or reports (JSON) for `compare`.
    pub before: Option<PathBuf>,
    pub after: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub element: String,
    pub density_cm2: Option<f64>,
    pub density_sigma_cm2: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            element: "As".into(),
            density_cm2: None,
            density_sigma_cm2: 0.0,
        }
    }
}

/// Rectangle over which densities are averaged; open sides are unbounded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    pub x_min_um: Option<f64>,
    pub x_max_um: Option<f64>,
    pub y_min_um: Option<f64>,
    pub y_max_um: Option<f64>,
}

impl RegionConfig {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_min_um.is_none_or(|v| x >= v)
            && self.x_max_um.is_none_or(|v| x <= v)
            && self.y_min_um.is_none_or(|v| y >= v)
            && self.y_max_um.is_none_or(|v| y <= v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrConfig {
    pub element: String,
    pub axis: TraceAxis,
    pub on_index: usize,
    pub off_index: usize,
    pub window_start_um: Option<f64>,
    pub window_length_um: Option<f64>,
    pub std: StdConvention,
}

impl Default for SnrConfig {
    fn default() -> Self {
        SnrConfig {
            element: "As".into(),
            axis: TraceAxis::Row,
            on_index: 1,
            off_index: 0,
            window_start_um: None,
            window_length_um: None,
            std: StdConvention::Population,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    pub l_starts_nm: Vec<f64>,
    pub lphi_starts_nm: Vec<f64>,
    pub max_iterations: usize,
    pub rel_step_tol: f64,
    pub tilt_convention: TiltConvention,
    pub sheet_conductance_s: Option<f64>,
    pub sheet_conductance_sigma_s: f64,
    pub k_sigma: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        let p = PerpFitOptions::default();
        TransportConfig {
            l_starts_nm: p.l_starts_nm,
            lphi_starts_nm: p.lphi_starts_nm,
            max_iterations: p.max_iterations,
            rel_step_tol: p.rel_step_tol,
            tilt_convention: TiltConvention::default(),
            sheet_conductance_s: None,
            sheet_conductance_sigma_s: 0.0,
            k_sigma: DEFAULT_K_SIGMA,
        }
    }
}

impl TransportConfig {
    pub fn perp_options(&self) -> PerpFitOptions {
        PerpFitOptions {
            l_starts_nm: self.l_starts_nm.clone(),
            lphi_starts_nm: self.lphi_starts_nm.clone(),
            max_iterations: self.max_iterations,
            rel_step_tol: self.rel_step_tol,
        }
    }
}

/// Direct inputs for the thickness formula, each `{ value, sigma }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThicknessConfig {
    pub lphi_nm: Measured,
    pub l_nm: Measured,
    pub n_cm2: Measured,
    pub gamma_t2: Measured,
}

impl From<ThicknessConfig> for ThicknessInputs {
    fn from(t: ThicknessConfig) -> Self {
        ThicknessInputs {
            lphi_nm: t.lphi_nm,
            l_nm: t.l_nm,
            n_cm2: t.n_cm2,
            gamma_t2: t.gamma_t2,
        }
    }
}

/// A loaded configuration with its paths resolved.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// As written (after defaults), for echoing.
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_str(text: &str, base_dir: &Path, source: &Path) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            CliError::parse(source, line, e.message().to_string())
        })?;
        let loaded = LoadedConfig {
            config,
            base_dir: base_dir.to_path_buf(),
        };
        loaded.check_paths()?;
        Ok(loaded)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base, path)
    }

    pub fn defaults() -> Self {
        LoadedConfig {
            config: RunConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn referenced_paths(&self) -> Vec<(&'static str, &PathBuf)> {
        let c = &self.config;
        let i = &c.inputs;
        [
            ("element_table", &c.element_table),
            ("layout.path", &c.layout.path),
            ("inputs.spectrum", &i.spectrum),
            ("inputs.scan", &i.scan),
            ("inputs.reference_scan", &i.reference_scan),
            ("inputs.perpendicular", &i.perpendicular),
            ("inputs.parallel", &i.parallel),
            ("inputs.angle_sweep", &i.angle_sweep),
            ("inputs.hall", &i.hall),
            ("inputs.before", &i.before),
            ("inputs.after", &i.after),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|p| (k, p)))
        .collect()
    }

    /// Every referenced path must exist when the config is loaded.
    fn check_paths(&self) -> Result<()> {
        for (key, p) in self.referenced_paths() {
            let full = self.resolve(p);
            if !full.exists() {
                return Err(CliError::Config(format!("{key}: {} does not exist", full.display())));
            }
        }
        Ok(())
    }

    /// Resolved path of a required input.
    pub fn input(&self, key: &str, p: &Option<PathBuf>) -> Result<PathBuf> {
        p.as_ref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| CliError::Config(format!("this command needs {key}")))
    }

    pub fn templates(&self) -> Result<Vec<ElementTemplate>> {
        let all = match &self.config.element_table {
            None => builtin_templates(),
            Some(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let v: Vec<ElementTemplate> =
                    serde_json::from_str(&text).map_err(|e| CliError::parse(&path, Some(e.line()), e.to_string()))?;
                for t in &v {
                    t.validate()?;
                }
                v
            }
        };
        let wanted = &self.config.analysis.fit_elements;
        if wanted.is_empty() {
            return Ok(all);
        }
        wanted
            .iter()
            .map(|s| {
                all.iter()
                    .find(|t| &t.symbol == s)
                    .cloned()
                    .ok_or_else(|| CliError::Config(format!("analysis.fit_elements: no template for {s}")))
            })
            .collect()
    }

    pub fn simulation_model(&self) -> Result<SimulationModel> {
        let s = &self.config.simulation;
        Ok(SimulationModel {
            templates: match &self.config.element_table {
                None => builtin_templates(),
                Some(_) => {
                    // the forward model always uses the full table
                    let mut c = self.clone();
                    c.config.analysis.fit_elements.clear();
                    c.templates()?
                }
            },
            scatter: ScatterModel {
                angle_deg: s.scatter_angle_deg,
                elastic_per_photon: s.elastic_per_photon,
                compton_per_photon: s.compton_per_photon,
            },
            continuum_per_photon: s.continuum_per_photon_per_kev.clone(),
        })
    }

    pub fn layout(&self) -> Result<DeviceLayout> {
        let l = &self.config.layout;
        let layout = match l.preset {
            LayoutPreset::HallBar => DeviceLayout::hall_bar(&l.dopant, l.density_cm2),
            LayoutPreset::UniformReference => DeviceLayout::uniform_reference(&l.dopant, l.density_cm2),
            LayoutPreset::File => {
                let path = self.input("layout.path", &l.path)?;
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::parse(&path, Some(e.line()), e.to_string()))?
            }
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn known_reference_density(&self) -> Result<Measured> {
        let r = &self.config.reference;
        let v = r
            .density_cm2
            .ok_or_else(|| CliError::Config("reference.density_cm2 is required".into()))?;
        Ok(Measured::new(v, r.density_sigma_cm2))
    }
}

/// A run summary read from a TOML file with `{ value, sigma }` entries.
pub fn parse_summary_toml(path: &Path, text: &str) -> Result<RunSummary> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct File {
        n_cm2: Option<Measured>,
        mu_cm2_vs: Option<Measured>,
        l_nm: Option<Measured>,
        lphi_nm: Option<Measured>,
        gamma_t2: Option<Measured>,
        p: Option<Measured>,
        t_nm: Option<Measured>,
    }
    let f: File = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        CliError::parse(path, line, e.message().to_string())
    })?;
    Ok(RunSummary {
        n_cm2: f.n_cm2,
        mu_cm2_vs: f.mu_cm2_vs,
        l_nm: f.l_nm,
        lphi_nm: f.lphi_nm,
        gamma_t2: f.gamma_t2,
        p: f.p,
        t_nm: f.t_nm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = LoadedConfig::from_str("", Path::new("."), Path::new("c.toml")).unwrap();
        assert_eq!(c.config, RunConfig::default());
        assert_eq!(c.config.beam.dwell_s, 0.2);
    }

    #[test]
    fn partial_tables_and_units() {
        let c = LoadedConfig::from_str(
            "seed = 3\n[beam]\nflux_photons_s = 1e11\nspot_width_um = 3.0\n[scan]\nnx = 4\n",
            Path::new("."),
            Path::new("c.toml"),
        )
        .unwrap();
        assert_eq!(c.config.beam.flux_photons_s, 1e11);
        assert_eq!(c.config.beam.dwell_s, 0.2);
        assert_eq!(c.config.scan.nx, 4);
        assert_eq!(c.config.scan.ny, 80);
    }

    #[test]
    fn unknown_key_is_parse_error_with_line() {
        let e =
            LoadedConfig::from_str("seed = 1\n[beam]\ndwell = 0.2\n", Path::new("."), Path::new("c.toml")).unwrap_err();
        assert!(matches!(e, CliError::Parse { line: Some(3), .. }), "{e}");
    }

    #[test]
    fn missing_input_is_config_error() {
        let e = LoadedConfig::from_str(
            "[inputs]\nscan = \"does/not/exist\"\n",
            Path::new("."),
            Path::new("c.toml"),
        )
        .unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
    }

    #[test]
    fn summary_file() {
        let s = parse_summary_toml(
            Path::new("s.toml"),
            "n_cm2 = { value = 1.31e14, sigma = 3e12 }\nl_nm = { value = 4.8, sigma = 0.1 }\n",
        )
        .unwrap();
        assert_eq!(s.l_nm, Some(Measured::new(4.8, 0.1)));
        assert!(s.p.is_none());
    }
}
