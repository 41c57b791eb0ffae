//! Expected and Poisson-sampled spectra for single pixels and raster scans.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::elements::ElementTemplate;
use super::layout::{DeviceLayout, Rect};
use crate::error::{Error, Result};
use crate::model::{BeamConfig, DetectorConfig, ScanGrid, Spectrum, CODATA_2018, FWHM_PER_SIGMA};

/// Fraction of a normalized Gaussian falling in each bin, added into `out`
/// scaled by `area`. Bins further than 10σ from the center are skipped.
pub fn add_gaussian(out: &mut [f64], edges: &[f64], center: f64, fwhm: f64, area: f64) {
    if area == 0.0 {
        return;
    }
    let sigma = fwhm / FWHM_PER_SIGMA;
    let lo = center - 10.0 * sigma;
    let hi = center + 10.0 * sigma;
    let start = edges.partition_point(|&e| e <= lo).saturating_sub(1);
    let stop = edges.partition_point(|&e| e < hi).min(out.len());
    if start >= stop {
        return;
    }
    let k = 1.0 / (sigma * std::f64::consts::SQRT_2);
    let mut cdf_prev = libm::erf((edges[start] - center) * k);
    for i in start..stop {
        let cdf = libm::erf((edges[i + 1] - center) * k);
        out[i] += 0.5 * area * (cdf - cdf_prev);
        cdf_prev = cdf;
    }
}

/// Width of a peak at `energy_kev`: detector response combined in
/// quadrature with the monochromator bandwidth.
pub fn peak_fwhm(energy_kev: f64, beam: &BeamConfig, detector: &DetectorConfig) -> f64 {
    let det = detector.fwhm_kev(energy_kev);
    let mono = energy_kev * beam.energy_resolution;
    (det * det + mono * mono).sqrt()
}

/// Per-bin shape of a template, normalized so the full (untruncated) shape
/// has unit area. All zeros when no line is excited.
pub fn template_shape(
    template: &ElementTemplate,
    beam: &BeamConfig,
    detector: &DetectorConfig,
    edges: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; edges.len() - 1];
    let total = template.detected_fraction(beam.photon_energy_kev);
    if total <= 0.0 {
        return out;
    }
    for line in template.excited_lines(beam.photon_energy_kev) {
        let fwhm = detector.fwhm_kev(line.energy_kev);
        add_gaussian(&mut out, edges, line.energy_kev, fwhm, line.weight() / total);
    }
    out
}

/// Noise-free spectrum of one element at `density_cm2`. Each excited line
/// contributes a Gaussian of area
/// density · sensitivity · flux · dwell · Ω/4π · relative_intensity · transmission.
pub fn synth_element_peaks(
    template: &ElementTemplate,
    density_cm2: f64,
    beam: &BeamConfig,
    detector: &DetectorConfig,
) -> Spectrum {
    let mut spec = detector.empty_spectrum();
    let area = template.expected_counts(density_cm2, beam, detector);
    let shape = template_shape(template, beam, detector, spec.bin_edges());
    for (c, s) in spec.counts_mut().iter_mut().zip(shape) {
        *c = area * s;
    }
    spec
}

/// Compton-scattered photon energy, keV.
pub fn compton_energy(energy_kev: f64, angle_deg: f64) -> f64 {
    let cos = angle_deg.to_radians().cos();
    energy_kev / (1.0 + energy_kev / CODATA_2018.m_e_c2 * (1.0 - cos))
}

/// Unit-area elastic and Compton peak shapes.
pub fn scatter_shapes(
    beam: &BeamConfig,
    detector: &DetectorConfig,
    angle_deg: f64,
    edges: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let e0 = beam.photon_energy_kev;
    let ec = compton_energy(e0, angle_deg);
    let mut elastic = vec![0.0; edges.len() - 1];
    let mut compton = vec![0.0; edges.len() - 1];
    add_gaussian(&mut elastic, edges, e0, peak_fwhm(e0, beam, detector), 1.0);
    add_gaussian(&mut compton, edges, ec, peak_fwhm(ec, beam, detector), 1.0);
    (elastic, compton)
}

/// Elastic peak at the beam energy plus Compton peak at
/// E' = E / (1 + (E/mc²)(1 − cos θ)).
pub fn synth_scatter_peaks(
    beam: &BeamConfig,
    elastic_amp: f64,
    compton_amp: f64,
    angle_deg: f64,
    detector: &DetectorConfig,
) -> Result<Spectrum> {
    if !(elastic_amp >= 0.0 && compton_amp >= 0.0) {
        return Err(Error::Domain("scatter amplitudes must be >= 0".into()));
    }
    if !(angle_deg > 0.0 && angle_deg < 180.0) {
        return Err(Error::range("scatter angle", format!("{angle_deg} not in (0, 180)")));
    }
    let mut spec = detector.empty_spectrum();
    let (el, co) = scatter_shapes(beam, detector, angle_deg, spec.bin_edges());
    for ((c, a), b) in spec.counts_mut().iter_mut().zip(el).zip(co) {
        *c = elastic_amp * a + compton_amp * b;
    }
    Ok(spec)
}

/// Polynomial continuum integrated over each bin: ∫ Σ cₖ Eᵏ dE, clamped at 0.
pub fn continuum_counts(edges: &[f64], coeffs: &[f64], scale: f64) -> Vec<f64> {
    let antideriv = |e: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * e.powi(k as i32 + 1) / (k + 1) as f64)
            .sum()
    };
    edges
        .windows(2)
        .map(|w| (scale * (antideriv(w[1]) - antideriv(w[0]))).max(0.0))
        .collect()
}

/// Substrate scattering geometry and yields per incident photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterModel {
    pub angle_deg: f64,
    /// Detected elastic counts per incident photon.
    pub elastic_per_photon: f64,
    /// Detected Compton counts per incident photon.
    pub compton_per_photon: f64,
}

impl Default for ScatterModel {
    fn default() -> Self {
        ScatterModel {
            angle_deg: 90.0,
            elastic_per_photon: 1.0e-6,
            compton_per_photon: 2.0e-6,
        }
    }
}

/// Everything besides geometry that the forward model needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationModel {
    pub templates: Vec<ElementTemplate>,
    pub scatter: ScatterModel,
    /// Continuum polynomial coefficients in E (keV), counts per keV per
    /// incident photon, lowest order first.
    pub continuum_per_photon: Vec<f64>,
}

impl Default for SimulationModel {
    fn default() -> Self {
        SimulationModel {
            templates: super::elements::builtin_templates(),
            scatter: ScatterModel::default(),
            continuum_per_photon: vec![1.0e-8, 0.0, 0.0],
        }
    }
}

impl SimulationModel {
    pub fn template(&self, symbol: &str) -> Option<&ElementTemplate> {
        self.templates.iter().find(|t| t.symbol == symbol)
    }
}

/// Regular lattice of beam positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub origin_um: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub pitch_x_um: f64,
    pub pitch_y_um: f64,
}

/// Precomputed per-element and fixed spectral components for one set of
/// beam/detector conditions.
struct Synthesizer<'a> {
    layout: &'a DeviceLayout,
    beam: &'a BeamConfig,
    edges: Vec<f64>,
    fixed: Vec<f64>,
    // (element, counts per unit density per bin)
    elements: Vec<(String, Vec<f64>)>,
}

impl<'a> Synthesizer<'a> {
    fn new(
        layout: &'a DeviceLayout,
        beam: &'a BeamConfig,
        detector: &DetectorConfig,
        model: &SimulationModel,
    ) -> Result<Self> {
        beam.validate()?;
        detector.validate()?;
        layout.validate()?;
        let edges = detector.bin_edges();
        let photons = beam.photons_per_dwell();
        let mut fixed = continuum_counts(&edges, &model.continuum_per_photon, photons);
        let s = &model.scatter;
        let scatter = synth_scatter_peaks(
            beam,
            s.elastic_per_photon * photons,
            s.compton_per_photon * photons,
            s.angle_deg,
            detector,
        )?;
        for (f, c) in fixed.iter_mut().zip(scatter.counts()) {
            *f += c;
        }
        let mut elements = Vec::new();
        for el in layout.elements() {
            let t = model
                .template(&el)
                .ok_or_else(|| Error::Config(format!("no template for layout element {el}")))?;
            t.validate()?;
            let per_density = t.expected_counts(1.0, beam, detector);
            let col = template_shape(t, beam, detector, &edges)
                .into_iter()
                .map(|v| v * per_density)
                .collect();
            elements.push((el, col));
        }
        Ok(Synthesizer {
            layout,
            beam,
            edges,
            fixed,
            elements,
        })
    }

    fn expected(&self, position: (f64, f64)) -> Result<Vec<f64>> {
        if !self.layout.bounds.contains(position.0, position.1) {
            return Err(Error::range(
                "beam position",
                format!("({}, {}) outside layout bounds", position.0, position.1),
            ));
        }
        let spot = spot_rect(position, self.beam);
        let mut out = self.fixed.clone();
        for (el, col) in &self.elements {
            let d = self.layout.mean_density(el, &spot);
            if d > 0.0 {
                for (o, c) in out.iter_mut().zip(col) {
                    *o += d * c;
                }
            }
        }
        Ok(out)
    }

    fn sample(&self, position: (f64, f64), seed: u64, stream: u64) -> Result<Spectrum> {
        let expected = self.expected(position)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let counts = poissonize(&expected, &mut rng);
        Spectrum::new(self.edges.clone(), counts)
    }
}

fn spot_rect(position: (f64, f64), beam: &BeamConfig) -> Rect {
    Rect::centered(position.0, position.1, beam.spot_width_um, beam.spot_height_um)
}

/// Independent Poisson draw per bin.
pub fn poissonize<R: rand::Rng>(expected: &[f64], rng: &mut R) -> Vec<f64> {
    expected
        .iter()
        .map(|&lam| {
            if lam > 0.0 {
                Poisson::new(lam).map(|p| p.sample(rng)).unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Noise-free spectrum at `position`: element peaks for the spot-averaged
/// densities, scatter peaks and continuum.
pub fn expected_pixel(
    layout: &DeviceLayout,
    position: (f64, f64),
    beam: &BeamConfig,
    detector: &DetectorConfig,
    model: &SimulationModel,
) -> Result<Spectrum> {
    let syn = Synthesizer::new(layout, beam, detector, model)?;
    Spectrum::new(syn.edges.clone(), syn.expected(position)?)
}

/// Poisson-sampled spectrum at `position`. Deterministic for a fixed seed.
pub fn simulate_pixel(
    layout: &DeviceLayout,
    position: (f64, f64),
    beam: &BeamConfig,
    detector: &DetectorConfig,
    model: &SimulationModel,
    seed: u64,
) -> Result<Spectrum> {
    Synthesizer::new(layout, beam, detector, model)?.sample(position, seed, 0)
}

/// Raster scan over `plan`. Pixel `k` (row-major) draws from stream `k` of
/// the generator seeded with `seed`, so pixel 0 matches [`simulate_pixel`].
pub fn simulate_scan(
    layout: &DeviceLayout,
    beam: &BeamConfig,
    detector: &DetectorConfig,
    model: &SimulationModel,
    plan: &ScanPlan,
    seed: u64,
) -> Result<ScanGrid> {
    if plan.nx == 0 || plan.ny == 0 {
        return Err(Error::Domain("scan needs nx, ny >= 1".into()));
    }
    if !(plan.pitch_x_um > 0.0 && plan.pitch_y_um > 0.0) {
        return Err(Error::Domain("scan pitch must be > 0".into()));
    }
    let syn = Synthesizer::new(layout, beam, detector, model)?;
    let pixels = (0..plan.nx * plan.ny)
        .into_par_iter()
        .map(|k| {
            let (ix, iy) = (k % plan.nx, k / plan.nx);
            let pos = (
                plan.origin_um.0 + ix as f64 * plan.pitch_x_um,
                plan.origin_um.1 + iy as f64 * plan.pitch_y_um,
            );
            syn.sample(pos, seed, k as u64).map_err(|e| Error::Pixel {
                ix,
                iy,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanGrid {
        nx: plan.nx,
        ny: plan.ny,
        pitch_x_um: plan.pitch_x_um,
        pitch_y_um: plan.pitch_y_um,
        origin_um: plan.origin_um,
        pixels,
        beam: beam.clone(),
        detector: detector.clone(),
        seed: Some(seed),
    })
}

/// Atoms of `element` inside the beam footprint at `position`.
pub fn illuminated_atoms(layout: &DeviceLayout, element: &str, position: (f64, f64), beam: &BeamConfig) -> f64 {
    let spot = spot_rect(position, beam);
    // μm² → cm²
    layout.mean_density(element, &spot) * spot.area() * 1e-8
}
