//! Per-pixel decomposition of a scan into element intensity maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{FitOptions, PreparedFit, Weighting};
use crate::error::{Error, Result};
use crate::forward::elements::ElementTemplate;
use crate::model::{BeamConfig, DetectorConfig, ScanGrid};

/// How per-bin weights are chosen when fitting every pixel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapWeighting {
    /// Poisson weights from the grid-mean spectrum, shared by all pixels.
    /// The amplitude estimate is then linear in the pixel counts, so
    /// low-count pixels carry no weighting bias.
    #[default]
    Pooled,
    /// Weights from each pixel's own counts.
    PerPixel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapOptions {
    pub fit: FitOptions,
    pub weighting: MapWeighting,
}

/// Fitted element amplitude per pixel (counts per dwell), row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityMap {
    pub element: String,
    pub nx: usize,
    pub ny: usize,
    pub pitch_x_um: f64,
    pub pitch_y_um: f64,
    pub origin_um: (f64, f64),
    /// NaN where the pixel fit failed.
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Failure cause per pixel, `None` for good pixels.
    pub flags: Vec<Option<String>>,
    /// Beam/detector conditions the scan was recorded under.
    pub fingerprint: String,
}

impl IntensityMap {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin_um.0 + ix as f64 * self.pitch_x_um,
            self.origin_um.1 + iy as f64 * self.pitch_y_um,
        )
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_some()).count()
    }
}

/// Canonical description of the acquisition conditions. Quantification is
/// only valid between scans with equal fingerprints.
pub fn conditions_fingerprint(beam: &BeamConfig, detector: &DetectorConfig) -> String {
    format!(
        "E={:e}keV;flux={:e}/s;spot={:e}x{:e}um;dE/E={:e};dwell={:e}s;d={:e}cm;A={:e}mm2;bins={}x{:e}keV@{:e};fwhm0={:e};F={:e};eps={:e}",
        beam.photon_energy_kev,
        beam.flux_photons_s,
        beam.spot_width_um,
        beam.spot_height_um,
        beam.energy_resolution,
        beam.dwell_s,
        detector.distance_cm,
        detector.active_area_mm2,
        detector.energy_bins,
        detector.bin_width_kev,
        detector.first_edge_kev,
        detector.noise_fwhm_kev,
        detector.fano_factor,
        detector.pair_energy_kev,
    )
}

/// Fit every pixel of `grid` once and return one map per requested element.
/// Pixels whose fit fails are flagged with the cause and hold NaN.
pub fn element_maps(
    grid: &ScanGrid,
    elements: &[&str],
    templates: &[ElementTemplate],
    options: &MapOptions,
) -> Result<Vec<IntensityMap>> {
    grid.validate()?;
    for el in elements {
        if !templates.iter().any(|t| t.symbol == *el) {
            return Err(Error::Config(format!("element {el} has no template")));
        }
    }
    let reference = &grid.pixels[0];
    if grid.pixels.iter().any(|p| !p.same_binning(reference)) {
        return Err(Error::Domain("scan pixels do not share one binning".into()));
    }
    let npix = grid.pixels.len();

    let shared = match (options.weighting, &options.fit.weighting) {
        (MapWeighting::PerPixel, Weighting::Poisson) => None,
        (MapWeighting::Pooled, Weighting::Poisson) => {
            let mean = grid.sum_spectrum().scaled(1.0 / npix as f64)?;
            let fit = FitOptions {
                weighting: Weighting::Variance(mean.counts().to_vec()),
                ..options.fit.clone()
            };
            Some(PreparedFit::new(
                reference,
                templates,
                &grid.beam,
                &grid.detector,
                &fit,
            )?)
        }
        _ => Some(PreparedFit::new(
            reference,
            templates,
            &grid.beam,
            &grid.detector,
            &options.fit,
        )?),
    };
    // a single pixel with pooled weights is the plain Poisson-weighted fit
    let model_variance = shared.is_some() && npix > 1;

    let fits: Vec<_> = (0..npix)
        .into_par_iter()
        .map(|k| {
            let spec = &grid.pixels[k];
            match &shared {
                Some(p) if model_variance => p.solve_model_variance(spec),
                Some(p) => p.solve(spec),
                None => PreparedFit::new(spec, templates, &grid.beam, &grid.detector, &options.fit)?.solve(spec),
            }
        })
        .collect();

    let fingerprint = conditions_fingerprint(&grid.beam, &grid.detector);
    Ok(elements
        .iter()
        .map(|el| {
            let mut values = Vec::with_capacity(npix);
            let mut sigma = Vec::with_capacity(npix);
            let mut flags = Vec::with_capacity(npix);
            for (k, fit) in fits.iter().enumerate() {
                match fit {
                    Ok(r) => {
                        let a = r.amplitude(el).expect("element checked against templates");
                        values.push(a.value);
                        sigma.push(a.sigma);
                        flags.push(None);
                    }
                    Err(e) => {
                        let (ix, iy) = (k % grid.nx, k / grid.nx);
                        values.push(f64::NAN);
                        sigma.push(f64::NAN);
                        flags.push(Some(
                            Error::Pixel {
                                ix,
                                iy,
                                source: Box::new(e.clone()),
                            }
                            .to_string(),
                        ));
                    }
                }
            }
            IntensityMap {
                element: el.to_string(),
                nx: grid.nx,
                ny: grid.ny,
                pitch_x_um: grid.pitch_x_um,
                pitch_y_um: grid.pitch_y_um,
                origin_um: grid.origin_um,
                values,
                sigma,
                flags,
                fingerprint: fingerprint.clone(),
            }
        })
        .collect())
}

/// Intensity map of a single element.
pub fn element_map(
    grid: &ScanGrid,
    element: &str,
    templates: &[ElementTemplate],
    options: &MapOptions,
) -> Result<IntensityMap> {
    Ok(element_maps(grid, &[element], templates, options)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fit::fit_spectrum;
    use crate::forward::{builtin_templates, simulate_scan, DeviceLayout, ScanPlan, SimulationModel};

    fn small_scan(density: f64, nx: usize, ny: usize, seed: u64) -> ScanGrid {
        let layout = DeviceLayout::hall_bar("As", density);
        let plan = ScanPlan {
            origin_um: (120.0, 78.0),
            nx,
            ny,
            pitch_x_um: 0.5,
            pitch_y_um: 0.5,
        };
        simulate_scan(
            &layout,
            &BeamConfig::default(),
            &DetectorConfig::default(),
            &SimulationModel::default(),
            &plan,
            seed,
        )
        .unwrap()
    }

    fn fit_templates() -> Vec<ElementTemplate> {
        builtin_templates()
            .into_iter()
            .filter(|t| ["As", "Si", "Ar", "Au"].contains(&t.symbol.as_str()))
            .collect()
    }

    #[test]
    fn single_pixel_matches_direct_fit() {
        let grid = small_scan(1.4e14, 1, 1, 3);
        let t = fit_templates();
        let m = element_map(&grid, "As", &t, &MapOptions::default()).unwrap();
        let direct = fit_spectrum(&grid.pixels[0], &t, &grid.beam, &grid.detector, &FitOptions::default()).unwrap();
        assert_eq!(m.values[0], direct.amplitude("As").unwrap().value);
        assert_eq!(m.sigma[0], direct.amplitude("As").unwrap().sigma);
    }

    #[test]
    fn null_map_consistent_with_zero() {
        let grid = small_scan(0.0, 6, 6, 11);
        let m = element_map(&grid, "As", &fit_templates(), &MapOptions::default()).unwrap();
        let n = m.values.len() as f64;
        let mean = m.values.iter().sum::<f64>() / n;
        // non-negative amplitudes put the mean near 0.4σ of a single pixel
        let sigma = m.sigma.iter().sum::<f64>() / n;
        assert!(mean < 2.0 * sigma, "mean {mean} vs 2σ {}", 2.0 * sigma);
    }

    #[test]
    fn unknown_element_is_config_error() {
        let grid = small_scan(1e14, 1, 1, 0);
        let r = element_map(&grid, "Xx", &fit_templates(), &MapOptions::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn failed_pixels_are_flagged() {
        let mut grid = small_scan(1e14, 2, 1, 0);
        let t = fit_templates();
        // a zero-variance pixel fit still succeeds; break the design instead
        let mut beam = grid.beam.clone();
        beam.photon_energy_kev = 1.0;
        grid.beam = beam;
        let opts = MapOptions {
            weighting: MapWeighting::PerPixel,
            ..MapOptions::default()
        };
        let m = element_map(&grid, "As", &t, &opts).unwrap();
        assert_eq!(m.flagged_count(), 2);
        assert!(m.values.iter().all(|v| v.is_nan()));
        assert!(m.flags[1].as_deref().unwrap().starts_with("pixel (1, 0)"));
    }

    #[test]
    fn fingerprint_distinguishes_flux() {
        let beam = BeamConfig::default();
        let mut other = beam.clone();
        other.flux_photons_s *= 10.0;
        let det = DetectorConfig::default();
        assert_ne!(
            conditions_fingerprint(&beam, &det),
            conditions_fingerprint(&other, &det)
        );
        assert_eq!(
            conditions_fingerprint(&beam, &det),
            conditions_fingerprint(&beam.clone(), &det)
        );
    }
}
