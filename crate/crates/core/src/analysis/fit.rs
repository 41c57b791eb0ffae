//! Linear template decomposition of a spectrum.
//!
//! Columns: one unit-area shape per element template (amplitude = total
//! detected counts of that element), optional elastic and Compton scatter
//! peaks, and a Legendre background polynomial over the fit window. Element
//! and scatter amplitudes are constrained non-negative; background
//! coefficients are free.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::nnls::solve_bounded;
use crate::error::{Error, Result};
use crate::forward::elements::ElementTemplate;
use crate::forward::synth::{scatter_shapes, template_shape};
use crate::model::{BeamConfig, DetectorConfig, Measured, Spectrum};

/// Per-bin weighting of residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// w = 1 / max(counts, 1)
    Poisson,
    Uniform,
    /// w = 1 / max(variance, 1) with externally estimated per-bin variances.
    Variance(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Scatter geometry; `None` leaves scatter peaks out of the model.
    pub scatter_angle_deg: Option<f64>,
    pub background_order: usize,
    pub weighting: Weighting,
    /// Energy window (keV); `None` fits every bin.
    pub window_kev: Option<(f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            scatter_angle_deg: Some(90.0),
            background_order: 2,
            weighting: Weighting::Poisson,
            window_kev: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementAmplitude {
    pub symbol: String,
    /// Total detected counts attributed to the element.
    pub amplitude: Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub elements: Vec<ElementAmplitude>,
    /// Legendre coefficients (counts per bin) of the background.
    pub background: Vec<f64>,
    pub elastic: Option<Measured>,
    pub compton: Option<Measured>,
    /// Unweighted residual norm √Σ(data − model)², counts.
    pub residual_norm: f64,
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub dof: usize,
}

impl DecompositionResult {
    pub fn amplitude(&self, symbol: &str) -> Option<Measured> {
        self.elements.iter().find(|e| e.symbol == symbol).map(|e| e.amplitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColumnKind {
    Element,
    Elastic,
    Compton,
    Background,
}

/// A decomposition design with fixed weights. Solving many spectra against
/// one prepared design shares the normal matrix.
#[derive(Debug, Clone)]
pub struct PreparedFit {
    bins: std::ops::Range<usize>,
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
    /// columns[k][i] over the windowed bins
    columns: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
    gram: DMatrix<f64>,
    cov_diag: Vec<f64>,
    /// rows of (AᵀWA)⁻¹AᵀW, for variance propagation with a supplied
    /// per-bin variance
    projector: Vec<Vec<f64>>,
}

fn window_bins(edges: &[f64], window: Option<(f64, f64)>) -> Result<std::ops::Range<usize>> {
    let n = edges.len() - 1;
    let Some((lo, hi)) = window else {
        return Ok(0..n);
    };
    if !(hi > lo) {
        return Err(Error::Config(format!("fit window ({lo}, {hi}) is empty")));
    }
    let start = (0..n).find(|&i| 0.5 * (edges[i] + edges[i + 1]) >= lo).unwrap_or(n);
    let stop = (0..n)
        .rev()
        .find(|&i| 0.5 * (edges[i] + edges[i + 1]) <= hi)
        .map(|i| i + 1)
        .unwrap_or(0);
    if stop <= start {
        return Err(Error::Config(format!("fit window ({lo}, {hi}) contains no bins")));
    }
    Ok(start..stop)
}

/// Legendre polynomials P₀..P_order evaluated at u ∈ [−1, 1].
fn legendre(order: usize, u: f64) -> Vec<f64> {
    let mut p = vec![1.0];
    if order >= 1 {
        p.push(u);
    }
    for k in 1..order {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * u * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

impl PreparedFit {
    /// Build the design for spectra binned like `reference`. Weights come
    /// from `options.weighting`; `Poisson` uses the reference counts.
    pub fn new(
        reference: &Spectrum,
        templates: &[ElementTemplate],
        beam: &BeamConfig,
        detector: &DetectorConfig,
        options: &FitOptions,
    ) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::Domain("empty spectrum".into()));
        }
        if templates.is_empty() {
            return Err(Error::Config("at least one element template is required".into()));
        }
        let edges = reference.bin_edges();
        let bins = window_bins(edges, options.window_kev)?;
        let (e_lo, e_hi) = (edges[bins.start], edges[bins.end]);

        let mut names = Vec::new();
        let mut kinds = Vec::new();
        let mut columns = Vec::new();
        for t in templates {
            t.validate()?;
            if names.contains(&t.symbol) {
                return Err(Error::Degenerate {
                    first: t.symbol.clone(),
                    second: t.symbol.clone(),
                });
            }
            let shape = template_shape(t, beam, detector, edges);
            let col: Vec<f64> = shape[bins.clone()].to_vec();
            if col.iter().sum::<f64>() <= 1e-12 {
                return Err(Error::RankDeficient(format!(
                    "template {} has no excited line inside the fitted range",
                    t.symbol
                )));
            }
            names.push(t.symbol.clone());
            kinds.push(ColumnKind::Element);
            columns.push(col);
        }
        if let Some(angle) = options.scatter_angle_deg {
            if !(angle > 0.0 && angle < 180.0) {
                return Err(Error::Config(format!("scatter angle {angle} not in (0, 180)")));
            }
            let (el, co) = scatter_shapes(beam, detector, angle, edges);
            for (name, kind, shape) in [
                ("elastic", ColumnKind::Elastic, el),
                ("compton", ColumnKind::Compton, co),
            ] {
                let col: Vec<f64> = shape[bins.clone()].to_vec();
                if col.iter().sum::<f64>() > 1e-12 {
                    names.push(name.into());
                    kinds.push(kind);
                    columns.push(col);
                }
            }
        }
        let centers: Vec<f64> = bins.clone().map(|i| 0.5 * (edges[i] + edges[i + 1])).collect();
        let mid = 0.5 * (e_lo + e_hi);
        let half = 0.5 * (e_hi - e_lo);
        let bg: Vec<Vec<f64>> = centers
            .iter()
            .map(|e| legendre(options.background_order, (e - mid) / half))
            .collect();
        for k in 0..=options.background_order {
            names.push(format!("bg{k}"));
            kinds.push(ColumnKind::Background);
            columns.push(bg.iter().map(|p| p[k]).collect());
        }

        let weights = match &options.weighting {
            Weighting::Uniform => None,
            Weighting::Poisson => Some(bins.clone().map(|i| 1.0 / reference.counts()[i].max(1.0)).collect()),
            Weighting::Variance(v) => {
                if v.len() != reference.len() {
                    return Err(Error::Config(format!(
                        "{} variances for {} bins",
                        v.len(),
                        reference.len()
                    )));
                }
                Some(bins.clone().map(|i| 1.0 / v[i].max(1.0)).collect())
            }
        };

        let ncol = columns.len();
        let w = |i: usize| weights.as_ref().map_or(1.0, |w: &Vec<f64>| w[i]);
        let gram: DMatrix<f64> = DMatrix::from_fn(ncol, ncol, |a, b| {
            columns[a]
                .iter()
                .zip(&columns[b])
                .enumerate()
                .map(|(i, (x, y))| w(i) * x * y)
                .sum()
        });

        // identical line sets show up as parallel weighted columns
        for a in 0..ncol {
            for b in (a + 1)..ncol {
                if kinds[a] == ColumnKind::Background || kinds[b] == ColumnKind::Background {
                    continue;
                }
                let cos = gram[(a, b)] / (gram[(a, a)] * gram[(b, b)]).sqrt();
                if cos > 1.0 - 1e-9 {
                    return Err(Error::Degenerate {
                        first: names[a].clone(),
                        second: names[b].clone(),
                    });
                }
            }
        }
        let inv = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::RankDeficient("design columns are linearly dependent".into()))?
            .inverse();
        let cov_diag = (0..ncol).map(|i| inv[(i, i)].max(0.0)).collect();
        let nb = bins.len();
        let projector = (0..ncol)
            .map(|k| {
                (0..nb)
                    .map(|i| w(i) * (0..ncol).map(|j| inv[(k, j)] * columns[j][i]).sum::<f64>())
                    .collect()
            })
            .collect();

        Ok(PreparedFit {
            bins,
            names,
            kinds,
            columns,
            weights,
            gram,
            cov_diag,
            projector,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Decompose `spectrum`, which must share the design's binning.
    /// Standard errors come from the weighted normal equations.
    pub fn solve(&self, spectrum: &Spectrum) -> Result<DecompositionResult> {
        self.solve_impl(spectrum, false)
    }

    /// As [`solve`](Self::solve), but standard errors propagate the fitted
    /// model counts as the per-bin variance through the fixed-weight
    /// estimator. Use when the weights were not derived from this spectrum.
    pub fn solve_model_variance(&self, spectrum: &Spectrum) -> Result<DecompositionResult> {
        self.solve_impl(spectrum, true)
    }

    fn solve_impl(&self, spectrum: &Spectrum, model_variance: bool) -> Result<DecompositionResult> {
        let counts = &spectrum.counts()[self.bins.clone()];
        if counts.len() != self.columns[0].len() {
            return Err(Error::Domain("spectrum binning does not match the fit design".into()));
        }
        let w = |i: usize| self.weights.as_ref().map_or(1.0, |w| w[i]);
        let ncol = self.columns.len();
        let h = DVector::from_fn(ncol, |k, _| {
            self.columns[k]
                .iter()
                .zip(counts)
                .enumerate()
                .map(|(i, (a, c))| w(i) * a * c)
                .sum()
        });
        let constrained: Vec<bool> = self.kinds.iter().map(|k| *k != ColumnKind::Background).collect();
        let x = solve_bounded(&self.gram, &h, &constrained)?;

        let mut model = vec![0.0; counts.len()];
        for (k, col) in self.columns.iter().enumerate() {
            if x[k] != 0.0 {
                for (m, v) in model.iter_mut().zip(col) {
                    *m += x[k] * v;
                }
            }
        }
        let mut chi2 = 0.0;
        let mut rss = 0.0;
        for (i, (m, c)) in model.iter().zip(counts).enumerate() {
            let r = c - m;
            rss += r * r;
            chi2 += w(i) * r * r;
        }
        let dof = counts.len().saturating_sub(ncol);
        let var: Vec<f64> = if model_variance {
            self.projector
                .iter()
                .map(|row| row.iter().zip(&model).map(|(p, m)| p * p * m.max(0.0)).sum())
                .collect()
        } else {
            self.cov_diag.clone()
        };
        let measured = |k: usize| Measured::new(x[k], var[k].sqrt());

        let mut out = DecompositionResult {
            elements: Vec::new(),
            background: Vec::new(),
            elastic: None,
            compton: None,
            residual_norm: rss.sqrt(),
            chi_square: chi2,
            reduced_chi_square: if dof > 0 { chi2 / dof as f64 } else { f64::NAN },
            dof,
        };
        for k in 0..ncol {
            match self.kinds[k] {
                ColumnKind::Element => out.elements.push(ElementAmplitude {
                    symbol: self.names[k].clone(),
                    amplitude: measured(k),
                }),
                ColumnKind::Elastic => out.elastic = Some(measured(k)),
                ColumnKind::Compton => out.compton = Some(measured(k)),
                ColumnKind::Background => out.background.push(x[k]),
            }
        }
        Ok(out)
    }

    /// Model counts over the full binning of `like` for a solved result.
    pub fn model_counts(&self, like: &Spectrum, result: &DecompositionResult) -> Vec<f64> {
        let mut coeffs = Vec::with_capacity(self.columns.len());
        let (mut ei, mut bi) = (0, 0);
        for kind in &self.kinds {
            coeffs.push(match kind {
                ColumnKind::Element => {
                    ei += 1;
                    result.elements[ei - 1].amplitude.value
                }
                ColumnKind::Elastic => result.elastic.map_or(0.0, |m| m.value),
                ColumnKind::Compton => result.compton.map_or(0.0, |m| m.value),
                ColumnKind::Background => {
                    bi += 1;
                    result.background[bi - 1]
                }
            });
        }
        let mut out = vec![0.0; like.len()];
        for (k, col) in self.columns.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                out[self.bins.start + j] += coeffs[k] * v;
            }
        }
        out
    }
}

/// Decompose one spectrum into element, scatter and background components.
pub fn fit_spectrum(
    spectrum: &Spectrum,
    templates: &[ElementTemplate],
    beam: &BeamConfig,
    detector: &DetectorConfig,
    options: &FitOptions,
) -> Result<DecompositionResult> {
    PreparedFit::new(spectrum, templates, beam, detector, options)?.solve(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::elements::builtin_template;
    use crate::forward::synth::synth_element_peaks;

    #[test]
    fn legendre_values() {
        let p = legendre(3, 0.5);
        assert!((p[2] - (-0.125)).abs() < 1e-15);
        assert!((p[3] - (-0.4375)).abs() < 1e-15);
    }

    #[test]
    fn window_selects_bins() {
        let edges: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        assert_eq!(window_bins(&edges, Some((2.0, 5.0))).unwrap(), 2..5);
        assert!(window_bins(&edges, Some((5.0, 5.2))).is_err());
    }

    #[test]
    fn exact_single_element_recovery() {
        let beam = BeamConfig::default();
        let det = DetectorConfig::default();
        let t = builtin_template("As").unwrap();
        let s = synth_element_peaks(&t, 1e14, &beam, &det);
        let truth = t.expected_counts(1e14, &beam, &det);
        let opts = FitOptions {
            scatter_angle_deg: None,
            background_order: 0,
            ..FitOptions::default()
        };
        let r = fit_spectrum(&s, &[t], &beam, &det, &opts).unwrap();
        let a = r.amplitude("As").unwrap().value;
        assert!((a / truth - 1.0).abs() < 1e-9, "{a} vs {truth}");
    }

    #[test]
    fn duplicate_templates_are_degenerate() {
        let beam = BeamConfig::default();
        let det = DetectorConfig::default();
        let fe = builtin_template("Fe").unwrap();
        let mut twin = fe.clone();
        twin.symbol = "Fe2".into();
        let s = synth_element_peaks(&fe, 1e15, &beam, &det);
        match fit_spectrum(&s, &[fe, twin], &beam, &det, &FitOptions::default()) {
            Err(Error::Degenerate { first, second }) => {
                assert_eq!((first.as_str(), second.as_str()), ("Fe", "Fe2"));
            }
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn unexcited_template_is_rank_deficient() {
        let beam = BeamConfig {
            photon_energy_kev: 5.0,
            ..BeamConfig::default()
        };
        let det = DetectorConfig::default();
        let s = det.empty_spectrum();
        let r = fit_spectrum(
            &s,
            &[builtin_template("As").unwrap()],
            &beam,
            &det,
            &FitOptions::default(),
        );
        assert!(matches!(r, Err(Error::RankDeficient(_))));
    }
}
