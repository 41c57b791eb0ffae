//! Subcommands. Each fills a [`Report`], writes its artifacts into the output
//! directory and returns the lines to print.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use delta_core::analysis::{
    activation, calibrate_reference, element_map, element_maps, fit_spectrum, line_trace, quantify_map,
    reference_amplitude, snr, trace_values, DensityMap, IntensityMap, RegionMean, TraceWindow,
};
use delta_core::forward::{dose_report, simulate_scan, Absorber, Rect};
use delta_core::transport::{
    characteristic_fields, compare_runs, fit_parallel, fit_perp, fit_tilt, hall_analysis, thickness, HallResult,
    ParallelFit, PerpFit, RunSummary, ThicknessInputs, TiltFit,
};
use delta_core::{Measured, ScanGrid};

use crate::config::{parse_summary_toml, LoadedConfig};
use crate::error::{CliError, Result};
use crate::image::{write_grid, GridData};
use crate::report::{
    fingerprint, summary_from_report_json, ComparisonSection, DensitySection, DoseSection, HallSection, MapSection,
    ParallelSection, PerpSection, Qty, RegionSection, Report, SimulationSection, SnrSection, SpectrumFitSection,
    SummaryTable, ThicknessSection, TiltSection, TransportSummary, WeakLocalizationSection,
};
use crate::scan_io::{read_scan, scan_output_path, write_scan, ScanFormat};
use crate::spectrum_io::parse_spectrum_file;
use crate::transport_io::parse_transport_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Simulate a raster scan of the configured layout.
    Simulate,
    /// Decompose one spectrum into element, scatter and background parts.
    FitSpectrum,
    /// Element intensity maps from a scan.
    Map,
    /// Areal-density map calibrated against a reference scan.
    Quantify,
    /// Signal-to-noise ratio of line traces through an element map.
    Snr,
    /// Weak-localization fits of perpendicular, parallel and angle-sweep data.
    WlFit,
    /// Carrier density, mobility and mean free path from Hall data.
    Hall,
    /// Layer thickness from transport results or direct inputs.
    Thickness,
    /// Before/after consistency check of two runs.
    Compare,
    /// Every analysis the inputs allow, with the summary table.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitSpectrum => "fit-spectrum",
            Command::Map => "map",
            Command::Quantify => "quantify",
            Command::Snr => "snr",
            Command::WlFit => "wl-fit",
            Command::Hall => "hall",
            Command::Thickness => "thickness",
            Command::Compare => "compare",
            Command::Report => "report",
        }
    }
}

/// Perpendicular fit plus the optional parallel and angle-sweep fits.
type WlFits = (PerpFit, Option<ParallelFit>, Option<TiltFit>);

pub struct Context {
    pub cfg: LoadedConfig,
    pub out: PathBuf,
    pub format: ScanFormat,
}

pub struct Outcome {
    pub report: Report,
    pub lines: Vec<String>,
}

/// Run `command`, writing `report.json` and its artifacts into `ctx.out`.
pub fn run(ctx: &Context, command: Command) -> Result<Outcome> {
    let mut run = Run {
        ctx,
        report: Report::new(command.name(), &ctx.cfg.config),
        lines: Vec::new(),
    };
    match command {
        Command::Simulate => run.simulate()?,
        Command::FitSpectrum => run.fit_spectrum()?,
        Command::Map => run.map()?,
        Command::Quantify => {
            run.quantify()?;
        }
        Command::Snr => run.snr()?,
        Command::WlFit => {
            run.wl_fit(true)?;
        }
        Command::Hall => {
            run.hall(true)?;
        }
        Command::Thickness => run.thickness()?,
        Command::Compare => run.compare()?,
        Command::Report => run.full_report()?,
    }
    run.report.write(&ctx.out)?;
    Ok(Outcome {
        report: run.report,
        lines: run.lines,
    })
}

struct Run<'a> {
    ctx: &'a Context,
    report: Report,
    lines: Vec<String>,
}

fn mean_max(values: &[f64], flags: &[Option<String>]) -> (f64, f64) {
    let good: Vec<f64> = values
        .iter()
        .zip(flags)
        .filter(|(v, f)| f.is_none() && v.is_finite())
        .map(|(v, _)| *v)
        .collect();
    if good.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = good.iter().sum::<f64>() / good.len() as f64;
    (mean, good.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

impl Run<'_> {
    fn cfg(&self) -> &LoadedConfig {
        &self.ctx.cfg
    }

    /// Resolve a required input and record its fingerprint.
    fn input(&mut self, key: &str, p: &Option<PathBuf>) -> Result<PathBuf> {
        let full = self.cfg().input(key, p)?;
        let shown = p.as_deref().unwrap_or(Path::new(""));
        self.report.inputs.insert(key.to_string(), fingerprint(shown, &full)?);
        Ok(full)
    }

    fn record_optional_inputs(&mut self) -> Result<()> {
        let c = self.cfg().config.clone();
        if c.element_table.is_some() {
            self.input("element_table", &c.element_table)?;
        }
        if c.layout.path.is_some() {
            self.input("layout.path", &c.layout.path)?;
        }
        Ok(())
    }

    fn out(&self, name: &str) -> PathBuf {
        self.ctx.out.join(name)
    }

    fn write_grid(&self, stem: &str, grid: &GridData) -> Result<Vec<String>> {
        write_grid(&self.ctx.out, stem, grid)?;
        Ok(vec![format!("{stem}.pgm"), format!("{stem}.csv")])
    }

    fn simulate(&mut self) -> Result<()> {
        self.record_optional_inputs()?;
        let cfg = self.cfg().clone();
        let c = &cfg.config;
        let layout = cfg.layout()?;
        let model = cfg.simulation_model()?;
        let plan = c.scan.plan();
        let grid = simulate_scan(&layout, &c.beam, &c.detector, &model, &plan, c.seed)?;
        let scan_path = scan_output_path(&self.ctx.out, self.ctx.format);
        write_scan(&scan_path, &grid, self.ctx.format)?;

        let totals: Vec<f64> = grid.pixels.iter().map(|p| p.counts().iter().sum()).collect();
        let total: f64 = totals.iter().sum();
        let preview = GridData {
            name: "total_counts".into(),
            unit: "counts".into(),
            nx: grid.nx,
            ny: grid.ny,
            pitch_x_um: grid.pitch_x_um,
            pitch_y_um: grid.pitch_y_um,
            origin_um: grid.origin_um,
            sigma: totals.iter().map(|t| t.sqrt()).collect(),
            values: totals,
            flags: vec![None; grid.pixels.len()],
        };
        self.write_grid("total_counts", &preview)?;
        for el in layout.elements() {
            if !c.analysis.elements.contains(&el) {
                continue;
            }
            let values: Vec<f64> = (0..grid.pixels.len())
                .map(|k| {
                    let (x, y) = grid.position(k % grid.nx, k / grid.nx);
                    layout.mean_density(&el, &Rect::centered(x, y, c.beam.spot_width_um, c.beam.spot_height_um))
                })
                .collect();
            let truth = GridData {
                name: format!("truth_{el}"),
                unit: "cm-2".into(),
                sigma: vec![0.0; values.len()],
                values,
                flags: vec![None; grid.pixels.len()],
                ..preview.clone()
            };
            self.write_grid(&format!("truth_{el}"), &truth)?;
        }

        let dose = dose_report(
            &c.beam,
            c.beam.dwell_s,
            &Absorber::silicon_with_arsenic(),
            Some((grid.pitch_x_um, grid.pitch_y_um)),
        )?;
        let npix = grid.pixels.len() as f64;
        let scan_name = scan_path
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_default();
        self.lines.push(format!(
            "simulated {}x{} scan ({} counts) -> {scan_name}",
            grid.nx, grid.ny, total
        ));
        self.report.conditions_fingerprint =
            Some(delta_core::analysis::conditions_fingerprint(&grid.beam, &grid.detector));
        self.report.simulation = Some(SimulationSection {
            scan_path: scan_name,
            nx: grid.nx,
            ny: grid.ny,
            total_counts: Qty::new(total, "counts"),
            mean_counts_per_pixel: Qty::new(total / npix, "counts"),
            dose: DoseSection::from(&dose),
        });
        Ok(())
    }

    fn fit_spectrum(&mut self) -> Result<()> {
        self.record_optional_inputs()?;
        let c = self.cfg().config.clone();
        let path = self.input("inputs.spectrum", &c.inputs.spectrum)?;
        let spectrum = parse_spectrum_file(&path)?;
        let templates = self.cfg().templates()?;
        let result = fit_spectrum(&spectrum, &templates, &c.beam, &c.detector, &c.analysis.fit_options()?)?;
        for e in &result.elements {
            self.lines.push(format!(
                "{:<3} {:.6e} +/- {:.3e} counts",
                e.symbol, e.amplitude.value, e.amplitude.sigma
            ));
        }
        self.lines
            .push(format!("reduced chi-square {:.4}", result.reduced_chi_square));
        self.report.conditions_fingerprint = Some(delta_core::analysis::conditions_fingerprint(&c.beam, &c.detector));
        self.report.spectrum_fit = Some(SpectrumFitSection::from(&result));
        Ok(())
    }

    fn load_scan(&mut self, key: &str, p: &Option<PathBuf>) -> Result<ScanGrid> {
        let path = self.input(key, p)?;
        read_scan(&path)
    }

    fn record_map(&mut self, m: &IntensityMap, stem: &str) -> Result<()> {
        let files = self.write_grid(stem, &GridData::from_intensity(m))?;
        let (mean, max) = mean_max(&m.values, &m.flags);
        self.lines.push(format!(
            "{}: mean {mean:.4e} counts, max {max:.4e} counts, {} flagged -> {stem}.pgm",
            m.element,
            m.flagged_count()
        ));
        self.report.conditions_fingerprint = Some(m.fingerprint.clone());
        self.report.maps.insert(
            m.element.clone(),
            MapSection {
                files,
                nx: m.nx,
                ny: m.ny,
                flagged_pixels: m.flagged_count(),
                mean: Qty::new(mean, "counts"),
                max: Qty::new(max, "counts"),
            },
        );
        Ok(())
    }

    fn map(&mut self) -> Result<()> {
        self.record_optional_inputs()?;
        let c = self.cfg().config.clone();
        let grid = self.load_scan("inputs.scan", &c.inputs.scan)?;
        let templates = self.cfg().templates()?;
        let elements: Vec<&str> = c.analysis.elements.iter().map(String::as_str).collect();
        if elements.is_empty() {
            return Err(CliError::Config("analysis.elements is empty".into()));
        }
        let maps = element_maps(&grid, &elements, &templates, &c.analysis.map_options()?)?;
        for m in &maps {
            self.record_map(m, &format!("map_{}", m.element))?;
        }
        Ok(())
    }

    /// Calibrated density map of the reference element and its region mean.
    fn quantify(&mut self) -> Result<(DensityMap, Option<RegionMean>)> {
        self.record_optional_inputs()?;
        let c = self.cfg().config.clone();
        let el = c.reference.element.clone();
        let known = self.cfg().known_reference_density()?;
        let grid = self.load_scan("inputs.scan", &c.inputs.scan)?;
        let reference = self.load_scan("inputs.reference_scan", &c.inputs.reference_scan)?;
        let templates = self.cfg().templates()?;
        let options = c.analysis.map_options()?;

        let ref_map = element_map(&reference, &el, &templates, &options)?;
        let amplitude = reference_amplitude(&ref_map)?;
        let cal = calibrate_reference(&el, amplitude, known, &ref_map.fingerprint)?;
        let map = element_map(&grid, &el, &templates, &options)?;
        self.record_map(&map, &format!("map_{el}"))?;
        let density = quantify_map(&map, &cal)?;
        let stem = format!("density_{el}");
        let files = self.write_grid(&stem, &GridData::from_density(&density))?;
        let region = density.region_mean(|x, y| c.region.contains(x, y));

        self.lines.push(format!(
            "calibration {:.6e} cm-2/count (+/- {:.2}%)",
            cal.factor,
            100.0 * cal.rel_uncertainty
        ));
        match &region {
            Some(r) => self.lines.push(format!(
                "{el} region mean {:.4e} +/- {:.2e} cm-2 over {} pixels -> {stem}.pgm",
                r.mean, r.sigma, r.pixels
            )),
            None => self.lines.push(format!("{el}: no unflagged pixel inside the region")),
        }
        self.report.densities.insert(
            el,
            DensitySection {
                reference_amplitude: Qty::measured(amplitude, "counts"),
                known_density: Qty::measured(known, "cm-2"),
                calibration_factor: DensitySection::calibration(&cal),
                files,
                flagged_pixels: density.flags.iter().filter(|f| f.is_some()).count(),
                region: region.as_ref().map(RegionSection::from),
            },
        );
        Ok((density, region))
    }

    fn snr(&mut self) -> Result<()> {
        self.record_optional_inputs()?;
        let c = self.cfg().config.clone();
        let s = &c.snr;
        let grid = self.load_scan("inputs.scan", &c.inputs.scan)?;
        let templates = self.cfg().templates()?;
        let map = element_map(&grid, &s.element, &templates, &c.analysis.map_options()?)?;
        let window = match (s.window_start_um, s.window_length_um) {
            (None, None) => None,
            (Some(start_um), Some(length_um)) => Some(TraceWindow { start_um, length_um }),
            _ => {
                return Err(CliError::Config(
                    "snr.window_start_um and window_length_um go together".into(),
                ))
            }
        };
        let on = line_trace(&map, s.axis, s.on_index, window)?;
        let off = line_trace(&map, s.axis, s.off_index, window)?;
        let (von, voff) = (trace_values(&on), trace_values(&off));
        let ratio = snr(&von, &voff, s.std)?;

        let mut csv = String::from("position_um,on_counts,off_counts\n");
        for (a, b) in on.iter().zip(&off) {
            writeln!(csv, "{:?},{:?},{:?}", a.position_um, a.value, b.value).unwrap();
        }
        let path = self.out("snr_traces.csv");
        std::fs::write(&path, csv).map_err(|e| CliError::io(&path, e))?;

        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        self.lines
            .push(format!("SNR {ratio:.3} ({} on, {} off points)", von.len(), voff.len()));
        self.report.conditions_fingerprint = Some(map.fingerprint.clone());
        self.report.snr = Some(SnrSection {
            element: s.element.clone(),
            on_points: von.len(),
            off_points: voff.len(),
            mean_on: Qty::new(mean(&von), "counts"),
            mean_off: Qty::new(mean(&voff), "counts"),
            snr: Qty::new(ratio, "1"),
            file: "snr_traces.csv".into(),
        });
        Ok(())
    }

    fn wl_fit(&mut self, required: bool) -> Result<Option<WlFits>> {
        let c = self.cfg().config.clone();
        let i = &c.inputs;
        if i.perpendicular.is_none() && !required {
            return Ok(None);
        }
        let perp_trace = parse_transport_file(&self.input("inputs.perpendicular", &i.perpendicular)?)?;
        let perp = fit_perp(&perp_trace, &c.transport.perp_options())?;
        let fields = characteristic_fields(perp.l_nm.value, perp.lphi_nm.value)?;
        self.lines.push(format!(
            "L = {:.4} +/- {:.4} nm, L_phi = {:.4} +/- {:.4} nm{}",
            perp.l_nm.value,
            perp.l_nm.sigma,
            perp.lphi_nm.value,
            perp.lphi_nm.sigma,
            if perp.valid {
                ""
            } else {
                " (L_phi <= L: outside the weak-localization regime)"
            }
        ));
        let parallel = match &i.parallel {
            None => None,
            Some(_) => {
                let t = parse_transport_file(&self.input("inputs.parallel", &i.parallel)?)?;
                let f = fit_parallel(&t)?;
                self.lines.push(format!(
                    "gamma = {:.4e} +/- {:.2e} T^-2",
                    f.gamma_t2.value, f.gamma_t2.sigma
                ));
                Some(f)
            }
        };
        let tilt = match &i.angle_sweep {
            None => None,
            Some(_) => {
                let gamma = parallel
                    .as_ref()
                    .ok_or_else(|| CliError::Config("inputs.angle_sweep needs inputs.parallel for gamma".into()))?;
                let t = parse_transport_file(&self.input("inputs.angle_sweep", &i.angle_sweep)?)?;
                let f = fit_tilt(
                    &t,
                    perp.l_nm.value,
                    perp.lphi_nm.value,
                    gamma.gamma_t2.value,
                    c.transport.tilt_convention,
                )?;
                self.lines.push(format!("p = {:.4} +/- {:.4}", f.p.value, f.p.sigma));
                Some(f)
            }
        };
        self.report.weak_localization = Some(WeakLocalizationSection {
            perpendicular: PerpSection::new(&perp, &fields),
            parallel: parallel.as_ref().map(ParallelSection::from),
            tilt: tilt.as_ref().map(TiltSection::from),
        });
        self.update_summary(None, Some((&perp, parallel.as_ref(), tilt.as_ref())), None);
        Ok(Some((perp, parallel, tilt)))
    }

    fn hall(&mut self, required: bool) -> Result<Option<HallResult>> {
        let c = self.cfg().config.clone();
        if c.inputs.hall.is_none() && !required {
            return Ok(None);
        }
        let trace = parse_transport_file(&self.input("inputs.hall", &c.inputs.hall)?)?;
        let sheet = c
            .transport
            .sheet_conductance_s
            .ok_or_else(|| CliError::Config("transport.sheet_conductance_s is required for Hall analysis".into()))?;
        let h = hall_analysis(&trace, Measured::new(sheet, c.transport.sheet_conductance_sigma_s))?;
        self.lines.push(format!(
            "n = {:.4e} +/- {:.2e} cm-2, mu = {:.4} +/- {:.3} cm2/(V s), L = {:.4} +/- {:.3} nm",
            h.n_cm2.value, h.n_cm2.sigma, h.mu_cm2_vs.value, h.mu_cm2_vs.sigma, h.l_nm.value, h.l_nm.sigma
        ));
        self.report.hall = Some(HallSection::from(&h));
        self.update_summary(Some(&h), None, None);
        Ok(Some(h))
    }

    /// Merge new results into the report's transport summary. Hall values
    /// take precedence for L.
    fn update_summary(
        &mut self,
        hall: Option<&HallResult>,
        wl: Option<(&PerpFit, Option<&ParallelFit>, Option<&TiltFit>)>,
        t_nm: Option<Measured>,
    ) {
        let mut s = self
            .report
            .transport_summary
            .as_ref()
            .map(TransportSummary::to_run_summary)
            .unwrap_or_default();
        if let Some(h) = hall {
            s.n_cm2 = Some(h.n_cm2);
            s.mu_cm2_vs = Some(h.mu_cm2_vs);
            s.l_nm = Some(h.l_nm);
        }
        if let Some((perp, par, tilt)) = wl {
            if s.l_nm.is_none() {
                s.l_nm = Some(perp.l_nm);
            }
            s.lphi_nm = Some(perp.lphi_nm);
            s.gamma_t2 = par.map(|f| f.gamma_t2).or(s.gamma_t2);
            s.p = tilt.map(|f| f.p).or(s.p);
        }
        if t_nm.is_some() {
            s.t_nm = t_nm;
        }
        self.report.transport_summary = Some(TransportSummary::from(&s));
    }

    fn record_thickness(&mut self, inputs: &ThicknessInputs) -> Result<Measured> {
        let t = thickness(inputs)?;
        self.lines.push(format!("t = {:.4} +/- {:.4} nm", t.value, t.sigma));
        self.report.thickness = Some(ThicknessSection {
            t: Qty::measured(t, "nm"),
            l_phi: Qty::measured(inputs.lphi_nm, "nm"),
            l: Qty::measured(inputs.l_nm, "nm"),
            n: Qty::measured(inputs.n_cm2, "cm-2"),
            gamma: Qty::measured(inputs.gamma_t2, "T-2"),
        });
        self.update_summary(None, None, Some(t));
        Ok(t)
    }

    /// Thickness from transport files, when they suffice.
    fn derived_thickness(&mut self, hall: Option<&HallResult>, wl: Option<&WlFits>) -> Result<Option<Measured>> {
        let (Some(h), Some((perp, Some(par), _))) = (hall, wl) else {
            return Ok(None);
        };
        let inputs = ThicknessInputs {
            lphi_nm: perp.lphi_nm,
            l_nm: h.l_nm,
            n_cm2: h.n_cm2,
            gamma_t2: par.gamma_t2,
        };
        self.record_thickness(&inputs).map(Some)
    }

    fn thickness(&mut self) -> Result<()> {
        if let Some(t) = self.cfg().config.thickness {
            self.record_thickness(&t.into())?;
            return Ok(());
        }
        let hall = self.hall(false)?;
        let wl = self.wl_fit(false)?;
        if self.derived_thickness(hall.as_ref(), wl.as_ref())?.is_none() {
            return Err(CliError::Config(
                "thickness needs a [thickness] table or inputs.perpendicular, inputs.parallel and inputs.hall".into(),
            ));
        }
        Ok(())
    }

    fn read_summary(&mut self, key: &str, p: &Option<PathBuf>) -> Result<RunSummary> {
        let path = self.input(key, p)?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            summary_from_report_json(&path, &text)
        } else {
            parse_summary_toml(&path, &text)
        }
    }

    fn compare(&mut self) -> Result<()> {
        let c = self.cfg().config.clone();
        let before = self.read_summary("inputs.before", &c.inputs.before)?;
        let after = self.read_summary("inputs.after", &c.inputs.after)?;
        let cmp = compare_runs(&before, &after, c.transport.k_sigma);
        for q in cmp.quantities.iter().filter(|q| !q.missing) {
            self.lines.push(format!(
                "{:<6} diff {:+.4e} {} z {:+.2}",
                q.quantity,
                q.difference.unwrap_or(f64::NAN),
                q.unit,
                q.z_score.unwrap_or(f64::NAN)
            ));
        }
        if let Some(dt) = cmp.thickness_change_angstrom {
            self.lines
                .push(format!("delta t {:+.3} +/- {:.3} angstrom", dt.value, dt.sigma));
        }
        let section = ComparisonSection::from(&cmp);
        self.lines.push(format!("verdict: {}", section.verdict));
        self.report.comparison = Some(section);
        Ok(())
    }

    fn full_report(&mut self) -> Result<()> {
        let c = self.cfg().config.clone();
        let i = &c.inputs;
        let n_xrf = if i.scan.is_some() && i.reference_scan.is_some() && c.reference.density_cm2.is_some() {
            self.quantify()?.1.map(|r| Measured::new(r.mean, r.sigma))
        } else {
            None
        };
        let hall = if i.hall.is_some() { self.hall(true)? } else { None };
        let wl = self.wl_fit(false)?;
        let t = match c.thickness {
            Some(t) => Some(self.record_thickness(&t.into())?),
            None => self.derived_thickness(hall.as_ref(), wl.as_ref())?,
        };
        let n_hall = hall.as_ref().map(|h| h.n_cm2);
        let act = match (n_xrf, n_hall) {
            (Some(x), Some(h)) => Some(activation(x, h)?),
            _ => None,
        };
        if i.before.is_some() && i.after.is_some() {
            self.compare()?;
        }
        let e = &c.external;
        let table = SummaryTable {
            n_xrf: n_xrf.map(|m| Qty::measured(m, "cm-2")),
            n_hall: n_hall.map(|m| Qty::measured(m, "cm-2")),
            t_mr: t.map(|m| Qty::measured(m, "nm")),
            n_stm: e.n_stm.map(|m| Qty::measured(m, "cm-2")),
            n_sims: e.n_sims.map(|m| Qty::measured(m, "cm-2")),
            t_sims: e.t_sims.map(|m| Qty::measured(m, "nm")),
            activation: act.map(|m| Qty::measured(m, "%")),
        };
        self.lines.extend(table.render().lines().map(String::from));
        self.report.summary = Some(table);
        Ok(())
    }
}
