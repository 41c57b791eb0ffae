use delta_core::analysis::{
    calibrate_reference, element_map, element_maps, fit_spectrum, line_trace, quantify_map, reference_amplitude, snr,
    trace_values, FitOptions, MapOptions, StdConvention, TraceAxis,
};
use delta_core::forward::{
    builtin_template, builtin_templates, simulate_scan, synth::poissonize, synth_element_peaks, synth_scatter_peaks,
    DeviceLayout, ScanPlan, SimulationModel,
};
use delta_core::{BeamConfig, DetectorConfig, Measured, Spectrum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// As + Fe + Al + scatter with known component totals (counts).
fn composite(truth: &[(&str, f64)], elastic: f64, compton: f64) -> Spectrum {
    let beam = BeamConfig::default();
    let det = DetectorConfig::default();
    let mut total = synth_scatter_peaks(&beam, elastic, compton, 90.0, &det).unwrap();
    for (sym, counts) in truth {
        let t = builtin_template(sym).unwrap();
        let unit = t.expected_counts(1.0, &beam, &det);
        total
            .accumulate(&synth_element_peaks(&t, counts / unit, &beam, &det))
            .unwrap();
    }
    total
}

#[test]
fn composite_recovery_at_1e5_counts() {
    let truth = [("As", 30_000.0), ("Fe", 20_000.0), ("Al", 20_000.0)];
    let expected = composite(&truth, 12_000.0, 18_000.0);
    assert!((expected.total() - 1e5).abs() < 1e3);
    let templates: Vec<_> = ["As", "Fe", "Al"]
        .iter()
        .map(|s| builtin_template(s).unwrap())
        .collect();
    let beam = BeamConfig::default();
    let det = DetectorConfig::default();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = expected.with_counts(poissonize(expected.counts(), &mut rng)).unwrap();
        let r = fit_spectrum(&noisy, &templates, &beam, &det, &FitOptions::default()).unwrap();
        for (sym, want) in truth {
            let got = r.amplitude(sym).unwrap().value;
            assert!((got / want - 1.0).abs() < 0.03, "seed {seed} {sym}: {got} vs {want}");
        }
        assert!((r.elastic.unwrap().value / 12_000.0 - 1.0).abs() < 0.03);
        assert!((r.compton.unwrap().value / 18_000.0 - 1.0).abs() < 0.03);
        assert!(r.reduced_chi_square < 1.5);
    }
}

#[test]
fn amplitudes_scale_with_counts() {
    let s = composite(&[("As", 3000.0), ("Fe", 2000.0)], 1000.0, 1500.0);
    let templates: Vec<_> = ["As", "Fe"].iter().map(|s| builtin_template(s).unwrap()).collect();
    let beam = BeamConfig::default();
    let det = DetectorConfig::default();
    let opts = FitOptions::default();
    let a = fit_spectrum(&s, &templates, &beam, &det, &opts).unwrap();
    let k = 7.5;
    let b = fit_spectrum(&s.scaled(k).unwrap(), &templates, &beam, &det, &opts).unwrap();
    for sym in ["As", "Fe"] {
        let (x, y) = (a.amplitude(sym).unwrap().value, b.amplitude(sym).unwrap().value);
        assert!((y / (k * x) - 1.0).abs() < 1e-9, "{sym}");
    }
}

#[test]
fn device_spectrum_shows_every_element() {
    // coarse long-exposure survey over the whole layout; the pads hold
    // under one Fe count per default pixel
    let layout = DeviceLayout::hall_bar("As", 1.4e14);
    let plan = ScanPlan {
        origin_um: (5.0, 5.0),
        nx: 26,
        ny: 16,
        pitch_x_um: 10.0,
        pitch_y_um: 10.0,
    };
    let beam = BeamConfig {
        dwell_s: 200.0,
        ..BeamConfig::default()
    };
    let det = DetectorConfig::default();
    let grid = simulate_scan(&layout, &beam, &det, &SimulationModel::default(), &plan, 1).unwrap();
    let sum = grid.sum_spectrum();
    let r = fit_spectrum(&sum, &builtin_templates(), &beam, &det, &FitOptions::default()).unwrap();
    for sym in ["As", "Fe", "Al", "Ar", "Au"] {
        let a = r.amplitude(sym).unwrap();
        assert!(a.value > 5.0 * a.sigma, "{sym}: {a:?}");
    }
}

fn bar_layouts(density: f64) -> (DeviceLayout, DeviceLayout) {
    (
        DeviceLayout::hall_bar("As", density),
        DeviceLayout::uniform_reference("As", 1.0e14),
    )
}

#[test]
fn closure_per_region_within_three_sigma() {
    let beam = BeamConfig::default();
    let det = DetectorConfig::default();
    let model = SimulationModel::default();
    let templates = builtin_templates();
    let (device, reference) = bar_layouts(1.4e14);
    // window straddling the bar edge and a side arm
    let plan = ScanPlan {
        origin_um: (120.0, 60.0),
        nx: 24,
        ny: 24,
        pitch_x_um: 0.5,
        pitch_y_um: 0.5,
    };
    let grid = simulate_scan(&device, &beam, &det, &model, &plan, 3).unwrap();
    assert!(grid.pixels.iter().all(|p| p.total() >= 1e3));
    let map = element_map(&grid, "As", &templates, &MapOptions::default()).unwrap();
    let ref_plan = ScanPlan { nx: 8, ny: 8, ..plan };
    let ref_grid = simulate_scan(&reference, &beam, &det, &model, &ref_plan, 4).unwrap();
    let ref_map = element_map(&ref_grid, "As", &templates, &MapOptions::default()).unwrap();
    let cal = calibrate_reference(
        "As",
        reference_amplitude(&ref_map).unwrap(),
        Measured::exact(1.0e14),
        &ref_map.fingerprint,
    )
    .unwrap();
    let dens = quantify_map(&map, &cal).unwrap();

    let bar = dens
        .region_mean(|x, y| (71.0..=89.0).contains(&y) && !(124.0..=136.0).contains(&x))
        .unwrap();
    let arm = dens
        .region_mean(|x, y| y <= 69.0 && (126.0..=134.0).contains(&x))
        .unwrap();
    let empty = dens.region_mean(|x, y| y <= 69.0 && x <= 124.0).unwrap();
    for (name, r) in [("bar", bar), ("arm", arm)] {
        // calibration counting error is common to all pixels
        let sigma = r.sigma_counting.hypot(cal.rel_uncertainty * 1.4e14);
        let z = (r.mean - 1.4e14) / sigma;
        assert!(z.abs() < 3.0, "{name}: mean {:.4e} z {z:.2}", r.mean);
    }
    // non-negative amplitudes bias an empty region upward by a fraction of
    // the single-pixel error, so compare against that
    let per_pixel = empty.sigma_counting * (empty.pixels as f64).sqrt();
    assert!(
        empty.mean >= 0.0 && empty.mean < 2.0 * per_pixel,
        "{} vs {per_pixel}",
        empty.mean
    );
}

#[test]
fn one_scan_fit_feeds_several_maps() {
    let layout = DeviceLayout::hall_bar("As", 1.4e14);
    let plan = ScanPlan {
        origin_um: (70.0, 128.0),
        nx: 6,
        ny: 4,
        pitch_x_um: 2.0,
        pitch_y_um: 2.0,
    };
    let grid = simulate_scan(
        &layout,
        &BeamConfig::default(),
        &DetectorConfig::default(),
        &SimulationModel::default(),
        &plan,
        0,
    )
    .unwrap();
    let templates = builtin_templates();
    let opts = MapOptions::default();
    let maps = element_maps(&grid, &["Al", "Fe", "As"], &templates, &opts).unwrap();
    assert_eq!(maps.len(), 3);
    for m in &maps {
        assert_eq!(m, &element_map(&grid, &m.element, &templates, &opts).unwrap());
        assert_eq!(m.flagged_count(), 0);
    }
}

/// Median on/off SNR of two 30 μm traces along the bar over `seeds`.
fn median_snr(beam: &BeamConfig, density: f64, seeds: std::ops::Range<u64>) -> f64 {
    let layout = DeviceLayout::hall_bar("As", density);
    let plan = ScanPlan {
        origin_um: (140.0, 60.0),
        nx: 60,
        ny: 2,
        pitch_x_um: 0.5,
        pitch_y_um: 20.0,
    };
    let det = DetectorConfig::default();
    let templates = builtin_templates();
    let mut v: Vec<f64> = seeds
        .map(|seed| {
            let grid = simulate_scan(&layout, beam, &det, &SimulationModel::default(), &plan, seed).unwrap();
            let map = element_map(&grid, "As", &templates, &MapOptions::default()).unwrap();
            let off = trace_values(&line_trace(&map, TraceAxis::Row, 0, None).unwrap());
            let on = trace_values(&line_trace(&map, TraceAxis::Row, 1, None).unwrap());
            snr(&on, &off, StdConvention::Population).unwrap()
        })
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

#[test]
fn snr_grows_with_root_dwell() {
    let beam = BeamConfig::default();
    let mut long = beam.clone();
    long.dwell_s *= 2.0;
    let a = median_snr(&beam, 1.4e14, 0..50);
    let b = median_snr(&long, 1.4e14, 1000..1050);
    let ratio = b / a;
    assert!((1.30..=1.53).contains(&ratio), "ratio {ratio}");
}
