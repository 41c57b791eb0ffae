use delta_core::transport::{
    delta_sigma_parallel, delta_sigma_perp, delta_sigma_perp_jacobian, delta_sigma_tilt, fit_parallel, fit_perp,
    fit_tilt, gamma_for_thickness, hall_analysis, hall_slope, sigma0, thickness, MagnetoPoint, MagnetoTrace,
    Orientation, PerpFitOptions, Quantity, ThicknessInputs, TiltConvention, WlParams,
};
use delta_core::Measured;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn params(p: f64, gamma: f64) -> WlParams {
    WlParams {
        l_nm: Measured::exact(4.8),
        lphi_nm: Measured::exact(73.6),
        gamma_t2: Measured::exact(gamma),
        p: Measured::exact(p),
        t_nm: None,
    }
}

/// Points `f(x)` with relative Gaussian noise `rel`, errors attached.
fn noisy(xs: &[f64], rel: f64, seed: u64, f: impl Fn(f64) -> f64) -> Vec<MagnetoPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    xs.iter()
        .map(|&x| {
            let v = f(x);
            let sd = rel * v.abs();
            MagnetoPoint {
                x,
                value: v + sd * normal.sample(&mut rng),
                error: (sd > 0.0).then_some(sd),
            }
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

proptest! {
    #[test]
    fn jacobian_matches_finite_difference(
        b in 1e-3f64..20.0,
        l in 1.0f64..30.0,
        ratio in 1.5f64..60.0,
    ) {
        let lphi = l * ratio;
        let (v, dl, dphi) = delta_sigma_perp_jacobian(b, l, lphi).unwrap();
        prop_assert_eq!(v, delta_sigma_perp(b, l, lphi).unwrap());
        let h = 1e-5;
        let fd = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
        let fd_l = fd(&|u| delta_sigma_perp(b, l * u.exp(), lphi).unwrap());
        let fd_phi = fd(&|u| delta_sigma_perp(b, l, lphi * u.exp()).unwrap());
        let scale = sigma0() * 1e-6;
        prop_assert!((dl - fd_l).abs() <= scale + 1e-5 * fd_l.abs(), "dL {} vs {}", dl, fd_l);
        prop_assert!((dphi - fd_phi).abs() <= scale + 1e-5 * fd_phi.abs(), "dLphi {} vs {}", dphi, fd_phi);
    }

    #[test]
    fn tilt_lies_between_components(angle in 0.0f64..=90.0, p in 0.5f64..4.0) {
        let w = params(p, 0.0078);
        let v = delta_sigma_tilt(9.0, angle, &w, TiltConvention::Geometric).unwrap();
        let (s, c) = angle.to_radians().sin_cos();
        let perp = delta_sigma_perp(9.0 * s, 4.8, 73.6).unwrap();
        let par = delta_sigma_parallel(9.0 * c.max(0.0), 0.0078).unwrap();
        prop_assert!(v >= perp.max(par) * (1.0 - 1e-9));
        prop_assert!(v <= (perp + par) * (1.0 + 1e-9) || p < 1.0);
    }
}

#[test]
fn tilt_exponent_recovered_under_noise() {
    let angles: Vec<f64> = (0..=180).map(|k| 0.5 * k as f64).collect();
    for convention in [TiltConvention::Geometric, TiltConvention::FullParallel] {
        for p_true in [1.5, 1.9, 2.5] {
            let w = params(p_true, 0.0078);
            let fits: Vec<f64> = (0..15)
                .map(|seed| {
                    let pts = noisy(&angles, 0.02, seed, |a| {
                        delta_sigma_tilt(9.0, a, &w, convention).unwrap()
                    });
                    let trace =
                        MagnetoTrace::new(Orientation::AngleSweep { field_t: 9.0 }, Quantity::DeltaSigma, pts).unwrap();
                    fit_tilt(&trace, 4.8, 73.6, 0.0078, convention).unwrap().p.value
                })
                .collect();
            let m = median(fits);
            assert!((m - p_true).abs() < 0.1, "{convention:?} p {p_true}: median {m}");
        }
    }
}

#[test]
fn end_to_end_thickness_from_synthetic_runs() {
    // truth: a 1.0 nm layer at the reference carrier density
    let (l, lphi, n) = (4.8, 73.6, 1.31e14);
    let gamma = gamma_for_thickness(1.0, lphi, l, n).unwrap();
    let fields: Vec<f64> = (0..60).map(|i| 0.05 + 8.95 * i as f64 / 59.0).collect();

    let perp_pts = noisy(&fields, 0.002, 1, |b| delta_sigma_perp(b, l, lphi).unwrap());
    let perp = fit_perp(
        &MagnetoTrace::new(Orientation::Perpendicular, Quantity::DeltaSigma, perp_pts).unwrap(),
        &PerpFitOptions::default(),
    )
    .unwrap();
    assert!(perp.valid);

    let par_pts = noisy(&fields, 0.002, 2, |b| delta_sigma_parallel(b, gamma).unwrap());
    let par = fit_parallel(&MagnetoTrace::new(Orientation::Parallel, Quantity::DeltaSigma, par_pts).unwrap()).unwrap();

    let slope = hall_slope(n);
    let hall_pts: Vec<(f64, f64)> = fields.iter().map(|&b| (b, slope * b + 0.3)).collect();
    let hall = hall_analysis(
        &MagnetoTrace::from_pairs(Orientation::Perpendicular, Quantity::Rxy, &hall_pts).unwrap(),
        Measured::new(1.0e-3, 1.0e-5),
    )
    .unwrap();
    assert!((hall.n_cm2.value / n - 1.0).abs() < 1e-9);

    let t = thickness(&ThicknessInputs {
        lphi_nm: perp.lphi_nm,
        l_nm: perp.l_nm,
        n_cm2: hall.n_cm2,
        gamma_t2: par.gamma_t2,
    })
    .unwrap();
    assert!((t.value - 1.0).abs() < 3.0 * t.sigma.max(0.005), "t = {t:?}");
    assert!(t.sigma > 0.0 && t.sigma < 0.1);
}

#[test]
fn perpendicular_fit_ignores_point_order() {
    let fields: Vec<f64> = (0..30).map(|i| 0.02 + 0.3 * i as f64).collect();
    let pts = noisy(&fields, 0.01, 9, |b| delta_sigma_perp(b, 15.0, 150.0).unwrap());
    let mut rev = pts.clone();
    rev.reverse();
    let opts = PerpFitOptions::default();
    let a = fit_perp(
        &MagnetoTrace::new(Orientation::Perpendicular, Quantity::DeltaSigma, pts).unwrap(),
        &opts,
    )
    .unwrap();
    let b = fit_perp(
        &MagnetoTrace::new(Orientation::Perpendicular, Quantity::DeltaSigma, rev).unwrap(),
        &opts,
    )
    .unwrap();
    assert!((a.l_nm.value / b.l_nm.value - 1.0).abs() < 1e-8);
    assert!((a.lphi_nm.value / b.lphi_nm.value - 1.0).abs() < 1e-8);
}
