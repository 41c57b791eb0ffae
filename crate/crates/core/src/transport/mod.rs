//! Weak-localization magnetotransport: model evaluation, fitting, Hall
//! analysis, thickness extraction and run comparison.

pub mod compare;
pub mod fit;
pub mod hall;
pub mod hln;
pub mod lm;
pub mod special;
pub mod thickness;

pub use compare::{compare_runs, ComparisonReport, QuantityComparison, RunSummary, DEFAULT_K_SIGMA};
pub use fit::{
    fit_parallel, fit_perp, fit_tilt, MagnetoPoint, MagnetoTrace, Orientation, ParallelFit, PerpFit, PerpFitOptions,
    Quantity, TiltFit, MIN_POINTS,
};
pub use hall::{hall_analysis, hall_slope, mean_free_path_nm, mobility_for_mean_free_path, HallResult};
pub use hln::{
    characteristic_fields, delta_sigma_parallel, delta_sigma_perp, delta_sigma_perp_jacobian, delta_sigma_tilt, sigma0,
    CharacteristicFields, TiltConvention, WlParams,
};
pub use special::{digamma, trigamma};
pub use thickness::{gamma_for_thickness, thickness, ThicknessInputs};
