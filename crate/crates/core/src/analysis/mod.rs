//! Spectrum decomposition, element maps, quantification and line traces.

pub mod fit;
pub mod map;
pub mod nnls;
pub mod quantify;
pub mod trace;

pub use fit::{fit_spectrum, DecompositionResult, ElementAmplitude, FitOptions, PreparedFit, Weighting};
pub use map::{conditions_fingerprint, element_map, element_maps, IntensityMap, MapOptions, MapWeighting};
pub use quantify::{
    activation, calibrate_reference, quantify_map, reference_amplitude, CalibrationFactor, DensityMap, RegionMean,
};
pub use trace::{line_trace, snr, trace_values, StdConvention, TraceAxis, TracePoint, TraceWindow};
