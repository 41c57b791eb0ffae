//! Forward model: fluorescence and scatter spectra, Poisson-sampled pixels,
//! raster scans and dose bookkeeping.

pub mod dose;
pub mod elements;
pub mod layout;
pub mod synth;

pub use dose::{dose_report, Absorber, DoseReport};
pub use elements::{builtin_template, builtin_templates, ElementTemplate, EmissionLine};
pub use layout::{DeviceLayout, Rect, Region};
pub use synth::{
    compton_energy, expected_pixel, illuminated_atoms, simulate_pixel, simulate_scan, synth_element_peaks,
    synth_scatter_peaks, ScanPlan, ScatterModel, SimulationModel,
};
