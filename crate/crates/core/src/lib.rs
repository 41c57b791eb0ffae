//! Metrology for buried dopant delta layers.
//!
//! * [`forward`] synthesizes energy-dispersive X-ray fluorescence spectra and
//!   raster scans of a device layout, with Poisson noise and dose accounting.
//! * [`analysis`] decomposes spectra into element amplitudes, builds maps and
//!   converts them to absolute areal densities against a reference sample.
//! * [`transport`] fits weak-localization magnetoconductance, analyses Hall
//!   data and extracts the layer thickness.

pub mod analysis;
pub mod error;
pub mod forward;
pub mod model;
pub mod transport;

pub use error::{Error, Result};
pub use model::{
    areal_density_convert, areal_density_to_cm2, channel_to_energy, ArealUnit, BeamConfig, DetectorConfig,
    ExternalReference, Measured, PhysicalConstants, ScanGrid, Spectrum, CODATA_2018,
};
