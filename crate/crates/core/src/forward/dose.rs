//! Exposure bookkeeping for one scan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BeamConfig, KEV_TO_J};

/// Material absorbing the beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorber {
    /// Linear absorption coefficient, 1/μm.
    pub linear_absorption_per_um: f64,
    /// Mass density, g/cm³.
    pub mass_density_g_cm3: f64,
    /// Effective per-atom absorption cross-section of the tracked species, nm².
    pub atom_cross_section_nm2: f64,
}

impl Absorber {
    /// Silicon at 11.88 keV (μ/ρ ≈ 25 cm²/g) with the As cross-section set
    /// to 1.5×10⁻⁴ nm².
    pub fn silicon_with_arsenic() -> Self {
        Absorber {
            linear_absorption_per_um: 25.0 * 2.33 * 1e-4,
            mass_density_g_cm3: 2.33,
            atom_cross_section_nm2: 1.5e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseReport {
    /// Photons per nm² delivered in one pixel dwell.
    pub fluence_per_nm2: f64,
    /// Fluence at a point summed over every overlapping beam position.
    pub accumulated_fluence_per_nm2: f64,
    /// Deposited energy per volume at the surface, J/nm³.
    pub energy_density_j_nm3: f64,
    /// Absorbed dose, Gy (J/kg).
    pub dose_gy: f64,
    /// Expected photons absorbed per atom in one dwell.
    pub photons_absorbed_per_atom: f64,
}

/// Exposure from a single dwell of `beam` (with `dwell_s` overriding the
/// beam's dwell). With a scan `pitch_um` (x, y), the accumulated fluence
/// counts every beam position whose footprint covers a given point.
///
/// energy density = fluence · E_photon · μ_lin; dose = energy density / ρ.
pub fn dose_report(
    beam: &BeamConfig,
    dwell_s: f64,
    absorber: &Absorber,
    pitch_um: Option<(f64, f64)>,
) -> Result<DoseReport> {
    if !(dwell_s >= 0.0) {
        return Err(Error::Domain("dwell must be >= 0".into()));
    }
    if !(absorber.linear_absorption_per_um > 0.0
        && absorber.mass_density_g_cm3 > 0.0
        && absorber.atom_cross_section_nm2 > 0.0)
    {
        return Err(Error::Domain("absorber coefficients must be > 0".into()));
    }
    if !(beam.flux_photons_s > 0.0 && beam.spot_area_um2() > 0.0) {
        return Err(Error::Domain("beam flux and spot must be > 0".into()));
    }
    let spot_nm2 = beam.spot_area_um2() * 1e6;
    let fluence = beam.flux_photons_s * dwell_s / spot_nm2;
    let overlap = match pitch_um {
        Some((px, py)) => {
            if !(px > 0.0 && py > 0.0) {
                return Err(Error::Domain("pitch must be > 0".into()));
            }
            (beam.spot_width_um / px).max(1.0) * (beam.spot_height_um / py).max(1.0)
        }
        None => 1.0,
    };
    let mu_per_nm = absorber.linear_absorption_per_um * 1e-3;
    let energy_density = fluence * beam.photon_energy_kev * KEV_TO_J * mu_per_nm;
    // J/nm³ → J/m³ is ×1e27; g/cm³ → kg/m³ is ×1e3
    let dose = energy_density * 1e27 / (absorber.mass_density_g_cm3 * 1e3);
    Ok(DoseReport {
        fluence_per_nm2: fluence,
        accumulated_fluence_per_nm2: fluence * overlap,
        energy_density_j_nm3: energy_density,
        dose_gy: dose,
        photons_absorbed_per_atom: fluence * absorber.atom_cross_section_nm2,
    })
}
