//! Physical constants and material defaults shared by every module.
//!
//! Reports echo [`Constants::current`] so that outputs can be traced back to
//! the values they were computed with.

use serde::Serialize;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Diamond refractive index at 603 nm.
pub const N_DIAMOND: f64 = 2.41;
/// SiO2 (coating low-index layer, substrates).
pub const N_SIO2: f64 = 1.46;
/// Ta2O5 (coating high-index layer).
pub const N_TA2O5: f64 = 2.10;

/// GeV zero-phonon-line wavelength, nm.
pub const GEV_ZPL_NM: f64 = 603.0;
/// Excitation wavelength, nm.
pub const EXCITATION_NM: f64 = 532.0;
/// GeV Debye-Waller factor (fraction of emission into the ZPL).
pub const DEBYE_WALLER_GEV: f64 = 0.6;

pub const CONSTANTS_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Constants {
    pub version: &'static str,
    pub speed_of_light_m_per_s: f64,
    pub n_diamond: f64,
    pub n_sio2: f64,
    pub n_ta2o5: f64,
    pub zpl_nm: f64,
    pub excitation_nm: f64,
    pub debye_waller: f64,
}

impl Constants {
    pub fn current() -> Self {
        Constants {
            version: CONSTANTS_VERSION,
            speed_of_light_m_per_s: SPEED_OF_LIGHT,
            n_diamond: N_DIAMOND,
            n_sio2: N_SIO2,
            n_ta2o5: N_TA2O5,
            zpl_nm: GEV_ZPL_NM,
            excitation_nm: EXCITATION_NM,
            debye_waller: DEBYE_WALLER_GEV,
        }
    }
}
