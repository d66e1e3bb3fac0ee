//! Resonant air gaps of the lowest cavity branches and the headline cavity
//! numbers for the standard membrane geometry.

use cavtool::cavity::{gaussian_mode, mode_volume, spectral_params, Cavity, CavityGeometry, ModeIndex};

fn main() -> cavtool::Result<()> {
    let geometry = CavityGeometry {
        radius_of_curvature_um: 43.1,
        air_gap_um: 4.5,
        membrane_thickness_nm: 862.0,
        membrane_index: 2.41,
        emitter_depth_nm: 737.0,
        wavelength_nm: 603.0,
    };
    let cavity = Cavity::standard(geometry)?;
    for (m, q) in [(15, 0), (15, 1), (16, 0), (16, 1)] {
        let gap = cavity.resonant_air_gap(ModeIndex::new(m, q)?)?;
        println!("m = {m}, q = {q}: air gap {gap:.4} um");
    }
    let waist = gaussian_mode(&geometry)?;
    let finesse = cavity.finesse_from_mirrors(603.0, 0.0)?;
    let spectral = spectral_params(finesse, cavity.effective_length_um(603.0)?)?;
    let (profile, _) = cavity.axial_profile(15, 1.0)?;
    let resonant = geometry.with_air_gap(cavity.planar_resonant_air_gap(15)?);
    println!("waist radius {:.3} um", waist.waist_radius_um);
    println!(
        "finesse {:.0}, FSR {:.2} THz, linewidth {:.3} GHz, L_eff {:.2} um",
        spectral.finesse, spectral.fsr_thz, spectral.linewidth_fwhm_ghz, spectral.effective_length_um
    );
    println!("mode volume {:.2} um^3", mode_volume(&resonant, &profile)?);
    Ok(())
}
