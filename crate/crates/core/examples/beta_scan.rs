//! Simulated β against membrane thickness for emitters 125 ± 20 nm below
//! the membrane surface.

use cavtool::cavity::{Cavity, CavityGeometry, ModeIndex};
use cavtool::coupling::{depth_bands, BetaOptions, DepthReference, EmitterProperties};
use cavtool::synth::linspace;

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
    let emitter = EmitterProperties {
        linewidth_thz: 5.22,
        lifetime_ns: 6.0,
        debye_waller: 0.6,
    };
    let thicknesses = linspace(700.0, 1000.0, 31);
    let bands = depth_bands(
        &cavity,
        ModeIndex::fundamental(15),
        &emitter,
        &BetaOptions::default(),
        &thicknesses,
        125.0,
        20.0,
        DepthReference::Surface,
        10,
    )?;
    println!("t_d (nm)  beta (%)  2-sigma range (%)");
    for b in bands {
        println!(
            "{:8.0}  {:8.3}  {:.3} .. {:.3}",
            b.thickness_nm,
            100.0 * b.nominal,
            100.0 * b.two_sigma.0,
            100.0 * b.two_sigma.1
        );
    }
    Ok(())
}
