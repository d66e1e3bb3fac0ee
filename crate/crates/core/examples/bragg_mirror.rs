//! Design a quarter-wave mirror for a transmission target and print its
//! response at the design and excitation wavelengths.

use cavtool::constants::{EXCITATION_NM, GEV_ZPL_NM, N_SIO2, N_TA2O5};
use cavtool::optics::{stack_response, BraggDesign, Termination};

fn main() -> cavtool::Result<()> {
    for termination in [Termination::Lo, Termination::Hi] {
        let stack = BraggDesign::new(GEV_ZPL_NM, N_TA2O5, N_SIO2, termination).design(70.0)?;
        let design = stack_response(&stack, GEV_ZPL_NM)?;
        let pump = stack_response(&stack, EXCITATION_NM)?;
        println!(
            "{termination:?}: {} layers, T({GEV_ZPL_NM} nm) = {:.1} ppm, T({EXCITATION_NM} nm) = {:.3}",
            stack.layers.len(),
            design.transmittance * 1e6,
            pump.transmittance
        );
    }
    Ok(())
}
