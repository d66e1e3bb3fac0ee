//! Saturation curve fit. Fitting the same data with power in W gives the
//! same P_sat once converted to mW.

use cavtool::emitter::{saturation_model, SaturationParams};
use cavtool::fitting::{fit_saturation, Dataset, FitOptions};
use cavtool::synth::{linspace, synthesize, Noise};

fn main() -> cavtool::Result<()> {
    let truth = SaturationParams::new(4000.0, 3.9, 10.0)?;
    let data = synthesize(|p| saturation_model(p, &truth), &linspace(0.0, 20.0, 41), Noise::Gaussian(0.01), 3)?;
    let (_, result) = fit_saturation(&data, None, false, FitOptions::default())?;
    for (name, (value, err)) in result.param_names.iter().zip(result.params.iter().zip(&result.std_errors)) {
        println!("{name:>6} = {value:.3} +/- {err:.3}");
    }
    let in_watts = Dataset::new(data.x.iter().map(|p| p * 1e-3).collect(), data.y.clone())?;
    let (watts, _) = fit_saturation(&in_watts, None, false, FitOptions::default())?;
    println!("P_sat from the fit in W: {:.6} mW", watts.p_sat * 1e3);
    Ok(())
}
