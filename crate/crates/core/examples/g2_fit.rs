//! Fit a bunched antibunching curve generated with 1% noise.

use cavtool::emitter::G2Model;
use cavtool::fitting::{fit_g2, g2_model_fn, FitOptions};
use cavtool::synth::{linspace, synthesize, Noise};

fn main() -> cavtool::Result<()> {
    let truth = G2Model::new(0.87, 1.2, 2.0, 50.0)?;
    let p = [truth.sigma, truth.a, truth.tau1_ns, truth.tau2_ns];
    let data = synthesize(|t| g2_model_fn(&p, t), &linspace(-200.0, 200.0, 401), Noise::Gaussian(0.01), 11)?;
    let (model, result) = fit_g2(&data, None, FitOptions::default())?;
    println!("converged: {} after {} iterations", result.converged, result.iterations);
    for (name, (value, err)) in result.param_names.iter().zip(result.params.iter().zip(&result.std_errors)) {
        println!("{name:>8} = {value:.4} +/- {err:.4}");
    }
    println!("fitted g2(0) = {:.3}", model.measured(0.0));
    Ok(())
}
