//! Two overlapping Gaussian peaks on a flat baseline, as in a cavity-length
//! scan of transmitted counts.

use cavtool::fitting::{fit_gaussian_peaks, gaussian_peaks_fn, FitOptions};
use cavtool::synth::{linspace, synthesize, Noise};

fn main() -> cavtool::Result<()> {
    let truth = [20.0, 100.0, 4.0, 0.5, 60.0, 5.2, 0.6];
    let data = synthesize(|x| gaussian_peaks_fn(&truth, x), &linspace(2.0, 7.0, 251), Noise::Gaussian(0.01), 5)?;
    let (baseline, peaks, result) = fit_gaussian_peaks(&data, 2, FitOptions::default())?;
    println!("baseline {baseline:.2}, converged {}", result.converged);
    for p in peaks {
        println!("peak at {:.4} um, width {:.4}, amplitude {:.2}", p.center, p.width, p.amplitude);
    }
    Ok(())
}
