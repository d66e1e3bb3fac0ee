//! From measured count rates to β, Purcell factor and quantum efficiency,
//! with asymmetric error bars.

use cavtool::coupling::{coupling_report, CouplingInputs, EfficiencyChain};
use cavtool::uncertainty::{Propagation, Quantity};

fn main() -> cavtool::Result<()> {
    let inputs = CouplingInputs {
        free_counts: Quantity::symmetric(4000.0, 200.0, "counts/s")?,
        eta_free: EfficiencyChain::new(Quantity::new(3.5e-3, 0.9e-3, 1.5e-3, "")?)?,
        cavity_counts: Quantity::symmetric(380.0, 50.0, "counts/s")?,
        eta_cavity: EfficiencyChain::new(Quantity::symmetric(8.2e-2, 1.2e-2, "")?)?,
        emitter_linewidth_thz: Quantity::symmetric(5.22, 0.05, "THz")?,
        cavity_linewidth_ghz: Quantity::symmetric(1.08, 0.17, "GHz")?,
        debye_waller: Quantity::exact(0.6, ""),
        bright_state_rate: Quantity::symmetric(6.8e6, 0.9e6, "photons/s")?,
    };
    for mode in [Propagation::Hybrid, Propagation::Linear, Propagation::monte_carlo(1)] {
        let r = coupling_report(&inputs, mode)?;
        let show = |q: &Quantity| format!("{:.4} +{:.3} -{:.3}", q.value, q.sigma_plus, q.sigma_minus);
        println!("{mode:?}");
        println!("  free rate  {}", show(&r.rate_free));
        println!("  beta       {}", show(&r.beta));
        println!("  Purcell    {}", show(&r.purcell));
        println!("  lifetime   {}", show(&r.lifetime_reduction));
        println!("  QE         {}", show(&r.quantum_efficiency));
    }
    Ok(())
}
