//! Three-level emitter: g2 parameters from rates and the power dependence
//! of the populations.

use cavtool::emitter::{rates_to_g2_params, steady_state, PowerDependentRates, ThreeLevelRates};

fn main() -> cavtool::Result<()> {
    let rates = ThreeLevelRates::new(5e7, 1.6e8, 2e6, 1e6)?;
    let (a, tau1, tau2) = rates_to_g2_params(&rates)?;
    let pop = steady_state(&rates);
    println!("a = {a:.3}, tau1 = {tau1:.3} ns, tau2 = {tau2:.1} ns");
    println!("populations: {:.4} {:.4} {:.4}", pop.p_ground, pop.p_excited, pop.p_dark);

    let power = PowerDependentRates::with_dark_limit(2e7, 1.6e8, 3e6, 0.96)?;
    for p_mw in [0.1, 1.0, 10.0, 100.0, 1000.0] {
        let s = power.populations(p_mw)?;
        println!("P = {p_mw:>6} mW: dark population {:.3}", s.p_dark);
    }
    println!("infinite power: {:.3}", power.infinite_power_populations().p_dark);
    Ok(())
}
