//! Photon statistics and population dynamics of a single emitter with a
//! shelving (dark) state.
//!
//! Levels: 1 ground, 2 excited, 3 dark. Rates in 1/s, delays in ns, powers in
//! mW, intensities in counts/s.
//!
//! ```text
//! dp1/dt = -k12 p1 + k21 p2 + k31 p3
//! dp2/dt =  k12 p1 - (k21 + k23) p2
//! dp3/dt =  k23 p2 - k31 p3
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `g²(τ) = 1 - (1+a) e^{-|τ|/τ₁} + a e^{-|τ|/τ₂}`.
pub fn g2_intrinsic(tau_ns: f64, a: f64, tau1_ns: f64, tau2_ns: f64) -> f64 {
    let t = tau_ns.abs();
    let e1 = (-t / tau1_ns).exp();
    let e2 = (-t / tau2_ns).exp();
    // Grouped so that τ = 0 gives exactly zero.
    (1.0 - e1) - a * (e1 - e2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Model {
    /// Signal fraction `S/(S+B)`.
    pub sigma: f64,
    pub a: f64,
    pub tau1_ns: f64,
    pub tau2_ns: f64,
}

impl G2Model {
    pub fn new(sigma: f64, a: f64, tau1_ns: f64, tau2_ns: f64) -> Result<Self> {
        let model = G2Model {
            sigma,
            a,
            tau1_ns,
            tau2_ns,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::invalid(format!("sigma must be in (0, 1], got {}", self.sigma)));
        }
        if !(self.a >= 0.0) {
            return Err(Error::invalid(format!("a must be >= 0, got {}", self.a)));
        }
        if !(self.tau1_ns > 0.0 && self.tau2_ns > 0.0) {
            return Err(Error::invalid("time constants must be positive"));
        }
        Ok(())
    }

    pub fn intrinsic(&self, tau_ns: f64) -> f64 {
        g2_intrinsic(tau_ns, self.a, self.tau1_ns, self.tau2_ns)
    }

    pub fn measured(&self, tau_ns: f64) -> f64 {
        g2_measured(tau_ns, self)
    }
}

/// Background-diluted correlation `g² σ² + 1 - σ²` (Poissonian background).
pub fn g2_measured(tau_ns: f64, model: &G2Model) -> f64 {
    let s2 = model.sigma * model.sigma;
    model.intrinsic(tau_ns) * s2 + (1.0 - s2)
}

/// Signal fraction implied by a measured zero-delay value.
pub fn sigma_from_g2_zero(g2_zero: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g2_zero) {
        return Err(Error::invalid(format!("g2(0) must be in [0, 1), got {g2_zero}")));
    }
    Ok((1.0 - g2_zero).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelRates {
    /// Pump, ground → excited.
    pub k12: f64,
    /// Radiative decay, excited → ground.
    pub k21: f64,
    /// Shelving, excited → dark.
    pub k23: f64,
    /// Deshelving, dark → ground.
    pub k31: f64,
}

impl ThreeLevelRates {
    pub fn new(k12: f64, k21: f64, k23: f64, k31: f64) -> Result<Self> {
        let rates = ThreeLevelRates { k12, k21, k23, k31 };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k12", self.k12), ("k21", self.k21), ("k23", self.k23), ("k31", self.k31)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.k21 > 0.0) {
            return Err(Error::invalid("k21 must be positive"));
        }
        Ok(())
    }

    /// Rate matrix `M` with `dp/dt = M p`.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let ThreeLevelRates { k12, k21, k23, k31 } = *self;
        [
            [-k12, k21, k31],
            [k12, -(k21 + k23), 0.0],
            [0.0, k23, -k31],
        ]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ThreeLevelRates {
            k12: self.k12 * factor,
            k21: self.k21 * factor,
            k23: self.k23 * factor,
            k31: self.k31 * factor,
        }
    }

    /// Magnitudes of the two non-zero eigenvalues of [`Self::matrix`],
    /// largest first. The characteristic polynomial is `-λ(λ² + Pλ + Q)`.
    pub fn decay_constants(&self) -> (f64, f64) {
        let ThreeLevelRates { k12, k21, k23, k31 } = *self;
        let p = k12 + k21 + k23 + k31;
        let q = k12 * k23 + k12 * k31 + k21 * k31 + k23 * k31;
        let disc = (p * p - 4.0 * q).max(0.0).sqrt();
        let fast = 0.5 * (p + disc);
        // Stable form for the small root.
        let slow = if fast > 0.0 { q / fast } else { 0.0 };
        (fast, slow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub p_ground: f64,
    pub p_excited: f64,
    pub p_dark: f64,
}

impl PopulationState {
    pub fn sum(&self) -> f64 {
        self.p_ground + self.p_excited + self.p_dark
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_ground, self.p_excited, self.p_dark]
    }

    fn from_weights(w: [f64; 3]) -> Self {
        let total = w[0] + w[1] + w[2];
        if total == 0.0 {
            return PopulationState {
                p_ground: 1.0,
                p_excited: 0.0,
                p_dark: 0.0,
            };
        }
        PopulationState {
            p_ground: w[0] / total,
            p_excited: w[1] / total,
            p_dark: w[2] / total,
        }
    }
}

/// Null vector of the rate matrix, normalized to one.
pub fn steady_state(rates: &ThreeLevelRates) -> PopulationState {
    let ThreeLevelRates { k12, k21, k23, k31 } = *rates;
    if k12 == 0.0 {
        return PopulationState {
            p_ground: 1.0,
            p_excited: 0.0,
            p_dark: 0.0,
        };
    }
    PopulationState::from_weights([(k21 + k23) * k31, k12 * k31, k12 * k23])
}

/// Parameters `(a, τ₁, τ₂)` of the intrinsic correlation implied by `rates`.
///
/// `g²(τ)` is the excited population after a photon detection (emitter in the
/// ground state at τ = 0) over its steady-state value; `τ₁` is the fast
/// antibunching time.
pub fn rates_to_g2_params(rates: &ThreeLevelRates) -> Result<(f64, f64, f64)> {
    rates.validate()?;
    let ThreeLevelRates { k12, k21, k23, k31 } = *rates;
    if !(k12 > 0.0) {
        return Err(Error::invalid("g2 is undefined without pumping (k12 = 0)"));
    }
    if k23 == 0.0 {
        // The dark state is never reached from the ground state.
        let tau2 = if k31 > 0.0 { 1e9 / k31 } else { f64::INFINITY };
        return Ok((0.0, 1e9 / (k12 + k21), tau2));
    }
    let p2 = steady_state(rates).p_excited;
    if !(p2 > 0.0) {
        return Err(Error::invalid("no steady-state excited population (k31 = 0)"));
    }
    let (fast, slow) = rates.decay_constants();
    if (fast - slow).abs() <= 1e-9 * fast {
        return Err(Error::DegenerateRates(fast, slow));
    }
    // g = 1 + A e^{-fast τ} + B e^{-slow τ} with g(0) = 0 and
    // g'(0) = p2'(0)/p2 = k12/p2.
    let slope = k12 / p2;
    let b = (slope - fast) / (fast - slow);
    Ok((b, 1e9 / fast, 1e9 / slow))
}

/// Affine dependence `c0 + c1·P` on pump power (mW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub c0: f64,
    pub c1: f64,
}

impl Affine {
    pub fn constant(c0: f64) -> Self {
        Affine { c0, c1: 0.0 }
    }

    pub fn at(&self, power_mw: f64) -> f64 {
        self.c0 + self.c1 * power_mw
    }
}

/// Pump-power dependent rates: `k12 = α P`, `k23` and `k31` affine in `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerDependentRates {
    /// 1/(s·mW)
    pub pump_per_mw: f64,
    pub k21: f64,
    pub shelving: Affine,
    pub deshelving: Affine,
}

impl PowerDependentRates {
    pub fn at(&self, power_mw: f64) -> Result<ThreeLevelRates> {
        if !(power_mw >= 0.0) {
            return Err(Error::invalid("power must be >= 0"));
        }
        ThreeLevelRates::new(
            self.pump_per_mw * power_mw,
            self.k21,
            self.shelving.at(power_mw),
            self.deshelving.at(power_mw),
        )
    }

    pub fn populations(&self, power_mw: f64) -> Result<PopulationState> {
        Ok(steady_state(&self.at(power_mw)?))
    }

    /// Populations in the limit `P → ∞`.
    ///
    /// Each unnormalized steady-state weight is a quadratic in `P`; the limit
    /// keeps the highest-order coefficients that are not all zero.
    pub fn infinite_power_populations(&self) -> PopulationState {
        let alpha = self.pump_per_mw;
        let Affine { c0: s0, c1: s1 } = self.shelving;
        let Affine { c0: d0, c1: d1 } = self.deshelving;
        if alpha == 0.0 {
            return PopulationState {
                p_ground: 1.0,
                p_excited: 0.0,
                p_dark: 0.0,
            };
        }
        // Coefficients [P⁰, P¹, P²] of (k21+k23)k31, k12 k31, k12 k23.
        let w1 = [(self.k21 + s0) * d0, (self.k21 + s0) * d1 + s1 * d0, s1 * d1];
        let w2 = [0.0, alpha * d0, alpha * d1];
        let w3 = [0.0, alpha * s0, alpha * s1];
        for order in (0..3).rev() {
            let w = [w1[order], w2[order], w3[order]];
            if w.iter().any(|&x| x != 0.0) {
                return PopulationState::from_weights(w);
            }
        }
        PopulationState {
            p_ground: 1.0,
            p_excited: 0.0,
            p_dark: 0.0,
        }
    }

    /// Bright-state photon rate at infinite power, `p_excited(∞) · k21`.
    pub fn saturated_emission_rate(&self) -> f64 {
        self.infinite_power_populations().p_excited * self.k21
    }

    /// Rates with `p_dark(∞) = dark_fraction` and
    /// `p_excited(∞) = 1 - dark_fraction`: shelving and deshelving are held
    /// constant so the ground state empties at high power.
    pub fn with_dark_limit(pump_per_mw: f64, k21: f64, shelving: f64, dark_fraction: f64) -> Result<Self> {
        if !(dark_fraction > 0.0 && dark_fraction < 1.0) {
            return Err(Error::invalid("dark fraction must be in (0, 1)"));
        }
        let deshelving = shelving * (1.0 - dark_fraction) / dark_fraction;
        Ok(PowerDependentRates {
            pump_per_mw,
            k21,
            shelving: Affine::constant(shelving),
            deshelving: Affine::constant(deshelving),
        })
    }
}

/// Photon emission rate `p_excited · k21 · QE` (photons/s).
pub fn emission_rate(rates: &ThreeLevelRates, quantum_efficiency: f64) -> Result<f64> {
    if !(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0) {
        return Err(Error::invalid(format!(
            "quantum efficiency must be in (0, 1], got {quantum_efficiency}"
        )));
    }
    Ok(steady_state(rates).p_excited * rates.k21 * quantum_efficiency)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    /// counts/s
    pub i_inf: f64,
    /// mW
    pub p_sat: f64,
    /// counts/(s·mW)
    pub c_bg: f64,
}

impl SaturationParams {
    pub fn new(i_inf: f64, p_sat: f64, c_bg: f64) -> Result<Self> {
        if !(i_inf >= 0.0 && p_sat > 0.0 && c_bg >= 0.0) {
            return Err(Error::invalid(format!(
                "need I_inf >= 0, P_sat > 0, c_bg >= 0; got {i_inf}, {p_sat}, {c_bg}"
            )));
        }
        Ok(SaturationParams { i_inf, p_sat, c_bg })
    }
}

/// `I(P) = I∞ P/(P + P_sat) + c_bg P`.
pub fn saturation_model(power_mw: f64, params: &SaturationParams) -> f64 {
    params.i_inf * power_mw / (power_mw + params.p_sat) + params.c_bg * power_mw
}
