//! Values with asymmetric error bars and propagation through scalar functions.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, sigma_plus: f64, sigma_minus: f64, unit: impl Into<String>) -> Result<Self> {
        if !(sigma_plus >= 0.0 && sigma_minus >= 0.0) || !value.is_finite() {
            return Err(Error::invalid(format!(
                "quantity needs a finite value and non-negative errors, got {value} +{sigma_plus} -{sigma_minus}"
            )));
        }
        Ok(Quantity {
            value,
            sigma_plus,
            sigma_minus,
            unit: unit.into(),
        })
    }

    pub fn exact(value: f64, unit: impl Into<String>) -> Self {
        Quantity {
            value,
            sigma_plus: 0.0,
            sigma_minus: 0.0,
            unit: unit.into(),
        }
    }

    pub fn symmetric(value: f64, sigma: f64, unit: impl Into<String>) -> Result<Self> {
        Quantity::new(value, sigma, sigma, unit)
    }

    pub fn is_symmetric(&self) -> bool {
        (self.sigma_plus - self.sigma_minus).abs() <= 1e-12 * self.sigma_plus.max(self.sigma_minus)
    }

    pub fn is_exact(&self) -> bool {
        self.sigma_plus == 0.0 && self.sigma_minus == 0.0
    }

    pub fn upper(&self) -> f64 {
        self.value + self.sigma_plus
    }

    pub fn lower(&self) -> f64 {
        self.value - self.sigma_minus
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Propagation {
    /// Symmetric inputs first-order, asymmetric inputs by evaluating the
    /// function at their interval endpoints.
    Hybrid,
    /// First-order for every input, using `σ₊` or `σ₋` by the sign of the
    /// partial derivative.
    Linear,
    /// Split-normal sampling of every input; the interval is the 16th–84th
    /// percentile range around the nominal value.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Propagation {
    fn default() -> Self {
        Propagation::Hybrid
    }
}

impl Propagation {
    pub fn monte_carlo(seed: u64) -> Self {
        Propagation::MonteCarlo { samples: 10_000, seed }
    }
}

/// Propagate `inputs` through `f`. Contributions of independent inputs add
/// in quadrature, separately for the upper and lower side.
pub fn propagate<F>(f: F, inputs: &[Quantity], mode: Propagation, unit: &str) -> Result<Quantity>
where
    F: Fn(&[f64]) -> f64,
{
    let nominal: Vec<f64> = inputs.iter().map(|q| q.value).collect();
    let f0 = f(&nominal);
    if !f0.is_finite() {
        return Err(Error::invalid("function is not finite at the nominal inputs"));
    }
    let (plus, minus) = match mode {
        Propagation::Hybrid => deterministic(&f, inputs, f0, true),
        Propagation::Linear => deterministic(&f, inputs, f0, false),
        Propagation::MonteCarlo { samples, seed } => monte_carlo(&f, inputs, f0, samples, seed)?,
    };
    Quantity::new(f0, plus, minus, unit)
}

fn deterministic<F>(f: &F, inputs: &[Quantity], f0: f64, endpoints_for_asymmetric: bool) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut plus2 = 0.0;
    let mut minus2 = 0.0;
    let mut add = |delta: f64| {
        if delta > 0.0 {
            plus2 += delta * delta;
        } else {
            minus2 += delta * delta;
        }
    };
    let mut x: Vec<f64> = inputs.iter().map(|q| q.value).collect();
    for (i, q) in inputs.iter().enumerate() {
        if q.is_exact() {
            continue;
        }
        if endpoints_for_asymmetric && !q.is_symmetric() {
            x[i] = q.upper();
            let up = f(&x) - f0;
            x[i] = q.lower();
            let down = f(&x) - f0;
            x[i] = q.value;
            if up.signum() != down.signum() {
                add(up);
                add(down);
            } else if up.abs() >= down.abs() {
                add(up);
            } else {
                add(down);
            }
        } else {
            let d = partial_derivative(f, &mut x, i);
            add(d * q.sigma_plus);
            add(-d * q.sigma_minus);
        }
    }
    (plus2.sqrt(), minus2.sqrt())
}

/// Five-point central difference.
pub fn partial_derivative<F>(f: &F, x: &mut [f64], i: usize) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let x0 = x[i];
    let h = 1e-4 * x0.abs().max(1e-12);
    let mut at = |offset: f64| {
        x[i] = x0 + offset;
        f(x)
    };
    let d = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
    x[i] = x0;
    d
}

fn monte_carlo<F>(f: &F, inputs: &[Quantity], f0: f64, samples: usize, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    if samples < 10 {
        return Err(Error::invalid("Monte Carlo needs at least 10 samples"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(samples);
    let mut x = vec![0.0; inputs.len()];
    let mut attempts = 0usize;
    while values.len() < samples {
        attempts += 1;
        if attempts > 100 * samples {
            return Err(Error::invalid("Monte Carlo rejected too many samples"));
        }
        for (xi, q) in x.iter_mut().zip(inputs) {
            *xi = sample_split_normal(q, &mut rng);
        }
        let y = f(&x);
        if y.is_finite() {
            values.push(y);
        }
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let p16 = percentile(&values, 0.158_655_253_931_457_05);
    let p84 = percentile(&values, 0.841_344_746_068_542_9);
    Ok(((p84 - f0).max(0.0), (f0 - p16).max(0.0)))
}

/// Inputs with a positive nominal value are redrawn until positive.
fn sample_split_normal(q: &Quantity, rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let x = if z >= 0.0 {
            q.value + z * q.sigma_plus
        } else {
            q.value + z * q.sigma_minus
        };
        if q.value <= 0.0 || x > 0.0 {
            return x;
        }
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
