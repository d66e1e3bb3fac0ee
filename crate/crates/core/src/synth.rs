//! Seeded synthetic datasets for fit validation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "level")]
pub enum Noise {
    None,
    /// Gaussian with standard deviation `level · max|y|`.
    Gaussian(f64),
    /// Poisson counts with mean `y`.
    Poisson,
}

impl Noise {
    /// Standard deviation of the Gaussian noise for a curve with `max|y| = scale`.
    pub fn sigma(&self, scale: f64) -> f64 {
        match self {
            Noise::Gaussian(level) => level * scale,
            _ => 0.0,
        }
    }
}

/// Evaluate `model` on `x` and add noise drawn from a ChaCha stream seeded
/// with `seed`.
pub fn synthesize<F>(model: F, x: &[f64], noise: Noise, seed: u64) -> Result<Dataset>
where
    F: Fn(f64) -> f64,
{
    let clean: Vec<f64> = x.iter().map(|&v| model(v)).collect();
    if clean.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("model is not finite on the grid"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let y = match noise {
        Noise::None => clean,
        Noise::Gaussian(level) => {
            if !(level >= 0.0) {
                return Err(Error::invalid("noise level must be >= 0"));
            }
            let scale = clean.iter().map(|y| y.abs()).fold(0.0, f64::max);
            let sd = level * scale;
            if sd == 0.0 {
                clean
            } else {
                let normal = Normal::new(0.0, sd).map_err(|e| Error::invalid(e.to_string()))?;
                clean.iter().map(|y| y + normal.sample(&mut rng)).collect()
            }
        }
        Noise::Poisson => clean
            .iter()
            .map(|&mean| {
                if mean <= 0.0 {
                    return Ok(0.0);
                }
                let dist = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
                Ok(dist.sample(&mut rng))
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    Dataset::new(x.to_vec(), y)
}

/// `n` evenly spaced points on `[start, stop]`.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_noise_repeats() {
        let x = linspace(0.0, 10.0, 50);
        let a = synthesize(|v| v * v, &x, Noise::Gaussian(0.01), 3).unwrap();
        let b = synthesize(|v| v * v, &x, Noise::Gaussian(0.01), 3).unwrap();
        let c = synthesize(|v| v * v, &x, Noise::Gaussian(0.01), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_is_exact() {
        let x = linspace(-1.0, 1.0, 11);
        let d = synthesize(|v| 2.0 * v, &x, Noise::None, 0).unwrap();
        assert!(d.y.iter().zip(&x).all(|(y, x)| *y == 2.0 * x));
        let p = synthesize(|_| 0.0, &x, Noise::Poisson, 0).unwrap();
        assert!(p.y.iter().all(|y| *y == 0.0));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(2.0, 4.0, 5);
        assert_eq!(v, vec![2.0, 2.5, 3.0, 3.5, 4.0]);
    }
}
