//! Simulated experimental plants.
//!
//! A [`PlantModel`] holds the true (noiseless) cost and constraint functions.
//! A [`Plant`] wraps a model with additive Gaussian measurement noise. Models
//! are registered by name in a [`PlantCatalog`] so runs can pick them from the
//! command line or a config file.

mod catalog;
mod oracle;
mod polynomial;

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backoff::NoiseModel;
use crate::error::{Error, Result};
use crate::space::DecisionSpace;

pub use catalog::{PlantCatalog, QuadCircle, QuadLinear, TwoConstraint};
pub use oracle::{grid_oracle, OracleResult, MAX_GRID_POINTS};
pub use polynomial::{Monomial, Polynomial, PolynomialPlant};

/// True cost and constraint functions of an experiment, in raw units.
pub trait PlantModel: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn space(&self) -> &DecisionSpace;
    fn n_g(&self) -> usize;
    fn cost(&self, u: &[f64]) -> f64;
    fn constraints(&self, u: &[f64]) -> Vec<f64>;
    /// Noise levels used unless a run overrides them.
    fn default_noise(&self) -> NoiseModel;
    /// A starting point that is safe together with its perturbations.
    fn initial_reference(&self) -> Vec<f64>;
}

/// Source of standard normal draws.
///
/// Box–Muller on a ChaCha8 stream; the second variate of each pair is kept
/// for the next call, so a seed fixes the whole sequence.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// A noisy measurement together with the true values behind it.
///
/// Only `phi_hat` and `g_hat` may reach the optimizer; the true values are for
/// auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantReading {
    pub u: Vec<f64>,
    pub phi_hat: f64,
    pub g_hat: Vec<f64>,
    pub phi_true: f64,
    pub g_true: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Plant {
    model: Arc<dyn PlantModel>,
    noise: NoiseModel,
    noise_scale: f64,
}

impl Plant {
    pub fn new(model: Arc<dyn PlantModel>) -> Self {
        let noise = model.default_noise();
        Self {
            model,
            noise,
            noise_scale: 1.0,
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        if noise.n_g() != self.model.n_g() {
            return Err(Error::DimensionMismatch {
                expected: self.model.n_g(),
                found: noise.n_g(),
            });
        }
        self.noise = noise;
        Ok(self)
    }

    pub fn model(&self) -> &dyn PlantModel {
        self.model.as_ref()
    }

    pub fn name(&self) -> &str {
        self.model.name()
    }

    pub fn space(&self) -> &DecisionSpace {
        self.model.space()
    }

    pub fn n_g(&self) -> usize {
        self.model.n_g()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Multiplier on the noise standard deviations (annealing sets `1/√k`).
    pub fn set_noise_scale(&mut self, scale: f64) {
        self.noise_scale = scale;
    }

    pub fn evaluate(&self, u: &[f64], stream: &mut GaussianStream) -> Result<PlantReading> {
        let space = self.model.space();
        space.check_dim(u.len())?;
        if let Some(i) =
            (0..u.len()).find(|&i| !(u[i] >= space.lower()[i] && u[i] <= space.upper()[i]))
        {
            return Err(Error::OutOfBounds {
                index: i,
                value: u[i],
            });
        }
        let phi_true = self.model.cost(u);
        let g_true = self.model.constraints(u);
        let phi_hat = phi_true + self.noise_scale * self.noise.sigma_phi * stream.next_standard();
        let g_hat = g_true
            .iter()
            .zip(&self.noise.sigma_g)
            .map(|(g, s)| g + self.noise_scale * s * stream.next_standard())
            .collect();
        Ok(PlantReading {
            u: u.to_vec(),
            phi_hat,
            g_hat,
            phi_true,
            g_true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_linear() -> Plant {
        PlantCatalog::builtin().plant("quad-linear").unwrap()
    }

    #[test]
    fn noiseless_readings_are_exact() {
        let plant = quad_linear().with_noise(NoiseModel::noiseless(1)).unwrap();
        let mut stream = GaussianStream::seed_from_u64(1);
        let r = plant.evaluate(&[0.3, 0.4], &mut stream).unwrap();
        assert_eq!(r.phi_hat, r.phi_true);
        assert_eq!(r.g_hat, r.g_true);
    }

    #[test]
    fn readings_replay_per_seed() {
        let plant = quad_linear();
        let run = |seed| {
            let mut stream = GaussianStream::seed_from_u64(seed);
            (0..10)
                .map(|i| plant.evaluate(&[0.1 * i as f64, 0.5], &mut stream).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn true_values_at_an_infeasible_point() {
        let r = quad_linear()
            .evaluate(&[0.7, 0.7], &mut GaussianStream::seed_from_u64(0))
            .unwrap();
        assert_eq!(r.phi_true, 0.0);
        assert!((r.g_true[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let err = quad_linear()
            .evaluate(&[1.1, 0.5], &mut GaussianStream::seed_from_u64(0))
            .unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { index: 0, .. }));
    }

    #[test]
    fn noise_statistics() {
        let mut plant = quad_linear();
        plant.set_noise_scale(0.5);
        let sigma = 0.5 * plant.noise().sigma_phi;
        let n = 100_000;
        let mut stream = GaussianStream::seed_from_u64(42);
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let r = plant.evaluate(&[0.2, 0.3], &mut stream).unwrap();
                r.phi_hat - r.phi_true
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() <= 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
        assert!((sd / sigma - 1.0).abs() <= 0.02, "sd {sd} vs {sigma}");
    }
}
