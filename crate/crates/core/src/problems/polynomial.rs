use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PlantModel;
use crate::backoff::NoiseModel;
use crate::error::{Error, Result};
use crate::space::DecisionSpace;

/// `coef · Π_i u_i^powers[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Sum of monomials in the raw decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<Monomial>);

impl Polynomial {
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|m| {
                m.powers
                    .iter()
                    .zip(u)
                    .fold(m.coef, |acc, (&p, &x)| acc * x.powi(p as i32))
            })
            .sum()
    }

    fn check(&self, n: usize, what: &str) -> Result<()> {
        for m in &self.0 {
            if m.powers.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "{what}: monomial has {} powers for {n} variables",
                    m.powers.len()
                )));
            }
            if !m.coef.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{what}: non-finite coefficient"
                )));
            }
        }
        Ok(())
    }
}

/// A plant defined in a config file by polynomial cost and constraints.
///
/// ```json
/// {
///   "name": "ridge",
///   "space": { "lower": [0, 0], "upper": [1, 1] },
///   "initial_reference": [0.2, 0.2],
///   "noise": { "sigma_phi": 0.01, "sigma_g": [0.005] },
///   "cost": [ { "coef": 1.0, "powers": [2, 0] }, { "coef": 1.0, "powers": [0, 2] } ],
///   "constraints": [ [ { "coef": 1.0, "powers": [1, 0] }, { "coef": -0.8, "powers": [0, 0] } ] ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPlant {
    pub name: String,
    pub space: DecisionSpace,
    pub initial_reference: Vec<f64>,
    pub noise: NoiseModel,
    pub cost: Polynomial,
    #[serde(default)]
    pub constraints: Vec<Polynomial>,
}

impl PolynomialPlant {
    pub fn validate(&self) -> Result<()> {
        let n = self.space.dim();
        self.cost.check(n, "cost")?;
        for (j, g) in self.constraints.iter().enumerate() {
            g.check(n, &format!("constraint {j}"))?;
        }
        if self.noise.n_g() != self.constraints.len() {
            return Err(Error::InvalidConfig(format!(
                "{} noise levels for {} constraints",
                self.noise.n_g(),
                self.constraints.len()
            )));
        }
        self.noise
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.space
            .scale(&self.initial_reference)
            .map_err(|e| Error::InvalidConfig(format!("initial reference: {e}")))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plant: Self = serde_json::from_str(text)?;
        plant.validate()?;
        Ok(plant)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl PlantModel for PolynomialPlant {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &DecisionSpace {
        &self.space
    }

    fn n_g(&self) -> usize {
        self.constraints.len()
    }

    fn cost(&self, u: &[f64]) -> f64 {
        self.cost.eval(u)
    }

    fn constraints(&self, u: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|g| g.eval(u)).collect()
    }

    fn default_noise(&self) -> NoiseModel {
        self.noise.clone()
    }

    fn initial_reference(&self) -> Vec<f64> {
        self.initial_reference.clone()
    }
}
