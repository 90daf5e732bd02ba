use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Plant, PlantModel};
use crate::backoff::NoiseModel;
use crate::error::{Error, Result};
use crate::space::DecisionSpace;

type Factory = Box<dyn Fn() -> Arc<dyn PlantModel> + Send + Sync>;

/// Plant models addressable by name.
pub struct PlantCatalog {
    entries: BTreeMap<String, Factory>,
}

impl PlantCatalog {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// The three synthetic plants shipped with the crate.
    pub fn builtin() -> Self {
        let mut catalog = Self::empty();
        catalog.register(QuadLinear::NAME, || Arc::new(QuadLinear::new()));
        catalog.register(QuadCircle::NAME, || Arc::new(QuadCircle::new()));
        catalog.register(TwoConstraint::NAME, || Arc::new(TwoConstraint::new()));
        catalog
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn() -> Arc<dyn PlantModel> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn model(&self, name: &str) -> Result<Arc<dyn PlantModel>> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::UnknownPlant(name.to_string()))
    }

    /// The named model with its default noise.
    pub fn plant(&self, name: &str) -> Result<Plant> {
        self.model(name).map(Plant::new)
    }
}

impl Default for PlantCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

fn unit_square() -> DecisionSpace {
    DecisionSpace::unit(2).expect("unit square is a valid space")
}

/// Quadratic bowl centred at (0.7, 0.7) cut by `u1 + u2 <= 1.2`; the optimum
/// (0.6, 0.6) lies on the constraint.
#[derive(Debug)]
pub struct QuadLinear {
    space: DecisionSpace,
}

impl QuadLinear {
    pub const NAME: &'static str = "quad-linear";

    pub fn new() -> Self {
        Self {
            space: unit_square(),
        }
    }
}

impl Default for QuadLinear {
    fn default() -> Self {
        Self::new()
    }
}

impl PlantModel for QuadLinear {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn space(&self) -> &DecisionSpace {
        &self.space
    }

    fn n_g(&self) -> usize {
        1
    }

    fn cost(&self, u: &[f64]) -> f64 {
        (u[0] - 0.7).powi(2) + (u[1] - 0.7).powi(2)
    }

    fn constraints(&self, u: &[f64]) -> Vec<f64> {
        vec![u[0] + u[1] - 1.2]
    }

    fn default_noise(&self) -> NoiseModel {
        NoiseModel::gaussian(0.01, vec![0.005]).expect("valid noise")
    }

    fn initial_reference(&self) -> Vec<f64> {
        vec![0.4, 0.4]
    }
}

/// Bowl centred at (0.55, 0.5) whose minimizer sits inside an infeasible disk
/// of radius 0.3 around (0.5, 0.5); the optimum (0.8, 0.5) is on the rim.
#[derive(Debug)]
pub struct QuadCircle {
    space: DecisionSpace,
}

impl QuadCircle {
    pub const NAME: &'static str = "quad-circle";

    pub fn new() -> Self {
        Self {
            space: unit_square(),
        }
    }
}

impl Default for QuadCircle {
    fn default() -> Self {
        Self::new()
    }
}

impl PlantModel for QuadCircle {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn space(&self) -> &DecisionSpace {
        &self.space
    }

    fn n_g(&self) -> usize {
        1
    }

    fn cost(&self, u: &[f64]) -> f64 {
        (u[0] - 0.55).powi(2) + (u[1] - 0.5).powi(2)
    }

    fn constraints(&self, u: &[f64]) -> Vec<f64> {
        vec![0.09 - (u[0] - 0.5).powi(2) - (u[1] - 0.5).powi(2)]
    }

    fn default_noise(&self) -> NoiseModel {
        NoiseModel::gaussian(0.01, vec![0.005]).expect("valid noise")
    }

    fn initial_reference(&self) -> Vec<f64> {
        vec![0.9, 0.8]
    }
}

/// Linear cost `-u1 - u2` under a disk and a half-plane constraint; the
/// optimum is the vertex where both are active.
#[derive(Debug)]
pub struct TwoConstraint {
    space: DecisionSpace,
}

impl TwoConstraint {
    pub const NAME: &'static str = "two-constraint";

    pub fn new() -> Self {
        Self {
            space: unit_square(),
        }
    }
}

impl Default for TwoConstraint {
    fn default() -> Self {
        Self::new()
    }
}

impl PlantModel for TwoConstraint {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn space(&self) -> &DecisionSpace {
        &self.space
    }

    fn n_g(&self) -> usize {
        2
    }

    fn cost(&self, u: &[f64]) -> f64 {
        -u[0] - u[1]
    }

    fn constraints(&self, u: &[f64]) -> Vec<f64> {
        vec![u[0] * u[0] + u[1] * u[1] - 0.8, u[0] + 2.0 * u[1] - 1.5]
    }

    fn default_noise(&self) -> NoiseModel {
        NoiseModel::gaussian(0.01, vec![0.005, 0.005]).expect("valid noise")
    }

    fn initial_reference(&self) -> Vec<f64> {
        vec![0.2, 0.2]
    }
}
