use serde::{Deserialize, Serialize};

use crate::backoff::{NoiseModel, MAX_RADIUS};
use crate::error::{Error, Result};
use crate::space::DecisionSpace;

fn enabled() -> bool {
    true
}

/// Everything needed to start a feasible-side EVOP campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvopConfig {
    pub space: DecisionSpace,
    /// Starting reference point in raw units; assumed safe together with its
    /// perturbations.
    pub initial_reference: Vec<f64>,
    pub noise: NoiseModel,
    /// Excitation radius in scaled units, `0 < δ_e <= 0.5`.
    pub delta_e: f64,
    /// Shrink `δ_e` and the noise levels as `1/√k`.
    #[serde(default)]
    pub anneal: bool,
    /// With `false`, the nearly-active and reference tests use a zero
    /// threshold instead of the Lipschitz back-off.
    #[serde(default = "enabled")]
    pub backoff_enabled: bool,
    /// Halve `δ_e` when a retained reference fails its own back-off test.
    #[serde(default)]
    pub auto_shrink: bool,
    pub max_cycles: u32,
}

impl EvopConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.delta_e > 0.0 && self.delta_e <= MAX_RADIUS) {
            return invalid(format!(
                "delta_e must lie in (0, {MAX_RADIUS}], got {}",
                self.delta_e
            ));
        }
        if self.max_cycles == 0 {
            return invalid("max_cycles must be at least 1".into());
        }
        if self.initial_reference.len() != self.space.dim() {
            return invalid(format!(
                "initial reference has {} coordinates, space has {}",
                self.initial_reference.len(),
                self.space.dim()
            ));
        }
        if let Err(e) = self.space.scale(&self.initial_reference) {
            return invalid(format!("initial reference: {e}"));
        }
        if let Err(e) = self.noise.validate() {
            return invalid(e.to_string());
        }
        Ok(())
    }

    pub fn n_u(&self) -> usize {
        self.space.dim()
    }

    pub fn n_g(&self) -> usize {
        self.noise.n_g()
    }
}
