//! Decision-variable bounds and the affine map onto the unit hypercube.
//!
//! Everything the optimizer does (perturbation, regression, Lipschitz
//! bounds) happens in scaled coordinates `ũ_i = (u_i - u_i^L) / (u_i^U - u_i^L)`.
//! Raw coordinates only appear at the boundary with the experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack tolerated when a raw point is checked against its bounds.
pub const BOUNDS_SLACK: f64 = 1e-12;

/// Box bounds `lower <= u <= upper` of the decision variables, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct DecisionSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawSpace> for DecisionSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        DecisionSpace::new(raw.lower, raw.upper)
    }
}

impl From<DecisionSpace> for RawSpace {
    fn from(space: DecisionSpace) -> Self {
        RawSpace {
            lower: space.lower,
            upper: space.upper,
        }
    }
}

impl DecisionSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace(
                "at least one decision variable is required".into(),
            ));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidSpace(format!(
                    "bounds of variable {i} must be finite with lower < upper (got {lo}, {hi})"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0,1]^n`, where raw and scaled coordinates coincide.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Maps a raw point into the unit hypercube.
    ///
    /// Points up to [`BOUNDS_SLACK`] outside the box are accepted and clamped,
    /// anything further out is rejected with [`Error::OutOfBounds`].
    pub fn scale(&self, u: &[f64]) -> Result<ScaledPoint> {
        self.check_dim(u.len())?;
        let mut coords = Vec::with_capacity(u.len());
        for (i, &ui) in u.iter().enumerate() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !ui.is_finite() || ui < lo - BOUNDS_SLACK || ui > hi + BOUNDS_SLACK {
                return Err(Error::OutOfBounds {
                    index: i,
                    value: ui,
                });
            }
            coords.push(((ui - lo) / (hi - lo)).clamp(0.0, 1.0));
        }
        Ok(ScaledPoint(coords))
    }

    pub fn unscale(&self, p: &ScaledPoint) -> Vec<f64> {
        p.0.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&t, (&lo, &hi))| lo + t * (hi - lo))
            .collect()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }
}

/// A point of the unit hypercube `[0,1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScaledPoint(Vec<f64>);

impl ScaledPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        for (i, &c) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::OutOfBounds { index: i, value: c });
            }
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &ScaledPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<f64>> for ScaledPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        ScaledPoint::new(coords)
    }
}

impl From<ScaledPoint> for Vec<f64> {
    fn from(p: ScaledPoint) -> Self {
        p.0
    }
}
