//! Lipschitz back-offs and safety certificates for excitation balls.
//!
//! Given local Lipschitz constants `κ_j` of a constraint `g_j` over a ball of
//! radius `δ_e` around a reference point, every point of the ball is feasible
//! for `g_j` as soon as `g_j(center) <= -δ_e ‖κ_j‖₂`. This module computes the
//! pieces of that test (upper bounds, back-offs, robust measured values) and
//! bundles the verdict into a [`SafetyCertificate`].
//!
//! All comparisons are exact floating point comparisons. Margins are stored so
//! callers can apply stricter policies of their own.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::ScaledPoint;

/// Largest admissible excitation radius in scaled units.
pub const MAX_RADIUS: f64 = 0.5;

/// Euclidean ball `B_e` of radius `δ_e` around a scaled reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationBall {
    center: ScaledPoint,
    radius: f64,
}

impl ExcitationBall {
    pub fn new(center: ScaledPoint, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &ScaledPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let d2: f64 = self
            .center
            .coords()
            .iter()
            .zip(p)
            .map(|(c, x)| (c - x).powi(2))
            .sum();
        d2.sqrt() <= self.radius
    }
}

pub(crate) fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius <= MAX_RADIUS) {
        return Err(Error::InvalidArgument(format!(
            "excitation radius must lie in (0, {MAX_RADIUS}], got {radius}"
        )));
    }
    Ok(())
}

/// Per-input Lipschitz constants `(κ_j1, ..., κ_jn)` of one constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LipschitzVector(Vec<f64>);

impl LipschitzVector {
    pub fn new(kappa: Vec<f64>) -> Result<Self> {
        if kappa.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::InvalidArgument(
                "Lipschitz constants must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(kappa))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|k| k * k).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for LipschitzVector {
    type Error = Error;

    fn try_from(kappa: Vec<f64>) -> Result<Self> {
        LipschitzVector::new(kappa)
    }
}

impl From<LipschitzVector> for Vec<f64> {
    fn from(k: LipschitzVector) -> Self {
        k.0
    }
}

/// Upper bound on `g(b)` from its value at `a` and Lipschitz constants valid
/// on a region containing both points.
pub fn lipschitz_upper_bound(
    g_a: f64,
    kappa: &LipschitzVector,
    a: &ScaledPoint,
    b: &ScaledPoint,
) -> f64 {
    g_a + kappa
        .0
        .iter()
        .zip(a.coords().iter().zip(b.coords()))
        .map(|(k, (x, y))| k * (y - x).abs())
        .sum::<f64>()
}

/// Set of points certified feasible by the Lipschitz upper bound anchored at
/// `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzPolytope {
    pub center: ScaledPoint,
    pub g_star: f64,
    pub kappa: LipschitzVector,
}

impl LipschitzPolytope {
    pub fn contains(&self, p: &ScaledPoint) -> bool {
        lipschitz_upper_bound(self.g_star, &self.kappa, &self.center, p) <= 0.0
    }
}

/// Back-off `δ_e ‖κ‖₂` that keeps the whole excitation ball inside the
/// Lipschitz polytope.
pub fn required_backoff(kappa: &LipschitzVector, delta_e: f64) -> f64 {
    delta_e * kappa.norm()
}

/// How a noisy measurement is turned into a high-probability upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundPolicy {
    /// `ĝ + 3σ`, about 99.85% one-sided coverage under Gaussian noise.
    #[default]
    GaussianThreeSigma,
    /// `ĝ + σ/√(1-c)`, distribution-free via Chebyshev's inequality.
    Chebyshev { confidence: f64 },
}

impl BoundPolicy {
    pub fn multiplier(&self) -> f64 {
        match *self {
            BoundPolicy::GaussianThreeSigma => 3.0,
            BoundPolicy::Chebyshev { confidence } => 1.0 / (1.0 - confidence).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundPolicy::Chebyshev { confidence } = *self {
            if !(confidence > 0.0 && confidence < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "Chebyshev confidence must lie strictly in (0, 1), got {confidence}"
                )));
            }
        }
        Ok(())
    }
}

pub fn robust_upper_bound(g_hat: f64, sigma: f64, policy: BoundPolicy) -> f64 {
    if sigma == 0.0 {
        return g_hat;
    }
    g_hat + policy.multiplier() * sigma
}

/// Additive measurement noise of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_phi: f64,
    pub sigma_g: Vec<f64>,
    #[serde(default)]
    pub bound_policy: BoundPolicy,
}

impl NoiseModel {
    pub fn new(sigma_phi: f64, sigma_g: Vec<f64>, bound_policy: BoundPolicy) -> Result<Self> {
        let model = Self {
            sigma_phi,
            sigma_g,
            bound_policy,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn gaussian(sigma_phi: f64, sigma_g: Vec<f64>) -> Result<Self> {
        Self::new(sigma_phi, sigma_g, BoundPolicy::GaussianThreeSigma)
    }

    pub fn noiseless(n_g: usize) -> Self {
        Self {
            sigma_phi: 0.0,
            sigma_g: vec![0.0; n_g],
            bound_policy: BoundPolicy::GaussianThreeSigma,
        }
    }

    pub fn n_g(&self) -> usize {
        self.sigma_g.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        if !ok(self.sigma_phi) || !self.sigma_g.iter().copied().all(ok) {
            return Err(Error::InvalidArgument(
                "noise standard deviations must be finite and nonnegative".into(),
            ));
        }
        self.bound_policy.validate()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_phi: self.sigma_phi * factor,
            sigma_g: self.sigma_g.iter().map(|s| s * factor).collect(),
            bound_policy: self.bound_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCertificate {
    pub kappa: LipschitzVector,
    pub backoff: f64,
    pub robust_value: f64,
    /// `-backoff - robust_value`; nonnegative means certified.
    pub margin: f64,
}

/// Verdict on whether every point of an excitation ball satisfies all
/// constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyCertificate {
    pub ball: ExcitationBall,
    pub per_constraint: Vec<ConstraintCertificate>,
    pub safe: bool,
}

impl SafetyCertificate {
    pub fn min_margin(&self) -> Option<f64> {
        self.per_constraint
            .iter()
            .map(|c| c.margin)
            .min_by(f64::total_cmp)
    }
}

pub fn certify_ball(
    ball: &ExcitationBall,
    robust_values: &[f64],
    kappas: &[LipschitzVector],
) -> Result<SafetyCertificate> {
    if robust_values.len() != kappas.len() {
        return Err(Error::DimensionMismatch {
            expected: kappas.len(),
            found: robust_values.len(),
        });
    }
    let per_constraint: Vec<_> = robust_values
        .iter()
        .zip(kappas)
        .map(|(&robust_value, kappa)| {
            let backoff = required_backoff(kappa, ball.radius);
            ConstraintCertificate {
                kappa: kappa.clone(),
                backoff,
                robust_value,
                margin: -backoff - robust_value,
            }
        })
        .collect();
    let safe = per_constraint.iter().all(|c| c.robust_value <= -c.backoff);
    Ok(SafetyCertificate {
        ball: ball.clone(),
        per_constraint,
        safe,
    })
}

/// Halves `delta_initial` until `g_star <= -δ ‖κ‖₂`.
///
/// `kappa_at_initial` stays valid for every smaller concentric ball, so it is
/// never re-estimated.
pub fn shrink_delta(
    g_star: f64,
    kappa_at_initial: &LipschitzVector,
    delta_initial: f64,
    max_halvings: u32,
) -> Result<f64> {
    if g_star.is_nan() || g_star >= 0.0 {
        return Err(Error::InfeasibleAtCenter(g_star));
    }
    if delta_initial.is_nan() || delta_initial <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "initial radius must be positive, got {delta_initial}"
        )));
    }
    let norm = kappa_at_initial.norm();
    let mut delta = delta_initial;
    for n in 0..=max_halvings {
        if n > 0 {
            delta /= 2.0;
        }
        if g_star <= -delta * norm {
            return Ok(delta);
        }
    }
    Err(Error::NotReached(max_halvings))
}

/// Lipschitz constants from a regression gradient, inflated by six standard
/// deviations of the difference-quotient estimate (`σ√2 / (s_i δ_e)`).
pub fn estimate_lipschitz(
    grad_estimate: &[f64],
    sigma: f64,
    points_tested: &[u8],
    delta_e: f64,
) -> Result<LipschitzVector> {
    if grad_estimate.len() != points_tested.len() {
        return Err(Error::DimensionMismatch {
            expected: grad_estimate.len(),
            found: points_tested.len(),
        });
    }
    if delta_e.is_nan() || delta_e <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "excitation radius must be positive, got {delta_e}"
        )));
    }
    let kappa = grad_estimate
        .iter()
        .zip(points_tested)
        .map(|(g, &s)| {
            debug_assert!(s == 1 || s == 2);
            g.abs() + 6.0 * sigma * std::f64::consts::SQRT_2 / (f64::from(s) * delta_e)
        })
        .collect();
    LipschitzVector::new(kappa)
}

/// Exact maximum of `coeffsᵀũ + offset` over an excitation ball.
pub fn affine_ball_max(coeffs: &[f64], offset: f64, ball: &ExcitationBall) -> f64 {
    let at_center: f64 = coeffs
        .iter()
        .zip(ball.center.coords())
        .map(|(a, c)| a * c)
        .sum();
    let norm = coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
    at_center + offset + ball.radius * norm
}
