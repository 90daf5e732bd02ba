use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::EvopConfig;
use crate::backoff::{
    certify_ball, estimate_lipschitz, required_backoff, robust_upper_bound, shrink_delta,
    ExcitationBall, LipschitzVector, SafetyCertificate,
};
use crate::error::{Error, Result};
use crate::linalg::{
    lagrangian_gradient, least_squares_fit, solve_lagrange, DesignMatrix, LagrangeSolution,
};
use crate::space::ScaledPoint;

/// Values within this distance of the best `∇Lᵀũ` count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Halving budget of the optional `auto_shrink` remedy.
pub const AUTO_SHRINK_HALVINGS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Purpose {
    Reference,
    PerturbPlus { axis: usize },
    PerturbMinus { axis: usize },
}

impl Purpose {
    /// Short label, 1-based axis: `reference`, `plus_1`, `minus_2`, ...
    pub fn label(&self) -> String {
        match self {
            Purpose::Reference => "reference".to_string(),
            Purpose::PerturbPlus { axis } => format!("plus_{}", axis + 1),
            Purpose::PerturbMinus { axis } => format!("minus_{}", axis + 1),
        }
    }
}

/// An experiment the session wants run next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: String,
    pub u_raw: Vec<f64>,
    pub u_scaled: ScaledPoint,
    pub purpose: Purpose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub suggestion_id: String,
    pub phi_hat: f64,
    pub g_hat: Vec<f64>,
}

/// The data set of the running cycle: reference row first, then the
/// perturbations in the order they were measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleData {
    pub u_tilde: DesignMatrix,
    pub phi: Vec<f64>,
    /// One row per experiment, one column per constraint.
    pub g: Vec<Vec<f64>>,
    /// Points tested per axis (1 or 2).
    pub s: Vec<u8>,
}

impl CycleData {
    fn new(n_u: usize) -> Self {
        Self {
            u_tilde: DesignMatrix::empty(),
            phi: Vec::new(),
            g: Vec::new(),
            s: vec![0; n_u],
        }
    }

    fn push(&mut self, u: &ScaledPoint, phi: f64, g: Vec<f64>) {
        self.u_tilde.push_row(u.coords().to_vec());
        self.phi.push(phi);
        self.g.push(g);
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    fn constraint_column(&self, j: usize) -> Vec<f64> {
        self.g.iter().map(|row| row[j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingMeasurement,
    CycleReady,
    Finished,
}

/// Result of [`EvopSession::next_suggestion`].
#[derive(Debug, Clone, PartialEq)]
pub enum Next {
    Suggest(Suggestion),
    CycleReady,
}

/// One measured experiment, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub cycle: u32,
    pub suggestion: Suggestion,
    pub phi_hat: f64,
    pub g_hat: Vec<f64>,
    pub delta_e: f64,
}

/// What one completed cycle concluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub k: u32,
    /// Radius used for the perturbations and back-offs of this cycle.
    pub delta_e: f64,
    /// Multiplier applied to the nominal noise levels during this cycle.
    pub sigma_scale: f64,
    pub grad_phi: Vec<f64>,
    pub grad_g: Vec<Vec<f64>>,
    pub kappa: Vec<LipschitzVector>,
    /// `δ_e ‖κ_j‖₂` per constraint.
    pub backoffs: Vec<f64>,
    pub active_set: Vec<usize>,
    pub lambda: LagrangeSolution,
    pub lagrangian_gradient: Vec<f64>,
    /// Row of the cycle data that became the reference (0 is the old one).
    pub chosen_row: usize,
    pub new_reference: ScaledPoint,
    pub new_reference_raw: Vec<f64>,
    pub reference_changed: bool,
    /// Robust constraint bounds of the new reference.
    pub robust_values: Vec<f64>,
    pub certificate: SafetyCertificate,
    /// Radius of the next cycle, after annealing or shrinking.
    pub next_delta_e: f64,
}

/// Algorithm state of a feasible-side EVOP campaign.
///
/// Drive it with [`next_suggestion`](Self::next_suggestion),
/// [`ingest_measurement`](Self::ingest_measurement) and, once the cycle is
/// complete, [`advance_cycle`](Self::advance_cycle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvopSession {
    config: EvopConfig,
    k: u32,
    state: SessionState,
    reference: ScaledPoint,
    /// Radius at `k = 1`; halved by `auto_shrink`.
    delta_base: f64,
    data: CycleData,
    pending: VecDeque<Suggestion>,
    serial: u64,
    last_report: Option<CycleReport>,
    reports: Vec<CycleReport>,
    history: Vec<ExperimentRecord>,
}

impl EvopSession {
    pub fn new(config: EvopConfig) -> Result<Self> {
        config.validate()?;
        let reference = config.space.scale(&config.initial_reference)?;
        let n_u = config.n_u();
        let mut session = Self {
            k: 1,
            state: SessionState::AwaitingMeasurement,
            reference,
            delta_base: config.delta_e,
            data: CycleData::new(n_u),
            pending: VecDeque::new(),
            serial: 0,
            last_report: None,
            reports: Vec::new(),
            history: Vec::new(),
            config,
        };
        let reference = session.reference.clone();
        session.enqueue(reference, Purpose::Reference);
        session.plan_perturbations();
        Ok(session)
    }

    pub fn config(&self) -> &EvopConfig {
        &self.config
    }

    pub fn cycle(&self) -> u32 {
        self.k
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn reference(&self) -> &ScaledPoint {
        &self.reference
    }

    pub fn reference_raw(&self) -> Vec<f64> {
        self.config.space.unscale(&self.reference)
    }

    pub fn data(&self) -> &CycleData {
        &self.data
    }

    pub fn last_report(&self) -> Option<&CycleReport> {
        self.last_report.as_ref()
    }

    pub fn reports(&self) -> &[CycleReport] {
        &self.reports
    }

    pub fn history(&self) -> &[ExperimentRecord] {
        &self.history
    }

    pub fn pending(&self) -> impl Iterator<Item = &Suggestion> {
        self.pending.iter()
    }

    /// Factor applied to the nominal noise levels in the current cycle.
    pub fn sigma_scale(&self) -> f64 {
        if self.config.anneal {
            1.0 / f64::from(self.k).sqrt()
        } else {
            1.0
        }
    }

    /// Excitation radius of the current cycle.
    pub fn delta_e(&self) -> f64 {
        self.delta_base * self.sigma_scale()
    }

    pub fn next_suggestion(&self) -> Result<Next> {
        match self.state {
            SessionState::Finished => Err(Error::SessionFinished),
            SessionState::CycleReady => Ok(Next::CycleReady),
            SessionState::AwaitingMeasurement => Ok(Next::Suggest(
                self.pending
                    .front()
                    .cloned()
                    .expect("awaiting a measurement with an empty queue"),
            )),
        }
    }

    pub fn ingest_measurement(&mut self, m: Measurement) -> Result<()> {
        if self.state == SessionState::Finished {
            return Err(Error::SessionFinished);
        }
        let head_matches = self.pending.front().map(|s| &s.id) == Some(&m.suggestion_id);
        if !head_matches {
            if self
                .history
                .iter()
                .any(|r| r.suggestion.id == m.suggestion_id)
            {
                return Err(Error::DuplicateMeasurement(m.suggestion_id));
            }
            return Err(Error::UnknownSuggestion(m.suggestion_id));
        }
        if m.g_hat.len() != self.config.n_g() {
            return Err(Error::DimensionMismatch {
                expected: self.config.n_g(),
                found: m.g_hat.len(),
            });
        }
        if !m.phi_hat.is_finite() || m.g_hat.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("measurement"));
        }
        let suggestion = self.pending.pop_front().expect("head checked above");
        self.data
            .push(&suggestion.u_scaled, m.phi_hat, m.g_hat.clone());
        self.history.push(ExperimentRecord {
            cycle: self.k,
            suggestion,
            phi_hat: m.phi_hat,
            g_hat: m.g_hat,
            delta_e: self.delta_e(),
        });
        if self.pending.is_empty() {
            self.state = SessionState::CycleReady;
        }
        Ok(())
    }

    /// Regression, Lipschitz estimation, nearly-active detection, multiplier
    /// solve and safe reference selection for the completed cycle.
    pub fn advance_cycle(&mut self) -> Result<CycleReport> {
        match self.state {
            SessionState::CycleReady => {}
            SessionState::Finished => return Err(Error::SessionFinished),
            SessionState::AwaitingMeasurement => return Err(Error::NotReady(self.pending.len())),
        }
        let n_g = self.config.n_g();
        let delta = self.delta_e();
        let sigma_scale = self.sigma_scale();
        let sigma_g: Vec<f64> = self
            .config
            .noise
            .sigma_g
            .iter()
            .map(|s| s * sigma_scale)
            .collect();
        let policy = self.config.noise.bound_policy;

        let grad_phi = least_squares_fit(&self.data.u_tilde, &self.data.phi)?.gradient;
        let mut grad_g = Vec::with_capacity(n_g);
        let mut kappa = Vec::with_capacity(n_g);
        for (j, &sigma) in sigma_g.iter().enumerate() {
            let fit = least_squares_fit(&self.data.u_tilde, &self.data.constraint_column(j))?;
            kappa.push(estimate_lipschitz(
                &fit.gradient,
                sigma,
                &self.data.s,
                delta,
            )?);
            grad_g.push(fit.gradient);
        }
        let backoffs: Vec<f64> = kappa.iter().map(|k| required_backoff(k, delta)).collect();
        let thresholds: Vec<f64> = if self.config.backoff_enabled {
            backoffs.iter().map(|b| -b).collect()
        } else {
            vec![0.0; n_g]
        };
        let robust: Vec<Vec<f64>> = self
            .data
            .g
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&sigma_g)
                    .map(|(&g, &s)| robust_upper_bound(g, s, policy))
                    .collect()
            })
            .collect();

        let active_set: Vec<usize> = (0..n_g)
            .filter(|&j| robust.iter().any(|row| row[j] >= thresholds[j]))
            .collect();
        let lambda = solve_lagrange(&grad_phi, &grad_g, &active_set)?;
        let grad_l = lagrangian_gradient(&grad_phi, &grad_g, &lambda.lambda);

        let rows = self.data.u_tilde.rows();
        let scores: Vec<Option<f64>> = rows
            .iter()
            .zip(&robust)
            .map(|(u, rb)| {
                let safe = rb.iter().zip(&thresholds).all(|(g, t)| g <= t);
                safe.then(|| grad_l.iter().zip(u).map(|(a, b)| a * b).sum())
            })
            .collect();
        let best = scores
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        // row 0 is the incumbent, so the first tie is the preferred one
        let chosen_row = scores
            .iter()
            .position(|s| s.is_some_and(|v| v <= best + TIE_TOLERANCE))
            .unwrap_or(0);
        let new_reference = ScaledPoint::new(rows[chosen_row].clone())?;
        let reference_changed = chosen_row != 0;

        let ball = ExcitationBall::new(new_reference.clone(), delta)?;
        let certificate = certify_ball(&ball, &robust[chosen_row], &kappa)?;

        if self.config.auto_shrink && !reference_changed && !certificate.safe {
            self.try_shrink(&robust[0], &kappa, delta);
        }

        let carried_phi = self.data.phi[chosen_row];
        let carried_g = self.data.g[chosen_row].clone();
        self.reference = new_reference.clone();
        self.k += 1;
        let finished = self.k > self.config.max_cycles;
        let report = CycleReport {
            k: self.k - 1,
            delta_e: delta,
            sigma_scale,
            grad_phi,
            grad_g,
            kappa,
            backoffs,
            active_set,
            lambda,
            lagrangian_gradient: grad_l,
            chosen_row,
            new_reference_raw: self.config.space.unscale(&new_reference),
            new_reference,
            reference_changed,
            robust_values: robust[chosen_row].clone(),
            certificate,
            next_delta_e: self.delta_e(),
        };

        self.data = CycleData::new(self.config.n_u());
        self.data
            .push(&self.reference.clone(), carried_phi, carried_g);
        if finished {
            self.state = SessionState::Finished;
        } else {
            self.state = SessionState::AwaitingMeasurement;
            self.plan_perturbations();
        }
        self.last_report = Some(report.clone());
        self.reports.push(report.clone());
        Ok(report)
    }

    /// Certificate of the current reference's ball from the last cycle.
    pub fn certificate(&self) -> Result<&SafetyCertificate> {
        self.last_report
            .as_ref()
            .map(|r| &r.certificate)
            .ok_or(Error::NoCycleCompleted)
    }

    fn try_shrink(&mut self, robust_ref: &[f64], kappa: &[LipschitzVector], delta: f64) {
        let mut smallest = delta;
        for (&g, k) in robust_ref.iter().zip(kappa) {
            match shrink_delta(g, k, delta, AUTO_SHRINK_HALVINGS) {
                Ok(d) => smallest = smallest.min(d),
                Err(_) => return,
            }
        }
        self.delta_base *= smallest / delta;
    }

    fn enqueue(&mut self, u_scaled: ScaledPoint, purpose: Purpose) {
        self.serial += 1;
        let id = format!("c{}-e{}", self.k, self.serial);
        let u_raw = self.config.space.unscale(&u_scaled);
        self.pending.push_back(Suggestion {
            id,
            u_raw,
            u_scaled,
            purpose,
        });
    }

    /// Queues the ±δ_e coordinate perturbations around the reference that stay
    /// inside the unit cube and records how many were kept per axis.
    fn plan_perturbations(&mut self) {
        let delta = self.delta_e();
        let center = self.reference.coords().to_vec();
        for axis in 0..center.len() {
            let mut tested = 0;
            for (sign, purpose) in [
                (1.0, Purpose::PerturbPlus { axis }),
                (-1.0, Purpose::PerturbMinus { axis }),
            ] {
                let x = center[axis] + sign * delta;
                if (0.0..=1.0).contains(&x) {
                    let mut coords = center.clone();
                    coords[axis] = x;
                    let p = ScaledPoint::new(coords).expect("checked inside the unit cube");
                    self.enqueue(p, purpose);
                    tested += 1;
                }
            }
            debug_assert!(tested >= 1);
            self.data.s[axis] = tested;
        }
        if !self.pending.is_empty() {
            self.state = SessionState::AwaitingMeasurement;
        }
    }
}
