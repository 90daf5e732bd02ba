//! Batch runs of the optimizer against simulated plants, with a true-value
//! audit of every experiment.

mod aggregate;
mod export;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backoff::NoiseModel;
use crate::engine::{EvopConfig, EvopSession, Measurement, Next};
use crate::error::{Error, Result};
use crate::problems::{grid_oracle, GaussianStream, Plant, PlantCatalog, PlantModel};

pub use aggregate::{
    aggregate, median, tabulate, AggregateRow, MedianRow, PairRow, PairedComparison, SummaryTable,
};
pub use export::{csv_header, write_csv, write_json};

/// Grid spacing used to locate the reference optimum for cost gaps.
pub const ORACLE_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub plant: String,
    pub delta_e: f64,
    #[serde(default)]
    pub anneal: bool,
    #[serde(default = "yes")]
    pub backoff_enabled: bool,
    #[serde(default)]
    pub auto_shrink: bool,
    pub max_cycles: u32,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: u32,
    /// Replaces the plant's default noise levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

impl RunSpec {
    pub fn new(plant: &str, delta_e: f64, max_cycles: u32, seed: u64) -> Self {
        Self {
            plant: plant.to_string(),
            delta_e,
            anneal: false,
            backoff_enabled: true,
            auto_shrink: false,
            max_cycles,
            seed,
            replicates: 1,
            noise: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidConfig("max_cycles must be at least 1".into()));
        }
        Ok(())
    }

    /// Short human-readable identifier, e.g. `quad-linear/de=0.05/anneal`.
    pub fn label(&self) -> String {
        let mut label = format!("{}/de={}", self.plant, self.delta_e);
        if self.anneal {
            label.push_str("/anneal");
        }
        if !self.backoff_enabled {
            label.push_str("/no-backoff");
        }
        if self.auto_shrink {
            label.push_str("/auto-shrink");
        }
        label
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            replicates: 1,
            ..self.clone()
        }
    }
}

/// One experiment of a run as applied to the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub cycle: u32,
    pub index: usize,
    pub purpose: String,
    pub u_raw: Vec<f64>,
    pub u_scaled: Vec<f64>,
    pub phi_hat: f64,
    pub g_hat: Vec<f64>,
    pub phi_true: f64,
    pub g_true: Vec<f64>,
    /// `true` iff the true constraint value is strictly positive.
    pub violations: Vec<bool>,
    /// The experiment served as a reference point.
    pub is_reference: bool,
    pub delta_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub plant: String,
    pub seed: u64,
    pub rows: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub plant: String,
    pub seed: u64,
    pub total_experiments: usize,
    /// Sum of all violation flags of the trajectory.
    pub total_violations: usize,
    pub violations_per_constraint: Vec<usize>,
    pub final_reference: Vec<f64>,
    pub final_reference_scaled: Vec<f64>,
    pub final_cost: f64,
    pub phi_opt: f64,
    pub initial_gap: f64,
    pub final_gap: f64,
    /// True cost of the reference after each cycle.
    pub reference_cost: Vec<f64>,
    /// Running minimum of `reference_cost`.
    pub best_cost: Vec<f64>,
}

/// Runs one replicate with `spec.seed`.
pub fn run_trajectory(
    catalog: &PlantCatalog,
    spec: &RunSpec,
) -> Result<(TrajectoryRecord, RunSummary)> {
    spec.validate()?;
    let model = catalog.model(&spec.plant)?;
    let phi_opt = grid_oracle(model.as_ref(), ORACLE_RESOLUTION)?.phi_opt;
    run_with_model(model, spec, phi_opt)
}

/// Runs `spec.replicates` replicates with seeds `spec.seed + r`, in parallel.
/// Results are ordered by replicate index.
pub fn run_replicates(
    catalog: &PlantCatalog,
    spec: &RunSpec,
) -> Result<Vec<(TrajectoryRecord, RunSummary)>> {
    spec.validate()?;
    let model = catalog.model(&spec.plant)?;
    run_replicates_with_model(model, spec)
}

pub fn run_replicates_with_model(
    model: Arc<dyn PlantModel>,
    spec: &RunSpec,
) -> Result<Vec<(TrajectoryRecord, RunSummary)>> {
    spec.validate()?;
    let phi_opt = grid_oracle(model.as_ref(), ORACLE_RESOLUTION)?.phi_opt;
    (0..u64::from(spec.replicates))
        .into_par_iter()
        .map(|r| run_with_model(model.clone(), &spec.with_seed(spec.seed + r), phi_opt))
        .collect()
}

/// Drives one session to completion against `model`; `phi_opt` is the
/// reference optimum used for the cost gaps.
pub fn run_with_model(
    model: Arc<dyn PlantModel>,
    spec: &RunSpec,
    phi_opt: f64,
) -> Result<(TrajectoryRecord, RunSummary)> {
    let mut plant = Plant::new(model.clone());
    if let Some(noise) = &spec.noise {
        plant = plant
            .with_noise(noise.clone())
            .map_err(|e| Error::InvalidConfig(format!("noise override: {e}")))?;
    }
    let config = EvopConfig {
        space: model.space().clone(),
        initial_reference: model.initial_reference(),
        noise: plant.noise().clone(),
        delta_e: spec.delta_e,
        anneal: spec.anneal,
        backoff_enabled: spec.backoff_enabled,
        auto_shrink: spec.auto_shrink,
        max_cycles: spec.max_cycles,
    };
    let mut session = EvopSession::new(config)?;
    let mut stream = GaussianStream::seed_from_u64(spec.seed);
    let mut rows: Vec<TrajectoryRow> = Vec::new();
    // trajectory rows backing the current cycle's data, reference first
    let mut cycle_rows: Vec<usize> = Vec::new();
    let mut reference_cost = Vec::new();

    loop {
        match session.next_suggestion() {
            Err(Error::SessionFinished) => break,
            Err(e) => return Err(e),
            Ok(Next::Suggest(s)) => {
                plant.set_noise_scale(session.sigma_scale());
                let reading = plant.evaluate(&s.u_raw, &mut stream)?;
                let delta_e = session.delta_e();
                let cycle = session.cycle();
                session.ingest_measurement(Measurement {
                    suggestion_id: s.id.clone(),
                    phi_hat: reading.phi_hat,
                    g_hat: reading.g_hat.clone(),
                })?;
                cycle_rows.push(rows.len());
                rows.push(TrajectoryRow {
                    cycle,
                    index: rows.len(),
                    purpose: s.purpose.label(),
                    u_raw: s.u_raw,
                    u_scaled: s.u_scaled.coords().to_vec(),
                    phi_hat: reading.phi_hat,
                    g_hat: reading.g_hat,
                    phi_true: reading.phi_true,
                    violations: reading.g_true.iter().map(|g| *g > 0.0).collect(),
                    g_true: reading.g_true,
                    is_reference: s.purpose == crate::engine::Purpose::Reference,
                    delta_e,
                });
            }
            Ok(Next::CycleReady) => {
                let report = session.advance_cycle()?;
                let row = cycle_rows[report.chosen_row];
                rows[row].is_reference = true;
                reference_cost.push(rows[row].phi_true);
                cycle_rows = vec![row];
            }
        }
    }

    let n_g = model.n_g();
    let mut violations_per_constraint = vec![0; n_g];
    for row in &rows {
        for (count, v) in violations_per_constraint.iter_mut().zip(&row.violations) {
            *count += usize::from(*v);
        }
    }
    let final_reference = session.reference_raw();
    let final_cost = model.cost(&final_reference);
    let initial_cost = model.cost(&model.initial_reference());
    let best_cost = reference_cost
        .iter()
        .scan(f64::INFINITY, |best, &c| {
            *best = f64::min(*best, c);
            Some(*best)
        })
        .collect();
    let summary = RunSummary {
        label: spec.label(),
        plant: spec.plant.clone(),
        seed: spec.seed,
        total_experiments: rows.len(),
        total_violations: violations_per_constraint.iter().sum(),
        violations_per_constraint,
        final_reference_scaled: session.reference().coords().to_vec(),
        final_reference,
        final_cost,
        phi_opt,
        initial_gap: initial_cost - phi_opt,
        final_gap: final_cost - phi_opt,
        reference_cost,
        best_cost,
    };
    let record = TrajectoryRecord {
        plant: spec.plant.clone(),
        seed: spec.seed,
        rows,
    };
    Ok((record, summary))
}
