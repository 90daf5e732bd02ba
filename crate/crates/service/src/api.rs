use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use safe_evop::backoff::SafetyCertificate;
use safe_evop::engine::{
    CycleReport, EvopConfig, ExperimentRecord, Measurement, Next, SessionState, Suggestion,
};
use safe_evop::Error as EngineError;

use crate::error::{Result, ServiceError};
use crate::store::SessionStore;

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/suggestion", get(get_suggestion))
        .route("/sessions/{id}/measurements", post(post_measurement))
        .route("/sessions/{id}/advance", post(advance))
        .with_state(store)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: Uuid,
}

/// Body of `GET /sessions/{id}/suggestion`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SuggestionResponse {
    AwaitingMeasurement { suggestion: Suggestion },
    CycleReady,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub status: SessionState,
    pub cycle: u32,
    pub remaining: usize,
}

/// Snapshot returned by `GET /sessions/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: Uuid,
    pub state: SessionState,
    /// Index of the cycle in progress (`max_cycles + 1` once finished).
    pub cycle: u32,
    pub completed_cycles: usize,
    pub delta_e: f64,
    pub sigma_scale: f64,
    pub config: EvopConfig,
    pub reference: Vec<f64>,
    pub reference_raw: Vec<f64>,
    pub pending: Vec<Suggestion>,
    pub certificate: Option<SafetyCertificate>,
    pub last_report: Option<CycleReport>,
    pub history: Vec<ExperimentRecord>,
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadBody(e.to_string()))
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    body: Bytes,
) -> Result<(StatusCode, Json<Created>)> {
    let config: EvopConfig =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadConfig(e.to_string()))?;
    let session_id = store.create(config).map_err(|e| match e {
        ServiceError::Engine(e) => ServiceError::BadConfig(e.to_string()),
        other => other,
    })?;
    tracing::info!(%session_id, "session created");
    Ok((StatusCode::CREATED, Json(Created { session_id })))
}

async fn get_session(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>> {
    let handle = store.get(&id)?;
    let envelope = handle.lock().await;
    let s = &envelope.session;
    Ok(Json(SessionView {
        session_id: envelope.session_id,
        state: s.state(),
        cycle: s.cycle(),
        completed_cycles: s.reports().len(),
        delta_e: s.delta_e(),
        sigma_scale: s.sigma_scale(),
        config: s.config().clone(),
        reference: s.reference().coords().to_vec(),
        reference_raw: s.reference_raw(),
        pending: s.pending().cloned().collect(),
        certificate: s.certificate().ok().cloned(),
        last_report: s.last_report().cloned(),
        history: s.history().to_vec(),
    }))
}

async fn get_suggestion(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<SuggestionResponse>> {
    let handle = store.get(&id)?;
    let envelope = handle.lock().await;
    let response = match envelope.session.next_suggestion() {
        Ok(Next::Suggest(suggestion)) => SuggestionResponse::AwaitingMeasurement { suggestion },
        Ok(Next::CycleReady) => SuggestionResponse::CycleReady,
        Err(EngineError::SessionFinished) => SuggestionResponse::Finished,
        Err(e) => return Err(e.into()),
    };
    Ok(Json(response))
}

async fn post_measurement(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Ack>> {
    store.get(&id)?;
    let measurement: Measurement = parse(&body)?;
    let ack = store
        .update(&id, |s| {
            s.ingest_measurement(measurement)?;
            Ok(Ack {
                status: s.state(),
                cycle: s.cycle(),
                remaining: s.pending().count(),
            })
        })
        .await?;
    Ok(Json(ack))
}

async fn advance(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<CycleReport>> {
    let report = store.update(&id, |s| s.advance_cycle()).await?;
    tracing::info!(session_id = %id, k = report.k, changed = report.reference_changed, "cycle advanced");
    Ok(Json(report))
}
