use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use safe_evop::engine::{CycleReport, EvopConfig, EvopSession, Measurement, Next};
use safe_evop_service::{router, SessionEnvelope, SessionStore};

fn wide_box_config() -> Value {
    json!({
        "space": { "lower": [3.0, 70.0], "upper": [6.0, 100.0] },
        "initial_reference": [3.5, 72.0],
        "noise": { "sigma_phi": 0.5, "sigma_g": [5e-4] },
        "delta_e": 0.05,
        "max_cycles": 3
    })
}

fn app(dir: &Path) -> Router {
    router(Arc::new(SessionStore::open(dir).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, config: &Value) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(config.to_string())).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

/// Deterministic stand-in for the plant, in raw units.
fn fake_plant(u: &[f64]) -> (f64, Vec<f64>) {
    let phi = (u[0] - 5.0).powi(2) + 0.01 * (u[1] - 90.0).powi(2);
    let g = 0.05 * u[0] + 0.01 * u[1] - 1.2;
    (phi, vec![g])
}

#[tokio::test]
async fn create_validates_and_issues_distinct_ids() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let a = create(&app, &wide_box_config()).await;
    let b = create(&app, &wide_box_config()).await;
    assert_ne!(a, b);

    let mut bad = wide_box_config();
    bad["delta_e"] = json!(0.0);
    let (status, _) = call(&app, "POST", "/sessions", Some(bad.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some("{".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let mut outside = wide_box_config();
    outside["initial_reference"] = json!([7.0, 72.0]);
    let (status, _) = call(&app, "POST", "/sessions", Some(outside.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for id in ["0b7a0a9e-52f4-4a5e-9a43-3f0f5d3c2a10", "..%2Fetc", "nope"] {
        let (status, _) = call(&app, "GET", &format!("/sessions/{id}/suggestion"), None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        let (status, _) = call(&app, "POST", &format!("/sessions/{id}/advance"), None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
    }
}

#[tokio::test]
async fn suggestion_is_idempotent_until_measured() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, &wide_box_config()).await;
    let uri = format!("/sessions/{id}/suggestion");
    let (status, first) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["status"], "awaiting_measurement");
    assert_eq!(first["suggestion"]["purpose"]["kind"], "reference");
    assert_eq!(first["suggestion"]["u_raw"], json!([3.5, 72.0]));
    let (_, second) = call(&app, "GET", &uri, None).await;
    assert_eq!(first, second);
}

#[tokio::test]
async fn measurement_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, &wide_box_config()).await;
    let uri = format!("/sessions/{id}/measurements");
    let body = |sid: &str, phi: &str| {
        format!(r#"{{"suggestion_id":"{sid}","phi_hat":{phi},"g_hat":[-0.1]}}"#)
    };

    let (status, _) = call(&app, "POST", &uri, Some(body("c1-e7", "1.0"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &uri, Some(body("c1-e1", "NaN"))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", &uri, Some(body("c1-e1", "1e999"))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(
        &app,
        "POST",
        &uri,
        Some(r#"{"suggestion_id":"c1-e1","phi_hat":1.0,"g_hat":[]}"#.into()),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, ack) = call(&app, "POST", &uri, Some(body("c1-e1", "1.0"))).await;
    assert_eq!(status, StatusCode::OK, "{ack}");
    assert_eq!(ack["status"], "awaiting_measurement");
    let (status, _) = call(&app, "POST", &uri, Some(body("c1-e1", "1.0"))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/advance"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

/// Posts every pending measurement of the current cycle through the API,
/// reopening the store from disk before each request.
async fn api_cycle(dir: &Path, id: &str) -> Vec<Measurement> {
    let mut sent = Vec::new();
    loop {
        let (_, next) = call(
            &app(dir),
            "GET",
            &format!("/sessions/{id}/suggestion"),
            None,
        )
        .await;
        if next["status"] != "awaiting_measurement" {
            assert_eq!(next["status"], "cycle_ready");
            return sent;
        }
        let u: Vec<f64> = serde_json::from_value(next["suggestion"]["u_raw"].clone()).unwrap();
        let (phi_hat, g_hat) = fake_plant(&u);
        let m = Measurement {
            suggestion_id: next["suggestion"]["id"].as_str().unwrap().into(),
            phi_hat,
            g_hat,
        };
        let (status, _) = call(
            &app(dir),
            "POST",
            &format!("/sessions/{id}/measurements"),
            Some(serde_json::to_string(&m).unwrap()),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        sent.push(m);
    }
}

#[tokio::test]
async fn api_matches_engine_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let config = wide_box_config();
    let id = create(&app(dir.path()), &config).await;
    let mut engine =
        EvopSession::new(serde_json::from_value::<EvopConfig>(config).unwrap()).unwrap();

    for k in 1..=3 {
        let sent = api_cycle(dir.path(), &id).await;
        for m in sent {
            match engine.next_suggestion().unwrap() {
                Next::Suggest(s) => assert_eq!(s.id, m.suggestion_id),
                Next::CycleReady => panic!("engine expected fewer measurements"),
            }
            engine.ingest_measurement(m).unwrap();
        }
        let (status, report) = call(
            &app(dir.path()),
            "POST",
            &format!("/sessions/{id}/advance"),
            None,
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{report}");
        let report: CycleReport = serde_json::from_value(report).unwrap();
        assert_eq!(report, engine.advance_cycle().unwrap());
        assert_eq!(report.k, k);
    }

    let (_, next) = call(
        &app(dir.path()),
        "GET",
        &format!("/sessions/{id}/suggestion"),
        None,
    )
    .await;
    assert_eq!(next["status"], "finished");
    let (status, view) = call(&app(dir.path()), "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["state"], "finished");
    assert_eq!(view["completed_cycles"], 3);
    assert!(view["certificate"]["per_constraint"][0]["margin"].is_number());
    assert_eq!(
        view["history"].as_array().unwrap().len(),
        engine.history().len()
    );

    let stored: SessionEnvelope =
        serde_json::from_slice(&std::fs::read(dir.path().join(format!("{id}.json"))).unwrap())
            .unwrap();
    assert_eq!(stored.session, engine);
}

#[tokio::test]
async fn acknowledged_values_are_stored_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let id = create(&app(dir.path()), &wide_box_config()).await;
    let phi_hat = 0.1 + 0.2;
    let g_hat = -1.0 / 3.0;
    let m = Measurement {
        suggestion_id: "c1-e1".into(),
        phi_hat,
        g_hat: vec![g_hat],
    };
    let (status, _) = call(
        &app(dir.path()),
        "POST",
        &format!("/sessions/{id}/measurements"),
        Some(serde_json::to_string(&m).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);

    // a fresh process sees exactly the acknowledged numbers
    let store = SessionStore::open(dir.path()).unwrap();
    let handle = store.get(&id).unwrap();
    let envelope = handle.lock().await;
    let data = envelope.session.data();
    assert_eq!(data.phi[0].to_bits(), phi_hat.to_bits());
    assert_eq!(data.g[0][0].to_bits(), g_hat.to_bits());
    assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".tmp")));
}

#[tokio::test]
async fn concurrent_posts_to_one_session_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, &wide_box_config()).await;
    let body = r#"{"suggestion_id":"c1-e1","phi_hat":1.0,"g_hat":[-0.5]}"#;
    let uri = format!("/sessions/{id}/measurements");
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            let uri = uri.clone();
            tokio::spawn(async move { call(&app, "POST", &uri, Some(body.into())).await.0 })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!(ok, 1);
}
