use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use shepherd_core::{canonical_tree, parse_manifest, serialize_manifest, FixedClock};
use shepherd_service::{router, ServiceConfig};
use shepherd_testkit::{Route, StubServer};
use tower::ServiceExt;

fn app_with_clock() -> (Router, Arc<FixedClock>) {
    let clock = Arc::new(FixedClock::parse("2024-05-01T09:00:00Z").unwrap());
    let mut config = ServiceConfig::new(Some(canonical_tree()));
    config.clock = clock.clone();
    config.ttl = chrono::Duration::seconds(600);
    (router(config), clock)
}

fn app() -> Router {
    app_with_clock().0
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call_raw(app, method, uri, body.map(|b| b.to_string())).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

async fn call_raw(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

async fn answer(app: &Router, id: &str, answer: &str) -> (StatusCode, Value) {
    call(app, Method::POST, &format!("/api/sessions/{id}/answer"), Some(json!({ "answer_id": answer }))).await
}

#[tokio::test]
async fn create_returns_root_prompt_and_distinct_ids() {
    let app = app();
    let (status, body) = call(&app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["prompt"]["kind"], "question");
    assert_eq!(body["prompt"]["node_id"], "Q_SHAREABLE");
    assert_eq!(body["prompt"]["options"].as_array().unwrap().len(), 2);
    let other = new_session(&app).await;
    assert_ne!(body["session_id"].as_str().unwrap(), other);
}

#[tokio::test]
async fn no_tree_means_unavailable() {
    let app = router(ServiceConfig::new(None));
    let (status, body) = call(&app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert!(body["code"].is_string() && body["message"].is_string());
}

#[tokio::test]
async fn session_snapshot_and_navigation() {
    let app = app();
    let id = new_session(&app).await;
    let (status, body) = call(&app, Method::GET, &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["path"], json!([]));
    assert_eq!(body["complete"], false);

    let (status, body) = call(&app, Method::POST, &format!("/api/sessions/{id}/undo"), None).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("E_AT_ROOT")));

    let (status, body) = answer(&app, &id, "yes").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["prompt"]["node_id"], "Q_RAW_PUBLIC");
    assert_eq!(body["path"], json!([{ "question": "Q_SHAREABLE", "answer": "yes" }]));

    let (status, body) = answer(&app, &id, "maybe").await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("E_UNKNOWN_ANSWER")));

    let (status, body) = call(&app, Method::POST, &format!("/api/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["prompt"]["node_id"], "Q_SHAREABLE");
}

#[tokio::test]
async fn not_retrievable_leaf_and_field_rules() {
    let app = app();
    let id = new_session(&app).await;
    answer(&app, &id, "no").await;
    let (_, body) = answer(&app, &id, "no").await;
    assert_eq!(body["prompt"]["kind"], "leaf");
    assert_eq!(body["prompt"]["outcome"], "L_NOT_RETRIEVABLE");
    let fields = body["prompt"]["fields"].as_array().unwrap();
    assert!(fields.iter().any(|f| f["id"] == "reason" && f["required"] == true));

    let (status, body) = answer(&app, &id, "yes").await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("E_AT_LEAF")));

    let uri = format!("/api/sessions/{id}/fields");
    let (status, body) = call(&app, Method::PUT, &uri, Some(json!({ "reason": "" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["errors"][0]["field"], "reason");

    let (status, body) = call(&app, Method::GET, &format!("/api/sessions/{id}/manifest"), None).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("E_INCOMPLETE")));
    assert_eq!(body["missing"], json!(["reason"]));

    // All-or-nothing: the good entry is not applied either.
    let (status, body) =
        call(&app, Method::PUT, &uri, Some(json!({ "reason": "patient consent", "bogus": "x", "contact": 5 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["errors"].as_array().unwrap().len(), 2);
    let (_, snap) = call(&app, Method::GET, &format!("/api/sessions/{id}"), None).await;
    assert_eq!(snap["complete"], false);

    let (status, body) = call(&app, Method::PUT, &uri, Some(json!({ "reason": "patient consent forbids release" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "complete": true, "missing": [] }));
}

#[tokio::test]
async fn fields_before_leaf_conflict() {
    let app = app();
    let id = new_session(&app).await;
    let (status, body) = call(&app, Method::PUT, &format!("/api/sessions/{id}/fields"), Some(json!({"reason": "x"}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("E_NOT_AT_LEAF")));
}

#[tokio::test]
async fn pre_link_manifest_and_validation() {
    let app = app();
    let id = new_session(&app).await;
    for a in ["yes", "no", "yes"] {
        answer(&app, &id, a).await;
    }
    let uri = format!("/api/sessions/{id}/fields");
    let (status, _) = call(&app, Method::PUT, &uri, Some(json!({ "preprocessed_url": "https://example.org/d.csv" }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, text) = call_raw(&app, Method::GET, &format!("/api/sessions/{id}/manifest"), None).await;
    assert_eq!(status, StatusCode::OK);
    let manifest = parse_manifest(&text).unwrap();
    assert_eq!(serialize_manifest(&manifest), text);
    assert_eq!(manifest.outcome, "L_PRE_LINK");
    assert_eq!(manifest.created_utc, "2024-05-01T09:00:00Z");
    assert!(manifest.fields.contains_key("preprocessed_url"));

    let (status, report) = call_raw(&app, Method::POST, "/api/validate", Some(text.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let report: Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["clean"], true);

    let mut broken = manifest.clone();
    broken.path[1].answer = "yes".into();
    let (_, report) = call_raw(&app, Method::POST, "/api/validate", Some(serialize_manifest(&broken))).await;
    assert!(report.contains("E_PATH_MISMATCH"));

    let (status, body) = call(&app, Method::POST, "/api/validate", Some(json!({"nope": 1}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("E_MALFORMED")));

    let (_, report) = call(&app, Method::POST, "/api/validate?checksums=true", Some(serde_json::from_str(&text).unwrap())).await;
    assert_eq!(report["clean"], true);
    assert_eq!(report["findings"][0]["code"], "I_CHECKSUMS_DISABLED");
}

#[tokio::test]
async fn live_validation_over_api() {
    let server = StubServer::start(vec![("/ok", Route::Status(200))]);
    let app = app();
    let id = new_session(&app).await;
    for a in ["yes", "no", "yes"] {
        answer(&app, &id, a).await;
    }
    let uri = format!("/api/sessions/{id}/fields");
    call(&app, Method::PUT, &uri, Some(json!({ "preprocessed_url": server.url("/missing") }))).await;
    let (_, text) = call_raw(&app, Method::GET, &format!("/api/sessions/{id}/manifest"), None).await;
    let (_, report) = call_raw(&app, Method::POST, "/api/validate?live=true", Some(text)).await;
    assert!(report.contains("E_LINK_DEAD"));
}

#[tokio::test]
async fn tree_endpoint_counts() {
    let (status, tree) = call(&app(), Method::GET, "/api/tree", None).await;
    assert_eq!(status, StatusCode::OK);
    let nodes = tree["nodes"].as_array().unwrap();
    assert_eq!(nodes.iter().filter(|n| n["kind"] == "question").count(), 8);
    assert_eq!(nodes.iter().filter(|n| n["kind"] == "leaf").count(), 10);
}

#[tokio::test]
async fn unknown_and_expired_sessions() {
    let (app, clock) = app_with_clock();
    let (status, body) = call(&app, Method::GET, "/api/sessions/0123", None).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("E_SESSION_NOT_FOUND")));

    let id = new_session(&app).await;
    clock.advance(chrono::Duration::seconds(601));
    let (status, body) = call(&app, Method::GET, &format!("/api/sessions/{id}"), None).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("E_SESSION_EXPIRED")));
}

#[tokio::test]
async fn reads_are_idempotent() {
    let app = app();
    let id = new_session(&app).await;
    answer(&app, &id, "no").await;
    let uri = format!("/api/sessions/{id}");
    let (_, first) = call(&app, Method::GET, &uri, None).await;
    for _ in 0..5 {
        assert_eq!(call(&app, Method::GET, &uri, None).await.1, first);
    }
}

#[tokio::test]
async fn interleaved_sessions_stay_isolated() {
    let app = app();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let ids = [new_session(&app).await, new_session(&app).await];
        // Each session keeps a shadow path; after every step both must match.
        let mut shadows: [Vec<String>; 2] = [vec![], vec![]];
        for _ in 0..12 {
            let k = rng.random_range(0..2);
            let (_, snap) = call(&app, Method::GET, &format!("/api/sessions/{}", ids[k]), None).await;
            let options = snap["prompt"]["options"].as_array().cloned().unwrap_or_default();
            if options.is_empty() || (rng.random_bool(0.25) && !shadows[k].is_empty()) {
                let (status, _) = call(&app, Method::POST, &format!("/api/sessions/{}/undo", ids[k]), None).await;
                if status == StatusCode::OK {
                    shadows[k].pop();
                }
            } else {
                let pick = options[rng.random_range(0..options.len())]["id"].as_str().unwrap().to_string();
                assert_eq!(answer(&app, &ids[k], &pick).await.0, StatusCode::OK);
                shadows[k].push(pick);
            }
            for j in 0..2 {
                let (_, snap) = call(&app, Method::GET, &format!("/api/sessions/{}", ids[j]), None).await;
                let answers: Vec<&str> = snap["path"].as_array().unwrap().iter().map(|s| s["answer"].as_str().unwrap()).collect();
                assert_eq!(answers, shadows[j]);
            }
        }
    }
}

#[tokio::test]
async fn serves_static_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<!doctype html><title>questionnaire</title>").unwrap();
    let mut config = ServiceConfig::new(Some(canonical_tree()));
    config.static_dir = Some(dir.path().to_path_buf());
    let app = router(config);
    let (status, body) = call_raw(&app, Method::GET, "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("questionnaire"));
    let (status, _) = call(&app, Method::GET, "/api/tree", None).await;
    assert_eq!(status, StatusCode::OK);
}
