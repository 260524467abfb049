use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use shepherd_core::manifest::ManifestError;
use shepherd_core::report::{Finding, Location};
use shepherd_core::validators::{deep_validate, DeepOptions};
use shepherd_core::{build_manifest, parse_manifest, serialize_manifest, FieldValue, TraversalError, TraversalSession};

use crate::store::StoreError;
use crate::{AppState, LIVE_URL_CAP};

/// A 4xx/5xx answer with body `{code, message, ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    extra: Map<String, Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), extra: Map::new() }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "E_MALFORMED", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = Map::new();
        body.insert("code".into(), self.code.into());
        body.insert("message".into(), self.message.into());
        body.extend(self.extra);
        (self.status, Json(Value::Object(body))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound => Self::new(StatusCode::NOT_FOUND, "E_SESSION_NOT_FOUND", "no such session"),
            StoreError::Expired => Self::new(StatusCode::NOT_FOUND, "E_SESSION_EXPIRED", "session expired; start a new one"),
        }
    }
}

impl From<TraversalError> for ApiError {
    fn from(e: TraversalError) -> Self {
        let status = match e {
            TraversalError::AtLeaf | TraversalError::AtRoot | TraversalError::NotAtLeaf => StatusCode::CONFLICT,
            TraversalError::UnknownAnswer { .. }
            | TraversalError::UnknownField { .. }
            | TraversalError::FieldSyntax { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            TraversalError::InvalidTree(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(format!("invalid request body: {e}")))
}

fn snapshot(session: &TraversalSession) -> Value {
    json!({
        "prompt": session.current_prompt(),
        "path": session.path(),
        "complete": session.is_complete(),
    })
}

fn no_tree() -> ApiError {
    ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "E_NO_TREE", "the server has no tree loaded")
}

pub(crate) async fn create_session(State(app): State<AppState>) -> ApiResult<impl IntoResponse> {
    let tree = app.tree.clone().ok_or_else(no_tree)?;
    let session = TraversalSession::start(tree, app.clock.as_ref())?;
    let prompt = session.current_prompt();
    let id = app.store.create(session, app.clock.now());
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "prompt": prompt }))))
}

pub(crate) async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(app.store.with_session(&id, app.clock.now(), |s| snapshot(s))?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    answer_id: String,
}

pub(crate) async fn answer(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let body: AnswerBody = parse_body(&body)?;
    let result = app.store.with_session(&id, app.clock.now(), |s| s.apply_answer(&body.answer_id).map(|()| snapshot(s)))?;
    Ok(Json(result?))
}

pub(crate) async fn undo(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let result = app.store.with_session(&id, app.clock.now(), |s| s.undo().map(|()| snapshot(s)))?;
    Ok(Json(result?))
}

/// Strings become text values; objects of strings become keyvalue maps.
fn to_field_value(field: &str, value: Value) -> Result<FieldValue, TraversalError> {
    let bad = |message: &str| TraversalError::FieldSyntax { field: field.to_string(), message: message.to_string() };
    match value {
        Value::String(s) => Ok(FieldValue::Text(s)),
        Value::Object(map) => map
            .into_iter()
            .map(|(k, v)| match v {
                Value::String(s) => Ok((k, s)),
                _ => Err(bad("keyvalue entries must be strings")),
            })
            .collect::<Result<BTreeMap<_, _>, _>>()
            .map(FieldValue::Map),
        _ => Err(bad("value must be a string or an object of strings")),
    }
}

fn field_failures(errors: Vec<TraversalError>) -> ApiError {
    let first = ApiError::from(errors[0].clone());
    let list: Vec<Value> = errors
        .iter()
        .map(|e| {
            let field = match e {
                TraversalError::UnknownField { field, .. } | TraversalError::FieldSyntax { field, .. } => Some(field.as_str()),
                _ => None,
            };
            json!({ "field": field, "code": e.code(), "message": e.to_string() })
        })
        .collect();
    let message = if errors.len() == 1 { first.message.clone() } else { format!("{} fields rejected", errors.len()) };
    ApiError { message, ..first }.with("errors", Value::Array(list))
}

pub(crate) async fn put_fields(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let body: Map<String, Value> = parse_body(&body)?;
    let result = app.store.with_session(&id, app.clock.now(), |s| {
        if s.current_leaf().is_none() {
            return Err(ApiError::from(TraversalError::NotAtLeaf));
        }
        let mut entries = Vec::new();
        let mut errors = Vec::new();
        for (field, value) in body {
            match to_field_value(&field, value) {
                Ok(v) => entries.push((field, v)),
                Err(e) => errors.push(e),
            }
        }
        if let Err(mut rejected) = s.set_fields(entries) {
            errors.append(&mut rejected);
        }
        if !errors.is_empty() {
            return Err(field_failures(errors));
        }
        Ok(json!({ "complete": s.is_complete(), "missing": s.missing_fields() }))
    })?;
    Ok(Json(result?))
}

pub(crate) async fn manifest(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let now_clock = app.clock.clone();
    let built = app.store.with_session(&id, app.clock.now(), |s| build_manifest(s, now_clock.as_ref()))?;
    match built {
        Ok(m) => Ok(([(header::CONTENT_TYPE, "application/json")], serialize_manifest(&m)).into_response()),
        Err(ManifestError::Incomplete { missing }) => {
            let e = ManifestError::Incomplete { missing: missing.clone() };
            Err(ApiError::new(StatusCode::CONFLICT, e.code(), e.to_string()).with("missing", json!(missing)))
        }
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string())),
    }
}

#[derive(Deserialize, Default)]
pub(crate) struct ValidateQuery {
    #[serde(default)]
    live: bool,
    #[serde(default)]
    checksums: bool,
}

pub(crate) async fn validate(
    State(app): State<AppState>,
    Query(query): Query<ValidateQuery>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let tree = app.tree.clone().ok_or_else(no_tree)?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::malformed("manifest is not UTF-8"))?;
    let manifest = parse_manifest(text).map_err(|e| ApiError::malformed(e.to_string()))?;
    let options = DeepOptions {
        live: query.live,
        checksums: false,
        timeout_ms: app.link_timeout_ms,
        max_live_urls: Some(LIVE_URL_CAP),
        ..DeepOptions::default()
    };
    let mut report = deep_validate(&manifest, &tree, &options).await;
    if query.checksums {
        report.push(Finding::info(
            "I_CHECKSUMS_DISABLED",
            Location::Tree,
            "file and checksum checks are not available over the API",
        ));
    }
    Ok(Json(serde_json::to_value(&report).expect("report serializes")))
}

pub(crate) async fn tree(State(app): State<AppState>) -> ApiResult<Json<Value>> {
    let tree = app.tree.clone().ok_or_else(no_tree)?;
    Ok(Json(serde_json::to_value(tree.as_ref()).expect("tree serializes")))
}
