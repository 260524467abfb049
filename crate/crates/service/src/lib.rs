//! HTTP API over traversal sessions, manifest generation and validation, with
//! optional static file serving for a browser front end.

mod api;
mod store;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::Request;
use axum::http::HeaderValue;
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use shepherd_core::validators::DEFAULT_TIMEOUT_MS;
use shepherd_core::{Clock, DecisionTree, SystemClock};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

pub use api::ApiError;
pub use store::{SessionStore, StoreError};

pub const DEFAULT_TTL_SECS: i64 = 3600;
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
/// Distinct URLs a single validate request may check live.
pub const LIVE_URL_CAP: usize = 16;

/// Which browser origins may call the API.
#[derive(Debug, Clone, Default)]
pub enum Cors {
    #[default]
    Any,
    Origins(Vec<HeaderValue>),
    Disabled,
}

pub struct ServiceConfig {
    /// The tree every session walks. `None` makes session creation answer 503.
    pub tree: Option<Arc<DecisionTree>>,
    pub clock: Arc<dyn Clock>,
    pub ttl: chrono::Duration,
    pub cors: Cors,
    pub static_dir: Option<PathBuf>,
    pub link_timeout_ms: u64,
}

impl ServiceConfig {
    pub fn new(tree: Option<DecisionTree>) -> Self {
        Self {
            tree: tree.map(Arc::new),
            clock: Arc::new(SystemClock),
            ttl: chrono::Duration::seconds(DEFAULT_TTL_SECS),
            cors: Cors::default(),
            static_dir: None,
            link_timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

#[derive(Clone)]
pub(crate) struct AppState {
    tree: Option<Arc<DecisionTree>>,
    clock: Arc<dyn Clock>,
    store: Arc<SessionStore>,
    link_timeout_ms: u64,
}

pub fn router(config: ServiceConfig) -> Router {
    let state = AppState {
        tree: config.tree,
        clock: config.clock,
        store: Arc::new(SessionStore::new(config.ttl)),
        link_timeout_ms: config.link_timeout_ms,
    };
    let mut app = Router::new()
        .route("/api/sessions", post(api::create_session))
        .route("/api/sessions/{id}", get(api::get_session))
        .route("/api/sessions/{id}/answer", post(api::answer))
        .route("/api/sessions/{id}/undo", post(api::undo))
        .route("/api/sessions/{id}/fields", axum::routing::put(api::put_fields))
        .route("/api/sessions/{id}/manifest", get(api::manifest))
        .route("/api/validate", post(api::validate))
        .route("/api/tree", get(api::tree))
        .with_state(state);
    if let Some(dir) = config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    let cors = match config.cors {
        Cors::Any => Some(CorsLayer::new().allow_origin(Any)),
        Cors::Origins(list) => Some(CorsLayer::new().allow_origin(AllowOrigin::list(list))),
        Cors::Disabled => None,
    };
    if let Some(cors) = cors {
        app = app.layer(cors.allow_methods(Any).allow_headers(Any));
    }
    app.layer(middleware::from_fn(log_request))
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!("{} {} {} {}ms", method, path, response.status().as_u16(), started.elapsed().as_millis());
    response
}
