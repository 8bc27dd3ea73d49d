//! Local HTTP front end for the restruct pipelines and auditor.
//!
//! Routes: `GET /healthz`, `POST /v1/transform`, `POST /v1/audit`.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use restruct_core::audit::run_audit;
use restruct_core::dom::parse_bytes;
use restruct_core::llm::{ModelParams, Mode};
use restruct_core::pipeline::{
    transform, Backend, ProviderConfig, ProviderKind, TransformError, TransformOptions,
};

pub const DEFAULT_PORT: u16 = 8787;
pub const DEFAULT_MAX_BODY_BYTES: usize = 8 * 1024 * 1024;

pub const ENV_API_KEY: &str = "RESTRUCT_API_KEY";
pub const ENV_BASE_URL: &str = "RESTRUCT_BASE_URL";
pub const ENV_MODEL: &str = "RESTRUCT_MODEL";
pub const ENV_EMBED_MODEL: &str = "RESTRUCT_EMBED_MODEL";
pub const ENV_PORT: &str = "RESTRUCT_PORT";
pub const ENV_ALLOWED_ORIGIN: &str = "RESTRUCT_ALLOWED_ORIGIN";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{name}={value:?} is not a port in 1..=65535")]
    Port { name: &'static str, value: String },
    #[error("{name}={value:?} is not a valid origin")]
    Origin { name: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub port: u16,
    pub provider: ProviderConfig,
    /// Provider used when a request names none.
    pub default_provider: ProviderKind,
    pub params: ModelParams,
    pub max_body_bytes: usize,
    /// Origin allowed to call the service from a browser, e.g. an extension.
    pub allowed_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: DEFAULT_PORT,
            provider: ProviderConfig::default(),
            default_provider: ProviderKind::Offline,
            params: ModelParams::default(),
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            allowed_origin: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Build from `RESTRUCT_*` variables. The remote provider becomes the
    /// default only when an API key is present.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |k: &str| lookup(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        let mut config = ServiceConfig::default();
        if let Some(value) = get(ENV_PORT) {
            config.port = parse_port(&value).ok_or(ConfigError::Port { name: ENV_PORT, value })?;
        }
        if let Some(url) = get(ENV_BASE_URL) {
            config.provider.base_url = url;
        }
        config.provider.api_key = get(ENV_API_KEY);
        config.provider.embed_model = get(ENV_EMBED_MODEL);
        if let Some(model) = get(ENV_MODEL) {
            config.params.model = model;
        }
        if config.provider.api_key.is_some() {
            config.default_provider = ProviderKind::Remote;
        }
        if let Some(origin) = get(ENV_ALLOWED_ORIGIN) {
            if HeaderValue::from_str(&origin).is_err() {
                return Err(ConfigError::Origin { name: ENV_ALLOWED_ORIGIN, value: origin });
            }
            config.allowed_origin = Some(origin);
        }
        Ok(config)
    }

    pub fn options(&self, mode: Mode, provider: Option<ProviderKind>) -> TransformOptions {
        let mut opts = TransformOptions::new(mode, provider.unwrap_or(self.default_provider));
        opts.params = self.params.clone();
        opts
    }
}

pub fn parse_port(value: &str) -> Option<u16> {
    value.parse::<u16>().ok().filter(|p| *p != 0)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditRequest {
    html: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestOptions {
    provider: Option<ProviderKind>,
    threshold: Option<f64>,
    budget: Option<usize>,
    max_attempts: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformRequest {
    html: String,
    mode: Mode,
    #[serde(default)]
    options: Option<RequestOptions>,
}

fn error_response(status: StatusCode, body: serde_json::Value) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
}

fn bad_request(message: impl std::fmt::Display) -> Response {
    error_response(StatusCode::BAD_REQUEST, json!({ "error": message.to_string() }))
}

fn json_ok(body: String) -> Response {
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// HTTP status for a pipeline failure.
pub fn status_for(error: &TransformError) -> StatusCode {
    match error {
        TransformError::InvalidOptions(_) | TransformError::Chunk(_) => StatusCode::BAD_REQUEST,
        TransformError::GateFailed { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        TransformError::Provider { .. } | TransformError::Embedding(_) | TransformError::Unavailable(_) => {
            StatusCode::BAD_GATEWAY
        }
    }
}

/// JSON body describing a pipeline failure; gate failures carry the best
/// score reached and the number of attempts.
pub fn error_body(error: &TransformError) -> serde_json::Value {
    match error {
        TransformError::GateFailed { best_score, threshold, attempts, .. } => json!({
            "error": error.to_string(),
            "best_score": best_score,
            "threshold": threshold,
            "attempts": attempts,
        }),
        other => json!({ "error": other.to_string() }),
    }
}

async fn healthz() -> &'static str {
    "ok"
}

async fn audit(body: Bytes) -> Response {
    let request: AuditRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(e),
    };
    let doc = match parse_bytes(request.html.as_bytes()) {
        Ok(d) => d,
        Err(e) => return bad_request(e),
    };
    json_ok(serde_json::to_string(&run_audit(&doc)).expect("report serializes"))
}

async fn transform_handler(State(config): State<Arc<ServiceConfig>>, body: Bytes) -> Response {
    let request: TransformRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(e),
    };
    let given = request.options.unwrap_or_default();
    let mut opts = config.options(request.mode, given.provider);
    if let Some(t) = given.threshold {
        opts.threshold = t;
    }
    if let Some(b) = given.budget {
        opts.budget = b;
    }
    if let Some(a) = given.max_attempts {
        opts.max_attempts = a;
    }
    if let Err(e) = opts.validate() {
        return bad_request(e);
    }
    // Provider calls block; keep them off the async workers.
    let outcome = tokio::task::spawn_blocking(move || {
        let doc = parse_bytes(request.html.as_bytes()).map_err(|e| TransformError::InvalidOptions(e.to_string()))?;
        let backend = Backend::for_provider(opts.provider, &config.provider)?;
        transform(&doc, &opts, &backend)
    })
    .await;
    match outcome {
        Ok(Ok(result)) => json_ok(serde_json::to_string(&result).expect("result serializes")),
        Ok(Err(e)) => {
            tracing::warn!(error = %e, "transform failed");
            error_response(status_for(&e), error_body(&e))
        }
        Err(join) => error_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            json!({ "error": format!("pipeline task failed: {join}") }),
        ),
    }
}

pub fn router(config: ServiceConfig) -> Router {
    let limit = config.max_body_bytes;
    let cors = config.allowed_origin.as_deref().map(|origin| {
        CorsLayer::new()
            .allow_origin(AllowOrigin::list([HeaderValue::from_str(origin).expect("origin validated")]))
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE])
            .max_age(Duration::from_secs(600))
    });
    let router = Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/audit", post(audit))
        .route("/v1/transform", post(transform_handler))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(Arc::new(config));
    match cors {
        Some(layer) => router.layer(layer),
        None => router,
    }
}

/// Serve on localhost until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let addr = SocketAddr::from(([127, 0, 0, 1], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, provider = %config.default_provider, "listening");
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
