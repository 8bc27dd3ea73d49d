use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

use restruct_core::pipeline::ProviderKind;
use restruct_service::{router, ConfigError, ServiceConfig, DEFAULT_PORT};

const MINI_SHOP: &str = include_str!("../../core/fixtures/mini-shop.html");
const BAKERY: &str = include_str!("../../core/fixtures/conformant-bakery.html");
const FOUR_ISSUES: &str =
    "<html><head><title>t</title></head><body><h1>a</h1><h3>b</h3><img src=x></body></html>";

async fn call(config: ServiceConfig, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(config).oneshot(req).await.unwrap();
    let status = resp.status();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, body.to_vec())
}

fn post(path: &str, body: impl Into<Body>) -> Request<Body> {
    Request::builder()
        .method(Method::POST)
        .uri(path)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.into())
        .unwrap()
}

fn post_json(path: &str, body: &Value) -> Request<Body> {
    post(path, body.to_string())
}

async fn call_json(config: ServiceConfig, req: Request<Body>) -> (StatusCode, Value) {
    let (status, bytes) = call(config, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn healthz_says_ok() {
    let req = Request::get("/healthz").body(Body::empty()).unwrap();
    let (status, body) = call(ServiceConfig::default(), req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn audit_counts_violations() {
    let (status, body) = call_json(ServiceConfig::default(), post_json("/v1/audit", &json!({ "html": BAKERY }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["instances"], 0);

    let (status, body) =
        call_json(ServiceConfig::default(), post_json("/v1/audit", &json!({ "html": FOUR_ISSUES }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["instances"], 4);
    let rules: Vec<&str> = body["violations"].as_array().unwrap().iter().map(|v| v["rule"].as_str().unwrap()).collect();
    for rule in ["H-ORDER", "HTML-LANG", "IMG-ALT", "LANDMARK-MAIN"] {
        assert!(rules.contains(&rule), "{rule} missing from {rules:?}");
    }
}

#[tokio::test]
async fn offline_regenerate_is_stable_and_improves() {
    let req = || post_json("/v1/transform", &json!({ "html": MINI_SHOP, "mode": "regenerate" }));
    let (status, first) = call(ServiceConfig::default(), req()).await;
    let (_, second) = call(ServiceConfig::default(), req()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first, second);
    let body: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(body["similarity"]["pass"], true);
    assert_eq!(body["similarity"]["threshold"], 0.9);
    assert_eq!(body["patches"], Value::Null);
    assert!(body["audit_after"]["instances"].as_u64() < body["audit_before"]["instances"].as_u64());
}

#[tokio::test]
async fn reorganize_returns_patches() {
    let req = post_json("/v1/transform", &json!({ "html": MINI_SHOP, "mode": "reorganize", "options": { "provider": "offline" } }));
    let (status, body) = call_json(ServiceConfig::default(), req).await;
    assert_eq!(status, StatusCode::OK);
    let patches = body["patches"].as_array().unwrap();
    assert!(!patches.is_empty());
    assert!(patches.iter().all(|p| p["path"].is_string()));
    assert_eq!(body["attempts"], 1);
}

#[tokio::test]
async fn mock_provider_echoes() {
    let req = post_json(
        "/v1/transform",
        &json!({ "html": MINI_SHOP, "mode": "regenerate", "options": { "provider": "mock", "budget": 400 } }),
    );
    let (status, body) = call_json(ServiceConfig::default(), req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["similarity"]["score"], 1.0);
    assert!(body["chunks"].as_u64().unwrap() > 1);
}

#[tokio::test]
async fn bad_requests_are_400() {
    let cases = [
        json!({ "html": "<p>x</p>", "mode": "fly" }).to_string(),
        json!({ "mode": "regenerate" }).to_string(),
        json!({ "html": "<p>x</p>", "mode": "regenerate", "options": { "threshold": 1.5 } }).to_string(),
        json!({ "html": "<p>x</p>", "mode": "regenerate", "options": { "max_attempts": 0 } }).to_string(),
        json!({ "html": "<p>x</p>", "mode": "regenerate", "options": { "provider": "cloud" } }).to_string(),
        json!({ "html": "<p>x</p>", "mode": "regenerate", "options": { "colour": "red" } }).to_string(),
        "{not json".to_string(),
    ];
    for case in cases {
        let (status, body) = call(ServiceConfig::default(), post("/v1/transform", case.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{case}");
        let body: Value = serde_json::from_slice(&body).unwrap();
        assert!(body["error"].is_string());
    }
    let (status, _) = call(ServiceConfig::default(), post("/v1/audit", "[]")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversize_bodies_are_413() {
    let config = ServiceConfig { max_body_bytes: 1024, ..ServiceConfig::default() };
    let html = "x".repeat(4096);
    let (status, _) = call(config.clone(), post_json("/v1/audit", &json!({ "html": html }))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    let (status, _) = call(config, post_json("/v1/audit", &json!({ "html": "<p>x</p>" }))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn gate_failure_is_422_with_best_score() {
    let req = post_json(
        "/v1/transform",
        &json!({ "html": MINI_SHOP, "mode": "regenerate", "options": { "threshold": 1.0 } }),
    );
    let (status, body) = call_json(ServiceConfig::default(), req).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let best = body["best_score"].as_f64().unwrap();
    assert!(best > 0.9 && best < 1.0, "{best}");
    assert_eq!(body["attempts"], 1);
    assert_eq!(body["threshold"], 1.0);
}

#[tokio::test]
async fn provider_failures_are_502() {
    let mut config = ServiceConfig::default();
    config.provider.base_url = "http://127.0.0.1:9".into();
    config.provider.api_key = Some("test-key".into());
    config.provider.timeout = std::time::Duration::from_secs(5);
    let req = post_json("/v1/transform", &json!({ "html": BAKERY, "mode": "reorganize", "options": { "provider": "remote" } }));
    let (status, body) = call_json(config, req).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert!(body["error"].is_string());

    // Remote without a key cannot be constructed.
    let req = post_json("/v1/transform", &json!({ "html": BAKERY, "mode": "regenerate", "options": { "provider": "remote" } }));
    let (status, _) = call_json(ServiceConfig::default(), req).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
}

#[tokio::test]
async fn cors_allows_only_the_configured_origin() {
    let origin = "chrome-extension://abcdefghijklmnop";
    let config = ServiceConfig { allowed_origin: Some(origin.into()), ..ServiceConfig::default() };
    let preflight = |from: &str| {
        Request::builder()
            .method(Method::OPTIONS)
            .uri("/v1/transform")
            .header(header::ORIGIN, from)
            .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
            .header(header::ACCESS_CONTROL_REQUEST_HEADERS, "content-type")
            .body(Body::empty())
            .unwrap()
    };
    let resp = router(config.clone()).oneshot(preflight(origin)).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], origin);

    let resp = router(config).oneshot(preflight("https://evil.example")).await.unwrap();
    assert!(resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());

    let resp = router(ServiceConfig::default()).oneshot(preflight(origin)).await.unwrap();
    assert!(resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}

#[test]
fn config_reads_environment() {
    let env = |pairs: &'static [(&'static str, &'static str)]| {
        move |k: &str| pairs.iter().find(|(n, _)| *n == k).map(|(_, v)| v.to_string())
    };
    let plain = ServiceConfig::from_lookup(env(&[])).unwrap();
    assert_eq!(plain.port, DEFAULT_PORT);
    assert_eq!(plain.default_provider, ProviderKind::Offline);
    assert_eq!(plain, ServiceConfig::default());

    let full = ServiceConfig::from_lookup(env(&[
        ("RESTRUCT_API_KEY", "sk-1"),
        ("RESTRUCT_BASE_URL", "http://localhost:1234/v1"),
        ("RESTRUCT_MODEL", "local-model"),
        ("RESTRUCT_EMBED_MODEL", "embed-small"),
        ("RESTRUCT_PORT", "9000"),
        ("RESTRUCT_ALLOWED_ORIGIN", "moz-extension://x"),
    ]))
    .unwrap();
    assert_eq!(full.port, 9000);
    assert_eq!(full.default_provider, ProviderKind::Remote);
    assert_eq!(full.provider.api_key.as_deref(), Some("sk-1"));
    assert_eq!(full.provider.base_url, "http://localhost:1234/v1");
    assert_eq!(full.provider.embed_model.as_deref(), Some("embed-small"));
    assert_eq!(full.params.model, "local-model");
    assert_eq!(full.allowed_origin.as_deref(), Some("moz-extension://x"));

    let empty_key = ServiceConfig::from_lookup(env(&[("RESTRUCT_API_KEY", "  ")])).unwrap();
    assert_eq!(empty_key.default_provider, ProviderKind::Offline);

    assert!(matches!(
        ServiceConfig::from_lookup(env(&[("RESTRUCT_PORT", "0")])),
        Err(ConfigError::Port { .. })
    ));
    assert!(matches!(
        ServiceConfig::from_lookup(env(&[("RESTRUCT_PORT", "http")])),
        Err(ConfigError::Port { .. })
    ));
}
