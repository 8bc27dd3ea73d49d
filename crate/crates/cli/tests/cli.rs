use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use axum::body::{to_bytes, Body};
use axum::http::{header, Request};
use serde_json::Value;
use tower::ServiceExt;

use restruct_core::dom::{parse, Document, NodeData};
use restruct_core::pipeline::TransformResult;
use restruct_service::{router, ServiceConfig};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn restruct(args: &[&str], stdin: Option<&[u8]>, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_restruct"));
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    for var in ["RESTRUCT_API_KEY", "RESTRUCT_BASE_URL", "RESTRUCT_MODEL", "RESTRUCT_EMBED_MODEL", "RESTRUCT_PORT"] {
        cmd.env_remove(var);
    }
    cmd.envs(env.iter().copied());
    let mut child = cmd.spawn().unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or_default()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn text_nodes(doc: &Document) -> Vec<String> {
    let mut texts: Vec<String> = doc
        .descendants(doc.root())
        .filter_map(|id| match &doc.node(id).data {
            NodeData::Text(t) => Some(t.clone()),
            _ => None,
        })
        .collect();
    texts.sort();
    texts
}

/// Sorted key paths of a JSON value, with array elements merged.
fn shape(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let path = format!("{prefix}.{k}");
                out.push(path.clone());
                shape(v, &path, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|i| shape(i, &format!("{prefix}[]"), out)),
        _ => {}
    }
    out.sort();
    out.dedup();
}

fn keys(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    shape(v, "", &mut out);
    out
}

fn service_json(path: &str, body: Value) -> Value {
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let req = Request::post(path)
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let resp = router(ServiceConfig::default()).oneshot(req).await.unwrap();
        serde_json::from_slice(&to_bytes(resp.into_body(), usize::MAX).await.unwrap()).unwrap()
    })
}

#[test]
fn audit_json_counts_fixture() {
    let out = restruct(&["audit", fixture("mini-shop.html").to_str().unwrap(), "--format", "json"], None, &[]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["instances"], 9);
    assert_eq!(report["distinct_rules"], 7);
}

#[test]
fn fail_on_violations_gates() {
    let shop = fixture("mini-shop.html");
    let bakery = fixture("conformant-bakery.html");
    assert_eq!(code(&restruct(&["audit", shop.to_str().unwrap(), "--fail-on-violations"], None, &[])), 1);
    assert_eq!(code(&restruct(&["audit", bakery.to_str().unwrap(), "--fail-on-violations"], None, &[])), 0);
}

#[test]
fn stdin_is_read_for_dash() {
    let html = std::fs::read(fixture("mini-shop.html")).unwrap();
    let out = restruct(&["audit", "-", "--format", "json"], Some(&html), &[]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["instances"], 9);

    let out = restruct(&["regenerate", "-"], Some(&html), &[]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("<!DOCTYPE html>"));
}

#[test]
fn reorganize_keeps_text_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let (html_out, report) = (dir.path().join("out.html"), dir.path().join("r.json"));
    let input = fixture("mini-shop.html");
    let out = restruct(
        &[
            "reorganize",
            input.to_str().unwrap(),
            "--provider",
            "offline",
            "--out",
            html_out.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ],
        None,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let original = parse(&std::fs::read_to_string(&input).unwrap());
    let written = std::fs::read_to_string(&html_out).unwrap();
    assert_eq!(text_nodes(&parse(&written)), text_nodes(&original));

    let result: TransformResult = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(result.html, written);
    assert!(result.similarity.pass);
    assert!(result.audit_after.instance_count < result.audit_before.instance_count);
}

#[test]
fn json_output_matches_service_schema() {
    let input = fixture("mini-shop.html");
    let html = std::fs::read_to_string(&input).unwrap();
    for mode in ["regenerate", "reorganize"] {
        let cli = json(&restruct(&[mode, input.to_str().unwrap(), "--format", "json"], None, &[]));
        let service = service_json("/v1/transform", serde_json::json!({ "html": html, "mode": mode }));
        assert_eq!(keys(&cli), keys(&service), "{mode}");
        assert_eq!(cli, service, "{mode}");
    }
    let cli = json(&restruct(&["audit", input.to_str().unwrap(), "--format", "json"], None, &[]));
    let service = service_json("/v1/audit", serde_json::json!({ "html": html }));
    assert_eq!(cli, service);

    let failed = restruct(&["regenerate", input.to_str().unwrap(), "--threshold", "1", "--format", "json"], None, &[]);
    assert_eq!(code(&failed), 1);
    let body = json(&failed);
    assert_eq!(body["attempts"], 1);
    assert!(body["best_score"].as_f64().unwrap() < 1.0);
}

#[test]
fn compare_identity_is_perfect() {
    let a = fixture("blog-article.html");
    let out = restruct(&["compare", a.to_str().unwrap(), a.to_str().unwrap(), "--format", "json"], None, &[]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["similarity"]["score"], 1.0);
    assert_eq!(report["audit_diff"]["total_delta"], 0);
    assert_eq!(report["similarity"]["missing_anchors"], Value::Array(vec![]));
}

#[test]
fn compare_reports_missing_links_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.html"), dir.path().join("b.html"));
    std::fs::write(&a, "<main><h1>News</h1><p>river flood warning</p><a href='/more'>More</a></main>").unwrap();
    std::fs::write(&b, "<main><h1>Sport</h1><p>football cup final</p></main>").unwrap();
    let out = restruct(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--format", "json"], None, &[]);
    assert_eq!(code(&out), 1);
    let report = json(&out);
    assert_eq!(report["similarity"]["pass"], false);
    assert_eq!(report["similarity"]["missing_anchors"][0]["href"], "/more");
    assert_eq!(report["similarity"]["missing_anchors"][0]["text"], "More");
}

#[test]
fn usage_and_runtime_errors() {
    let shop = fixture("mini-shop.html");
    let shop = shop.to_str().unwrap();
    for args in [
        vec!["audit"],
        vec!["transmogrify", shop],
        vec!["audit", shop, "--bogus"],
        vec!["audit", shop, "--format", "yaml"],
        vec!["regenerate", shop, "--provider", "cloud"],
        vec!["regenerate", shop, "--threshold", "1.5"],
        vec!["reorganize", shop, "--attempts", "0"],
        vec!["reorganize", shop, "--budget", "5"],
        vec!["compare", "-", "-"],
        vec!["serve", "--port", "0"],
    ] {
        let out = restruct(&args, None, &[]);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?}");
    }
    assert_eq!(code(&restruct(&["audit", shop], None, &[("RESTRUCT_PORT", "x")])), 2);
    assert_eq!(code(&restruct(&["--help"], None, &[])), 0);

    let missing = restruct(&["audit", "/nonexistent/page.html"], None, &[]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/page.html"));
}

#[test]
fn provider_errors_exit_one() {
    let shop = fixture("mini-shop.html");
    let out = restruct(
        &["reorganize", shop.to_str().unwrap()],
        None,
        &[("RESTRUCT_API_KEY", "k"), ("RESTRUCT_BASE_URL", "http://127.0.0.1:9/v1")],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = restruct(&["regenerate", shop.to_str().unwrap(), "--provider", "remote"], None, &[]);
    assert_eq!(code(&out), 1);
}

#[test]
fn mock_provider_round_trips() {
    let shop = fixture("mini-shop.html");
    let out = restruct(
        &["regenerate", shop.to_str().unwrap(), "--provider", "mock", "--budget", "400", "--format", "json"],
        None,
        &[],
    );
    assert_eq!(code(&out), 0);
    let result = json(&out);
    assert_eq!(result["similarity"]["score"], 1.0);
    assert_eq!(result["similarity"]["provider"], "lexical");
}
