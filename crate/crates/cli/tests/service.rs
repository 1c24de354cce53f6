use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use contractcheck_cli::service::{router, AppState, Store, SCHEMA_HEADER};
use contractcheck_cli::{analyze_document, render, Format};
use contractcheck_core::{fixtures, AnalysisOptions};

struct Harness {
    app: Router,
    _dir: tempfile::TempDir,
}

fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let state: Arc<AppState> = AppState::new(Store::open(dir.path()).unwrap(), AnalysisOptions::default());
    Harness { app: router(state), _dir: dir }
}

async fn call(app: &Router, method: Method, uri: &str, body: &str) -> (StatusCode, String) {
    let request = Request::builder().method(method).uri(uri).body(Body::from(body.to_string())).unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    assert_eq!(response.headers()[SCHEMA_HEADER], "1", "{uri}");
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

#[tokio::test]
async fn health_and_library() {
    let h = harness();
    assert_eq!(call(&h.app, Method::GET, "/health", "").await, (StatusCode::OK, "ok".into()));
    let (status, body) = call(&h.app, Method::GET, "/library/blocks", "").await;
    assert_eq!(status, StatusCode::OK);
    let lib: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert!(lib["templates"].as_array().unwrap().len() >= 5);
    assert!(lib["bakery"].is_array());
}

#[tokio::test]
async fn store_round_trip() {
    let h = harness();
    let (status, _) = call(&h.app, Method::PUT, "/contracts/bakery", fixtures::BAKERY).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = call(&h.app, Method::GET, "/contracts/bakery", "").await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, fixtures::BAKERY));
    let (status, _) = call(&h.app, Method::DELETE, "/contracts/bakery", "").await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert_eq!(call(&h.app, Method::GET, "/contracts/bakery", "").await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&h.app, Method::DELETE, "/contracts/bakery", "").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn rejects_bad_documents_and_ids() {
    let h = harness();
    let (status, body) = call(&h.app, Method::PUT, "/contracts/x", "[{\"ID\": 3}]").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(serde_json::from_str::<serde_json::Value>(&body).unwrap()["error"].is_string());
    assert_eq!(call(&h.app, Method::GET, "/contracts/a.b", "").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&h.app, Method::POST, "/contracts/none/analyze", "").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn analyze_matches_cli_bytes() {
    let h = harness();
    call(&h.app, Method::PUT, "/contracts/bakery", fixtures::BAKERY).await;
    let (status, body) = call(&h.app, Method::POST, "/contracts/bakery/analyze", "").await;
    assert_eq!(status, StatusCode::OK);
    let local = analyze_document("bakery", fixtures::BAKERY, &AnalysisOptions::default()).unwrap();
    assert_eq!(body, render(&local, Format::Json));
}

#[tokio::test]
async fn analyze_respects_kinds() {
    let h = harness();
    call(&h.app, Method::PUT, "/contracts/b", fixtures::BAKERY).await;
    let (status, body) = call(&h.app, Method::POST, "/contracts/b/analyze?kinds=II,limitation", "").await;
    assert_eq!(status, StatusCode::OK);
    let report = contractcheck_core::report::from_json(&body).unwrap();
    assert_eq!(report.analyses.len(), 3);
    assert_eq!(call(&h.app, Method::POST, "/contracts/b/analyze?kinds=bogus", "").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn diagrams() {
    let h = harness();
    call(&h.app, Method::PUT, "/contracts/b", fixtures::BAKERY).await;
    let (status, body) = call(&h.app, Method::GET, "/contracts/b/diagram/execution", "").await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.starts_with("sequenceDiagram"));
    let (status, witness) = call(&h.app, Method::GET, "/contracts/b/diagram/limitation__Claim2", "").await;
    assert_eq!(status, StatusCode::OK);
    assert!(witness.contains("Claim2"), "{witness}");
    assert_eq!(call(&h.app, Method::GET, "/contracts/b/diagram/I__TransferClaim", "").await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&h.app, Method::GET, "/contracts/b/diagram/nothing", "").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_analysis_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let slow = std::env::temp_dir().join(format!("contractcheck-slow-{}.sh", std::process::id()));
    std::fs::write(&slow, "#!/bin/sh\nsleep 1\nexec z3 \"$@\"\n").unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&slow, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let mut options = AnalysisOptions::default();
    options.solver = options.solver.with_executable(&slow);
    options.kinds = vec![contractcheck_core::encoder::AnalysisKind::ContractExecutability];
    let app = router(AppState::new(Store::open(dir.path()).unwrap(), options));
    call(&app, Method::PUT, "/contracts/b", fixtures::BAKERY).await;
    let first = tokio::spawn({
        let app = app.clone();
        async move { call(&app, Method::POST, "/contracts/b/analyze", "").await.0 }
    });
    tokio::time::sleep(std::time::Duration::from_millis(300)).await;
    let second = call(&app, Method::POST, "/contracts/b/analyze", "").await.0;
    assert_eq!(second, StatusCode::CONFLICT);
    assert_eq!(first.await.unwrap(), StatusCode::OK);
    let _ = std::fs::remove_file(slow);
}
