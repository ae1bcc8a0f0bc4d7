use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use uitrim::evaluation::TokenCounter;
use uitrim::runtime::service::{router, ServiceState};
use uitrim::runtime::LoadedLibrary;

fn fixture(rel: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)).unwrap()
}

async fn call(app: axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn state_with(text: &str) -> std::sync::Arc<ServiceState> {
    ServiceState::new(LoadedLibrary::from_text(text, None).unwrap(), TokenCounter::Default)
}

#[tokio::test]
async fn healthz_reports_library() {
    let state = state_with("");
    let id = state.library().id.clone();
    let (status, body) = call(router(state), "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["library_id"], id);
    assert_eq!(body["programs"], 0);
}

#[tokio::test]
async fn empty_library_is_identity() {
    let doc = fixture("trees/settings_screen.tree");
    let (status, body) = call(router(state_with("")), "POST", "/transform", Some(json!({"v": 1, "document": doc}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["tokens_before"], body["tokens_after"]);
    assert_eq!(body["reduction"], 0.0);
}

#[tokio::test]
async fn bundled_library_shrinks_settings_screen() {
    let state = state_with(&fixture("library.uitrim"));
    let id = state.library().id.clone();
    let doc = fixture("trees/settings_screen.tree");
    let req = json!({"v": 1, "document": doc, "library_id": id, "render": "hierarchical"});
    let (status, body) = call(router(state), "POST", "/transform", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["reduction"].as_f64().unwrap() >= 0.40, "{body}");
    assert!(body["tokens_after"].as_u64() < body["tokens_before"].as_u64());
}

#[tokio::test]
async fn error_statuses() {
    let app = router(state_with(""));
    let doc = fixture("trees/bill_amount.tree");
    let cases = [
        (json!({"v": 1, "document": "<<<"}), StatusCode::BAD_REQUEST, "MalformedDocument"),
        (json!({"v": 2, "document": doc}), StatusCode::BAD_REQUEST, "UnsupportedVersion"),
        (json!({"v": 1, "document": doc, "extra": 1}), StatusCode::BAD_REQUEST, "BadRequest"),
        (json!({"v": 1, "document": doc, "render": "leaf"}), StatusCode::BAD_REQUEST, "BadRequest"),
        (json!({"v": 1, "document": doc, "library_id": "nope"}), StatusCode::CONFLICT, "LibraryMismatch"),
    ];
    for (req, want, kind) in cases {
        let (status, body) = call(app.clone(), "POST", "/transform", Some(req.clone())).await;
        assert_eq!(status, want, "{req} -> {body}");
        assert_eq!(body["error"], kind, "{req} -> {body}");
    }
}

#[tokio::test]
async fn reload_swaps_and_keeps_old_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lib.uitrim");
    std::fs::write(&path, "").unwrap();
    let state = ServiceState::new(LoadedLibrary::load(&path).unwrap(), TokenCounter::Default);
    let app = router(state.clone());

    let lib = fixture("library.uitrim");
    std::fs::write(&path, &lib).unwrap();
    let (status, body) = call(app.clone(), "POST", "/reload", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["library_id"], uitrim::runtime::library_id(&lib));
    assert_eq!(state.library().programs.len(), 1);

    std::fs::write(&path, "program broken {").unwrap();
    let (status, body) = call(app, "POST", "/reload", None).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(body["error"], "LibraryLoadFailure");
    assert_eq!(state.library().id, uitrim::runtime::library_id(&lib));
}
