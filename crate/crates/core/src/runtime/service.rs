//! JSON-over-HTTP transform service.
//!
//! * `POST /transform` — `{"v":1,"document":"...","library_id"?,"render"?,"seed"?}`
//! * `GET /healthz` — status and the loaded library id
//! * `POST /reload` — re-reads the library file; the old one stays on failure

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{transform_document, LoadedLibrary, RuntimeError};
use crate::evaluation::TokenCounter;
use crate::representations::RenderKind;

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformRequest {
    pub v: u32,
    pub document: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformResponse {
    pub v: u32,
    pub library_id: String,
    pub render: String,
    pub representation: String,
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub reduction: f64,
    pub transform_latency_us: u64,
}

pub struct ServiceState {
    library: RwLock<Arc<LoadedLibrary>>,
    counter: TokenCounter,
}

impl ServiceState {
    pub fn new(library: LoadedLibrary, counter: TokenCounter) -> Arc<Self> {
        Arc::new(ServiceState { library: RwLock::new(Arc::new(library)), counter })
    }

    pub fn library(&self) -> Arc<LoadedLibrary> {
        self.library.read().expect("library lock poisoned").clone()
    }
}

type Reply = (StatusCode, Json<Value>);

fn error(status: StatusCode, kind: &str, detail: impl ToString) -> Reply {
    (status, Json(json!({ "v": API_VERSION, "error": kind, "detail": detail.to_string() })))
}

async fn transform(State(state): State<Arc<ServiceState>>, body: String) -> Reply {
    let req: TransformRequest = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "BadRequest", e),
    };
    if req.v != API_VERSION {
        return error(StatusCode::BAD_REQUEST, "UnsupportedVersion", format!("expected v={API_VERSION}, got {}", req.v));
    }
    let kind = match req.render.as_deref().map(str::parse::<RenderKind>) {
        None => RenderKind::Hierarchical,
        Some(Ok(k)) if k.is_view_kind() => k,
        Some(Ok(k)) => return error(StatusCode::BAD_REQUEST, "BadRequest", format!("`{k}` is not a view renderer")),
        Some(Err(e)) => return error(StatusCode::BAD_REQUEST, "BadRequest", e),
    };
    let lib = state.library();
    if let Some(id) = &req.library_id {
        if *id != lib.id {
            return error(StatusCode::CONFLICT, "LibraryMismatch", format!("loaded library is {}", lib.id));
        }
    }
    let seed = req.seed.or((kind == RenderKind::Random).then_some(0));
    match transform_document(&req.document, &lib.programs, kind, seed, &state.counter) {
        Ok(out) => {
            let resp = TransformResponse {
                v: API_VERSION,
                library_id: lib.id.clone(),
                render: kind.to_string(),
                representation: out.representation.text(),
                tokens_before: out.tokens_before,
                tokens_after: out.tokens_after,
                reduction: out.reduction,
                transform_latency_us: out.latency_us,
            };
            (StatusCode::OK, Json(serde_json::to_value(resp).expect("serializable")))
        }
        Err(RuntimeError::MalformedDocument(e)) => error(StatusCode::BAD_REQUEST, "MalformedDocument", e),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, "TransformFailed", e),
    }
}

async fn healthz(State(state): State<Arc<ServiceState>>) -> Reply {
    let lib = state.library();
    (StatusCode::OK, Json(json!({ "v": API_VERSION, "status": "ok", "library_id": lib.id, "programs": lib.programs.len() })))
}

async fn reload(State(state): State<Arc<ServiceState>>) -> Reply {
    let current = state.library();
    let Some(path) = current.path.clone() else {
        return error(StatusCode::CONFLICT, "LibraryLoadFailure", "library was not loaded from a file");
    };
    match LoadedLibrary::load(&path) {
        Ok(lib) => {
            let id = lib.id.clone();
            let n = lib.programs.len();
            *state.library.write().expect("library lock poisoned") = Arc::new(lib);
            tracing::info!(library_id = %id, programs = n, "library reloaded");
            (StatusCode::OK, Json(json!({ "v": API_VERSION, "status": "reloaded", "library_id": id, "programs": n })))
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "LibraryLoadFailure", e),
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/transform", post(transform))
        .route("/healthz", get(healthz))
        .route("/reload", post(reload))
        .with_state(state)
}

/// Loads the library and serves until the process is interrupted.
pub async fn serve(library: &Path, bind: SocketAddr, counter: TokenCounter) -> anyhow::Result<()> {
    let lib = LoadedLibrary::load(library)?;
    tracing::info!(library_id = %lib.id, programs = lib.programs.len(), %bind, "serving");
    let listener = tokio::net::TcpListener::bind(bind).await?;
    axum::serve(listener, router(ServiceState::new(lib, counter)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
