//! JSON-over-HTTP access to the pipeline and a file-based contract store.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Deserialize;
use serde_json::json;

use contractcheck_core::library::library;
use contractcheck_core::report::{self, Report, SCHEMA_VERSION};
use contractcheck_core::{load_contract, AnalysisOptions};

use crate::{analyze_document, parse_kinds};

pub const SCHEMA_HEADER: &str = "x-contractcheck-schema";

/// Contract documents stored as `<id>.json` files.
#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Store> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Store { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    pub fn get(&self, id: &str) -> std::io::Result<Option<String>> {
        match std::fs::read_to_string(self.path(id)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes through a temporary file so readers never see half a document.
    pub fn put(&self, id: &str, document: &str) -> std::io::Result<()> {
        let tmp = self.dir.join(format!(".{id}.json.tmp"));
        std::fs::write(&tmp, document)?;
        std::fs::rename(tmp, self.path(id))
    }

    pub fn delete(&self, id: &str) -> std::io::Result<bool> {
        match std::fs::remove_file(self.path(id)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e),
        }
    }
}

pub struct AppState {
    pub store: Store,
    pub options: AnalysisOptions,
    running: Mutex<HashSet<String>>,
    reports: Mutex<HashMap<String, Report>>,
    writers: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(store: Store, options: AnalysisOptions) -> Arc<AppState> {
        Arc::new(AppState {
            store,
            options,
            running: Mutex::default(),
            reports: Mutex::default(),
            writers: Mutex::default(),
        })
    }

    fn writer(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.writers.lock().expect("writers lock").entry(id.to_string()).or_default().clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/library/blocks", get(library_blocks))
        .route("/contracts/{id}", get(get_contract).put(put_contract).delete(delete_contract))
        .route("/contracts/{id}/analyze", axum::routing::post(analyze))
        .route("/contracts/{id}/diagram/{analysis}", get(diagram))
        .layer(axum::middleware::map_response(stamp_schema))
        .with_state(state)
}

async fn stamp_schema(mut response: Response) -> Response {
    response.headers_mut().insert(SCHEMA_HEADER, HeaderValue::from(SCHEMA_VERSION));
    response
}

fn json_body(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    let body = json!({ "version": SCHEMA_VERSION, "error": message.into() });
    json_body(status, body.to_string())
}

fn internal(e: impl std::fmt::Display) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

fn invalid_id(id: &str) -> Option<Response> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    (!ok).then(|| error(StatusCode::BAD_REQUEST, format!("invalid contract id {id:?}")))
}

async fn health() -> &'static str {
    "ok"
}

async fn library_blocks() -> Response {
    json_body(StatusCode::OK, serde_json::to_string_pretty(&library()).expect("library serializes"))
}

async fn get_contract(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    if let Some(r) = invalid_id(&id) {
        return r;
    }
    match state.store.get(&id) {
        Ok(Some(doc)) => json_body(StatusCode::OK, doc),
        Ok(None) => error(StatusCode::NOT_FOUND, format!("no contract {id}")),
        Err(e) => internal(e),
    }
}

async fn put_contract(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: String) -> Response {
    if let Some(r) = invalid_id(&id) {
        return r;
    }
    if let Err(e) = load_contract(&body) {
        let body = json!({ "version": SCHEMA_VERSION, "error": e.to_string() });
        return json_body(StatusCode::UNPROCESSABLE_ENTITY, body.to_string());
    }
    let writer = state.writer(&id);
    let _guard = writer.lock().await;
    match state.store.put(&id, &body) {
        Ok(()) => {
            state.reports.lock().expect("reports lock").remove(&id);
            StatusCode::NO_CONTENT.into_response()
        }
        Err(e) => internal(e),
    }
}

async fn delete_contract(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    if let Some(r) = invalid_id(&id) {
        return r;
    }
    let writer = state.writer(&id);
    let _guard = writer.lock().await;
    match state.store.delete(&id) {
        Ok(true) => {
            state.reports.lock().expect("reports lock").remove(&id);
            StatusCode::NO_CONTENT.into_response()
        }
        Ok(false) => error(StatusCode::NOT_FOUND, format!("no contract {id}")),
        Err(e) => internal(e),
    }
}

#[derive(Debug, Deserialize)]
pub struct AnalyzeParams {
    kinds: Option<String>,
}

/// Clears the running mark even if the analysis task panics.
struct RunningGuard<'a> {
    state: &'a AppState,
    id: String,
}

impl Drop for RunningGuard<'_> {
    fn drop(&mut self) {
        self.state.running.lock().expect("running lock").remove(&self.id);
    }
}

enum RunError {
    Busy,
    Missing,
    Invalid(String),
    Internal(String),
}

impl RunError {
    fn into_response(self, id: &str) -> Response {
        match self {
            RunError::Busy => error(StatusCode::CONFLICT, format!("an analysis of {id} is already running")),
            RunError::Missing => error(StatusCode::NOT_FOUND, format!("no contract {id}")),
            RunError::Invalid(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
            RunError::Internal(e) => internal(e),
        }
    }
}

async fn run(state: &Arc<AppState>, id: &str, options: AnalysisOptions) -> Result<Report, RunError> {
    if !state.running.lock().expect("running lock").insert(id.to_string()) {
        return Err(RunError::Busy);
    }
    let _guard = RunningGuard { state, id: id.to_string() };
    let document = match state.store.get(id) {
        Ok(Some(d)) => d,
        Ok(None) => return Err(RunError::Missing),
        Err(e) => return Err(RunError::Internal(e.to_string())),
    };
    let owned_id = id.to_string();
    let report = tokio::task::spawn_blocking(move || analyze_document(&owned_id, &document, &options))
        .await
        .map_err(|e| RunError::Internal(e.to_string()))?
        .map_err(|e| RunError::Invalid(e.to_string()))?;
    state.reports.lock().expect("reports lock").insert(id.to_string(), report.clone());
    Ok(report)
}

async fn analyze(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<AnalyzeParams>,
) -> Response {
    if let Some(r) = invalid_id(&id) {
        return r;
    }
    let kinds = match parse_kinds(params.kinds.as_deref().unwrap_or("all")) {
        Ok(k) => k,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let options = AnalysisOptions { kinds, ..state.options.clone() };
    match run(&state, &id, options).await {
        // Static errors stop the analysis; the findings are the payload.
        Ok(report) if report.analyses.is_empty() && report.static_errors().next().is_some() => {
            json_body(StatusCode::UNPROCESSABLE_ENTITY, report::to_json(&report))
        }
        Ok(report) => json_body(StatusCode::OK, report::to_json(&report)),
        Err(e) => e.into_response(&id),
    }
}

/// Mermaid text for an analysis instance (e.g. `II` or
/// `limitation__Claim2`); `execution` is an alias for `II`.
async fn diagram(State(state): State<Arc<AppState>>, UrlPath((id, analysis)): UrlPath<(String, String)>) -> Response {
    if let Some(r) = invalid_id(&id) {
        return r;
    }
    let cached = state.reports.lock().expect("reports lock").get(&id).cloned();
    let report = match cached {
        Some(r) => r,
        None => match run(&state, &id, state.options.clone()).await {
            Ok(r) => r,
            Err(e) => return e.into_response(&id),
        },
    };
    let instance = if analysis == "execution" { "II" } else { analysis.as_str() };
    let Some(outcome) = report.outcome(instance) else {
        return error(StatusCode::NOT_FOUND, format!("no analysis {analysis} for {id}"));
    };
    let Some(trace) = &outcome.trace else {
        return error(StatusCode::NOT_FOUND, format!("analysis {analysis} has no execution trace"));
    };
    (StatusCode::OK, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], report::to_sequence_diagram(trace))
        .into_response()
}
