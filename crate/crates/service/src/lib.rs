//! HTTP session service for the stylize-then-adjust workflow.
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/catalog` | entries ordered by id |
//! | POST | `/session` | `{"sketch_melody_id", "image_accomp_id"}` |
//! | GET  | `/session/{id}` | session state |
//! | POST | `/session/{id}/stylize` | |
//! | POST | `/session/{id}/adjust` | `{"alpha_b", "alpha_c"}` |
//! | GET  | `/session/{id}/assets/{name}` | bytes, with `X-Revision` and `ETag` |
//!
//! Errors are `{"error": "..."}` with 404 (unknown session, entry, or asset
//! name), 409 (wrong phase, asset not derived yet), or 422 (bad body, role
//! mismatch, alpha out of range).

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{oneshot, RwLock};
use tokio::task::JoinHandle;

use crossmap::catalog::{Catalog, CatalogEntry, CatalogError, Role};

mod session;

pub use session::{Phase, SessionState, ASSET_NAMES, STATE_FILE};
use session::Session;

pub const ENV_DATA: &str = "CROSSMAP_DATA";
pub const ENV_SESSIONS: &str = "CROSSMAP_SESSIONS";
pub const REVISION_HEADER: &str = "x-revision";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Conflict(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("corrupt session: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("internal: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(r: JsonRejection) -> Self {
        ServiceError::Validation(r.body_text())
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    pub sessions_dir: PathBuf,
}

pub struct AppState {
    catalog: Catalog,
    sessions_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<RwLock<Session>>>>,
}

impl AppState {
    /// Loads the catalog and every persisted session. Entries or sessions
    /// that fail validation are logged and skipped.
    pub fn open(data_dir: &Path, sessions_dir: &Path) -> Result<AppState, ServiceError> {
        let catalog = Catalog::load(data_dir)?;
        for (id, reason) in &catalog.rejected {
            tracing::warn!(entry = %id, %reason, "catalog entry excluded");
        }
        std::fs::create_dir_all(sessions_dir)
            .map_err(|e| ServiceError::Io(format!("{}: {e}", sessions_dir.display())))?;
        let mut sessions = HashMap::new();
        let listing =
            std::fs::read_dir(sessions_dir).map_err(|e| ServiceError::Io(format!("{}: {e}", sessions_dir.display())))?;
        for dir in listing.flatten().map(|e| e.path()).filter(|p| p.is_dir()) {
            match Session::load(&dir) {
                Ok(s) => {
                    sessions.insert(s.state.session_id.clone(), Arc::new(RwLock::new(s)));
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "session skipped"),
            }
        }
        tracing::info!(entries = catalog.len(), sessions = sessions.len(), "state loaded");
        Ok(AppState {
            catalog,
            sessions_dir: sessions_dir.to_path_buf(),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    async fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>, ServiceError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session `{id}`")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/catalog", get(list_catalog))
        .route("/session", post(create_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/stylize", post(stylize_session))
        .route("/session/{id}/adjust", post(adjust_session))
        .route("/session/{id}/assets/{name}", get(get_asset))
        .with_state(state)
}

async fn list_catalog(State(app): State<Arc<AppState>>) -> Json<Vec<CatalogEntry>> {
    Json(app.catalog.entries().cloned().collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    sketch_melody_id: String,
    image_accomp_id: String,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionState>), ServiceError> {
    let Json(req) = body?;
    for (id, role) in [
        (&req.sketch_melody_id, Role::SketchMelody),
        (&req.image_accomp_id, Role::ImageAccompaniment),
    ] {
        let (entry, _) = app
            .catalog
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("catalog entry `{id}`")))?;
        if entry.role != role {
            return Err(ServiceError::Validation(format!(
                "entry `{id}` has role {}, expected {role}",
                entry.role
            )));
        }
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let app2 = app.clone();
    let session = blocking(move || {
        Session::create(&app2.catalog, &app2.sessions_dir, id, req.sketch_melody_id, req.image_accomp_id)
    })
    .await?;
    let state = session.state.clone();
    app.sessions
        .write()
        .await
        .insert(state.session_id.clone(), Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(state)))
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionState>, ServiceError> {
    let session = app.session(&id).await?;
    let state = session.read().await.state.clone();
    Ok(Json(state))
}

async fn stylize_session(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionState>, ServiceError> {
    let session = app.session(&id).await?;
    let mut guard = session.clone().write_owned().await;
    let state = blocking(move || {
        guard.stylize(&app.catalog)?;
        Ok(guard.state.clone())
    })
    .await?;
    Ok(Json(state))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjustRequest {
    alpha_b: f64,
    alpha_c: f64,
}

async fn adjust_session(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<AdjustRequest>, JsonRejection>,
) -> Result<Json<SessionState>, ServiceError> {
    let session = app.session(&id).await?;
    let Json(req) = body?;
    for (name, a) in [("alpha_b", req.alpha_b), ("alpha_c", req.alpha_c)] {
        if !(-1.0..=1.0).contains(&a) {
            return Err(ServiceError::Validation(format!("{name} = {a} outside [-1, 1]")));
        }
    }
    let mut guard = session.clone().write_owned().await;
    let state = blocking(move || {
        guard.adjust(&app.catalog, req.alpha_b, req.alpha_c)?;
        Ok(guard.state.clone())
    })
    .await?;
    Ok(Json(state))
}

fn content_type(name: &str) -> &'static str {
    match name.rsplit('.').next() {
        Some("pgm") => "image/x-portable-graymap",
        Some("ppm") => "image/x-portable-pixmap",
        Some("mid") => "audio/midi",
        _ => "application/json",
    }
}

async fn get_asset(
    State(app): State<Arc<AppState>>,
    UrlPath((id, name)): UrlPath<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ServiceError> {
    let session = app.session(&id).await?;
    if !ASSET_NAMES.contains(&name.as_str()) {
        return Err(ServiceError::NotFound(format!("asset `{name}`")));
    }
    let guard = session.read().await;
    let bytes = guard
        .asset(&name)
        .ok_or_else(|| ServiceError::Conflict(format!("asset `{name}` is not derived yet")))?;
    let revision = guard.state.revision;
    let etag = format!("\"{id}-{revision}-{name}\"");
    let mut out = HeaderMap::new();
    out.insert(REVISION_HEADER, HeaderValue::from(revision));
    out.insert(header::ETAG, HeaderValue::from_str(&etag).expect("ascii etag"));
    out.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type(&name)));
    if headers.get(header::IF_NONE_MATCH).and_then(|v| v.to_str().ok()) == Some(etag.as_str()) {
        return Ok((StatusCode::NOT_MODIFIED, out).into_response());
    }
    Ok((out, bytes.to_vec()).into_response())
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

/// A server running on a background task.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    /// Stops accepting connections and waits for in-flight requests.
    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.map_err(std::io::Error::other)?
    }
}

pub async fn bind(config: &Config) -> Result<(TcpListener, Arc<AppState>), ServiceError> {
    let app = Arc::new(AppState::open(&config.data_dir, &config.sessions_dir)?);
    let listener = TcpListener::bind(config.addr).await.map_err(|source| ServiceError::Bind {
        addr: config.addr,
        source,
    })?;
    Ok((listener, app))
}

/// Binds and serves in the background. Port 0 picks a free port.
pub async fn spawn(config: &Config) -> Result<RunningServer, ServiceError> {
    let (listener, app) = bind(config).await?;
    let addr = listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(async move {
        axum::serve(listener, router(app))
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        task,
    })
}

/// Serves until `shutdown` resolves, announcing readiness through `on_ready`.
pub async fn serve_until<F>(
    config: &Config,
    on_ready: impl FnOnce(SocketAddr),
    shutdown: F,
) -> Result<(), ServiceError>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    let (listener, app) = bind(config).await?;
    let addr = listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
    on_ready(addr);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}

/// The line printed once the listener is bound.
pub fn ready_line(addr: SocketAddr) -> String {
    format!("crossmap listening on http://{addr}")
}
