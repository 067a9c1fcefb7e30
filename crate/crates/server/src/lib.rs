//! HTTP JSON API for clinician-administered exam sessions.
//!
//! Routes:
//!
//! | method | path                     | body / result                      |
//! |--------|--------------------------|------------------------------------|
//! | POST   | `/sessions`              | [`CreateSession`] -> [`SessionView`] |
//! | GET    | `/sessions`              | list of session ids                |
//! | GET    | `/sessions/{id}`         | [`SessionView`]                    |
//! | GET/POST | `/sessions/{id}/next`  | `NextItem` (prompt + LM response, or a terminal marker) |
//! | POST   | `/sessions/{id}/score`   | [`ScoreRequest`] -> [`SessionView`]  |
//! | GET    | `/sessions/{id}/report`  | `SessionReport`                    |
//! | POST   | `/checklist/score`       | `ChecklistSession` -> `ChecklistScore` |
//!
//! Errors are `{"error": ..}` with 401 (bad token), 404 (unknown session),
//! 409 (out-of-order or terminal), 422 (invalid payload), 502 (LM failure).
//!
//! Mutations on one session are serialized by a per-session lock and
//! persisted with an atomic rename before the response is sent. Reads load
//! the last committed file without locking.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use agealign_core::exam::{
    ChecklistScore, ChecklistSession, ExamError, ExamSession, ItemState, NextItem, SessionReport, SessionStatus,
    SessionStore, DEFAULT_CEILING,
};
use agealign_core::gateway::Completer;
use agealign_core::model::{ExamItem, NormTable, PromptProtocol, SamplingConfig};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Error body plus status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<ExamError> for ApiError {
    fn from(e: ExamError) -> Self {
        let status = match &e {
            ExamError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ExamError::Sequencing(_) | ExamError::Terminal(_) => StatusCode::CONFLICT,
            ExamError::InvalidScore(_)
            | ExamError::InvalidPayload(_)
            | ExamError::Empty
            | ExamError::Incomplete(_)
            | ExamError::Model(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ExamError::Gateway(_) | ExamError::NotAutoScorable(_) => StatusCode::BAD_GATEWAY,
            ExamError::Storage { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub struct ServerConfig {
    pub store: SessionStore,
    pub completer: Arc<dyn Completer>,
    /// Used for the age equivalent in session reports when present.
    pub norms: Option<NormTable>,
    /// Shared bearer token; `None` disables the check.
    pub token: Option<String>,
}

struct AppState {
    store: SessionStore,
    completer: Arc<dyn Completer>,
    norms: Option<NormTable>,
    token: Option<String>,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    counter: AtomicU64,
}

type Shared = Arc<AppState>;

impl AppState {
    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table");
        Arc::clone(locks.entry(id.to_string()).or_default())
    }

    fn fresh_id(&self) -> String {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        format!("s{nanos:x}-{}", self.counter.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    /// Generated when absent.
    #[serde(default)]
    pub id: Option<String>,
    pub subtest: String,
    pub items: Vec<ExamItem>,
    /// Defaults to the definitions prompt for Def items, SLP otherwise.
    #[serde(default)]
    pub protocol: Option<PromptProtocol>,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub ceiling_k: Option<u32>,
    /// Extra observation tags on top of the default vocabulary.
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub question_id: String,
    pub score: u8,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub tag: Option<String>,
}

/// Session state as shown to the console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub subtest: String,
    pub status: SessionStatus,
    pub version: u64,
    pub current_question: Option<String>,
    pub administered: usize,
    pub total_items: usize,
    pub raw_score: u32,
    pub max_score: u32,
    pub consecutive_errors: u32,
    pub ceiling_k: u32,
    pub ceiling_warning: bool,
    pub item_states: Vec<ItemState>,
    pub tags: Vec<String>,
}

impl From<&ExamSession> for SessionView {
    fn from(s: &ExamSession) -> Self {
        let k = s.ceiling_k();
        SessionView {
            id: s.id.clone(),
            subtest: s.subtest.clone(),
            status: s.status(),
            version: s.version,
            current_question: s.current_question().map(str::to_string),
            administered: s.outcomes().len(),
            total_items: s.items().len(),
            raw_score: s.raw_score(),
            max_score: s.max_score(),
            consecutive_errors: s.consecutive_errors(),
            ceiling_k: k,
            ceiling_warning: k > 0 && !s.status().is_terminal() && s.consecutive_errors() + 1 == k,
            item_states: s.item_states(),
            tags: s.tags().to_vec(),
        }
    }
}

pub fn router(config: ServerConfig) -> Router {
    let state: Shared = Arc::new(AppState {
        store: config.store,
        completer: config.completer,
        norms: config.norms,
        token: config.token,
        locks: Mutex::new(HashMap::new()),
        counter: AtomicU64::new(0),
    });
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next_item).post(next_item))
        .route("/sessions/{id}/score", post(score))
        .route("/sessions/{id}/report", get(report))
        .route("/checklist/score", post(checklist_score))
        .layer(middleware::from_fn_with_state(Arc::clone(&state), require_token))
        .with_state(state)
}

/// Bind `addr` and serve until the process ends.
pub async fn serve(addr: std::net::SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config)).await
}

async fn require_token(State(state): State<Shared>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

/// Load, mutate and persist one session under its lock, off the async
/// runtime (the LM client blocks).
async fn mutate<T, F>(state: &Shared, id: String, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut ExamSession, &dyn Completer) -> Result<T, ExamError> + Send + 'static,
{
    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;
    let st = Arc::clone(state);
    tokio::task::spawn_blocking(move || {
        let mut session = st.store.load(&id)?;
        let before = session.version;
        let out = f(&mut session, st.completer.as_ref())?;
        if session.version != before {
            st.store.save(&session)?;
        }
        Ok::<T, ExamError>(out)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(ApiError::from)
}

async fn load(state: &Shared, id: String) -> Result<ExamSession, ApiError> {
    let st = Arc::clone(state);
    tokio::task::spawn_blocking(move || st.store.load(&id))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

async fn create_session(
    State(state): State<Shared>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let id = req.id.clone().unwrap_or_else(|| state.fresh_id());
    let protocol = req.protocol.unwrap_or_else(|| match req.items.first() {
        Some(ExamItem::Def(_)) => PromptProtocol::definitions(),
        _ => PromptProtocol::slp(),
    });
    let mut session = ExamSession::create(
        id.clone(),
        req.subtest,
        req.items,
        protocol,
        req.sampling,
        req.ceiling_k.unwrap_or(DEFAULT_CEILING),
    )?;
    for t in req.tags {
        session.add_tag(t);
    }
    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;
    let st = Arc::clone(&state);
    let view = tokio::task::spawn_blocking(move || {
        // Validates the id before the existence check.
        if st.store.exists(&session.id) {
            return Err(ExamError::Sequencing(format!("session {:?} already exists", session.id)));
        }
        st.store.save(&session)?;
        Ok(SessionView::from(&session))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(state): State<Shared>) -> ApiResult<Vec<String>> {
    Ok(Json(state.store.list()?))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<SessionView> {
    Ok(Json(SessionView::from(&load(&state, id).await?)))
}

async fn next_item(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<NextItem> {
    Ok(Json(mutate(&state, id, |s, c| s.next(c)).await?))
}

async fn score(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ScoreRequest>, JsonRejection>,
) -> ApiResult<SessionView> {
    let Json(req) = body?;
    let view = mutate(&state, id, move |s, _| {
        s.record_score(&req.question_id, req.score, req.note, req.tag)?;
        Ok(SessionView::from(&*s))
    })
    .await?;
    Ok(Json(view))
}

async fn report(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<SessionReport> {
    let session = load(&state, id).await?;
    let report = match &state.norms {
        Some(n) if n.subtests.contains_key(&session.subtest) => session.finish(n)?,
        _ => session.report(),
    };
    Ok(Json(report))
}

async fn checklist_score(
    State(state): State<Shared>,
    body: Result<Json<ChecklistScoreRequest>, JsonRejection>,
) -> ApiResult<ChecklistScore> {
    let Json(req) = body?;
    req.session.validate()?;
    let norms = match (&state.norms, &req.subtest) {
        (Some(n), Some(s)) => Some((n, s.as_str())),
        _ => None,
    };
    Ok(Json(req.session.score(norms)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChecklistScoreRequest {
    #[serde(flatten)]
    pub session: ChecklistSession,
    /// Norm-table sub-test for the age equivalent.
    #[serde(default)]
    pub subtest: Option<String>,
}
