//! HTTP session service.
//!
//! | method | path                   | body            | response            |
//! |--------|------------------------|-----------------|---------------------|
//! | POST   | `/sessions`            |                 | [`CreatedSession`]  |
//! | POST   | `/sessions/{id}/turns` | [`TurnRequest`] | [`TurnPayload`]     |
//! | GET    | `/sessions/{id}`       |                 | [`SessionView`]     |
//! | DELETE | `/sessions/{id}`       |                 | 204                 |
//! | GET    | `/healthz`             |                 | [`Health`]          |
//!
//! Sessions live in memory only and expire after a period without turns.
//! Turns of one session are serialized; sessions proceed independently.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use convsearch_core::hqe::ExpandedTerm;
use convsearch_core::pipeline::StageTimings;
use convsearch_core::{InvertedIndex, Pipeline, SessionState, TurnResult};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurnRequest {
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultItem {
    pub passage_id: String,
    pub doc_id: String,
    pub text: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnPayload {
    pub turn_id: String,
    pub utterance: String,
    pub rewritten: String,
    pub expansion: Vec<ExpandedTerm>,
    pub results: Vec<ResultItem>,
    pub degraded: bool,
    pub timings: StageTimings,
}

impl TurnPayload {
    fn new(utterance: &str, turn: TurnResult) -> Self {
        let degraded = turn.degraded();
        let results = turn
            .ranking
            .entries
            .iter()
            .zip(turn.passages)
            .enumerate()
            .map(|(i, (scored, p))| ResultItem {
                passage_id: p.passage_id,
                doc_id: p.doc_id,
                text: p.text,
                score: scored.score,
                rank: i + 1,
            })
            .collect();
        Self {
            turn_id: turn.turn_id,
            utterance: utterance.to_string(),
            rewritten: turn.rewritten,
            expansion: turn.expanded.terms,
            results,
            degraded,
            timings: turn.diagnostics.timings,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub created_at: u64,
    pub turns: Vec<TurnPayload>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub documents: usize,
    pub sessions: usize,
}

#[derive(Default)]
struct SessionData {
    state: SessionState,
    turns: Vec<TurnPayload>,
}

struct Session {
    created_at: u64,
    last_used: Mutex<Instant>,
    data: tokio::sync::Mutex<SessionData>,
}

impl Session {
    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    fn idle(&self) -> Duration {
        self.last_used.lock().unwrap().elapsed()
    }
}

pub struct AppState {
    index: Arc<InvertedIndex>,
    pipeline: Arc<Pipeline>,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    ttl: Duration,
    explain: bool,
}

impl AppState {
    pub fn new(index: InvertedIndex, pipeline: Pipeline, ttl: Duration) -> Self {
        Self {
            index: Arc::new(index),
            pipeline: Arc::new(pipeline),
            sessions: Mutex::new(HashMap::new()),
            ttl,
            explain: false,
        }
    }

    /// Also log every turn's expansion terms.
    pub fn with_explain(mut self, explain: bool) -> Self {
        self.explain = explain;
        self
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn session(&self, id: &str) -> Option<Arc<Session>> {
        let mut sessions = self.sessions.lock().unwrap();
        let session = sessions.get(id)?.clone();
        if session.idle() > self.ttl {
            sessions.remove(id);
            return None;
        }
        Some(session)
    }

    /// Drops sessions idle for longer than the TTL. Returns how many went.
    pub fn evict_expired(&self) -> usize {
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.idle() <= self.ttl);
        before - sessions.len()
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    EmptyUtterance,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, format!("unknown session `{id}`")),
            ApiError::EmptyUtterance => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "utterance must not be empty".to_string(),
            ),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/turns", post(add_turn))
        .with_state(app)
}

async fn healthz(State(app): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        documents: app.index.doc_count(),
        sessions: app.session_count(),
    })
}

async fn create_session(State(app): State<Arc<AppState>>) -> (StatusCode, Json<CreatedSession>) {
    let id = uuid::Uuid::new_v4().to_string();
    let created_at = unix_now();
    let session = Session {
        created_at,
        last_used: Mutex::new(Instant::now()),
        data: tokio::sync::Mutex::new(SessionData::default()),
    };
    app.sessions.lock().unwrap().insert(id.clone(), Arc::new(session));
    tracing::info!(session = %id, "session created");
    (
        StatusCode::CREATED,
        Json(CreatedSession {
            session_id: id,
            created_at,
        }),
    )
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = app.session(&id).ok_or_else(|| ApiError::NotFound(id.clone()))?;
    let data = session.data.lock().await;
    Ok(Json(SessionView {
        session_id: id,
        created_at: session.created_at,
        turns: data.turns.clone(),
    }))
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match app.sessions.lock().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(id)),
    }
}

async fn add_turn(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<TurnRequest>,
) -> Result<Json<TurnPayload>, ApiError> {
    let session = app.session(&id).ok_or_else(|| ApiError::NotFound(id.clone()))?;
    if req.utterance.trim().is_empty() {
        return Err(ApiError::EmptyUtterance);
    }
    session.touch();
    let mut data = session.data.lock().await;
    let turn_id = (data.turns.len() + 1).to_string();
    let mut state = data.state.clone();
    let (index, pipeline) = (app.index.clone(), app.pipeline.clone());
    let utterance = req.utterance.clone();
    let (state, result) = tokio::task::spawn_blocking(move || {
        let result = pipeline.run_turn(&mut state, &turn_id, &utterance, &index);
        (state, result)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?;

    let t = &result.diagnostics.timings;
    tracing::info!(
        session = %id,
        turn_id = %result.turn_id,
        results = result.ranking.len(),
        degraded = result.degraded(),
        hqe_us = t.hqe_us,
        pqe_us = t.pqe_us,
        first_stage_us = t.first_stage_us,
        chunk_us = t.chunk_us,
        rewrite_us = t.rewrite_us,
        rerank_us = t.rerank_us,
        "turn"
    );
    if app.explain {
        let terms: Vec<String> = result
            .expanded
            .terms
            .iter()
            .map(|t| format!("{}:{}", t.term, t.provenance.as_str()))
            .collect();
        tracing::info!(session = %id, turn_id = %result.turn_id, expansion = %terms.join(" "), "explain");
    }

    let payload = TurnPayload::new(&req.utterance, result);
    data.state = state;
    data.turns.push(payload.clone());
    session.touch();
    Ok(Json(payload))
}

/// Periodically evicts idle sessions until the runtime shuts down.
pub fn spawn_evictor(app: Arc<AppState>) -> tokio::task::JoinHandle<()> {
    let period = (app.ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = app.evict_expired();
            if n > 0 {
                tracing::info!(evicted = n, "expired sessions dropped");
            }
        }
    })
}
