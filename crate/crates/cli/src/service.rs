//! JSON-over-HTTP annotation service for one correction checkpoint.
//!
//! | route | body / query | response |
//! |-------|--------------|----------|
//! | `GET /session` | | `{session_id, checkpoint, total, completed, remaining}` |
//! | `GET /batch?n=10` | `n`: item count, default 10 | `{items: [BatchItem]}`, first `n` open positions in queue order |
//! | `POST /annotation` | `{position, tag, annotator}` | `{position, completed, remaining}` |
//! | `GET /progress` | | `{completed, total, remaining, window_minutes, words_per_hour}` |
//!
//! A `BatchItem` is `{position, sentence_idx, token_idx, left_context, form,
//! candidates, proposals, right_context}`; context entries are `{form, tag}`
//! with `tag` null for a token that is itself still open.
//!
//! Errors answer `{error}` with 400 (malformed request), 404 (unknown
//! position), 409 (position already annotated) or 422 (tag is not a
//! candidate). An annotation is appended and synced to the checkpoint's
//! `annotations.jsonl` before it is acknowledged.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::checkpoint::{AnnotationLog, AnnotationRecord, Checkpoint, DISAGREEMENTS};
use crate::error::CliResult;

/// Throughput is measured over this trailing window.
pub const WINDOW_MS: u64 = 10 * 60 * 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextToken {
    pub form: String,
    pub tag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub position: usize,
    pub sentence_idx: usize,
    pub token_idx: usize,
    pub left_context: Vec<ContextToken>,
    pub form: String,
    pub candidates: Vec<String>,
    pub proposals: Vec<String>,
    pub right_context: Vec<ContextToken>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub position: usize,
    pub tag: String,
    pub annotator: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationAck {
    pub position: usize,
    pub completed: usize,
    pub remaining: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub checkpoint: String,
    pub total: usize,
    pub completed: usize,
    pub remaining: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
    pub remaining: usize,
    pub window_minutes: u64,
    pub words_per_hour: f64,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub reason: String,
}

impl ApiError {
    fn new(status: StatusCode, reason: impl Into<String>) -> Self {
        ApiError {
            status,
            reason: reason.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.reason }))).into_response()
    }
}

pub struct Session {
    id: String,
    checkpoint: Checkpoint,
    context: usize,
    done: BTreeMap<usize, AnnotationRecord>,
    log: AnnotationLog,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    /// Loads the checkpoint and replays its annotation log.
    pub fn open(dir: &Path, context: usize) -> CliResult<Self> {
        let checkpoint = Checkpoint::load(dir)?;
        let mut hasher = DefaultHasher::new();
        std::fs::read(dir.join(DISAGREEMENTS)).unwrap_or_default().hash(&mut hasher);
        dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf()).hash(&mut hasher);
        let mut done = BTreeMap::new();
        for rec in checkpoint.annotations()? {
            done.entry(rec.position).or_insert(rec);
        }
        let log = AnnotationLog::open(&checkpoint.annotations_path())?;
        Ok(Session {
            id: format!("{:016x}", hasher.finish()),
            checkpoint,
            context,
            done,
            log,
        })
    }

    pub fn total(&self) -> usize {
        self.checkpoint.agreement.disagreements.len()
    }

    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            session_id: self.id.clone(),
            checkpoint: self.checkpoint.dir.display().to_string(),
            total: self.total(),
            completed: self.done.len(),
            remaining: self.total() - self.done.len(),
        }
    }

    fn context_token(&self, si: usize, ti: usize) -> ContextToken {
        let a = &self.checkpoint.agreement;
        let tok = &a.agreed.sentences[si].tokens[ti];
        let ts = &self.checkpoint.tagset;
        let tag = match tok.label() {
            Some(g) => Some(ts.code(g).to_string()),
            None => self
                .done
                .values()
                .find(|r| r.sentence == si && r.token == ti)
                .map(|r| r.tag.clone()),
        };
        ContextToken {
            form: tok.form.clone(),
            tag,
        }
    }

    pub fn batch(&self, n: usize) -> Batch {
        let a = &self.checkpoint.agreement;
        let ts = &self.checkpoint.tagset;
        let items = a
            .disagreements
            .iter()
            .enumerate()
            .filter(|(pos, _)| !self.done.contains_key(pos))
            .take(n)
            .map(|(pos, d)| {
                let sent = &a.agreed.sentences[d.sentence];
                let tok = &sent.tokens[d.token];
                let lo = d.token.saturating_sub(self.context);
                let hi = (d.token + 1 + self.context).min(sent.len());
                BatchItem {
                    position: pos,
                    sentence_idx: d.sentence,
                    token_idx: d.token,
                    left_context: (lo..d.token).map(|t| self.context_token(d.sentence, t)).collect(),
                    form: tok.form.clone(),
                    candidates: tok.candidates.iter().map(|c| ts.code(*c).to_string()).collect(),
                    proposals: d.proposals.iter().map(|p| ts.code(*p).to_string()).collect(),
                    right_context: (d.token + 1..hi).map(|t| self.context_token(d.sentence, t)).collect(),
                }
            })
            .collect();
        Batch { items }
    }

    pub fn annotate(&mut self, req: AnnotationRequest, at_ms: u64) -> Result<AnnotationAck, ApiError> {
        let a = &self.checkpoint.agreement;
        let d = a
            .disagreements
            .get(req.position)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no queued position {}", req.position)))?;
        if self.done.contains_key(&req.position) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("position {} is already annotated", req.position),
            ));
        }
        let tok = &a.agreed.sentences[d.sentence].tokens[d.token];
        let valid = self.checkpoint.tagset.get(&req.tag).is_some_and(|t| tok.has_candidate(t));
        if !valid {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("tag {:?} is not a candidate of {:?}", req.tag, tok.form),
            ));
        }
        let rec = AnnotationRecord {
            position: req.position,
            sentence: d.sentence,
            token: d.token,
            tag: req.tag,
            annotator: req.annotator,
            timestamp_ms: at_ms,
        };
        self.log
            .append(&rec)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        self.done.insert(rec.position, rec);
        Ok(AnnotationAck {
            position: req.position,
            completed: self.done.len(),
            remaining: self.total() - self.done.len(),
        })
    }

    pub fn progress(&self, at_ms: u64) -> Progress {
        let since = at_ms.saturating_sub(WINDOW_MS);
        let recent = self
            .done
            .values()
            .filter(|r| r.timestamp_ms > since && r.timestamp_ms <= at_ms)
            .count();
        Progress {
            completed: self.done.len(),
            total: self.total(),
            remaining: self.total() - self.done.len(),
            window_minutes: WINDOW_MS / 60_000,
            words_per_hour: recent as f64 * (3_600_000.0 / WINDOW_MS as f64),
        }
    }
}

type Shared = Arc<Mutex<Session>>;

fn lock(state: &Shared) -> Result<std::sync::MutexGuard<'_, Session>, ApiError> {
    state
        .lock()
        .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session state poisoned"))
}

#[derive(Deserialize)]
struct BatchQuery {
    n: Option<String>,
}

async fn session_info(State(s): State<Shared>) -> Result<Json<SessionInfo>, ApiError> {
    Ok(Json(lock(&s)?.info()))
}

async fn batch(State(s): State<Shared>, Query(q): Query<BatchQuery>) -> Result<Json<Batch>, ApiError> {
    let n = match q.n {
        None => 10,
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("n must be a non-negative integer, got {v:?}")))?,
    };
    Ok(Json(lock(&s)?.batch(n)))
}

async fn annotation(State(s): State<Shared>, body: Bytes) -> Result<Json<AnnotationAck>, ApiError> {
    let req: AnnotationRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed annotation: {e}")))?;
    if req.annotator.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "annotator must not be empty"));
    }
    Ok(Json(lock(&s)?.annotate(req, now_ms())?))
}

async fn progress(State(s): State<Shared>) -> Result<Json<Progress>, ApiError> {
    Ok(Json(lock(&s)?.progress(now_ms())))
}

pub fn router(session: Session, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/session", get(session_info))
        .route("/batch", get(batch))
        .route("/annotation", post(annotation))
        .route("/progress", get(progress))
        .with_state(Arc::new(Mutex::new(session)));
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
