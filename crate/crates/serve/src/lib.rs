//! Listening-test service.
//!
//! Raters work through every stored sample once, in an order shuffled per
//! session, and score each on the 1 to 5 scale. Accepted ratings are
//! appended to the ratings CSV and synced before the response goes out, so
//! the file alone is the service's state: restarting replays it.
//!
//! | method | path | reply |
//! |---|---|---|
//! | GET | `/api/session/{id}/next` | `{sample_id, category, audio_url, position, total}` or `{done: true}` |
//! | GET | `/api/audio/{sample_id}` | WAV bytes |
//! | POST | `/api/session/{id}/rating` | body `{sample_id, score}`, reply `{accepted: true}` |
//! | GET | `/api/report?model=<id>` | the model's MOS report |
//! | GET | `/api/report` | a list with the report of every stored model |
//!
//! A model with no ratings yet gets an empty report: no categories and
//! `null` overall means. Errors reply `{error}` with 400 for malformed
//! input, 404 for unknown sessions, samples or models, and 409 for a rating
//! that is not the session's current sample.

mod store;

use std::collections::HashSet;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kwglow::evaluation::{category_report, ingest_ratings, EvalError, MosReport, RatingRecord, RatingsWriter};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::net::TcpListener;

pub use store::{valid_id, SampleStore, StoredSample};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("{}:{line}: {message}", path.display())]
    Store { path: PathBuf, line: usize, message: String },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ratings file: {0}")]
    Ratings(#[from] EvalError),
}

/// Sample order for one session: a shuffle keyed by the service seed and
/// the session id.
pub fn session_order(seed: u64, session_id: &str, n: usize) -> Vec<usize> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(session_id.as_bytes());
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::from_seed(h.finalize().into()));
    order
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextSample {
    Sample { sample_id: String, category: String, audio_url: String, position: usize, total: usize },
    Done { done: bool },
}

/// Why a request was refused, with its HTTP status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

struct Inner {
    writer: RatingsWriter,
    ratings: Vec<RatingRecord>,
    /// (session, sample) pairs already rated.
    rated: HashSet<(String, String)>,
    sessions: HashSet<String>,
}

/// Shared state behind the HTTP routes.
pub struct Service {
    store: SampleStore,
    seed: u64,
    inner: Mutex<Inner>,
}

impl Service {
    /// Replays `ratings_path` (if it exists) and opens it for appending.
    pub fn open(store: SampleStore, ratings_path: impl AsRef<Path>, seed: u64) -> Result<Self, ServeError> {
        let ratings_path = ratings_path.as_ref();
        let ratings = if ratings_path.exists() { ingest_ratings(ratings_path)? } else { Vec::new() };
        let writer = RatingsWriter::open(ratings_path)?;
        let rated = ratings.iter().map(|r| (r.rater_id.clone(), r.sample_id.clone())).collect();
        let sessions = ratings.iter().map(|r| r.rater_id.clone()).collect();
        Ok(Self { store, seed, inner: Mutex::new(Inner { writer, ratings, rated, sessions }) })
    }

    pub fn store(&self) -> &SampleStore {
        &self.store
    }

    /// Snapshot of every stored rating, in file order.
    pub fn ratings(&self) -> Vec<RatingRecord> {
        self.lock().ratings.clone()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Index into the store of the session's current sample.
    fn current(&self, inner: &Inner, session: &str) -> Option<(usize, usize)> {
        session_order(self.seed, session, self.store.len())
            .into_iter()
            .enumerate()
            .find(|&(_, i)| !inner.rated.contains(&(session.to_string(), self.store.samples()[i].sample_id.clone())))
    }

    /// Opens the session if needed and returns its current sample.
    pub fn next(&self, session: &str) -> Result<NextSample, ApiError> {
        check_session(session)?;
        let mut inner = self.lock();
        inner.sessions.insert(session.to_string());
        Ok(match self.current(&inner, session) {
            None => NextSample::Done { done: true },
            Some((pos, i)) => {
                let s = &self.store.samples()[i];
                NextSample::Sample {
                    sample_id: s.sample_id.clone(),
                    category: s.category.clone(),
                    audio_url: format!("/api/audio/{}", s.sample_id),
                    position: pos + 1,
                    total: self.store.len(),
                }
            }
        })
    }

    /// Accepts a score for the session's current sample and appends it to
    /// the ratings file before returning.
    pub fn rate(&self, session: &str, sample_id: &str, score: i64) -> Result<RatingRecord, ApiError> {
        check_session(session)?;
        let score = kwglow::evaluation::check_score(score).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        let sample = self
            .store
            .get(sample_id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown sample `{sample_id}`")))?;
        let mut inner = self.lock();
        if !inner.sessions.contains(session) {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{session}`")));
        }
        if inner.rated.contains(&(session.to_string(), sample_id.to_string())) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("`{sample_id}` already rated in this session")));
        }
        match self.current(&inner, session) {
            Some((_, i)) if self.store.samples()[i].sample_id == sample_id => {}
            _ => return Err(ApiError::new(StatusCode::CONFLICT, format!("`{sample_id}` is not the current sample"))),
        }
        let record = RatingRecord {
            rater_id: session.to_string(),
            sample_id: sample_id.to_string(),
            category: sample.category.clone(),
            model_id: sample.model_id.clone(),
            score,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        inner.writer.append(&record).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        inner.rated.insert((session.to_string(), sample_id.to_string()));
        inner.ratings.push(record.clone());
        Ok(record)
    }

    /// Models in store order.
    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in self.store.samples() {
            if !out.contains(&s.model_id) {
                out.push(s.model_id.clone());
            }
        }
        out
    }

    /// Report for a stored model; empty until its first rating arrives.
    pub fn report(&self, model_id: &str) -> Result<MosReport, ApiError> {
        if !self.store.samples().iter().any(|s| s.model_id == model_id) {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown model `{model_id}`")));
        }
        let snapshot = self.ratings();
        match category_report(&snapshot, model_id) {
            Ok(r) => Ok(r),
            Err(EvalError::EmptyScores) => Ok(MosReport {
                model_id: model_id.to_string(),
                per_category: Default::default(),
                overall_mean_of_categories: f64::NAN,
                overall_mean_of_ratings: f64::NAN,
            }),
            Err(other) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string())),
        }
    }
}

fn check_session(session: &str) -> Result<(), ApiError> {
    if valid_id(session) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::BAD_REQUEST, "session ids must match [A-Za-z0-9_.-]{1,128}"))
    }
}

#[derive(Deserialize)]
struct RatingBody {
    sample_id: String,
    score: i64,
}

#[derive(Deserialize)]
struct ReportQuery {
    model: Option<String>,
}

async fn next_handler(State(svc): State<Arc<Service>>, UrlPath(session): UrlPath<String>) -> Result<Json<NextSample>, ApiError> {
    svc.next(&session).map(Json)
}

async fn rating_handler(
    State(svc): State<Arc<Service>>,
    UrlPath(session): UrlPath<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let body: RatingBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("body must be {{sample_id, score}}: {e}")))?;
    // The append syncs to disk; keep it off the async workers.
    tokio::task::spawn_blocking(move || svc.rate(&session, &body.sample_id, body.score))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(json!({ "accepted": true })))
}

async fn audio_handler(State(svc): State<Arc<Service>>, UrlPath(sample_id): UrlPath<String>) -> Result<Response, ApiError> {
    let sample = svc
        .store()
        .get(&sample_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown sample `{sample_id}`")))?;
    let bytes = tokio::fs::read(&sample.audio_path)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

async fn report_handler(State(svc): State<Arc<Service>>, Query(q): Query<ReportQuery>) -> Result<Response, ApiError> {
    match q.model {
        Some(model) => Ok(Json(svc.report(&model)?).into_response()),
        None => {
            let all = svc.models().iter().map(|m| svc.report(m)).collect::<Result<Vec<_>, _>>()?;
            Ok(Json(all).into_response())
        }
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/session/{id}/next", get(next_handler))
        .route("/api/session/{id}/rating", post(rating_handler))
        .route("/api/audio/{sample_id}", get(audio_handler))
        .route("/api/report", get(report_handler))
        .with_state(service)
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })
}

/// Serves until `shutdown` resolves.
pub async fn run(
    listener: TcpListener,
    service: Arc<Service>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
