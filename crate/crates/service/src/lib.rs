//! HTTP sessions for negotiating a transfer window: load a bundle, edit prices
//! and locks as talks move, pin decisions, re-solve and compare the results.

pub mod error;
pub mod session;

use std::collections::HashMap;
use std::panic::AssertUnwindSafe;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use ftcp_core::bundle::{bundle_to_string, parse_bundle};
use ftcp_core::{Fixing, Instance};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::session::{diff_solutions, HistoryEntry, PlayerUpdate, Session, SolveConfig, SolveRequest, DEFAULT_SCENARIOS, DEFAULT_SEED};

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;

impl AppState {
    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }
}

fn lock(session: &Arc<Mutex<Session>>) -> std::sync::MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

pub fn router() -> Router {
    router_with(Arc::new(AppState::default()))
}

pub fn router_with(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/bundle", get(get_bundle))
        .route("/sessions/{id}/players/{player}", patch(update_player))
        .route("/sessions/{id}/fixings", get(get_fixings).post(add_fixing).delete(clear_fixings))
        .route("/sessions/{id}/resample", post(resample))
        .route("/sessions/{id}/solves", post(start_solve))
        .route("/sessions/{id}/solves/{solve}", get(get_solve))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/compare", get(compare))
        .route("/sessions/{id}/audit", get(audit))
        .with_state(state)
}

#[derive(Serialize)]
struct SessionView<'a> {
    id: &'a str,
    revision: u64,
    seed: u64,
    scenarios: usize,
    instance: &'a Instance,
    fixings: &'a [Fixing],
    active_solve: Option<u64>,
    history: usize,
}

fn view(s: &Session) -> Response {
    Json(SessionView {
        id: &s.id,
        revision: s.revision,
        seed: s.seed,
        scenarios: s.scenarios.num_scenarios(),
        instance: s.instance(),
        fixings: &s.fixings,
        active_solve: s.active.as_ref().map(|a| a.0),
        history: s.history.len(),
    })
    .into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateParams {
    seed: Option<u64>,
    scenarios: Option<usize>,
}

/// The body is an instance bundle exactly as stored on disk.
async fn create_session(State(state): State<Shared>, Query(q): Query<CreateParams>, body: String) -> Result<Response, ApiError> {
    let bundle = parse_bundle(&body).map_err(|e| ApiError::Invalid(e.to_string()))?;
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst) + 1);
    let session = Session::new(id.clone(), bundle, q.seed.unwrap_or(DEFAULT_SEED), q.scenarios.unwrap_or(DEFAULT_SCENARIOS))?;
    let response = (StatusCode::CREATED, view(&session)).into_response();
    state.sessions.write().expect("session map lock").insert(id, Arc::new(Mutex::new(session)));
    Ok(response)
}

async fn list_sessions(State(state): State<Shared>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = state.sessions.read().expect("session map lock").keys().cloned().collect();
    ids.sort_by_key(|id| (id.len(), id.clone()));
    Json(ids)
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(view(&lock(&state.get(&id)?)))
}

async fn delete_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.write().expect("session map lock").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::UnknownSession(id)),
    }
}

/// The working instance as a bundle, loadable by the command line tools.
async fn get_bundle(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let text = bundle_to_string(&lock(&state.get(&id)?).bundle);
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn update_player(
    State(state): State<Shared>,
    Path((id, player)): Path<(String, String)>,
    Json(update): Json<PlayerUpdate>,
) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let mut s = lock(&session);
    s.update_player(&player, &update)?;
    Ok(view(&s))
}

async fn get_fixings(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<Vec<Fixing>>, ApiError> {
    Ok(Json(lock(&state.get(&id)?).fixings.clone()))
}

async fn add_fixing(State(state): State<Shared>, Path(id): Path<String>, Json(fixing): Json<Fixing>) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let mut s = lock(&session);
    s.add_fixing(fixing)?;
    Ok(view(&s))
}

async fn clear_fixings(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let mut s = lock(&session);
    s.clear_fixings();
    Ok(view(&s))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResampleRequest {
    seed: Option<u64>,
    scenarios: Option<usize>,
}

async fn resample(State(state): State<Shared>, Path(id): Path<String>, Json(r): Json<ResampleRequest>) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let mut s = lock(&session);
    s.resample(r.seed, r.scenarios)?;
    Ok(view(&s))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveParams {
    #[serde(default)]
    wait: bool,
}

fn entry_response(entry: &HistoryEntry) -> Response {
    let code = match entry.state {
        "time_limit" => StatusCode::ACCEPTED,
        "error" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::OK,
    };
    (code, Json(entry)).into_response()
}

fn running(session: &str, solve: u64, config: &SolveConfig) -> Response {
    (
        StatusCode::ACCEPTED,
        Json(json!({
            "solve": solve,
            "state": "running",
            "config": config,
            "poll": format!("/sessions/{session}/solves/{solve}"),
        })),
    )
        .into_response()
}

/// Starts a solve on a snapshot of the session. Returns at once with 202, or
/// with the finished entry when `wait=true`.
async fn start_solve(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<SolveParams>,
    Json(request): Json<SolveRequest>,
) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let job = lock(&session).start_solve(&request)?;
    let (solve, config) = (job.solve, job.config.clone());
    let failed = job.failure_entry();
    let task = tokio::spawn(async move {
        let entry = tokio::task::spawn_blocking(move || {
            std::panic::catch_unwind(AssertUnwindSafe(|| job.run())).unwrap_or_else(|_| failed)
        })
        .await
        .expect("solve task is never cancelled");
        lock(&session).finish_solve(entry.clone());
        entry
    });
    if q.wait {
        let entry = task.await.map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(entry_response(&entry))
    } else {
        Ok(running(&id, solve, &config))
    }
}

async fn get_solve(State(state): State<Shared>, Path((id, solve)): Path<(String, u64)>) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let s = lock(&session);
    if let Some((active, config)) = &s.active {
        if *active == solve {
            return Ok(running(&id, solve, config));
        }
    }
    s.entry(solve).map(entry_response).ok_or(ApiError::UnknownSolve(solve))
}

#[derive(Serialize)]
struct HistoryRow<'a> {
    solve: u64,
    revision: u64,
    seed: u64,
    config: &'a SolveConfig,
    fixings: usize,
    state: &'static str,
    objective: Option<f64>,
    empirical_probability: Option<f64>,
    oos_probability: Option<f64>,
    solve_secs: f64,
}

async fn history(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let s = lock(&session);
    let rows: Vec<HistoryRow> = s
        .history
        .iter()
        .map(|e| HistoryRow {
            solve: e.solve,
            revision: e.revision,
            seed: e.seed,
            config: &e.config,
            fixings: e.fixings.len(),
            state: e.state,
            objective: e.objective,
            empirical_probability: e.empirical_probability,
            oos_probability: e.oos_probability,
            solve_secs: e.solve_secs,
        })
        .collect();
    Ok(Json(rows).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareParams {
    a: u64,
    b: u64,
}

async fn compare(State(state): State<Shared>, Path(id): Path<String>, Query(q): Query<CompareParams>) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let s = lock(&session);
    let entry = |n: u64| s.entry(n).ok_or(ApiError::UnknownSolve(n));
    let (a, b) = (entry(q.a)?, entry(q.b)?);
    let solution = |e: &HistoryEntry| e.solution.clone().ok_or_else(|| ApiError::Invalid(format!("solve {} has no solution ({})", e.solve, e.state)));
    let changes = diff_solutions(&solution(a)?, &solution(b)?);
    Ok(Json(json!({
        "a": q.a,
        "b": q.b,
        "objective_a": a.objective,
        "objective_b": b.objective,
        "changes": changes,
    }))
    .into_response())
}

async fn audit(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(lock(&state.get(&id)?).audit.clone()).into_response())
}
