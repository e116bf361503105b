//! JSON-over-HTTP API for submitting simulation runs and reading their
//! diagnostics. Routes live under `/api/v1`; see `docs/api-v1.md`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use promosim_core::diagnostics::{
    agent_trajectory, effective_promotions, negative_counts_series, path_matrix, strategy_comparison,
    summarize_deltas, DiagnosticsError,
};
use promosim_core::io::{load_run, parse_scenario_json, save_run, IoError};
use promosim_core::{run_simulation, AgentId, LevelId, RunResult, ScenarioConfig, Timestep};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

/// Simultaneous pending or running simulations allowed by default.
pub const DEFAULT_MAX_ACTIVE: usize = 2;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub max_active: usize,
    /// Completed runs are written here and reloaded on startup.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { max_active: DEFAULT_MAX_ACTIVE, snapshot_dir: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone)]
struct Entry {
    status: RunStatus,
    error: Option<String>,
    result: Option<Arc<RunResult>>,
}

impl Entry {
    fn is_active(&self) -> bool {
        matches!(self.status, RunStatus::Pending | RunStatus::Running)
    }
}

/// Shared registry of submitted runs.
#[derive(Debug)]
pub struct AppState {
    config: ServerConfig,
    runs: Mutex<HashMap<Uuid, Entry>>,
}

impl AppState {
    /// Builds the registry, loading any snapshots found in the snapshot
    /// directory. Files that fail to parse are skipped with a warning.
    pub fn new(config: ServerConfig) -> std::io::Result<Self> {
        let mut runs = HashMap::new();
        if let Some(dir) = &config.snapshot_dir {
            std::fs::create_dir_all(dir)?;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                let Some(id) = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .filter(|_| path.extension().is_some_and(|e| e == "json"))
                    .and_then(|s| Uuid::parse_str(s).ok())
                else {
                    continue;
                };
                match load_run::<f64>(&path) {
                    Ok(run) => {
                        let entry = Entry { status: RunStatus::Complete, error: None, result: Some(Arc::new(run)) };
                        runs.insert(id, entry);
                    }
                    Err(e) => tracing::warn!("skipping snapshot {}: {e}", path.display()),
                }
            }
        }
        Ok(AppState { config, runs: Mutex::new(runs) })
    }

    fn runs(&self) -> MutexGuard<'_, HashMap<Uuid, Entry>> {
        self.runs.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn set(&self, id: Uuid, status: RunStatus, error: Option<String>, result: Option<Arc<RunResult>>) {
        self.runs().insert(id, Entry { status, error, result });
    }

    fn completed(&self, id: Uuid) -> Result<Arc<RunResult>, ApiError> {
        let runs = self.runs();
        let entry = runs.get(&id).ok_or_else(|| ApiError::UnknownRun(id.to_string()))?;
        match (&entry.result, entry.status) {
            (Some(run), RunStatus::Complete) => Ok(Arc::clone(run)),
            (_, status) => Err(ApiError::NotComplete(id, status)),
        }
    }
}

/// Error body: `{"error": "...", "field": "..."}`, `field` only for
/// validation failures.
#[derive(Debug)]
pub enum ApiError {
    Invalid { field: Option<String>, message: String },
    UnknownRun(String),
    UnknownAgent(AgentId),
    NotComplete(Uuid, RunStatus),
    Busy(usize),
    Internal(String),
}

impl From<IoError> for ApiError {
    fn from(e: IoError) -> Self {
        let field = e.field_path().filter(|p| !p.is_empty()).map(str::to_string);
        ApiError::Invalid { field, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, body) = match self {
            ApiError::Invalid { field, message } => (StatusCode::BAD_REQUEST, json!({ "error": message, "field": field })),
            ApiError::UnknownRun(id) => (StatusCode::NOT_FOUND, json!({ "error": format!("no run with id {id}") })),
            ApiError::UnknownAgent(id) => (StatusCode::NOT_FOUND, json!({ "error": format!("no agent {id} in this run") })),
            ApiError::NotComplete(id, status) => (
                StatusCode::CONFLICT,
                json!({ "error": format!("run {id} is not complete"), "status": status }),
            ),
            ApiError::Busy(limit) => (
                StatusCode::TOO_MANY_REQUESTS,
                json!({ "error": format!("{limit} runs already in progress") }),
            ),
            ApiError::Internal(message) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message })),
        };
        (code, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/runs", post(create_run))
        .route("/api/v1/runs/{id}/status", get(status))
        .route("/api/v1/runs/{id}/efficiency", get(efficiency))
        .route("/api/v1/runs/{id}/delta_summary", get(delta_summary))
        .route("/api/v1/runs/{id}/path_matrix", get(paths))
        .route("/api/v1/runs/{id}/negatives", get(negatives))
        .route("/api/v1/runs/{id}/events", get(events))
        .route("/api/v1/runs/{id}/agent/{aid}", get(agent))
        .route("/api/v1/comparison", get(comparison))
        .with_state(state)
}

/// A string that is not a UUID cannot name a run, so it reads as unknown.
fn parse_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw).map_err(|_| ApiError::UnknownRun(raw.to_string()))
}

async fn create_run(State(state): State<Arc<AppState>>, body: String) -> Result<(StatusCode, Json<Value>), ApiError> {
    let body = if body.trim().is_empty() { "{}" } else { &body };
    let config: ScenarioConfig = parse_scenario_json(body)?;
    let id = Uuid::new_v4();
    {
        let mut runs = state.runs();
        if runs.values().filter(|e| e.is_active()).count() >= state.config.max_active {
            return Err(ApiError::Busy(state.config.max_active));
        }
        runs.insert(id, Entry { status: RunStatus::Pending, error: None, result: None });
    }
    let worker = Arc::clone(&state);
    tokio::task::spawn_blocking(move || execute(&worker, id, &config));
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "status": RunStatus::Pending }))))
}

fn execute(state: &AppState, id: Uuid, config: &ScenarioConfig) {
    state.set(id, RunStatus::Running, None, None);
    match run_simulation(config) {
        Ok(run) => {
            if let Some(dir) = &state.config.snapshot_dir {
                if let Err(e) = save_run(&run, &dir.join(format!("{id}.json"))) {
                    tracing::warn!("could not persist run {id}: {e}");
                }
            }
            state.set(id, RunStatus::Complete, None, Some(Arc::new(run)));
        }
        Err(e) => state.set(id, RunStatus::Failed, Some(e.to_string()), None),
    }
}

async fn status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Value> {
    let id = parse_id(&id)?;
    let runs = state.runs();
    let entry = runs.get(&id).ok_or_else(|| ApiError::UnknownRun(id.to_string()))?;
    let mut body = json!({ "id": id, "status": entry.status });
    if let Some(e) = &entry.error {
        body["error"] = json!(e);
    }
    if let Some(run) = &entry.result {
        body["steps"] = json!(run.steps());
        body["strategy"] = json!(run.config.strategy.kind);
    }
    Ok(Json(body))
}

async fn efficiency(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<f64>> {
    let run = state.completed(parse_id(&id)?)?;
    Ok(Json(run.efficiency_series.clone()))
}

async fn delta_summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<promosim_core::DeltaSummary> {
    let run = state.completed(parse_id(&id)?)?;
    Ok(Json(summarize_deltas(effective_promotions(&run))))
}

async fn paths(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<promosim_core::PathMatrix> {
    let run = state.completed(parse_id(&id)?)?;
    Ok(Json(path_matrix(effective_promotions(&run))))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct NegativeCount {
    pub t: Timestep,
    pub count: usize,
}

async fn negatives(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<NegativeCount>> {
    let run = state.completed(parse_id(&id)?)?;
    let series = negative_counts_series(effective_promotions(&run), run.steps());
    Ok(Json(series.into_iter().zip(1..).map(|(count, t)| NegativeCount { t, count }).collect()))
}

#[derive(Debug, Default, Deserialize)]
pub struct EventFilter {
    pub from: Option<Timestep>,
    pub to: Option<Timestep>,
    /// Level the agent was promoted out of.
    pub level: Option<u8>,
}

async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(filter): Query<EventFilter>,
) -> ApiResult<Vec<promosim_core::PromotionEvent>> {
    let run = state.completed(parse_id(&id)?)?;
    let level = filter
        .level
        .map(LevelId::new)
        .transpose()
        .map_err(|e| ApiError::Invalid { field: Some("level".into()), message: e.to_string() })?;
    let from = filter.from.unwrap_or(0);
    let to = filter.to.unwrap_or(Timestep::MAX);
    Ok(Json(
        run.promotion_events
            .iter()
            .filter(|e| (from..=to).contains(&e.timestep) && level.is_none_or(|l| e.from_level == l))
            .copied()
            .collect(),
    ))
}

async fn agent(
    State(state): State<Arc<AppState>>,
    Path((id, aid)): Path<(String, u64)>,
) -> ApiResult<promosim_core::Trajectory> {
    let run = state.completed(parse_id(&id)?)?;
    agent_trajectory(&run, AgentId(aid)).map(Json).map_err(|e| match e {
        DiagnosticsError::AgentNotFound(a) => ApiError::UnknownAgent(a),
        other => ApiError::Internal(other.to_string()),
    })
}

#[derive(Debug, Deserialize)]
pub struct ComparisonQuery {
    pub ids: String,
}

#[derive(Debug, Serialize)]
struct ComparisonEntry {
    id: Uuid,
    #[serde(flatten)]
    row: promosim_core::ComparisonRow,
}

async fn comparison(State(state): State<Arc<AppState>>, Query(q): Query<ComparisonQuery>) -> ApiResult<Vec<Value>> {
    let ids = q
        .ids
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_id)
        .collect::<Result<Vec<_>, _>>()?;
    if ids.is_empty() {
        return Err(ApiError::Invalid { field: Some("ids".into()), message: "no run ids given".into() });
    }
    let runs = ids.iter().map(|&id| state.completed(id)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&RunResult> = runs.iter().map(|r| r.as_ref()).collect();
    let rows = strategy_comparison(&refs)
        .map_err(|e| ApiError::Invalid { field: Some("ids".into()), message: e.to_string() })?;
    rows.into_iter()
        .zip(ids)
        .map(|(row, id)| serde_json::to_value(ComparisonEntry { id, row }).map_err(|e| ApiError::Internal(e.to_string())))
        .collect::<Result<Vec<_>, _>>()
        .map(Json)
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(config)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
