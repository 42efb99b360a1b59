//! HTTP API over loaded snapshots and agent sessions.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use codegraph_agent::{Agent, AgentConfig, AgentError, BackendError, ChatBackend, ChatParams, Preset, Session, Strategy};
use codegraph_core::query::{Caps, QueryError};
use codegraph_core::schema::{EdgeType, NodeId, NodeLabel, NODE_PROPERTIES, SCHEMA_TEXT, SCHEMA_VERSION};
use codegraph_core::store::{Direction, GraphHandle, StoreError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{run_query, Stats};

pub struct Repo {
    pub handle: GraphHandle,
    /// Checkout used to resolve code spans.
    pub source_root: PathBuf,
}

struct SessionSlot {
    agent: Agent,
    session: Session,
}

pub struct ServiceState {
    repos: RwLock<BTreeMap<String, Arc<Repo>>>,
    sessions: RwLock<HashMap<String, Arc<tokio::sync::Mutex<SessionSlot>>>>,
    backend: Option<Arc<dyn ChatBackend>>,
    params: ChatParams,
    caps: Caps,
    transcript_dir: Option<PathBuf>,
}

impl ServiceState {
    pub fn new(backend: Option<Arc<dyn ChatBackend>>, params: ChatParams) -> Self {
        Self {
            repos: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(HashMap::new()),
            backend,
            params,
            caps: Caps::default(),
            transcript_dir: None,
        }
    }

    /// Session transcripts are written to `<dir>/<session id>.jsonl`.
    pub fn with_transcript_dir(mut self, dir: PathBuf) -> Self {
        self.transcript_dir = Some(dir);
        self
    }

    /// Registers a repository under an id derived from `name`, suffixed
    /// when taken. Returns the id.
    pub fn add_repo(&self, name: &str, repo: Repo) -> String {
        let mut repos = self.repos.write().expect("registry lock");
        let mut id = name.to_string();
        let mut n = 2;
        while repos.contains_key(&id) {
            id = format!("{name}-{n}");
            n += 1;
        }
        repos.insert(id.clone(), Arc::new(repo));
        id
    }

    fn repo(&self, id: &str) -> Result<Arc<Repo>, ApiError> {
        self.repos
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_repo", format!("no repository with id {id:?}")))
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<SessionSlot>>, ApiError> {
        self.sessions
            .read()
            .expect("session lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_session", format!("no session with id {id:?}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    position: Option<(usize, usize)>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), position: None }
    }

    fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let status = if e.is_schema_error() { StatusCode::UNPROCESSABLE_ENTITY } else { StatusCode::BAD_REQUEST };
        Self { status, code: e.code(), message: e.to_string(), position: e.position() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "unknown_node"),
            StoreError::NoCodeSpan { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "no_code_span"),
            StoreError::StaleSource { .. } => (StatusCode::CONFLICT, "stale_source"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "store_error"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        let (status, code) = match &e {
            AgentError::Config(_) => (StatusCode::BAD_REQUEST, "config_error"),
            AgentError::Backend(BackendError::ScriptExhausted { .. }) | AgentError::Backend(_) => {
                (StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable")
            }
            AgentError::Protocol { .. } => (StatusCode::BAD_GATEWAY, "protocol_error"),
            AgentError::NothingToResume => (StatusCode::CONFLICT, "nothing_to_resume"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error_code": self.code, "message": self.message});
        if let Some((line, column)) = self.position {
            body["position"] = json!({"line": line, "column": column});
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_node_id(text: &str) -> Result<NodeId, ApiError> {
    text.parse().map_err(|_| ApiError::not_found("unknown_node", format!("no node with id {text:?}")))
}

async fn schema() -> Json<Value> {
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "text": SCHEMA_TEXT,
        "node_labels": NodeLabel::ALL,
        "edge_types": EdgeType::ALL,
        "properties": NODE_PROPERTIES,
    }))
}

#[derive(Serialize)]
struct RepoSummary {
    id: String,
    repo_root: String,
    files: usize,
    total_nodes: usize,
    total_edges: usize,
}

async fn repos(State(state): State<Arc<ServiceState>>) -> Json<Vec<RepoSummary>> {
    let repos = state.repos.read().expect("registry lock");
    Json(
        repos
            .iter()
            .map(|(id, r)| {
                let g = r.handle.graph();
                RepoSummary {
                    id: id.clone(),
                    repo_root: g.repo_root.clone(),
                    files: g.files().count(),
                    total_nodes: g.node_count(),
                    total_edges: g.edge_count(),
                }
            })
            .collect(),
    )
}

async fn stats(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Stats> {
    Ok(Json(Stats::of(&state.repo(&id)?.handle)))
}

#[derive(Deserialize)]
struct QueryBody {
    query: String,
    limit: Option<usize>,
}

async fn query(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<QueryBody>,
) -> Result<Response, ApiError> {
    let repo = state.repo(&id)?;
    if body.limit == Some(0) {
        return Err(ApiError::bad_request("invalid_limit", "limit must be positive"));
    }
    let caps = state.caps;
    let table = tokio::task::spawn_blocking(move || {
        run_query(&repo.handle, &body.query, body.limit, caps, Some(&repo.source_root))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(table).into_response())
}

async fn node(
    State(state): State<Arc<ServiceState>>,
    UrlPath((id, node)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let repo = state.repo(&id)?;
    let node_id = parse_node_id(&node)?;
    let record = repo
        .handle
        .node(node_id)
        .ok_or_else(|| ApiError::not_found("unknown_node", format!("no node with id {node:?}")))?;
    Ok(Json(record).into_response())
}

#[derive(Deserialize)]
struct NeighborParams {
    direction: Option<String>,
    #[serde(rename = "type")]
    edge_type: Option<String>,
}

async fn neighbors(
    State(state): State<Arc<ServiceState>>,
    UrlPath((id, node)): UrlPath<(String, String)>,
    UrlQuery(params): UrlQuery<NeighborParams>,
) -> Result<Response, ApiError> {
    let repo = state.repo(&id)?;
    let node_id = parse_node_id(&node)?;
    let direction = match params.direction.as_deref() {
        None => Direction::Both,
        Some(d) => d.parse().map_err(|m: String| ApiError::bad_request("invalid_direction", m))?,
    };
    let edge_type = match params.edge_type.as_deref() {
        None | Some("") => None,
        Some(t) => Some(t.parse::<EdgeType>().map_err(|_| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_edge_type", format!("unknown edge type {t:?}"))
        })?),
    };
    let list = repo.handle.neighbors(node_id, direction, edge_type)?;
    let body: Vec<Value> = list.into_iter().map(|(edge, node)| json!({"edge": edge, "node": node})).collect();
    Ok(Json(body).into_response())
}

async fn code(
    State(state): State<Arc<ServiceState>>,
    UrlPath((id, node)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let repo = state.repo(&id)?;
    let node_id = parse_node_id(&node)?;
    let text = repo.handle.resolve_code(node_id, &repo.source_root)?;
    let record = repo.handle.node(node_id).expect("resolve_code checked the node");
    Ok(Json(json!({
        "node_id": record.id,
        "file_path": record.file_path,
        "span": record.span,
        "code": text,
    }))
    .into_response())
}

#[derive(Deserialize)]
struct NewSession {
    preset: Option<String>,
    strategy: Option<String>,
    max_rounds: Option<usize>,
}

async fn create_session(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<NewSession>,
) -> Result<Response, ApiError> {
    let repo = state.repo(&id)?;
    let preset: Preset = body.preset.as_deref().unwrap_or("chat").parse()?;
    let mut config = AgentConfig::for_preset(preset);
    if let Some(s) = &body.strategy {
        config.strategy = s.parse::<Strategy>()?;
    }
    if let Some(r) = body.max_rounds {
        config.max_rounds = r;
    }
    config.params = state.params.clone();
    config.source_root = Some(repo.source_root.clone());
    let backend = state
        .backend
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", "no chat backend is configured"))?;
    let strategy = config.strategy;
    let agent = Agent::new(repo.handle.clone(), backend, config)?;
    let session_id = uuid::Uuid::new_v4().to_string();
    let session = agent.new_session(&session_id);
    state
        .sessions
        .write()
        .expect("session lock")
        .insert(session_id.clone(), Arc::new(tokio::sync::Mutex::new(SessionSlot { agent, session })));
    Ok((StatusCode::CREATED, Json(json!({"session_id": session_id, "repo_id": id, "preset": preset, "strategy": strategy}))).into_response())
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

fn write_transcript(dir: &Path, session: &Session) {
    let path = dir.join(format!("{}.jsonl", session.id));
    if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, session.transcript_jsonl())) {
        tracing::warn!(path = %path.display(), error = %e, "cannot write session transcript");
    }
}

async fn message(
    State(state): State<Arc<ServiceState>>,
    UrlPath(sid): UrlPath<String>,
    Json(body): Json<MessageBody>,
) -> Result<Response, ApiError> {
    let slot = state.session(&sid)?;
    if body.text.trim().is_empty() {
        return Err(ApiError::bad_request("empty_message", "message text is empty"));
    }
    let mut guard = slot.lock_owned().await;
    let transcript_dir = state.transcript_dir.clone();
    let (result, guard) = tokio::task::spawn_blocking(move || {
        let slot = &mut *guard;
        let result = if slot.session.pending.is_some() {
            slot.agent.resume(&mut slot.session)
        } else {
            slot.agent.send(&mut slot.session, &body.text)
        };
        if let Some(dir) = &transcript_dir {
            write_transcript(dir, &slot.session);
        }
        (result, guard)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    drop(guard);
    Ok(Json(result?).into_response())
}

async fn get_session(State(state): State<Arc<ServiceState>>, UrlPath(sid): UrlPath<String>) -> Result<Response, ApiError> {
    let slot = state.session(&sid)?;
    let guard = slot.lock().await;
    Ok(Json(&guard.session).into_response())
}

pub fn router(state: Arc<ServiceState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/v1/schema", get(schema))
        .route("/v1/repos", get(repos))
        .route("/v1/repos/{id}/stats", get(stats))
        .route("/v1/repos/{id}/query", post(query))
        .route("/v1/repos/{id}/nodes/{node}", get(node))
        .route("/v1/repos/{id}/nodes/{node}/neighbors", get(neighbors))
        .route("/v1/repos/{id}/nodes/{node}/code", get(code))
        .route("/v1/repos/{id}/sessions", post(create_session))
        .route("/v1/sessions/{sid}/messages", post(message))
        .route("/v1/sessions/{sid}", get(get_session))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}
