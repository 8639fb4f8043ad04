//! HTTP API and server-sent event stream. Paths and error codes are listed
//! in `docs/api.md`.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use storyloom_core::artifact::{ArtifactContent, ImageRef, VisualCharacterDescription};
use storyloom_core::feedback::{FeedbackQuestion, InstructionSource, RevisionInstruction};
use storyloom_core::generation::{GuidanceMode, StoryboardBuild};
use storyloom_core::graph::{ConnectResult, DirtyMark, Edge, Node, Position};
use storyloom_core::propagation::{ChangeSet, Direction};
use storyloom_core::studio::{BrainstormSpec, Generated, PropagateOutcome};
use storyloom_core::style::StyleId;
use storyloom_core::workspace::{export_markdown, Event, MetricsReport, ProviderMode};
use storyloom_core::{NodeId, Studio, Workspace};
use tokio::sync::broadcast;

use crate::error::{ErrorBody, ServiceError};
use crate::session::SessionFactory;
use crate::store::{FileStore, WorkspaceSummary};

const STREAM_CAPACITY: usize = 256;
const MAX_WAIT_MS: u64 = 30_000;
const ACTOR: &str = "api";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarkEntry {
    pub node_id: NodeId,
    pub mark: DirtyMark,
}

/// Items pushed to event-stream subscribers.
#[derive(Debug, Clone)]
pub enum StreamItem {
    Event(Event),
    Marks(Vec<MarkEntry>),
    Deleted,
}

impl StreamItem {
    fn to_sse(&self) -> SseEvent {
        let (name, data) = match self {
            StreamItem::Event(e) => ("event", serde_json::to_string(e)),
            StreamItem::Marks(m) => ("marks", serde_json::to_string(&json!({ "marks": m }))),
            StreamItem::Deleted => ("deleted", Ok("{}".to_string())),
        };
        let event = SseEvent::default().event(name).data(data.unwrap_or_default());
        match self {
            StreamItem::Event(e) => event.id(e.seq.to_string()),
            _ => event,
        }
    }
}

fn mark_entries(studio: &Studio) -> Vec<MarkEntry> {
    studio
        .graph()
        .marked()
        .into_iter()
        .map(|(node_id, mark)| MarkEntry { node_id, mark })
        .collect()
}

struct Slot {
    studio: Mutex<Studio>,
    deleted: AtomicBool,
    marks: RwLock<Vec<MarkEntry>>,
    tx: broadcast::Sender<StreamItem>,
}

/// Shared server state. Each workspace has one in-memory session guarded by
/// a mutex, so mutations on a workspace run one at a time while different
/// workspaces proceed independently.
pub struct AppState {
    store: FileStore,
    sessions: SessionFactory,
    slots: Mutex<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(store: FileStore, sessions: SessionFactory) -> Arc<Self> {
        Arc::new(AppState {
            store,
            sessions,
            slots: Mutex::new(HashMap::new()),
        })
    }

    pub fn store(&self) -> &FileStore {
        &self.store
    }

    fn make_slot(&self, workspace: Workspace) -> Arc<Slot> {
        let studio = self.sessions.open(workspace, ACTOR);
        let (tx, _) = broadcast::channel(STREAM_CAPACITY);
        Arc::new(Slot {
            marks: RwLock::new(mark_entries(&studio)),
            studio: Mutex::new(studio),
            deleted: AtomicBool::new(false),
            tx,
        })
    }

    fn insert_slot(&self, workspace: Workspace) -> Arc<Slot> {
        let id = workspace.id.clone();
        let slot = self.make_slot(workspace);
        self.slots.lock().insert(id, slot.clone());
        slot
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        if let Some(slot) = self.slots.lock().get(id) {
            return Ok(slot.clone());
        }
        let workspace = self.store.load(id)?;
        let fresh = self.make_slot(workspace);
        Ok(self.slots.lock().entry(id.to_string()).or_insert(fresh).clone())
    }

    /// Runs `op` with exclusive access to the workspace session. Writes are
    /// persisted (also after a failed operation, which may have applied part
    /// of its work) and broadcast to stream subscribers.
    fn run<T>(&self, id: &str, write: bool, op: impl FnOnce(&mut Studio) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let slot = self.slot(id)?;
        let mut studio = slot.studio.lock();
        if slot.deleted.load(Ordering::SeqCst) {
            return Err(ServiceError::WorkspaceNotFound(id.to_string()));
        }
        let before = studio.workspace().events.len();
        let result = op(&mut studio);
        if !write {
            return result;
        }
        let saved = self.store.save(studio.workspace());
        for event in &studio.workspace().events[before..] {
            let _ = slot.tx.send(StreamItem::Event(event.clone()));
        }
        let marks = mark_entries(&studio);
        let changed = *slot.marks.read() != marks;
        if changed {
            *slot.marks.write() = marks.clone();
            let _ = slot.tx.send(StreamItem::Marks(marks));
        }
        match (result, saved) {
            (Ok(v), Ok(())) => Ok(v),
            (Ok(_), Err(e)) => Err(e),
            (Err(e), Err(save)) => {
                log::error!("could not persist workspace {id}: {save}");
                Err(e)
            }
            (Err(e), Ok(())) => Err(e),
        }
    }

    fn delete(&self, id: &str) -> Result<(), ServiceError> {
        let slot = self.slots.lock().remove(id);
        if let Some(slot) = slot {
            let _guard = slot.studio.lock();
            slot.deleted.store(true, Ordering::SeqCst);
            let _ = slot.tx.send(StreamItem::Deleted);
        }
        self.store.delete(id)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
}

async fn write<T: Send + 'static>(
    state: Arc<AppState>,
    id: String,
    op: impl FnOnce(&mut Studio) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    blocking(move || state.run(&id, true, op)).await
}

async fn read<T: Send + 'static>(
    state: Arc<AppState>,
    id: String,
    op: impl FnOnce(&mut Studio) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    blocking(move || state.run(&id, false, op)).await
}

/// JSON body extractor whose rejections use the structured error body.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ServiceError::BadRequest(e.body_text())),
        }
    }
}

fn resolve(studio: &Studio, reference: &str) -> Result<NodeId, ServiceError> {
    Ok(studio.resolve(reference)?)
}

fn resolve_all(studio: &Studio, references: &[String]) -> Result<Vec<NodeId>, ServiceError> {
    if references.is_empty() {
        return Err(ServiceError::BadRequest("nodeIds must not be empty".into()));
    }
    references.iter().map(|r| resolve(studio, r)).collect()
}

fn parse_direction(s: &str) -> Result<Direction, ServiceError> {
    Direction::parse(s).ok_or_else(|| ServiceError::BadRequest(format!("unknown direction {s:?}; use forward, backward or single")))
}

type WsPath = Path<String>;
type NodePath = Path<(String, String)>;
type ApiResult<T> = Result<Json<T>, ServiceError>;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CreateWorkspace {
    name: String,
    seed: Option<u64>,
    provider_mode: Option<ProviderMode>,
    style: Option<StyleId>,
    default_variations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct UpdateWorkspace {
    name: Option<String>,
    provider_mode: Option<ProviderMode>,
    style: Option<StyleId>,
    default_variations: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct CreateNode {
    content: ArtifactContent,
    position: Option<Position>,
}

#[derive(Debug, Deserialize)]
struct UpdateNode {
    content: Option<ArtifactContent>,
    position: Option<Position>,
}

#[derive(Debug, Serialize)]
struct NodeUpdated {
    node: Node,
    #[serde(skip_serializing_if = "Option::is_none")]
    change: Option<ChangeSet>,
}

#[derive(Debug, Deserialize)]
struct ConnectBody {
    from: String,
    to: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Selection {
    node_ids: Vec<String>,
    guidance: Option<String>,
    n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct GuidanceBody {
    node_ids: Vec<String>,
    mode: GuidanceMode,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NodeIdsBody {
    node_ids: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct IncorporateBody {
    response: String,
}

#[derive(Debug, Deserialize)]
struct ReviseBody {
    instruction: String,
    source: Option<InstructionSource>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PropagateBody {
    node_id: String,
    direction: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PropagateQuery {
    #[serde(default)]
    dry_run: bool,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct StoryboardBody {
    node_ids: Vec<String>,
    guidance: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct StoryboardCreated {
    node_id: NodeId,
    #[serde(flatten)]
    build: StoryboardBuild,
}

#[derive(Debug, Default, Deserialize)]
struct StyleBody {
    style: Option<StyleId>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct LogQuery {
    after: Option<u64>,
    wait_ms: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_workspaces(State(s): State<Arc<AppState>>) -> ApiResult<Vec<WorkspaceSummary>> {
    blocking(move || s.store.list()).await.map(Json)
}

async fn create_workspace(
    State(s): State<Arc<AppState>>,
    Body(body): Body<CreateWorkspace>,
) -> Result<(StatusCode, Json<Workspace>), ServiceError> {
    if body.name.trim().is_empty() {
        return Err(ServiceError::BadRequest("name must not be empty".into()));
    }
    let mut ws = Workspace::new(body.name, body.seed);
    ws.settings.provider_mode = body.provider_mode.unwrap_or(s.sessions.config.mode);
    if let Some(style) = body.style {
        ws.settings.style = style;
    }
    if let Some(n) = body.default_variations {
        ws.settings.default_variations = n.max(1);
    }
    let out = blocking(move || {
        s.store.save(&ws)?;
        s.insert_slot(ws.clone());
        Ok(ws)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_workspace(State(s): State<Arc<AppState>>, Path(ws): WsPath) -> ApiResult<Workspace> {
    read(s, ws, |st| Ok(st.workspace().clone())).await.map(Json)
}

async fn update_workspace(
    State(s): State<Arc<AppState>>,
    Path(ws): WsPath,
    Body(body): Body<UpdateWorkspace>,
) -> ApiResult<Workspace> {
    write(s, ws, move |st| {
        if let Some(name) = body.name {
            st.rename(name);
        }
        let settings = st.settings_mut();
        if let Some(mode) = body.provider_mode {
            settings.provider_mode = mode;
        }
        if let Some(style) = body.style {
            settings.style = style;
        }
        if let Some(n) = body.default_variations {
            settings.default_variations = n.max(1);
        }
        Ok(st.workspace().clone())
    })
    .await
    .map(Json)
}

async fn delete_workspace(State(s): State<Arc<AppState>>, Path(ws): WsPath) -> Result<StatusCode, ServiceError> {
    blocking(move || s.delete(&ws)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_nodes(State(s): State<Arc<AppState>>, Path(ws): WsPath) -> ApiResult<Vec<Node>> {
    read(s, ws, |st| Ok(st.graph().nodes().cloned().collect())).await.map(Json)
}

async fn list_edges(State(s): State<Arc<AppState>>, Path(ws): WsPath) -> ApiResult<Vec<Edge>> {
    read(s, ws, |st| Ok(st.graph().edges().cloned().collect())).await.map(Json)
}

async fn create_node(
    State(s): State<Arc<AppState>>,
    Path(ws): WsPath,
    Body(body): Body<CreateNode>,
) -> Result<(StatusCode, Json<Node>), ServiceError> {
    let node = write(s, ws, move |st| {
        let id = st.add_node(body.content, body.position.unwrap_or(Position::ORIGIN))?;
        Ok(st.graph().node(&id).map_err(storyloom_core::StudioError::from)?.clone())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(node)))
}

async fn get_node(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath) -> ApiResult<Node> {
    read(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.graph().node(&id).map_err(storyloom_core::StudioError::from)?.clone())
    })
    .await
    .map(Json)
}

async fn update_node(
    State(s): State<Arc<AppState>>,
    Path((ws, node)): NodePath,
    Body(body): Body<UpdateNode>,
) -> ApiResult<NodeUpdated> {
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        if let Some(position) = body.position {
            st.move_node(&id, position)?;
        }
        let change = match body.content {
            Some(content) => Some(st.edit_node(&id, content)?),
            None => None,
        };
        let node = st.graph().node(&id).map_err(storyloom_core::StudioError::from)?.clone();
        Ok(NodeUpdated { node, change })
    })
    .await
    .map(Json)
}

async fn delete_node(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath) -> Result<StatusCode, ServiceError> {
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.delete_node(&id)?)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn connect(State(s): State<Arc<AppState>>, Path(ws): WsPath, Body(body): Body<ConnectBody>) -> ApiResult<ConnectResult> {
    write(s, ws, move |st| {
        let from = resolve(st, &body.from)?;
        let to = resolve(st, &body.to)?;
        Ok(st.connect(&from, &to)?)
    })
    .await
    .map(Json)
}

async fn disconnect(State(s): State<Arc<AppState>>, Path(ws): WsPath, Body(body): Body<ConnectBody>) -> ApiResult<Edge> {
    write(s, ws, move |st| {
        let from = resolve(st, &body.from)?;
        let to = resolve(st, &body.to)?;
        Ok(st.disconnect(&from, &to)?)
    })
    .await
    .map(Json)
}

async fn brainstorm(State(s): State<Arc<AppState>>, Path(ws): WsPath, Body(spec): Body<BrainstormSpec>) -> ApiResult<Generated> {
    write(s, ws, move |st| Ok(st.brainstorm(&spec)?)).await.map(Json)
}

async fn generate_more(State(s): State<Arc<AppState>>, Path(ws): WsPath, Body(body): Body<Selection>) -> ApiResult<Generated> {
    write(s, ws, move |st| {
        let ids = resolve_all(st, &body.node_ids)?;
        let n = body.n.unwrap_or(st.workspace().settings.default_variations);
        Ok(st.generate_more(&ids, body.guidance.as_deref(), n)?)
    })
    .await
    .map(Json)
}

async fn generate_next(State(s): State<Arc<AppState>>, Path(ws): WsPath, Body(body): Body<Selection>) -> ApiResult<Generated> {
    write(s, ws, move |st| {
        let ids = resolve_all(st, &body.node_ids)?;
        let n = body.n.unwrap_or(st.workspace().settings.default_variations);
        Ok(st.generate_next(&ids, body.guidance.as_deref(), n)?)
    })
    .await
    .map(Json)
}

async fn guidance(State(s): State<Arc<AppState>>, Path(ws): WsPath, Body(body): Body<GuidanceBody>) -> ApiResult<Vec<String>> {
    read(s, ws, move |st| {
        let ids = resolve_all(st, &body.node_ids)?;
        Ok(st.guidance_suggestions(&ids, body.mode)?)
    })
    .await
    .map(Json)
}

async fn suggestions(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath) -> ApiResult<Vec<RevisionInstruction>> {
    read(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.suggest_revisions(&id)?)
    })
    .await
    .map(Json)
}

async fn revise(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath, Body(body): Body<ReviseBody>) -> ApiResult<ChangeSet> {
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        let instruction = RevisionInstruction {
            text: body.instruction,
            source: body.source.unwrap_or(InstructionSource::UserTyped),
        };
        Ok(st.revise(&id, &instruction)?)
    })
    .await
    .map(Json)
}

async fn node_feedback(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath) -> ApiResult<Vec<FeedbackQuestion>> {
    read(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.feedback_for(&id))
    })
    .await
    .map(Json)
}

async fn generate_node_feedback(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath) -> ApiResult<Vec<FeedbackQuestion>> {
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.generate_feedback(&[id])?)
    })
    .await
    .map(Json)
}

async fn generate_feedback(
    State(s): State<Arc<AppState>>,
    Path(ws): WsPath,
    Body(body): Body<NodeIdsBody>,
) -> ApiResult<Vec<FeedbackQuestion>> {
    write(s, ws, move |st| {
        let ids = resolve_all(st, &body.node_ids)?;
        Ok(st.generate_feedback(&ids)?)
    })
    .await
    .map(Json)
}

async fn incorporate(
    State(s): State<Arc<AppState>>,
    Path((ws, question)): Path<(String, String)>,
    Body(body): Body<IncorporateBody>,
) -> ApiResult<ChangeSet> {
    write(s, ws, move |st| Ok(st.incorporate_feedback(&question, &body.response)?))
        .await
        .map(Json)
}

async fn propagate(
    State(s): State<Arc<AppState>>,
    Path(ws): WsPath,
    Query(q): Query<PropagateQuery>,
    Body(body): Body<PropagateBody>,
) -> ApiResult<PropagateOutcome> {
    let direction = parse_direction(&body.direction)?;
    let op = move |st: &mut Studio| {
        let id = resolve(st, &body.node_id)?;
        Ok(st.propagate(&id, direction, q.dry_run)?)
    };
    if q.dry_run {
        read(s, ws, op).await.map(Json)
    } else {
        write(s, ws, op).await.map(Json)
    }
}

async fn resume(State(s): State<Arc<AppState>>, Path(ws): WsPath, Body(body): Body<PropagateBody>) -> ApiResult<PropagateOutcome> {
    let direction = parse_direction(&body.direction)?;
    write(s, ws, move |st| {
        let id = resolve(st, &body.node_id)?;
        Ok(st.resume(&id, direction)?)
    })
    .await
    .map(Json)
}

async fn build_storyboard(
    State(s): State<Arc<AppState>>,
    Path(ws): WsPath,
    Body(body): Body<StoryboardBody>,
) -> Result<(StatusCode, Json<StoryboardCreated>), ServiceError> {
    let out = write(s, ws, move |st| {
        let ids = resolve_all(st, &body.node_ids)?;
        let (node_id, build) = st.build_storyboard(&ids, body.guidance.as_deref())?;
        Ok(StoryboardCreated { node_id, build })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn regenerate_images(
    State(s): State<Arc<AppState>>,
    Path((ws, node)): NodePath,
    body: Bytes,
) -> ApiResult<StoryboardBuild> {
    let style = if body.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        serde_json::from_slice::<StyleBody>(&body)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?
            .style
    };
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        let style = style.unwrap_or_else(|| st.workspace().settings.style.clone());
        Ok(st.regenerate_images(&id, &style)?)
    })
    .await
    .map(Json)
}

async fn regenerate_frame(State(s): State<Arc<AppState>>, Path((ws, node, frame)): Path<(String, String, usize)>) -> ApiResult<ImageRef> {
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.regenerate_frame_image(&id, frame)?)
    })
    .await
    .map(Json)
}

async fn illustrate(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath) -> ApiResult<ImageRef> {
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.illustrate(&id)?)
    })
    .await
    .map(Json)
}

async fn describe(State(s): State<Arc<AppState>>, Path((ws, node)): NodePath) -> ApiResult<Vec<VisualCharacterDescription>> {
    write(s, ws, move |st| {
        let id = resolve(st, &node)?;
        Ok(st.describe_characters(&id)?)
    })
    .await
    .map(Json)
}

async fn metrics(State(s): State<Arc<AppState>>, Path(ws): WsPath) -> ApiResult<MetricsReport> {
    read(s, ws, |st| Ok(st.metrics())).await.map(Json)
}

async fn export(State(s): State<Arc<AppState>>, Path(ws): WsPath, Query(q): Query<ExportQuery>) -> Result<Response, ServiceError> {
    match q.format.as_deref() {
        None | Some("md") | Some("markdown") => {}
        Some(other) => return Err(ServiceError::BadRequest(format!("unsupported export format {other:?}"))),
    }
    let md = read(s, ws, |st| Ok(export_markdown(st.workspace()))).await?;
    Ok(([(header::CONTENT_TYPE, "text/markdown; charset=utf-8")], md).into_response())
}

async fn events_after(s: Arc<AppState>, ws: String, after: Option<u64>) -> Result<Vec<Event>, ServiceError> {
    read(s, ws, move |st| {
        Ok(st
            .workspace()
            .events
            .iter()
            .filter(|e| after.is_none_or(|a| e.seq > a))
            .cloned()
            .collect())
    })
    .await
}

async fn event_log(State(s): State<Arc<AppState>>, Path(ws): WsPath, Query(q): Query<LogQuery>) -> ApiResult<Vec<Event>> {
    let wait = q.wait_ms.unwrap_or(0).min(MAX_WAIT_MS);
    if wait == 0 {
        return events_after(s, ws, q.after).await.map(Json);
    }
    let slot = {
        let (s, ws) = (s.clone(), ws.clone());
        blocking(move || s.slot(&ws)).await?
    };
    let mut rx = slot.tx.subscribe();
    let events = events_after(s.clone(), ws.clone(), q.after).await?;
    if !events.is_empty() {
        return Ok(Json(events));
    }
    let _ = tokio::time::timeout(Duration::from_millis(wait), rx.recv()).await;
    events_after(s, ws, q.after).await.map(Json)
}

async fn event_stream(
    State(s): State<Arc<AppState>>,
    Path(ws): WsPath,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ServiceError> {
    let slot = blocking(move || s.slot(&ws)).await?;
    let rx = slot.tx.subscribe();
    let initial = StreamItem::Marks(slot.marks.read().clone());
    let first = stream::once(async move { Ok(initial.to_sse()) });
    let rest = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(StreamItem::Deleted) => return Some((Ok(StreamItem::Deleted.to_sse()), rx)),
                Ok(item) => return Some((Ok(item.to_sse()), rx)),
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("event stream subscriber skipped {n} items"),
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(first.chain(rest)).keep_alive(KeepAlive::default()))
}

async fn fallback() -> (StatusCode, Json<ErrorBody>) {
    (
        StatusCode::NOT_FOUND,
        Json(ErrorBody {
            code: "RouteNotFound".into(),
            message: "no such endpoint".into(),
            node_id: None,
        }),
    )
}

pub fn router(state: Arc<AppState>) -> Router {
    let ws = Router::new()
        .route("/", get(get_workspace).patch(update_workspace).delete(delete_workspace))
        .route("/nodes", get(list_nodes).post(create_node))
        .route("/nodes/{node}", get(get_node).put(update_node).delete(delete_node))
        .route("/nodes/{node}/suggestions", get(suggestions))
        .route("/nodes/{node}/revise", post(revise))
        .route("/nodes/{node}/feedback", get(node_feedback).post(generate_node_feedback))
        .route("/nodes/{node}/regenerate-images", post(regenerate_images))
        .route("/nodes/{node}/frames/{frame}/regenerate-image", post(regenerate_frame))
        .route("/nodes/{node}/illustrate", post(illustrate))
        .route("/nodes/{node}/describe-characters", post(describe))
        .route("/edges", get(list_edges))
        .route("/connect", post(connect))
        .route("/disconnect", post(disconnect))
        .route("/brainstorm", post(brainstorm))
        .route("/generate-more", post(generate_more))
        .route("/generate-next", post(generate_next))
        .route("/guidance", post(guidance))
        .route("/feedback", post(generate_feedback))
        .route("/feedback/{question}/incorporate", post(incorporate))
        .route("/propagate", post(propagate))
        .route("/propagate/resume", post(resume))
        .route("/storyboards", post(build_storyboard))
        .route("/metrics", get(metrics))
        .route("/export", get(export))
        .route("/events", get(event_stream))
        .route("/events/log", get(event_log));
    Router::new()
        .route("/health", get(health))
        .route("/api/workspaces", get(list_workspaces).post(create_workspace))
        .nest("/api/workspaces/{ws}", ws)
        .fallback(fallback)
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
