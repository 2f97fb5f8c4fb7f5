//! Local HTTP and WebSocket API over a [`Session`], for the web UI.
//!
//! The daemon binds to loopback only and has no authentication: it serves
//! the single user whose store it was started with. Every response body is
//! a canonical JSON document produced from a library result.

use std::collections::BTreeSet;
use std::net::{Ipv4Addr, SocketAddr};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use compshare_core::codec::{self, serialize_composition, CompositionId};
use compshare_core::model::{Catalog, Composition, FeatureId, UserId};
use compshare_core::preview::annotation_list;
use compshare_core::resolver::UpgradePolicy;
use compshare_core::store::Store;
use compshare_net::{cached_browse, lookup, Browse, ErrorClass, NetError, Session};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const DEFAULT_PORT: u16 = 7478;

const INDEX: &str = include_str!("../static/index.html");

/// Shared state behind every handler.
pub struct Daemon {
    store: Store,
    me: UserId,
    session: Option<Arc<Session>>,
}

impl Daemon {
    /// `session` is `None` when the relay could not be reached; networked
    /// endpoints then answer 503.
    pub fn new(store: Store, me: UserId, session: Option<Session>) -> Self {
        Self { store, me, session: session.map(Arc::new) }
    }

    pub fn session(&self) -> Option<&Arc<Session>> {
        self.session.as_ref()
    }

    fn live(&self) -> Result<&Arc<Session>, ApiError> {
        match &self.session {
            Some(s) if s.client().is_connected() => Ok(s),
            _ => Err(ApiError::disconnected()),
        }
    }

    fn catalog_with_cached_names(&self) -> Result<Catalog, ApiError> {
        let mut cat = self.store.load_catalog().map_err(NetError::from)?;
        for contact in self.store.cached_contacts().map_err(NetError::from)? {
            if let Some(b) = cached_browse(&self.store, &contact)? {
                cat = b.planning_catalog(&cat);
            }
        }
        Ok(cat)
    }
}

/// An error response: status plus `{"error": kind, "detail": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: String,
    detail: String,
}

impl ApiError {
    fn bad_request(detail: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, kind: "malformed".into(), detail: detail.into() }
    }

    fn not_found(detail: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, kind: "not_found".into(), detail: detail.into() }
    }

    fn disconnected() -> Self {
        Self { status: StatusCode::SERVICE_UNAVAILABLE, kind: "disconnected".into(), detail: "not connected to the relay".into() }
    }
}

impl From<NetError> for ApiError {
    fn from(e: NetError) -> Self {
        let (status, kind) = match e.class() {
            ErrorClass::Usage => (StatusCode::BAD_REQUEST, "malformed"),
            ErrorClass::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            ErrorClass::Conflict => (StatusCode::CONFLICT, "conflict"),
            ErrorClass::Network => (StatusCode::SERVICE_UNAVAILABLE, "disconnected"),
            ErrorClass::Corrupt => (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_store"),
        };
        let kind = match &e {
            NetError::Remote { code, .. } => code.to_string(),
            _ => kind.to_string(),
        };
        Self { status, kind, detail: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut r = canonical(&json!({ "error": self.kind, "detail": self.detail }));
        *r.status_mut() = self.status;
        r
    }
}

type ApiResult = Result<Response, ApiError>;

fn canonical<T: Serialize + ?Sized>(v: &T) -> Response {
    match codec::to_canonical(v) {
        Ok(doc) => ([(header::CONTENT_TYPE, "application/json")], doc.into_bytes()).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn parse_user(s: &str) -> Result<UserId, ApiError> {
    UserId::new(s).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn parse_id(s: &str) -> Result<CompositionId, ApiError> {
    s.parse().map_err(|_| ApiError::bad_request(format!("invalid composition id {s:?}")))
}

/// The routes, ready to be served or driven directly in tests.
pub fn router(daemon: Arc<Daemon>) -> Router {
    Router::new()
        .route("/", get(|| async { Html(INDEX) }))
        .route("/contacts", get(contacts))
        .route("/contacts/{user}/compositions", get(contact_compositions))
        .route("/compositions/{id}", get(composition))
        .route("/compositions/{id}/screenshot", get(screenshot))
        .route("/compositions/{id}/annotations", get(annotations))
        .route("/plan", post(plan))
        .route("/install", post(install))
        .route("/share", post(share))
        .route("/chat", post(chat))
        .route("/events", get(events))
        .with_state(daemon)
}

/// Serves on `127.0.0.1:port` until the task is dropped.
pub async fn serve(daemon: Arc<Daemon>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, port))).await?;
    serve_listener(daemon, listener).await
}

pub async fn serve_listener(daemon: Arc<Daemon>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    tracing::info!("daemon listening on {}", listener.local_addr()?);
    axum::serve(listener, router(daemon)).await
}

async fn contacts(State(d): State<Arc<Daemon>>) -> ApiResult {
    Ok(canonical(&d.live()?.contacts().await?))
}

/// What the composition list shows per entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionSummary {
    pub id: CompositionId,
    pub name: String,
    pub created_at: i64,
    pub features: usize,
    pub cached: bool,
    pub cached_at: Option<i64>,
}

impl CompositionSummary {
    pub fn of(c: &Composition, b: &Browse) -> Self {
        Self {
            id: *c.id(),
            name: c.name().to_string(),
            created_at: c.created_at().0,
            features: c.feature_refs().len(),
            cached: b.cached_at.is_some(),
            cached_at: b.cached_at.map(|t| t.0),
        }
    }
}

async fn contact_compositions(State(d): State<Arc<Daemon>>, Path(user): Path<String>) -> ApiResult {
    let user = parse_user(&user)?;
    let b = match d.live() {
        Ok(s) => s.browse(&user).await?,
        Err(e) => cached_browse(&d.store, &user)?.ok_or(e)?,
    };
    let list: Vec<CompositionSummary> = b.compositions.iter().map(|c| CompositionSummary::of(c, &b)).collect();
    Ok(canonical(&list))
}

fn find(d: &Daemon, id: &str) -> Result<(Composition, Option<UserId>), ApiError> {
    let id = parse_id(id)?;
    lookup(&d.store, &d.me, &id)?.ok_or_else(|| ApiError::not_found(format!("unknown composition {id}")))
}

async fn composition(State(d): State<Arc<Daemon>>, Path(id): Path<String>) -> ApiResult {
    let (c, _) = find(&d, &id)?;
    let doc = serialize_composition(&c);
    Ok(([(header::CONTENT_TYPE, "application/json")], doc.into_bytes()).into_response())
}

async fn screenshot(State(d): State<Arc<Daemon>>, Path(id): Path<String>) -> ApiResult {
    let (c, owner) = find(&d, &id)?;
    let bytes = match (d.store.get_blob(c.screenshot()).map_err(NetError::from)?, owner) {
        (Some(b), _) => b,
        (None, Some(contact)) => d.live()?.screenshot(&contact, &c).await?,
        (None, None) => return Err(ApiError::not_found("screenshot missing")),
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes.to_vec()).into_response())
}

async fn annotations(State(d): State<Arc<Daemon>>, Path(id): Path<String>) -> ApiResult {
    let (c, _) = find(&d, &id)?;
    Ok(canonical(&annotation_list(&c, &d.catalog_with_cached_names()?)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    user: String,
    comp_id: String,
    #[serde(default)]
    select: Vec<FeatureId>,
    #[serde(default = "yes")]
    with_composition: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstallRequest {
    user: String,
    comp_id: String,
    #[serde(default)]
    select: Vec<FeatureId>,
    #[serde(default = "yes")]
    with_composition: bool,
    #[serde(default)]
    force: bool,
}

fn yes() -> bool {
    true
}

/// An empty selection means every ref of the composition.
fn selection(select: Vec<FeatureId>) -> Option<BTreeSet<FeatureId>> {
    (!select.is_empty()).then(|| select.into_iter().collect())
}

async fn plan(State(d): State<Arc<Daemon>>, body: Bytes) -> ApiResult {
    let req: PlanRequest = parse_body(&body)?;
    let user = parse_user(&req.user)?;
    let s = d.live()?;
    let view = s.plan(&user, &req.comp_id, selection(req.select).as_ref(), req.with_composition).await?;
    Ok(canonical(&view.plan))
}

async fn install(State(d): State<Arc<Daemon>>, body: Bytes) -> ApiResult {
    let req: InstallRequest = parse_body(&body)?;
    let user = parse_user(&req.user)?;
    let policy = if req.force { UpgradePolicy::Force } else { UpgradePolicy::Refuse };
    let s = d.live()?;
    let events = s.install(&user, &req.comp_id, selection(req.select).as_ref(), req.with_composition, policy).await?;
    Ok(canonical(&json!({ "events": events })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShareRequest {
    enabled: bool,
}

async fn share(State(d): State<Arc<Daemon>>, body: Bytes) -> ApiResult {
    let req: ShareRequest = parse_body(&body)?;
    let enabled = d.live()?.share(req.enabled).await?;
    Ok(canonical(&json!({ "sharing": enabled })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    to: String,
    text: String,
}

async fn chat(State(d): State<Arc<Daemon>>, body: Bytes) -> ApiResult {
    let req: ChatRequest = parse_body(&body)?;
    let to = parse_user(&req.to)?;
    Ok(canonical(&d.live()?.chat(&to, &req.text).await?))
}

async fn events(State(d): State<Arc<Daemon>>, ws: WebSocketUpgrade) -> ApiResult {
    let s = d.live()?.clone();
    Ok(ws.on_upgrade(move |socket| push_events(socket, s)))
}

async fn push_events(mut socket: WebSocket, s: Arc<Session>) {
    let mut rx = s.client().subscribe();
    loop {
        tokio::select! {
            e = rx.recv() => {
                let Some(e) = e else { break };
                let Ok(doc) = codec::to_canonical(&e) else { continue };
                if socket.send(Message::Text(doc.as_str().to_string().into())).await.is_err() {
                    break;
                }
            }
            m = socket.recv() => match m {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
