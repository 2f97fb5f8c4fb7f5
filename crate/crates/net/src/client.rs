use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use compshare_core::codec::CompositionId;
use compshare_core::model::{FeatureId, Timestamp, UserId, Version};
use compshare_core::store::Store;
use compshare_protocol::bodies::{ChatMessage, ErrorBody, ErrorCode, RosterEntry};
use compshare_protocol::client::{ClientCore, Incoming};
use compshare_protocol::ids::{Clock, MsgIds, SystemClock};
use compshare_protocol::peer::serve;
use compshare_protocol::{frame, Address, Envelope, Kind, MsgId};
use futures::StreamExt;
use serde::Serialize;
use tokio::io::AsyncWriteExt;
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio_util::codec::FramedRead;

use crate::{EnvelopeCodec, NetError};

/// Answers peer requests (`COMPS_GET`, `FEATURE_GET`, `ATTACHMENT_GET`).
pub trait Responder: Send + Sync + 'static {
    fn respond(&self, request: &Envelope) -> Vec<Envelope>;
}

impl<F> Responder for F
where
    F: Fn(&Envelope) -> Vec<Envelope> + Send + Sync + 'static,
{
    fn respond(&self, request: &Envelope) -> Vec<Envelope> {
        self(request)
    }
}

/// Serves from whatever the store holds at the moment of the request.
#[derive(Debug, Clone)]
pub struct StoreResponder {
    store: Store,
    owner: UserId,
}

impl StoreResponder {
    pub fn new(store: Store, owner: UserId) -> Self {
        Self { store, owner }
    }
}

impl Responder for StoreResponder {
    fn respond(&self, request: &Envelope) -> Vec<Envelope> {
        let loaded = self.store.load_workspace(&self.owner).and_then(|w| Ok((w, self.store.load_catalog()?)));
        match loaded {
            Ok((w, cat)) => serve(&w, &cat, &self.store, request),
            Err(e) => {
                tracing::warn!("cannot serve {}: {e}", request.kind);
                vec![request.reply(Kind::Error, &ErrorBody::new(ErrorCode::NotAvailable, "store unavailable"))]
            }
        }
    }
}

/// Things the client delivers in arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Presence { user: UserId, online: bool, sharing: bool },
    Roster { entries: Vec<RosterEntry> },
    Chat(ChatMessage),
    InstallStarted { composition: CompositionId, source: UserId, downloads: usize },
    Fetched { item: String, bytes: usize },
    Installed { feature: FeatureId, version: Version, source: UserId },
    InstallFinished { composition: CompositionId, ok: bool, detail: String },
    Disconnected { reason: String },
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// `host:port` of the relay.
    pub relay: String,
    pub user: UserId,
    pub token: String,
    pub sharing: bool,
    /// How long to wait for any single reply.
    pub timeout: Duration,
}

impl ClientConfig {
    pub fn new(relay: impl Into<String>, user: UserId, token: impl Into<String>) -> Self {
        Self { relay: relay.into(), user, token: token.into(), sharing: true, timeout: Duration::from_secs(30) }
    }
}

struct Inner {
    me: UserId,
    core: Mutex<ClientCore>,
    out: mpsc::UnboundedSender<Vec<u8>>,
    pending: Mutex<HashMap<MsgId, mpsc::UnboundedSender<Envelope>>>,
    subscribers: Mutex<Vec<mpsc::UnboundedSender<Event>>>,
    connected: AtomicBool,
    timeout: Duration,
    clock: Box<dyn Clock>,
    responder: Arc<dyn Responder>,
}

/// A live, authenticated session with the relay. Cheap to clone and usable
/// from any thread.
#[derive(Clone)]
pub struct Client {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Client {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Client").field("me", &self.inner.me).field("connected", &self.is_connected()).finish()
    }
}

impl Client {
    /// Connects, authenticates and starts answering peer requests with `responder`.
    pub async fn connect(cfg: &ClientConfig, responder: Arc<dyn Responder>) -> Result<Client, NetError> {
        let stream = tokio::time::timeout(cfg.timeout, TcpStream::connect(&cfg.relay))
            .await
            .map_err(|_| NetError::Timeout(format!("relay {}", cfg.relay)))??;
        let _ = stream.set_nodelay(true);
        let (rd, wr) = stream.into_split();
        let (out, out_rx) = mpsc::unbounded_channel();
        tokio::spawn(write_loop(wr, out_rx));
        let inner = Arc::new(Inner {
            me: cfg.user.clone(),
            core: Mutex::new(ClientCore::new(cfg.user.clone(), Box::new(MsgIds::from_entropy()))),
            out,
            pending: Mutex::new(HashMap::new()),
            subscribers: Mutex::new(Vec::new()),
            connected: AtomicBool::new(true),
            timeout: cfg.timeout,
            clock: Box::new(SystemClock),
            responder,
        });
        let client = Client { inner };
        tokio::spawn(read_loop(client.inner.clone(), rd));

        let hello = client.core().hello(&cfg.token, cfg.sharing);
        let reply = client.call(hello, "HELLO_OK").await?;
        match reply.kind {
            Kind::HelloOk => Ok(client),
            Kind::Error => Err(NetError::Rejected(reply.body()?)),
            k => Err(NetError::Protocol(compshare_protocol::ProtocolError::MalformedEnvelope(format!("{k} in reply to HELLO")))),
        }
    }

    pub fn me(&self) -> &UserId {
        &self.inner.me
    }

    pub fn is_connected(&self) -> bool {
        self.inner.connected.load(Ordering::SeqCst)
    }

    pub fn now(&self) -> Timestamp {
        self.inner.clock.now()
    }

    /// A new stream receiving every event from now on.
    pub fn subscribe(&self) -> mpsc::UnboundedReceiver<Event> {
        let (tx, rx) = mpsc::unbounded_channel();
        self.inner.subscribers.lock().expect("subscribers").push(tx);
        rx
    }

    /// Publishes an event to every subscriber, in line with relay traffic.
    pub fn emit(&self, e: Event) {
        self.inner.emit(e);
    }

    /// Current roster view, as maintained from ROSTER and PRESENCE.
    pub fn roster_view(&self) -> Vec<RosterEntry> {
        self.core().roster().entries()
    }

    /// Fetches the roster from the relay.
    pub async fn roster(&self) -> Result<Vec<RosterEntry>, NetError> {
        let req = self.core().roster_get();
        let reply = self.call(req, "ROSTER").await?;
        match reply.kind {
            Kind::Roster => Ok(reply.body::<compshare_protocol::bodies::Roster>()?.entries),
            _ => Err(remote_error(&reply)),
        }
    }

    /// Announces a sharing change to watchers.
    pub async fn set_sharing(&self, sharing: bool) -> Result<(), NetError> {
        let e = self.core().presence(sharing);
        self.send(e)?;
        self.roster().await.map(|_| ())
    }

    /// Sends a chat line. Returns once the relay has routed it, failing if
    /// the recipient was offline.
    pub async fn chat(&self, to: &UserId, text: &str) -> Result<ChatMessage, NetError> {
        let now = self.now();
        let e = self.core().chat(to, text, now)?;
        let id = e.msg_id;
        let mut rx = self.register([id]);
        self.send(e)?;
        // the relay answers in order, so any error for the chat precedes this
        let barrier = self.roster().await;
        self.finish([id]);
        barrier?;
        if let Ok(reply) = rx.try_recv() {
            return Err(remote_error(&reply));
        }
        Ok(ChatMessage { from: self.me().clone(), to: to.clone(), text: text.to_string(), sent_at: now })
    }

    /// Sends a tracked request to a peer and waits for its first reply.
    pub async fn request<B: Serialize>(&self, kind: Kind, to: &UserId, body: &B) -> Result<Envelope, NetError> {
        let e = self.core().request(kind, to, body);
        let reply = self.call(e, kind.as_str()).await?;
        match reply.kind {
            Kind::Error => Err(remote_error(&reply)),
            _ => Ok(reply),
        }
    }

    /// Sends a tracked request and returns every reply sharing its id.
    /// The caller must call [`Client::finish`] when done.
    pub fn stream<B: Serialize>(&self, kind: Kind, to: &UserId, body: &B) -> Result<(MsgId, mpsc::UnboundedReceiver<Envelope>), NetError> {
        let e = self.core().request(kind, to, body);
        let id = e.msg_id;
        let rx = self.register([id]);
        self.send(e)?;
        Ok((id, rx))
    }

    /// Sends pre-built requests whose replies all arrive on one channel.
    pub fn send_requests(&self, reqs: Vec<Envelope>) -> Result<mpsc::UnboundedReceiver<Envelope>, NetError> {
        let ids: Vec<MsgId> = reqs.iter().map(|e| e.msg_id).collect();
        self.core().expect_replies(ids.iter().copied());
        let rx = self.register(ids);
        for e in reqs {
            self.send(e)?;
        }
        Ok(rx)
    }

    /// Stops routing replies for `ids`.
    pub fn finish(&self, ids: impl IntoIterator<Item = MsgId>) {
        let mut core = self.core();
        let mut pending = self.inner.pending.lock().expect("pending");
        for id in ids {
            core.complete(&id);
            pending.remove(&id);
        }
    }

    /// Runs `f` with the protocol state machine, e.g. to draw message ids.
    pub fn with_core<R>(&self, f: impl FnOnce(&mut ClientCore) -> R) -> R {
        f(&mut self.core())
    }

    /// Closes the connection. Pending requests fail with `Disconnected`.
    pub fn close(&self) {
        self.inner.connected.store(false, Ordering::SeqCst);
        // an empty frame tells the writer to shut the socket
        let _ = self.inner.out.send(Vec::new());
    }

    fn core(&self) -> std::sync::MutexGuard<'_, ClientCore> {
        self.inner.core.lock().expect("client core")
    }

    fn send(&self, e: Envelope) -> Result<(), NetError> {
        if !self.is_connected() {
            return Err(NetError::Disconnected);
        }
        let bytes = frame(&e)?;
        self.inner.out.send(bytes).map_err(|_| NetError::Disconnected)
    }

    fn register(&self, ids: impl IntoIterator<Item = MsgId>) -> mpsc::UnboundedReceiver<Envelope> {
        let (tx, rx) = mpsc::unbounded_channel();
        let mut pending = self.inner.pending.lock().expect("pending");
        for id in ids {
            pending.insert(id, tx.clone());
        }
        rx
    }

    async fn call(&self, e: Envelope, what: &str) -> Result<Envelope, NetError> {
        let id = e.msg_id;
        let mut rx = self.register([id]);
        let sent = self.send(e);
        let reply = match sent {
            Ok(()) => tokio::time::timeout(self.inner.timeout, rx.recv()).await,
            Err(err) => {
                self.finish([id]);
                return Err(err);
            }
        };
        self.finish([id]);
        match reply {
            Ok(Some(r)) => Ok(r),
            Ok(None) => Err(NetError::Disconnected),
            Err(_) => Err(NetError::Timeout(what.to_string())),
        }
    }

    pub(crate) fn timeout(&self) -> Duration {
        self.inner.timeout
    }
}

impl Inner {
    fn emit(&self, e: Event) {
        self.subscribers.lock().expect("subscribers").retain(|s| s.send(e.clone()).is_ok());
    }

    fn route(&self, e: Envelope) {
        if let Some(tx) = self.pending.lock().expect("pending").get(&e.msg_id) {
            let _ = tx.send(e);
        }
    }

    fn send_frame(&self, e: &Envelope) {
        match frame(e) {
            Ok(bytes) => {
                let _ = self.out.send(bytes);
            }
            Err(err) => tracing::warn!("cannot send {}: {err}", e.kind),
        }
    }

    fn on_envelope(&self, e: Envelope) {
        let copy = e.clone();
        let incoming = self.core.lock().expect("client core").incoming(e);
        match incoming {
            Incoming::Authenticated | Incoming::RelayError(_) => self.route(copy),
            Incoming::Presence { user, online, sharing, changed } => {
                if changed {
                    self.emit(Event::Presence { user, online, sharing });
                }
            }
            Incoming::Roster(entries) => {
                self.route(copy);
                self.emit(Event::Roster { entries });
            }
            Incoming::Chat(m) => self.emit(Event::Chat(m)),
            Incoming::Request(req) => {
                let replies = self.responder.respond(&req);
                if self.connected.load(Ordering::SeqCst) {
                    for r in &replies {
                        self.send_frame(r);
                    }
                }
            }
            Incoming::Reply(rep) => self.route(rep),
            Incoming::Kicked(b) => {
                self.route(copy);
                self.connected.store(false, Ordering::SeqCst);
                self.emit(Event::Disconnected { reason: b.code.to_string() });
            }
            Incoming::Unsolicited(u) => tracing::debug!("ignoring unsolicited {} from {}", u.kind, u.from),
        }
    }
}

async fn read_loop(inner: Arc<Inner>, rd: OwnedReadHalf) {
    let mut frames = FramedRead::new(rd, EnvelopeCodec);
    let reason = loop {
        match frames.next().await {
            Some(Ok(e)) => inner.on_envelope(e),
            Some(Err(err)) => break err.to_string(),
            None => break "connection closed".to_string(),
        }
    };
    let was = inner.connected.swap(false, Ordering::SeqCst);
    inner.core.lock().expect("client core").disconnected();
    inner.pending.lock().expect("pending").clear();
    if was {
        inner.emit(Event::Disconnected { reason });
    }
    let _ = inner.out.send(Vec::new());
}

async fn write_loop(mut wr: OwnedWriteHalf, mut rx: mpsc::UnboundedReceiver<Vec<u8>>) {
    while let Some(bytes) = rx.recv().await {
        if bytes.is_empty() || wr.write_all(&bytes).await.is_err() {
            break;
        }
    }
    let _ = wr.shutdown().await;
}

pub(crate) fn remote_error(reply: &Envelope) -> NetError {
    match reply.body::<ErrorBody>() {
        Ok(b) => {
            let peer = match &reply.from {
                Address::Relay => "relay".to_string(),
                a => a.to_string(),
            };
            NetError::Remote { peer, code: b.code, detail: b.detail }
        }
        Err(e) => NetError::Protocol(e),
    }
}

