use std::collections::BTreeSet;
use std::sync::Arc;

use compshare_core::codec::CompositionId;
use compshare_core::model::{Catalog, Composition, Feature, FeatureId, Timestamp, UserId};
use compshare_core::resolver::{diff, InstallEvent, InstallPlan, UpgradePolicy};
use compshare_core::store::{Store, StoreError};
use compshare_protocol::bodies::{Attachment, AttachmentGet, ChatMessage, Comps, Empty, RosterEntry};
use compshare_protocol::install::{Fetched, InstallError, InstallJob};
use compshare_protocol::peer::{decode_comps, AttachmentAssembler};
use compshare_protocol::Kind;
use tokio::sync::Mutex;

use crate::client::remote_error;
use crate::{Client, ClientConfig, Event, NetError, StoreResponder};

/// A contact's compositions, live or from the offline cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Browse {
    pub contact: UserId,
    pub compositions: Vec<Composition>,
    pub features: Vec<Feature>,
    /// Set when the contact was unreachable and this came from the cache.
    pub cached_at: Option<Timestamp>,
}

impl Browse {
    /// Looks up a composition by full id, unique id prefix, or exact name.
    pub fn find(&self, key: &str) -> Result<&Composition, NetError> {
        let hits: Vec<&Composition> = self
            .compositions
            .iter()
            .filter(|c| c.id().to_string().starts_with(key) || c.name() == key)
            .collect();
        match hits.as_slice() {
            [c] => Ok(c),
            [] => Err(NetError::NotFound(format!("{} has no composition {key:?}", self.contact))),
            _ => Err(NetError::NotFound(format!("{key:?} matches {} compositions of {}", hits.len(), self.contact))),
        }
    }

    /// The local catalog extended with this contact's feature metadata.
    pub fn planning_catalog(&self, local: &Catalog) -> Catalog {
        let mut cat = local.clone();
        for f in &self.features {
            cat.merge_metadata(f.clone());
        }
        cat
    }
}

/// The cached browse result for `contact`, if any.
pub fn cached_browse(store: &Store, contact: &UserId) -> Result<Option<Browse>, NetError> {
    Ok(store.cache_get(contact)?.map(|e| Browse {
        contact: e.contact,
        compositions: e.compositions,
        features: e.features,
        cached_at: Some(e.fetched_at),
    }))
}

/// Finds a composition in the workspace or, failing that, in any contact's
/// cache. The second element names the contact it came from.
pub fn lookup(store: &Store, me: &UserId, id: &CompositionId) -> Result<Option<(Composition, Option<UserId>)>, NetError> {
    let w = store.load_workspace(me)?;
    if let Some(c) = w.composition(id) {
        return Ok(Some((c.clone(), None)));
    }
    for contact in store.cached_contacts()? {
        if let Some(e) = store.cache_get(&contact)? {
            if let Some(c) = e.compositions.into_iter().find(|c| c.id() == id) {
                return Ok(Some((c, Some(contact))));
            }
        }
    }
    Ok(None)
}

/// A computed plan together with what it was computed from.
#[derive(Debug, Clone)]
pub struct PlanView {
    pub plan: InstallPlan,
    pub composition: Composition,
    pub catalog: Catalog,
    pub cached_at: Option<Timestamp>,
}

/// A client bound to a local store: everything a user does in one place.
#[derive(Debug)]
pub struct Session {
    client: Client,
    store: Store,
    writes: Mutex<()>,
}

impl Session {
    /// Connects with the sharing flag stored in the workspace and answers
    /// peers from the store.
    pub async fn open(cfg: &ClientConfig, store: Store) -> Result<Session, NetError> {
        let w = store.load_workspace(&cfg.user)?;
        let mut cfg = cfg.clone();
        cfg.sharing = w.sharing_enabled();
        let responder = Arc::new(StoreResponder::new(store.clone(), cfg.user.clone()));
        let client = Client::connect(&cfg, responder).await?;
        client.roster().await?;
        Ok(Session { client, store, writes: Mutex::new(()) })
    }

    pub fn client(&self) -> &Client {
        &self.client
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn me(&self) -> &UserId {
        self.client.me()
    }

    pub async fn contacts(&self) -> Result<Vec<RosterEntry>, NetError> {
        self.client.roster().await
    }

    /// Fetches a contact's compositions and refreshes the cache, falling back
    /// to the cache when the contact cannot be reached.
    pub async fn browse(&self, contact: &UserId) -> Result<Browse, NetError> {
        match self.browse_live(contact).await {
            Ok(b) => Ok(b),
            Err(e) if e.is_unreachable() => cached_browse(&self.store, contact)?.ok_or(e),
            Err(e) => Err(e),
        }
    }

    async fn browse_live(&self, contact: &UserId) -> Result<Browse, NetError> {
        let reply = self.client.request(Kind::CompsGet, contact, &Empty {}).await?;
        let comps: Comps = reply.body()?;
        let compositions = decode_comps(&comps)?;
        let fetched_at = self.client.now();
        {
            let _w = self.writes.lock().await;
            match self.store.lock() {
                Ok(writer) => match writer.cache_put(contact, &compositions, &comps.features, fetched_at) {
                    Ok(()) | Err(StoreError::StaleCacheWrite { .. }) => {}
                    Err(e) => return Err(e.into()),
                },
                Err(StoreError::LockHeld) => tracing::warn!("store busy, not caching {contact}"),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Browse { contact: contact.clone(), compositions, features: comps.features, cached_at: None })
    }

    /// Screenshot bytes for a browsed composition, fetched once and kept.
    pub async fn screenshot(&self, contact: &UserId, c: &Composition) -> Result<Arc<[u8]>, NetError> {
        if let Some(b) = self.store.get_blob(c.screenshot())? {
            return Ok(b);
        }
        let (id, mut rx) = self.client.stream(Kind::AttachmentGet, contact, &AttachmentGet { digest: *c.screenshot() })?;
        let mut asm = AttachmentAssembler::new(*c.screenshot());
        let result = loop {
            let next = tokio::time::timeout(self.client.timeout(), rx.recv()).await;
            let e = match next {
                Ok(Some(e)) => e,
                Ok(None) => break Err(NetError::Disconnected),
                Err(_) => break Err(NetError::Timeout("ATTACHMENT".into())),
            };
            if e.kind == Kind::Error {
                break Err(remote_error(&e));
            }
            match e.body::<Attachment>().map_err(NetError::from).and_then(|a| Ok(asm.push(&a)?)) {
                Ok(Some(bytes)) => break Ok(bytes),
                Ok(None) => {}
                Err(err) => break Err(err),
            }
        };
        self.client.finish([id]);
        let bytes: Arc<[u8]> = result?.into();
        let _w = self.writes.lock().await;
        self.store.lock()?.put_blob(&bytes)?;
        Ok(bytes)
    }

    /// Classifies a contact's composition against the local workspace.
    pub async fn plan(
        &self,
        contact: &UserId,
        key: &str,
        select: Option<&BTreeSet<FeatureId>>,
        with_composition: bool,
    ) -> Result<PlanView, NetError> {
        let b = self.browse(contact).await?;
        let c = b.find(key)?.clone();
        let w = self.store.load_workspace(self.me())?;
        let catalog = b.planning_catalog(&self.store.load_catalog()?);
        let plan = diff(&c, select, with_composition, &w, &catalog)?;
        Ok(PlanView { plan, composition: c, catalog, cached_at: b.cached_at })
    }

    /// Plans, downloads and applies, all or nothing. Progress goes out as events.
    pub async fn install(
        &self,
        contact: &UserId,
        key: &str,
        select: Option<&BTreeSet<FeatureId>>,
        with_composition: bool,
        policy: UpgradePolicy,
    ) -> Result<Vec<InstallEvent>, NetError> {
        let view = self.plan(contact, key, select, with_composition).await?;
        let _w = self.writes.lock().await;
        let writer = self.store.lock()?;
        let composition = *view.composition.id();
        let result = self.run_install(view, policy, &writer).await;
        let (ok, detail) = match &result {
            Ok(events) => (true, format!("{} feature(s) installed", events.len())),
            Err(e) => (false, e.to_string()),
        };
        self.client.emit(Event::InstallFinished { composition, ok, detail });
        result
    }

    async fn run_install(
        &self,
        view: PlanView,
        policy: UpgradePolicy,
        writer: &compshare_core::store::StoreWriter<'_>,
    ) -> Result<Vec<InstallEvent>, NetError> {
        let w = self.store.load_workspace(self.me())?;
        let source = view.plan.source.clone();
        let composition = *view.composition.id();
        let store = &self.store;
        let (mut job, reqs) = self.client.with_core(|core| {
            let me = core.me().clone();
            InstallJob::start(me, view.plan, view.composition, &w, view.catalog, |d| store.has_blob(d), policy, core.ids())
        })?;
        self.client.emit(Event::InstallStarted { composition, source: source.clone(), downloads: reqs.len() });
        if !reqs.is_empty() {
            let mut events = self.client.subscribe();
            let ids: Vec<_> = reqs.iter().map(|e| e.msg_id).collect();
            let mut rx = self.client.send_requests(reqs)?;
            let outcome = self.pump(&mut job, &mut rx, &mut events, &source).await;
            self.client.finish(ids);
            outcome?;
        }
        let done = job.finish(&w)?;
        if let Some(shot) = &done.screenshot {
            writer.put_blob(shot)?;
        }
        writer.save_catalog(&done.catalog)?;
        writer.save_workspace(&done.applied.workspace)?;
        for e in &done.applied.events {
            self.client.emit(Event::Installed { feature: e.feature.clone(), version: e.version, source: e.source.clone() });
        }
        Ok(done.applied.events)
    }

    async fn pump(
        &self,
        job: &mut InstallJob,
        rx: &mut tokio::sync::mpsc::UnboundedReceiver<compshare_protocol::Envelope>,
        events: &mut tokio::sync::mpsc::UnboundedReceiver<Event>,
        source: &UserId,
    ) -> Result<(), NetError> {
        while !job.is_ready() {
            let deadline = tokio::time::sleep(self.client.timeout());
            tokio::select! {
                e = rx.recv() => {
                    let Some(e) = e else {
                        return Err(InstallError::Interrupted("connection closed".into()).into());
                    };
                    match job.on_envelope(&e)? {
                        Some(Fetched::Payload { id, version, size }) => {
                            self.client.emit(Event::Fetched { item: format!("{id} {version}"), bytes: size });
                        }
                        Some(Fetched::Screenshot { digest, size }) => {
                            self.client.emit(Event::Fetched { item: format!("screenshot {digest}"), bytes: size });
                        }
                        None => {}
                    }
                }
                ev = events.recv() => match ev {
                    Some(Event::Presence { user, online: false, .. }) if &user == source => {
                        return Err(InstallError::Interrupted(format!("{user} went offline")).into());
                    }
                    Some(Event::Disconnected { reason }) => return Err(InstallError::Interrupted(reason).into()),
                    Some(_) => {}
                    None => return Err(NetError::Disconnected),
                },
                _ = deadline => return Err(NetError::Timeout("install downloads".into())),
            }
        }
        Ok(())
    }

    /// Turns sharing on or off, persists it and tells watchers.
    pub async fn share(&self, enabled: bool) -> Result<bool, NetError> {
        {
            let _w = self.writes.lock().await;
            let writer = self.store.lock()?;
            let mut w = self.store.load_workspace(self.me())?;
            w.set_sharing(enabled);
            writer.save_workspace(&w)?;
        }
        self.client.set_sharing(enabled).await?;
        Ok(enabled)
    }

    pub async fn chat(&self, to: &UserId, text: &str) -> Result<ChatMessage, NetError> {
        self.client.chat(to, text).await
    }

    /// A composition known locally or from any cached contact.
    pub fn lookup(&self, id: &CompositionId) -> Result<Option<(Composition, Option<UserId>)>, NetError> {
        lookup(&self.store, self.me(), id)
    }

    pub fn close(&self) {
        self.client.close();
    }
}
