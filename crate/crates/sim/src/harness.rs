//! The event loop. Every hop (peer to relay, relay to peer) takes one virtual
//! millisecond; events at equal times run script actions first, then in
//! scheduling order.

use std::collections::{BTreeMap, BTreeSet};

use compshare_core::codec::{CompositionId, Digest};
use compshare_core::model::{
    Catalog, Composition, Feature, FeatureId, Timestamp, UserId, Workspace, MICROS,
};
use compshare_core::preview::{annotation_list, hit_test};
use compshare_core::resolver::{diff, InstallEvent, InstallPlan, UpgradePolicy};
use compshare_core::store::MemoryBlobs;
use compshare_protocol::bodies::{Attachment, Empty, ErrorBody, RosterEntry};
use compshare_protocol::client::{ClientCore, Incoming};
use compshare_protocol::ids::MsgIds;
use compshare_protocol::install::{Fetched, InstallError, InstallJob};
use compshare_protocol::peer::{decode_comps, serve, AttachmentAssembler};
use compshare_protocol::relay::{Action as RelayAction, ConnId, Relay, Rosters, UserTable};
use compshare_protocol::{Envelope, Kind, MsgId};
use thiserror::Error;

use crate::script::{Action, PeerSetup, Script, TimedAction};

const MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("bad script: {0}")]
    BadScript(String),
    #[error("scenario deadlock at t={time}: {pending} install job(s) still waiting")]
    ScenarioDeadlock { time: u64, pending: usize },
}

/// Compositions and feature metadata last received from a contact.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Browsed {
    pub compositions: Vec<Composition>,
    pub features: Vec<Feature>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstallRecord {
    pub source: UserId,
    pub composition: CompositionId,
    pub plan: InstallPlan,
    pub before: Workspace,
    pub result: Result<Vec<InstallEvent>, String>,
}

/// Final state of one simulated peer.
#[derive(Debug, Clone)]
pub struct PeerReport {
    pub workspace: Workspace,
    pub catalog: Catalog,
    pub blobs: MemoryBlobs,
    pub online: bool,
    pub roster: Vec<RosterEntry>,
    pub browsed: BTreeMap<UserId, Browsed>,
    pub installs: Vec<InstallRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sent {
    pub time: u64,
    pub from: UserId,
    pub sharing: bool,
    pub envelope: Envelope,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivered {
    pub time: u64,
    pub to: UserId,
    pub envelope: Envelope,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub transcript: Vec<String>,
    pub peers: BTreeMap<UserId, PeerReport>,
    /// Relay ground-truth rosters at the end, for every configured user.
    pub truth: BTreeMap<UserId, Vec<RosterEntry>>,
    pub sent: Vec<Sent>,
    pub delivered: Vec<Delivered>,
}

impl Outcome {
    pub fn transcript_text(&self) -> String {
        self.transcript.iter().map(|l| format!("{l}\n")).collect()
    }
}

pub fn run_scenario(script: &Script) -> Result<Outcome, SimError> {
    let mut sim = Sim::new(script)?;
    sim.run()?;
    Ok(sim.finish())
}

enum Event {
    Script(TimedAction),
    ToRelay(ConnId, Envelope),
    ToPeer(ConnId, Envelope),
    PeerClosed(ConnId),
    RelayClosed(ConnId),
}

#[derive(Default)]
struct Effects {
    out: Vec<Envelope>,
    notes: Vec<String>,
    hang_up: Option<ConnId>,
}

impl Effects {
    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

struct Peer {
    token: String,
    core: ClientCore,
    conn: Option<ConnId>,
    workspace: Workspace,
    catalog: Catalog,
    blobs: MemoryBlobs,
    browsed: BTreeMap<UserId, Browsed>,
    comps_requests: BTreeMap<MsgId, UserId>,
    previews: BTreeMap<MsgId, AttachmentAssembler>,
    chats: BTreeMap<MsgId, UserId>,
    jobs: Vec<InstallJob>,
    installs: Vec<InstallRecord>,
}

fn bad(e: impl std::fmt::Display) -> SimError {
    SimError::BadScript(e.to_string())
}

impl Peer {
    fn build(setup: &PeerSetup, seed: u64) -> Result<Self, SimError> {
        let (workspace, catalog, blobs) = setup.materialize().map_err(bad)?;
        Ok(Self {
            token: setup.token.clone(),
            core: ClientCore::new(setup.user.clone(), Box::new(MsgIds::seeded(seed))),
            conn: None,
            workspace,
            catalog,
            blobs,
            browsed: BTreeMap::new(),
            comps_requests: BTreeMap::new(),
            previews: BTreeMap::new(),
            chats: BTreeMap::new(),
            jobs: Vec::new(),
            installs: Vec::new(),
        })
    }

    fn drop_session(&mut self, why: &str, fx: &mut Effects) {
        self.conn = None;
        self.core.disconnected();
        self.comps_requests.clear();
        self.previews.clear();
        self.chats.clear();
        for job in std::mem::take(&mut self.jobs) {
            self.fail_job(job, InstallError::Interrupted(why.to_string()), fx);
        }
    }

    fn fail_job(&mut self, job: InstallJob, err: InstallError, fx: &mut Effects) {
        fx.note(format!("install failed: {err}"));
        for id in job.awaiting() {
            self.core.complete(id);
        }
        self.installs.push(InstallRecord {
            source: job.plan().source.clone(),
            composition: *job.composition().id(),
            plan: job.plan().clone(),
            before: self.workspace.clone(),
            result: Err(err.to_string()),
        });
    }

    fn finish_job(&mut self, job: InstallJob, fx: &mut Effects) {
        let source = job.plan().source.clone();
        let composition = *job.composition().id();
        let plan = job.plan().clone();
        let before = self.workspace.clone();
        match job.finish(&self.workspace) {
            Ok(done) => {
                for e in &done.applied.events {
                    fx.note(format!("installed {e}"));
                }
                if plan.include_composition {
                    fx.note(format!("copied composition {}", short(&composition.to_string())));
                }
                self.workspace = done.applied.workspace;
                self.catalog = done.catalog;
                if let Some(shot) = done.screenshot {
                    self.blobs.insert(shot);
                }
                self.installs.push(InstallRecord { source, composition, plan, before, result: Ok(done.applied.events) });
            }
            Err(err) => {
                fx.note(format!("install failed: {err}"));
                self.installs.push(InstallRecord { source, composition, plan, before, result: Err(err.to_string()) });
            }
        }
    }

    fn browsed_composition(&self, from: &UserId, name: &str) -> Option<(&Composition, &Browsed)> {
        let b = self.browsed.get(from)?;
        b.compositions.iter().find(|c| c.name() == name).map(|c| (c, b))
    }

    fn planning_catalog(&self, b: &Browsed) -> Catalog {
        let mut cat = self.catalog.clone();
        for f in &b.features {
            cat.merge_metadata(f.clone());
        }
        cat
    }

    fn plan(
        &self,
        from: &UserId,
        name: &str,
        select: &Option<Vec<FeatureId>>,
        with_composition: bool,
        fx: &mut Effects,
    ) -> Option<(InstallPlan, Composition, Catalog)> {
        let Some((c, b)) = self.browsed_composition(from, name) else {
            fx.note(format!("plan failed: no composition {name:?} browsed from {from}"));
            return None;
        };
        let cat = self.planning_catalog(b);
        let select: Option<BTreeSet<FeatureId>> = select.as_ref().map(|s| s.iter().cloned().collect());
        match diff(c, select.as_ref(), with_composition, &self.workspace, &cat) {
            Ok(plan) => {
                fx.note(describe_plan(name, &plan));
                Some((plan, c.clone(), cat))
            }
            Err(e) => {
                fx.note(format!("plan failed: {e}"));
                None
            }
        }
    }

    fn act(&mut self, action: &Action, now: u64, next_conn: &mut ConnId, fx: &mut Effects) {
        let online = self.conn.is_some();
        match action {
            Action::Connect => {
                if let Some(old) = self.conn {
                    fx.note("reconnecting");
                    fx.hang_up = Some(old);
                    self.drop_session("reconnected", fx);
                }
                *next_conn += 1;
                self.conn = Some(*next_conn);
                fx.note("connect");
                fx.out.push(self.core.hello(&self.token, self.workspace.sharing_enabled()));
            }
            Action::Disconnect => match self.conn {
                Some(c) => {
                    fx.note("disconnect");
                    fx.hang_up = Some(c);
                    self.drop_session("disconnected", fx);
                }
                None => fx.note("disconnect ignored: not connected"),
            },
            Action::Share { enabled } => {
                self.workspace.set_sharing(*enabled);
                fx.note(format!("share {}", on_off(*enabled)));
                if online {
                    fx.out.push(self.core.presence(*enabled));
                }
            }
            Action::RosterGet if online => fx.out.push(self.core.roster_get()),
            Action::CompsGet { from } if online => {
                let req = self.core.request(Kind::CompsGet, from, &Empty {});
                self.comps_requests.insert(req.msg_id, from.clone());
                fx.out.push(req);
            }
            Action::Preview { from, composition, points } => {
                let Some((c, b)) = self.browsed_composition(from, composition) else {
                    fx.note(format!("preview failed: no composition {composition:?} browsed from {from}"));
                    return;
                };
                let c = c.clone();
                for a in annotation_list(&c, &b.features) {
                    let r = a.region;
                    fx.note(format!(
                        "region {} / {} ({}) at {},{} {}x{}",
                        a.part,
                        a.feature_name,
                        a.feature,
                        r.x_micros(),
                        r.y_micros(),
                        r.w_micros(),
                        r.h_micros()
                    ));
                }
                let scale = f64::from(MICROS);
                for &(x, y) in points {
                    match hit_test(&c, f64::from(x) / scale, f64::from(y) / scale) {
                        Some(p) => fx.note(format!("hover {x},{y} -> {} / {}", p.part, p.feature)),
                        None => fx.note(format!("hover {x},{y} -> nothing")),
                    }
                }
                if self.blobs.contains(c.screenshot()) {
                    fx.note(format!("screenshot {} already stored", short(&c.screenshot().to_hex())));
                } else if online {
                    let req = self.core.request(Kind::AttachmentGet, from, &compshare_protocol::bodies::AttachmentGet { digest: *c.screenshot() });
                    self.previews.insert(req.msg_id, AttachmentAssembler::new(*c.screenshot()));
                    fx.out.push(req);
                }
            }
            Action::Plan { from, composition, select, with_composition } => {
                self.plan(from, composition, select, *with_composition, fx);
            }
            Action::Install { from, composition, select, with_composition, force } => {
                let Some((plan, c, cat)) = self.plan(from, composition, select, *with_composition, fx) else {
                    return;
                };
                let policy = if *force { UpgradePolicy::Force } else { UpgradePolicy::Refuse };
                let blobs = &self.blobs;
                let started = InstallJob::start(self.core.me().clone(), plan.clone(), c.clone(), &self.workspace, cat, |d| blobs.contains(d), policy, self.core.ids());
                match started {
                    Err(err) => {
                        fx.note(format!("install failed: {err}"));
                        let before = self.workspace.clone();
                        self.installs.push(InstallRecord { source: from.clone(), composition: *c.id(), plan, before, result: Err(err.to_string()) });
                    }
                    Ok((job, reqs)) if reqs.is_empty() => self.finish_job(job, fx),
                    Ok((job, _)) if !online => self.fail_job(job, InstallError::Interrupted("not connected".into()), fx),
                    Ok((job, reqs)) => {
                        fx.note(format!("install started: {} download(s)", reqs.len()));
                        self.core.expect_replies(reqs.iter().map(|r| r.msg_id));
                        fx.out.extend(reqs);
                        self.jobs.push(job);
                    }
                }
            }
            Action::Chat { to, text } if online => match self.core.chat(to, text, Timestamp((now / 1000) as i64)) {
                Ok(e) => {
                    fx.note(format!("chat to {to}: {text}"));
                    self.chats.insert(e.msg_id, to.clone());
                    fx.out.push(e);
                }
                Err(e) => fx.note(format!("chat failed: {e}")),
            },
            other => fx.note(format!("{} skipped: not connected", action_name(other))),
        }
    }

    fn receive(&mut self, e: Envelope, fx: &mut Effects) {
        match self.core.incoming(e) {
            Incoming::Authenticated => {
                fx.note("authenticated");
                fx.out.push(self.core.roster_get());
            }
            Incoming::Presence { user, online, sharing, changed } => {
                if changed {
                    fx.note(format!("presence {user} {} sharing {}", if online { "online" } else { "offline" }, on_off(sharing)));
                }
                if !online {
                    let (gone, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.jobs).into_iter().partition(|j| j.plan().source == user);
                    self.jobs = keep;
                    for job in gone {
                        self.fail_job(job, InstallError::Interrupted(format!("{user} went offline")), fx);
                    }
                }
            }
            Incoming::Roster(entries) => {
                let list: Vec<String> = entries
                    .iter()
                    .map(|e| format!("{}({}{})", e.user, if e.online { "online" } else { "offline" }, if e.sharing { ",sharing" } else { "" }))
                    .collect();
                fx.note(format!("roster [{}]", list.join(" ")));
            }
            Incoming::Chat(m) => fx.note(format!("chat from {}: {}", m.from, m.text)),
            Incoming::Request(req) => {
                fx.out.extend(serve(&self.workspace, &self.catalog, &self.blobs, &req));
            }
            Incoming::Reply(rep) => self.reply(rep, fx),
            Incoming::Kicked(b) => {
                fx.note(format!("session ended by relay: {}", b.code));
                self.drop_session("session ended", fx);
            }
            Incoming::RelayError(b) => fx.note(format!("relay error {}: {}", b.code, b.detail)),
            Incoming::Unsolicited(e) => fx.note(format!("ignored unsolicited {} from {}", e.kind, e.from)),
        }
    }

    fn reply(&mut self, rep: Envelope, fx: &mut Effects) {
        let id = rep.msg_id;
        if let Some(src) = self.comps_requests.remove(&id) {
            self.core.complete(&id);
            if rep.kind == Kind::Error {
                fx.note(format!("browse {src} failed: {}", error_code(&rep)));
                return;
            }
            let decoded = rep.body().map_err(|e| e.to_string()).and_then(|c| decode_comps(&c).map(|cs| (cs, c.features)).map_err(|e| e.to_string()));
            match decoded {
                Ok((compositions, features)) => {
                    let list: Vec<String> =
                        compositions.iter().map(|c| format!("{:?}#{}", c.name(), short(&c.id().to_string()))).collect();
                    fx.note(format!("browse {src}: {} composition(s) [{}], {} feature(s)", compositions.len(), list.join(" "), features.len()));
                    self.browsed.insert(src, Browsed { compositions, features });
                }
                Err(e) => fx.note(format!("browse {src} failed: {e}")),
            }
            return;
        }
        if let Some(asm) = self.previews.get_mut(&id) {
            let result = match rep.kind {
                Kind::Attachment => rep.body::<Attachment>().map_err(|e| e.to_string()).and_then(|a| asm.push(&a).map_err(|e| e.to_string())),
                Kind::Error => Err(error_code(&rep)),
                k => Err(format!("unexpected {k}")),
            };
            match result {
                Ok(None) => {}
                Ok(Some(bytes)) => {
                    let d = self.blobs.insert(bytes.clone());
                    fx.note(format!("screenshot {} verified ({} bytes)", short(&d.to_hex()), bytes.len()));
                    self.previews.remove(&id);
                    self.core.complete(&id);
                }
                Err(e) => {
                    fx.note(format!("screenshot fetch failed: {e}"));
                    self.previews.remove(&id);
                    self.core.complete(&id);
                }
            }
            return;
        }
        if let Some(to) = self.chats.remove(&id) {
            self.core.complete(&id);
            fx.note(format!("chat to {to} failed: {}", error_code(&rep)));
            return;
        }
        let Some(i) = self.jobs.iter().position(|j| j.wants(&rep)) else {
            fx.note(format!("ignored stray {} #{}", rep.kind, short(&id.to_string())));
            return;
        };
        match self.jobs[i].on_envelope(&rep) {
            Ok(fetched) => {
                if let Some(f) = fetched {
                    self.core.complete(&id);
                    match f {
                        Fetched::Payload { id, version, size } => fx.note(format!("fetched {id} {version} ({size} bytes)")),
                        Fetched::Screenshot { digest, size } => fx.note(format!("fetched screenshot {} ({size} bytes)", short(&digest.to_hex()))),
                    }
                }
                if self.jobs[i].is_ready() {
                    let job = self.jobs.remove(i);
                    self.finish_job(job, fx);
                }
            }
            Err(err) => {
                let job = self.jobs.remove(i);
                self.fail_job(job, err, fx);
            }
        }
    }
}

fn error_code(e: &Envelope) -> String {
    match e.body::<ErrorBody>() {
        Ok(b) => b.code.to_string(),
        Err(_) => "malformed error".into(),
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn short(s: &str) -> &str {
    &s[..12.min(s.len())]
}

fn action_name(a: &Action) -> &'static str {
    match a {
        Action::Connect => "connect",
        Action::Disconnect => "disconnect",
        Action::Share { .. } => "share",
        Action::RosterGet => "roster_get",
        Action::CompsGet { .. } => "comps_get",
        Action::Preview { .. } => "preview",
        Action::Plan { .. } => "plan",
        Action::Install { .. } => "install",
        Action::Chat { .. } => "chat",
    }
}

fn refs(rs: &[compshare_core::model::FeatureRef]) -> String {
    rs.iter().map(|r| format!("{} {}", r.id, r.version)).collect::<Vec<_>>().join(", ")
}

/// One-line plan summary, as printed in transcripts.
pub fn describe_plan(name: &str, plan: &InstallPlan) -> String {
    if plan.is_noop() {
        return format!("plan {name:?}: nothing to install");
    }
    let mismatch: Vec<String> = plan.version_mismatch.iter().map(|m| format!("{} {}<{}", m.id, m.local, m.required)).collect();
    format!(
        "plan {name:?}: present [{}] missing [{}] mismatch [{}] order [{}] layout {}",
        refs(&plan.already_present),
        refs(&plan.missing),
        mismatch.join(", "),
        refs(&plan.install_order),
        if plan.include_composition { "yes" } else { "no" }
    )
}

fn summary(body: &str) -> String {
    if body.len() <= 100 {
        body.to_string()
    } else {
        format!("[{} bytes {}]", body.len(), short(&Digest::of(body.as_bytes()).to_hex()))
    }
}

struct Sim {
    now: u64,
    seq: u64,
    queue: BTreeMap<(u64, u8, u64), Event>,
    relay: Relay,
    users: Vec<UserId>,
    peers: BTreeMap<UserId, Peer>,
    conn_owner: BTreeMap<ConnId, UserId>,
    next_conn: ConnId,
    transcript: Vec<String>,
    sent: Vec<Sent>,
    delivered: Vec<Delivered>,
}

impl Sim {
    fn new(script: &Script) -> Result<Self, SimError> {
        let mut table = UserTable::default();
        let mut rosters = Rosters::default();
        let mut peers = BTreeMap::new();
        for (i, p) in script.peers.iter().enumerate() {
            if peers.contains_key(&p.user) {
                return Err(bad(format!("duplicate peer {}", p.user)));
            }
            table.insert(p.user.clone(), p.token.clone());
            for c in &p.contacts {
                if *c == p.user {
                    return Err(bad(format!("{} lists itself", p.user)));
                }
                rosters.add(p.user.clone(), c.clone());
            }
            let seed = script.seed.wrapping_mul(1_000_003).wrapping_add(i as u64 + 1);
            peers.insert(p.user.clone(), Peer::build(p, seed)?);
        }
        let mut sim = Self {
            now: 0,
            seq: 0,
            queue: BTreeMap::new(),
            relay: Relay::new(table, rosters, Box::new(MsgIds::seeded(script.seed))),
            users: script.peers.iter().map(|p| p.user.clone()).collect(),
            peers,
            conn_owner: BTreeMap::new(),
            next_conn: 0,
            transcript: Vec::new(),
            sent: Vec::new(),
            delivered: Vec::new(),
        };
        for a in &script.actions {
            if !sim.peers.contains_key(&a.user) {
                return Err(bad(format!("action for unknown peer {}", a.user)));
            }
            sim.schedule(a.at, 0, Event::Script(a.clone()));
        }
        Ok(sim)
    }

    fn schedule(&mut self, at: u64, class: u8, e: Event) {
        self.seq += 1;
        self.queue.insert((at, class, self.seq), e);
    }

    fn log(&mut self, who: &str, text: &str) {
        self.transcript.push(format!("{:>6} {who} {text}", self.now));
    }

    fn run(&mut self) -> Result<(), SimError> {
        let mut steps = 0;
        while let Some(((t, _, _), event)) = self.queue.pop_first() {
            self.now = t;
            steps += 1;
            if steps > MAX_STEPS {
                break;
            }
            match event {
                Event::Script(a) => {
                    let mut fx = Effects::default();
                    let peer = self.peers.get_mut(&a.user).expect("checked at load");
                    peer.act(&a.action, t, &mut self.next_conn, &mut fx);
                    if let Action::Connect = a.action {
                        let conn = peer.conn.expect("connect sets a connection");
                        self.conn_owner.insert(conn, a.user.clone());
                        self.relay.open(conn);
                    }
                    self.apply(&a.user, fx);
                }
                Event::ToRelay(conn, e) => {
                    self.log("relay", &format!("<= {} {}->{} #{}", e.kind, e.from, e.to, short(&e.msg_id.to_string())));
                    let actions = self.relay.receive(conn, e);
                    self.relay_actions(actions);
                }
                Event::ToPeer(conn, e) => {
                    let user = self.conn_owner[&conn].clone();
                    if self.peers[&user].conn != Some(conn) {
                        continue;
                    }
                    self.log(
                        user.as_str(),
                        &format!("<= {} from {} #{} {}", e.kind, e.from, short(&e.msg_id.to_string()), summary(e.body_text())),
                    );
                    self.delivered.push(Delivered { time: t, to: user.clone(), envelope: e.clone() });
                    let mut fx = Effects::default();
                    self.peers.get_mut(&user).expect("owner exists").receive(e, &mut fx);
                    self.apply(&user, fx);
                }
                Event::PeerClosed(conn) => {
                    let actions = self.relay.close(conn);
                    self.relay_actions(actions);
                }
                Event::RelayClosed(conn) => {
                    let actions = self.relay.close(conn);
                    self.relay_actions(actions);
                    let user = self.conn_owner[&conn].clone();
                    let peer = self.peers.get_mut(&user).expect("owner exists");
                    if peer.conn == Some(conn) {
                        let mut fx = Effects::default();
                        fx.note("connection closed by relay");
                        peer.drop_session("connection closed", &mut fx);
                        self.apply(&user, fx);
                    }
                }
            }
        }
        let pending: usize = self.peers.values().map(|p| p.jobs.len()).sum();
        if pending > 0 {
            return Err(SimError::ScenarioDeadlock { time: self.now, pending });
        }
        Ok(())
    }

    fn relay_actions(&mut self, actions: Vec<RelayAction>) {
        for a in actions {
            match a {
                RelayAction::Send(c, e) => self.schedule(self.now + 1, 1, Event::ToPeer(c, e)),
                RelayAction::Close(c) => self.schedule(self.now + 1, 1, Event::RelayClosed(c)),
            }
        }
    }

    fn apply(&mut self, user: &UserId, fx: Effects) {
        for n in &fx.notes {
            self.log(user.as_str(), n);
        }
        let peer = &self.peers[user];
        let (conn, sharing) = (peer.conn, peer.workspace.sharing_enabled());
        for e in fx.out {
            match conn {
                Some(c) => {
                    self.sent.push(Sent { time: self.now, from: user.clone(), sharing, envelope: e.clone() });
                    self.schedule(self.now + 1, 1, Event::ToRelay(c, e));
                }
                None => self.log(user.as_str(), &format!("dropped outgoing {}: not connected", e.kind)),
            }
        }
        if let Some(c) = fx.hang_up {
            self.schedule(self.now + 1, 1, Event::PeerClosed(c));
        }
    }

    fn finish(self) -> Outcome {
        let truth = self.users.iter().map(|u| (u.clone(), self.relay.roster_of(u))).collect();
        let peers = self
            .peers
            .into_iter()
            .map(|(u, p)| {
                let report = PeerReport {
                    online: p.conn.is_some() && p.core.is_authenticated(),
                    roster: p.core.roster().entries(),
                    workspace: p.workspace,
                    catalog: p.catalog,
                    blobs: p.blobs,
                    browsed: p.browsed,
                    installs: p.installs,
                };
                (u, report)
            })
            .collect();
        Outcome { transcript: self.transcript, peers, truth, sent: self.sent, delivered: self.delivered }
    }
}
