//! Client-side session state: authentication, roster view and request
//! tracking. Transports feed it every envelope they receive.

use std::collections::BTreeSet;

use compshare_core::model::{Timestamp, UserId};
use serde::Serialize;

use crate::bodies::{Chat, ChatMessage, Empty, ErrorBody, ErrorCode, Hello, Presence, Roster, RosterEntry, MAX_CHAT_BYTES};
use crate::ids::IdSource;
use crate::roster::RosterView;
use crate::{Address, Envelope, Kind, MsgId, ProtocolError};

/// What an incoming envelope means to the client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Incoming {
    Authenticated,
    /// A contact's presence changed. `changed` is false for repeats.
    Presence { user: UserId, online: bool, sharing: bool, changed: bool },
    Roster(Vec<RosterEntry>),
    Chat(ChatMessage),
    /// Another peer wants something from us.
    Request(Envelope),
    /// Answers one of our outstanding requests.
    Reply(Envelope),
    /// The relay ended this session (superseded, bad credentials).
    Kicked(ErrorBody),
    /// Relay-level error not tied to a request of ours.
    RelayError(ErrorBody),
    /// Not asked for; dropped.
    Unsolicited(Envelope),
}

pub struct ClientCore {
    me: UserId,
    ids: Box<dyn IdSource>,
    roster: RosterView,
    authenticated: bool,
    outstanding: BTreeSet<MsgId>,
}

impl ClientCore {
    pub fn new(me: UserId, ids: Box<dyn IdSource>) -> Self {
        Self { me, ids, roster: RosterView::new(), authenticated: false, outstanding: BTreeSet::new() }
    }

    pub fn me(&self) -> &UserId {
        &self.me
    }

    pub fn is_authenticated(&self) -> bool {
        self.authenticated
    }

    pub fn roster(&self) -> &RosterView {
        &self.roster
    }

    pub fn next_id(&mut self) -> MsgId {
        self.ids.next_id()
    }

    fn track(&mut self) -> MsgId {
        let id = self.ids.next_id();
        self.outstanding.insert(id);
        id
    }

    /// Mutable access to the id source, for helpers that mint their own requests.
    pub fn ids(&mut self) -> &mut dyn IdSource {
        self.ids.as_mut()
    }

    pub fn hello(&mut self, token: &str, sharing: bool) -> Envelope {
        self.authenticated = false;
        self.roster.clear();
        self.outstanding.clear();
        let id = self.track();
        Envelope::new(Kind::Hello, self.me.clone(), Address::Relay, id, &Hello { token: token.to_string(), sharing })
    }

    pub fn roster_get(&mut self) -> Envelope {
        let id = self.track();
        Envelope::new(Kind::RosterGet, self.me.clone(), Address::Relay, id, &Empty {})
    }

    pub fn presence(&mut self, sharing: bool) -> Envelope {
        Envelope::new(Kind::Presence, self.me.clone(), Address::Relay, self.ids.next_id(), &Presence { online: true, sharing })
    }

    /// A tracked request to another peer.
    pub fn request<B: Serialize>(&mut self, kind: Kind, to: &UserId, body: &B) -> Envelope {
        let id = self.track();
        Envelope::new(kind, self.me.clone(), to.clone(), id, body)
    }

    /// Registers requests minted elsewhere (e.g. by an install job).
    pub fn expect_replies(&mut self, ids: impl IntoIterator<Item = MsgId>) {
        self.outstanding.extend(ids);
    }

    /// A chat message. Tracked so an offline error can be matched.
    pub fn chat(&mut self, to: &UserId, text: &str, sent_at: Timestamp) -> Result<Envelope, ProtocolError> {
        if text.len() > MAX_CHAT_BYTES {
            return Err(ProtocolError::ChatTooLong(text.len()));
        }
        Ok(self.request(Kind::Chat, to, &Chat { text: text.to_string(), sent_at }))
    }

    /// Stops routing replies for `id` to the caller.
    pub fn complete(&mut self, id: &MsgId) {
        self.outstanding.remove(id);
    }

    pub fn is_outstanding(&self, id: &MsgId) -> bool {
        self.outstanding.contains(id)
    }

    pub fn disconnected(&mut self) {
        self.authenticated = false;
        self.outstanding.clear();
    }

    pub fn incoming(&mut self, e: Envelope) -> Incoming {
        match (e.kind, &e.from) {
            (Kind::HelloOk, Address::Relay) if self.outstanding.remove(&e.msg_id) => {
                self.authenticated = true;
                Incoming::Authenticated
            }
            (Kind::Presence, Address::User(from)) => match e.body::<Presence>() {
                Ok(p) => {
                    let changed = self.roster.apply_presence(from, p);
                    Incoming::Presence { user: from.clone(), online: p.online, sharing: p.sharing, changed }
                }
                Err(_) => Incoming::Unsolicited(e),
            },
            (Kind::Roster, Address::Relay) if self.outstanding.contains(&e.msg_id) => match e.body::<Roster>() {
                Ok(r) => {
                    self.outstanding.remove(&e.msg_id);
                    self.roster.apply_roster(&r);
                    Incoming::Roster(r.entries)
                }
                Err(_) => Incoming::Unsolicited(e),
            },
            (Kind::Chat, Address::User(from)) => match e.body::<Chat>() {
                Ok(c) if c.text.len() <= MAX_CHAT_BYTES => {
                    Incoming::Chat(ChatMessage { from: from.clone(), to: self.me.clone(), text: c.text, sent_at: c.sent_at })
                }
                _ => Incoming::Unsolicited(e),
            },
            (k, Address::User(_)) if k.is_peer_request() => Incoming::Request(e),
            (Kind::Error, Address::Relay) if !self.outstanding.contains(&e.msg_id) => match e.body::<ErrorBody>() {
                Ok(b) if matches!(b.code, ErrorCode::Superseded | ErrorCode::Unauthenticated) => {
                    self.disconnected();
                    Incoming::Kicked(b)
                }
                Ok(b) => Incoming::RelayError(b),
                Err(_) => Incoming::Unsolicited(e),
            },
            (Kind::Error, Address::Relay) if e.body::<ErrorBody>().is_ok_and(|b| b.code == ErrorCode::Unauthenticated) => {
                self.disconnected();
                Incoming::Kicked(e.body().expect("checked above"))
            }
            (k, _) if (k.is_reply() || k == Kind::Error) && self.outstanding.contains(&e.msg_id) => Incoming::Reply(e),
            _ => Incoming::Unsolicited(e),
        }
    }
}
