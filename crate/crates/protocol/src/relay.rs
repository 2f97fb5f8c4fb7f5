//! The relay: authentication, presence fan-out and envelope routing.
//!
//! [`Relay`] owns no sockets. The transport reports connection events and
//! decoded envelopes, and carries out the returned [`Action`]s in order.

use std::collections::{BTreeMap, BTreeSet};

use compshare_core::model::UserId;

use crate::bodies::{ErrorBody, ErrorCode, Hello, HelloOk, Presence, Roster, RosterEntry};
use crate::ids::IdSource;
use crate::{Address, Envelope, Kind, MsgId};

/// Transport-assigned connection handle.
pub type ConnId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Send(ConnId, Envelope),
    Close(ConnId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {detail}")]
pub struct ConfigError {
    pub line: usize,
    pub detail: String,
}

fn config_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, words)| !words.is_empty() && !words[0].starts_with('#'))
}

fn parse_user(line: usize, s: &str) -> Result<UserId, ConfigError> {
    UserId::new(s).map_err(|e| ConfigError { line, detail: e.to_string() })
}

/// Known users and their pre-shared tokens, one `user@realm token` per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserTable(BTreeMap<UserId, String>);

impl UserTable {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut users = BTreeMap::new();
        for (line, words) in config_lines(text) {
            let [user, token] = words[..] else {
                return Err(ConfigError { line, detail: "expected `user@realm token`".into() });
            };
            if users.insert(parse_user(line, user)?, token.to_string()).is_some() {
                return Err(ConfigError { line, detail: format!("duplicate user {user}") });
            }
        }
        Ok(Self(users))
    }

    pub fn insert(&mut self, user: UserId, token: impl Into<String>) {
        self.0.insert(user, token.into());
    }

    pub fn contains(&self, user: &UserId) -> bool {
        self.0.contains_key(user)
    }

    pub fn check(&self, user: &UserId, token: &str) -> bool {
        self.0.get(user).is_some_and(|t| t == token)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.0.keys()
    }
}

/// Directional contact lists, one `user contact…` per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Rosters(BTreeMap<UserId, BTreeSet<UserId>>);

impl Rosters {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut rosters = Self::default();
        for (line, words) in config_lines(text) {
            let owner = parse_user(line, words[0])?;
            for w in &words[1..] {
                let contact = parse_user(line, w)?;
                if contact == owner {
                    return Err(ConfigError { line, detail: format!("{owner} lists itself") });
                }
                rosters.add(owner.clone(), contact);
            }
            rosters.0.entry(owner).or_default();
        }
        Ok(rosters)
    }

    pub fn add(&mut self, owner: UserId, contact: UserId) {
        self.0.entry(owner).or_default().insert(contact);
    }

    pub fn contacts(&self, owner: &UserId) -> impl Iterator<Item = &UserId> {
        self.0.get(owner).into_iter().flatten()
    }

    /// Users whose roster lists `user`.
    pub fn watchers<'a>(&'a self, user: &'a UserId) -> impl Iterator<Item = &'a UserId> + 'a {
        self.0.iter().filter(move |(_, cs)| cs.contains(user)).map(|(owner, _)| owner)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.0.keys().chain(self.0.values().flatten())
    }
}

#[derive(Debug, Clone, Copy)]
struct Online {
    conn: ConnId,
    sharing: bool,
}

pub struct Relay {
    users: UserTable,
    rosters: Rosters,
    conns: BTreeMap<ConnId, Option<UserId>>,
    online: BTreeMap<UserId, Online>,
    last_sharing: BTreeMap<UserId, bool>,
    ids: Box<dyn IdSource>,
}

impl Relay {
    pub fn new(users: UserTable, rosters: Rosters, ids: Box<dyn IdSource>) -> Self {
        Self { users, rosters, conns: BTreeMap::new(), online: BTreeMap::new(), last_sharing: BTreeMap::new(), ids }
    }

    pub fn open(&mut self, conn: ConnId) {
        self.conns.insert(conn, None);
    }

    /// The authenticated user on `conn`, if any.
    pub fn user_of(&self, conn: ConnId) -> Option<&UserId> {
        self.conns.get(&conn).and_then(Option::as_ref)
    }

    pub fn is_online(&self, user: &UserId) -> bool {
        self.online.contains_key(user)
    }

    pub fn online_users(&self) -> impl Iterator<Item = &UserId> {
        self.online.keys()
    }

    /// Ground-truth roster for `user`, sorted.
    pub fn roster_of(&self, user: &UserId) -> Vec<RosterEntry> {
        self.rosters
            .contacts(user)
            .map(|c| {
                let online = self.online.get(c);
                RosterEntry {
                    user: c.clone(),
                    online: online.is_some(),
                    sharing: online.map(|o| o.sharing).or_else(|| self.last_sharing.get(c).copied()).unwrap_or(false),
                }
            })
            .collect()
    }

    /// Online users whose roster lists `user`, with their connections.
    pub fn online_watchers(&self, user: &UserId) -> Vec<(UserId, ConnId)> {
        self.rosters
            .watchers(user)
            .filter_map(|w| self.online.get(w).map(|o| (w.clone(), o.conn)))
            .collect()
    }

    /// The transport could not decode a frame on `conn`.
    pub fn malformed(&mut self, conn: ConnId, detail: &str) -> Vec<Action> {
        let to = self.user_of(conn).cloned().map_or(Address::Relay, Address::User);
        let e = Envelope::new(Kind::Error, Address::Relay, to, MsgId([0; 16]), &ErrorBody::new(ErrorCode::Malformed, detail));
        vec![Action::Send(conn, e)]
    }

    /// The connection is gone; tells watchers if it carried a live session.
    pub fn close(&mut self, conn: ConnId) -> Vec<Action> {
        let Some(Some(user)) = self.conns.remove(&conn) else {
            return Vec::new();
        };
        match self.online.get(&user) {
            Some(o) if o.conn == conn => {
                let sharing = o.sharing;
                self.online.remove(&user);
                self.last_sharing.insert(user.clone(), sharing);
                self.fan_out_generated(&user, Presence { online: false, sharing })
            }
            _ => Vec::new(),
        }
    }

    pub fn receive(&mut self, conn: ConnId, e: Envelope) -> Vec<Action> {
        if !self.conns.contains_key(&conn) {
            return Vec::new();
        }
        if e.kind == Kind::Hello {
            return self.hello(conn, e);
        }
        let Some(user) = self.user_of(conn).cloned() else {
            return self.refuse(conn, &e, ErrorCode::Unauthenticated, "send HELLO first");
        };
        if e.from.user() != Some(&user) {
            return self.refuse(conn, &e, ErrorCode::Unauthenticated, "from does not match the session");
        }
        match (&e.to, e.kind) {
            (Address::Relay, Kind::Presence) => self.presence(conn, user, e),
            (Address::Relay, Kind::RosterGet) => {
                let reply = Envelope::new(Kind::Roster, Address::Relay, user.clone(), e.msg_id, &Roster { entries: self.roster_of(&user) });
                vec![Action::Send(conn, reply)]
            }
            (Address::Relay, k) => self.refuse(conn, &e, ErrorCode::Malformed, &format!("{k} cannot be sent to the relay")),
            (Address::User(_), Kind::Presence | Kind::RosterGet | Kind::HelloOk | Kind::Roster) => {
                self.refuse(conn, &e, ErrorCode::Malformed, &format!("{} must be addressed to the relay", e.kind))
            }
            (Address::User(to), _) => self.route(conn, to.clone(), e),
        }
    }

    fn hello(&mut self, conn: ConnId, e: Envelope) -> Vec<Action> {
        let Address::User(user) = e.from.clone() else {
            return self.refuse(conn, &e, ErrorCode::Unauthenticated, "HELLO must name a user");
        };
        let Ok(hello) = e.body::<Hello>() else {
            return self.refuse(conn, &e, ErrorCode::Malformed, "bad HELLO body");
        };
        if self.user_of(conn).is_some() || !self.users.check(&user, &hello.token) {
            let mut out = self.refuse(conn, &e, ErrorCode::Unauthenticated, "unknown user or bad token");
            if self.user_of(conn).is_none() {
                self.conns.remove(&conn);
                out.push(Action::Close(conn));
            }
            return out;
        }
        let mut out = Vec::new();
        if let Some(old) = self.online.get(&user).map(|o| o.conn) {
            let kicked = Envelope::new(
                Kind::Error,
                Address::Relay,
                user.clone(),
                MsgId([0; 16]),
                &ErrorBody::new(ErrorCode::Superseded, "a newer session for this user connected"),
            );
            out.push(Action::Send(old, kicked));
            out.push(Action::Close(old));
            self.conns.remove(&old);
        }
        self.conns.insert(conn, Some(user.clone()));
        self.online.insert(user.clone(), Online { conn, sharing: hello.sharing });
        out.push(Action::Send(conn, e.reply(Kind::HelloOk, &HelloOk { user: user.clone() })));
        out.extend(self.fan_out_generated(&user, Presence { online: true, sharing: hello.sharing }));
        out
    }

    fn presence(&mut self, conn: ConnId, user: UserId, e: Envelope) -> Vec<Action> {
        match e.body::<Presence>() {
            Ok(p) if p.online => {
                if let Some(o) = self.online.get_mut(&user) {
                    o.sharing = p.sharing;
                }
                self.online_watchers(&user).into_iter().map(|(_, c)| Action::Send(c, e.clone())).collect()
            }
            _ => self.refuse(conn, &e, ErrorCode::Malformed, "PRESENCE body must be {online: true, sharing}"),
        }
    }

    fn route(&mut self, conn: ConnId, to: UserId, e: Envelope) -> Vec<Action> {
        if let Some(o) = self.online.get(&to) {
            return vec![Action::Send(o.conn, e)];
        }
        if e.kind == Kind::Error {
            return Vec::new();
        }
        if self.users.contains(&to) {
            self.refuse(conn, &e, ErrorCode::Offline, &format!("{to} is offline"))
        } else {
            self.refuse(conn, &e, ErrorCode::UnknownRecipient, &format!("no such user {to}"))
        }
    }

    fn refuse(&self, conn: ConnId, e: &Envelope, code: ErrorCode, detail: &str) -> Vec<Action> {
        if e.kind == Kind::Error {
            return Vec::new();
        }
        let reply = Envelope::new(Kind::Error, Address::Relay, e.from.clone(), e.msg_id, &ErrorBody::new(code, detail));
        vec![Action::Send(conn, reply)]
    }

    fn fan_out_generated(&mut self, user: &UserId, p: Presence) -> Vec<Action> {
        let e = Envelope::new(Kind::Presence, user.clone(), Address::Relay, self.ids.next_id(), &p);
        self.online_watchers(user).into_iter().map(|(_, c)| Action::Send(c, e.clone())).collect()
    }
}
