//! Protocol invariants checked over a finished run.

use std::collections::{BTreeMap, BTreeSet};

use compshare_core::model::{FeatureId, UserId};
use compshare_protocol::{Address, Kind, MsgId};

use crate::harness::Outcome;

/// Every violated invariant, described. Empty when the run is clean.
pub fn violations(o: &Outcome) -> Vec<String> {
    let mut out = Vec::new();
    out.extend(session_ordering(o));
    out.extend(opt_out(o));
    out.extend(no_unsolicited_data(o));
    out.extend(presence_convergence(o));
    out.extend(install_order(o));
    out
}

/// Envelopes from one sender to one recipient arrive in send order (some may
/// be lost when either side goes offline, none reordered).
pub fn session_ordering(o: &Outcome) -> Vec<String> {
    let mut sent: BTreeMap<(&UserId, &UserId), Vec<Vec<u8>>> = BTreeMap::new();
    for s in &o.sent {
        if let Address::User(to) = &s.envelope.to {
            sent.entry((&s.from, to)).or_default().push(s.envelope.encode());
        }
    }
    let mut got: BTreeMap<(&UserId, &UserId), Vec<Vec<u8>>> = BTreeMap::new();
    for d in &o.delivered {
        if let (Address::User(from), Address::User(_)) = (&d.envelope.from, &d.envelope.to) {
            got.entry((from, &d.to)).or_default().push(d.envelope.encode());
        }
    }
    let mut out = Vec::new();
    for (pair, received) in got {
        let sent = sent.get(&pair).map(Vec::as_slice).unwrap_or_default();
        let mut it = sent.iter();
        if !received.iter().all(|r| it.any(|s| s == r)) {
            out.push(format!("ordering: {} -> {} received out of send order", pair.0, pair.1));
        }
    }
    out
}

/// A peer with sharing off never emits composition data.
pub fn opt_out(o: &Outcome) -> Vec<String> {
    let mut out = Vec::new();
    for s in o.sent.iter().filter(|s| !s.sharing) {
        if matches!(s.envelope.kind, Kind::Comps | Kind::Feature | Kind::Attachment) {
            out.push(format!("opt-out: {} sent {} while not sharing", s.from, s.envelope.kind));
        }
        let own = o.peers[&s.from].workspace.compositions();
        if own.iter().any(|c| s.envelope.body_text().contains(&c.id().to_string())) {
            out.push(format!("opt-out: {} leaked a composition id while not sharing", s.from));
        }
    }
    out
}

/// Reply data only reaches peers that asked for it.
pub fn no_unsolicited_data(o: &Outcome) -> Vec<String> {
    let mut asked: BTreeSet<(&UserId, &Address, MsgId)> = BTreeSet::new();
    for s in &o.sent {
        if s.envelope.kind.is_peer_request() {
            asked.insert((&s.from, &s.envelope.to, s.envelope.msg_id));
        }
    }
    o.delivered
        .iter()
        .filter(|d| matches!(d.envelope.kind, Kind::Comps | Kind::Feature | Kind::Attachment))
        .filter(|d| !asked.contains(&(&d.to, &d.envelope.from, d.envelope.msg_id)))
        .map(|d| format!("unsolicited: {} received {} from {}", d.to, d.envelope.kind, d.envelope.from))
        .collect()
}

/// Once quiet, each live session's roster view equals the relay's truth.
pub fn presence_convergence(o: &Outcome) -> Vec<String> {
    o.peers
        .iter()
        .filter(|(_, p)| p.online)
        .filter(|(u, p)| o.truth.get(*u) != Some(&p.roster))
        .map(|(u, p)| format!("presence: {u} sees {:?}, relay has {:?}", p.roster, o.truth.get(u)))
        .collect()
}

/// Successful installs list each feature after its dependencies, and failed
/// ones leave nothing behind.
pub fn install_order(o: &Outcome) -> Vec<String> {
    let mut out = Vec::new();
    for (user, p) in &o.peers {
        for rec in &p.installs {
            let Ok(events) = &rec.result else {
                continue;
            };
            let mut have: BTreeSet<&FeatureId> = rec.before.installed().keys().collect();
            for e in events {
                let Some(entry) = p.catalog.get(&e.feature, e.version) else {
                    out.push(format!("install: {user} has no metadata for {} {}", e.feature, e.version));
                    continue;
                };
                for d in entry.feature.dependencies() {
                    if !have.contains(&d.id) {
                        out.push(format!("install: {user} installed {} before its dependency {}", e.feature, d.id));
                    }
                }
                have.insert(&e.feature);
            }
        }
    }
    out
}
