//! A client's view of its roster, kept current from `ROSTER` and `PRESENCE`.

use std::collections::BTreeMap;

use compshare_core::model::UserId;

use crate::bodies::{Presence, Roster, RosterEntry};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RosterView {
    entries: BTreeMap<UserId, RosterEntry>,
}

impl RosterView {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the view with a full roster snapshot.
    pub fn apply_roster(&mut self, roster: &Roster) {
        self.entries = roster.entries.iter().map(|e| (e.user.clone(), e.clone())).collect();
    }

    /// Returns true when the view changed.
    pub fn apply_presence(&mut self, from: &UserId, p: Presence) -> bool {
        let next = RosterEntry { user: from.clone(), online: p.online, sharing: p.sharing };
        self.entries.insert(from.clone(), next.clone()).as_ref() != Some(&next)
    }

    pub fn get(&self, user: &UserId) -> Option<&RosterEntry> {
        self.entries.get(user)
    }

    /// Entries sorted by user.
    pub fn entries(&self) -> Vec<RosterEntry> {
        self.entries.values().cloned().collect()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presence_updates_and_reports_change() {
        let john = UserId::new("john@acme").unwrap();
        let mut v = RosterView::new();
        v.apply_roster(&Roster { entries: vec![RosterEntry { user: john.clone(), online: false, sharing: true }] });
        assert!(v.apply_presence(&john, Presence { online: true, sharing: true }));
        assert!(!v.apply_presence(&john, Presence { online: true, sharing: true }));
        assert!(v.get(&john).unwrap().online);
    }
}
