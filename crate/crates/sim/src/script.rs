//! Scenario scripts: the simulated world plus a timeline of peer actions.

use compshare_core::codec::{self, CodecError};
use std::collections::BTreeSet;

use compshare_core::model::{
    Catalog, CompositionDraft, Feature, FeatureId, FeatureRef, ModelError, Placement, Timestamp, UserId, Workspace,
};
use compshare_core::store::MemoryBlobs;
use compshare_protocol::relay::{Rosters, UserTable};
use serde::{Deserialize, Serialize};

use crate::gen::payload_for;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub seed: u64,
    pub peers: Vec<PeerSetup>,
    pub actions: Vec<TimedAction>,
}

/// One simulated user and the state they start with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerSetup {
    pub user: UserId,
    pub token: String,
    pub sharing: bool,
    /// Directional roster: whose presence this user follows.
    pub contacts: Vec<UserId>,
    /// Catalog entries known locally; each gets a generated payload.
    pub catalog: Vec<Feature>,
    pub installed: Vec<FeatureRef>,
    pub compositions: Vec<CompositionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSpec {
    pub name: String,
    pub feature_refs: Vec<FeatureRef>,
    pub placements: Vec<Placement>,
    /// Stand-in screenshot content; its bytes are the blob.
    pub screenshot: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedAction {
    /// Virtual milliseconds.
    pub at: u64,
    pub user: UserId,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum Action {
    Connect,
    Disconnect,
    Share {
        enabled: bool,
    },
    RosterGet,
    CompsGet {
        from: UserId,
    },
    /// Annotations and hit tests on a browsed composition; fetches the screenshot.
    Preview {
        from: UserId,
        composition: String,
        points: Vec<(u32, u32)>,
    },
    Plan {
        from: UserId,
        composition: String,
        select: Option<Vec<FeatureId>>,
        with_composition: bool,
    },
    Install {
        from: UserId,
        composition: String,
        select: Option<Vec<FeatureId>>,
        with_composition: bool,
        force: bool,
    },
    Chat {
        to: UserId,
        text: String,
    },
}

impl PeerSetup {
    /// The workspace, catalog (with generated payloads) and screenshot blobs
    /// this peer starts with.
    pub fn materialize(&self) -> Result<(Workspace, Catalog, MemoryBlobs), ModelError> {
        let mut catalog = Catalog::new(self.catalog.iter().map(|f| f.category().to_string()).collect::<BTreeSet<_>>());
        for f in &self.catalog {
            catalog.insert(f.clone(), Some(payload_for(f.id(), f.version())))?;
        }
        let mut workspace = Workspace::new(self.user.clone());
        for r in &self.installed {
            workspace.install(r.id.clone(), r.version);
        }
        let mut blobs = MemoryBlobs::new();
        for c in &self.compositions {
            let draft = CompositionDraft {
                name: c.name.clone(),
                owner: self.user.clone(),
                feature_refs: c.feature_refs.clone(),
                placements: c.placements.clone(),
                screenshot: blobs.insert(c.screenshot.clone().into_bytes()),
                created_at: c.created_at,
            };
            workspace.add_composition(draft.seal()?)?;
        }
        workspace.set_sharing(self.sharing);
        Ok((workspace, catalog, blobs))
    }
}

impl Script {
    /// Relay user table and rosters for the script's peers.
    pub fn relay_tables(&self) -> (UserTable, Rosters) {
        let mut table = UserTable::default();
        let mut rosters = Rosters::default();
        for p in &self.peers {
            table.insert(p.user.clone(), p.token.clone());
            for c in &p.contacts {
                rosters.add(p.user.clone(), c.clone());
            }
        }
        (table, rosters)
    }

    pub fn peer(&self, user: &UserId) -> Option<&PeerSetup> {
        self.peers.iter().find(|p| &p.user == user)
    }

    pub fn empty() -> Self {
        Self { seed: 0, peers: Vec::new(), actions: Vec::new() }
    }

    pub fn to_document(&self) -> String {
        codec::to_canonical(self).expect("scripts have no floats").as_str().to_string()
    }

    pub fn from_document(text: &str) -> Result<Self, CodecError> {
        codec::from_lenient(text.as_bytes())
    }
}
