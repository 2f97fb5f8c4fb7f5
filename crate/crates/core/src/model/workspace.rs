use std::collections::BTreeMap;

use super::{Composition, FeatureId, ModelError, UserId, Version};
use crate::codec::CompositionId;

/// A user's local installation: installed features, compositions and settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    owner: UserId,
    installed: BTreeMap<FeatureId, Version>,
    compositions: Vec<Composition>,
    active: Option<CompositionId>,
    sharing_enabled: bool,
}

impl Workspace {
    /// An empty workspace with sharing enabled.
    pub fn new(owner: UserId) -> Self {
        Self { owner, installed: BTreeMap::new(), compositions: Vec::new(), active: None, sharing_enabled: true }
    }

    pub fn from_parts(
        owner: UserId,
        installed: BTreeMap<FeatureId, Version>,
        compositions: Vec<Composition>,
        active: Option<CompositionId>,
        sharing_enabled: bool,
    ) -> Result<Self, ModelError> {
        let mut w = Self { owner, installed, compositions: Vec::new(), active: None, sharing_enabled };
        for c in compositions {
            w.add_composition(c)?;
        }
        if let Some(id) = active {
            w = w.set_active(&id)?;
        }
        Ok(w)
    }

    pub fn owner(&self) -> &UserId {
        &self.owner
    }
    pub fn installed(&self) -> &BTreeMap<FeatureId, Version> {
        &self.installed
    }
    pub fn installed_version(&self, id: &FeatureId) -> Option<Version> {
        self.installed.get(id).copied()
    }
    pub fn compositions(&self) -> &[Composition] {
        &self.compositions
    }
    pub fn composition(&self, id: &CompositionId) -> Option<&Composition> {
        self.compositions.iter().find(|c| c.id() == id)
    }
    pub fn active(&self) -> Option<&CompositionId> {
        self.active.as_ref()
    }
    pub fn sharing_enabled(&self) -> bool {
        self.sharing_enabled
    }

    pub fn set_sharing(&mut self, enabled: bool) {
        self.sharing_enabled = enabled;
    }

    /// Records `id` as installed at `version`, replacing any earlier version.
    pub fn install(&mut self, id: FeatureId, version: Version) {
        self.installed.insert(id, version);
    }

    pub fn add_composition(&mut self, c: Composition) -> Result<(), ModelError> {
        if self.composition(c.id()).is_some() {
            return Err(ModelError::DuplicateComposition(c.id().clone()));
        }
        self.compositions.push(c);
        Ok(())
    }

    /// Returns a copy of this workspace with `id` as the active composition.
    pub fn set_active(&self, id: &CompositionId) -> Result<Workspace, ModelError> {
        if self.composition(id).is_none() {
            return Err(ModelError::UnknownComposition(id.clone()));
        }
        let mut next = self.clone();
        next.active = Some(id.clone());
        Ok(next)
    }
}
