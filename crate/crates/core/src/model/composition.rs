use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{nfc, FeatureId, ModelError, PartId, Rect, UserId, Version};
use crate::codec::{self, CompositionId, Digest};

/// UTC time in whole seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A composition's reference to one feature at a given (minimum) version.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRef {
    pub id: FeatureId,
    pub version: Version,
}

impl FeatureRef {
    pub fn new(id: FeatureId, version: Version) -> Self {
        Self { id, version }
    }
}

/// Where a part of a feature sits on the composition's screenshot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub part: PartId,
    pub feature: FeatureId,
    pub region: Rect,
}

impl Placement {
    pub fn new(part: PartId, feature: FeatureId, region: Rect) -> Self {
        Self { part, feature, region }
    }

    fn sort_key(&self) -> (&PartId, &FeatureId, u32, u32, u32, u32) {
        let r = &self.region;
        (&self.part, &self.feature, r.x_micros(), r.y_micros(), r.w_micros(), r.h_micros())
    }
}

impl PartialOrd for Placement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Placement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

/// Everything a composition carries except its id.
///
/// The screenshot is referenced by digest; the image bytes themselves travel
/// and are stored as a separate blob.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionDraft {
    pub name: String,
    pub owner: UserId,
    pub feature_refs: Vec<FeatureRef>,
    pub placements: Vec<Placement>,
    pub screenshot: Digest,
    pub created_at: Timestamp,
}

impl CompositionDraft {
    /// Validates the draft, orders its lists canonically and computes its id.
    pub fn seal(mut self) -> Result<Composition, ModelError> {
        self.normalize()?;
        let id = codec::composition_id(&self);
        Ok(Composition { id, draft: self })
    }

    pub(crate) fn normalize(&mut self) -> Result<(), ModelError> {
        self.name = nfc(&self.name);
        self.feature_refs.sort();
        for pair in self.feature_refs.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateRef(pair[0].id.clone()));
            }
        }
        let refs: BTreeSet<&FeatureId> = self.feature_refs.iter().map(|r| &r.id).collect();
        if let Some(p) = self.placements.iter().find(|p| !refs.contains(&p.feature)) {
            return Err(ModelError::DanglingPlacement { part: p.part.clone(), feature: p.feature.clone() });
        }
        self.placements.sort();
        Ok(())
    }
}

/// A named, content-addressed selection of features plus their layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    id: CompositionId,
    draft: CompositionDraft,
}

impl Composition {
    pub fn id(&self) -> &CompositionId {
        &self.id
    }
    pub fn name(&self) -> &str {
        &self.draft.name
    }
    pub fn owner(&self) -> &UserId {
        &self.draft.owner
    }
    /// Feature references, sorted by feature id.
    pub fn feature_refs(&self) -> &[FeatureRef] {
        &self.draft.feature_refs
    }
    /// Placements in canonical order.
    pub fn placements(&self) -> &[Placement] {
        &self.draft.placements
    }
    pub fn screenshot(&self) -> &Digest {
        &self.draft.screenshot
    }
    pub fn created_at(&self) -> Timestamp {
        self.draft.created_at
    }

    pub fn feature_ref(&self, id: &FeatureId) -> Option<&FeatureRef> {
        self.draft.feature_refs.iter().find(|r| &r.id == id)
    }

    pub fn draft(&self) -> &CompositionDraft {
        &self.draft
    }

    pub fn into_draft(self) -> CompositionDraft {
        self.draft
    }
}
