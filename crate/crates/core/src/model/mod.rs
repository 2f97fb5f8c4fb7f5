//! Domain types for features, compositions, workspaces and catalogs, plus the
//! pure queries over them.

mod catalog;
mod composition;
mod geometry;
mod ids;
mod query;
mod version;
mod workspace;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub use catalog::{Catalog, CatalogEntry, Dependency, Feature};
pub use composition::{Composition, CompositionDraft, FeatureRef, Placement, Timestamp};
pub use geometry::{Rect, MICROS};
pub use ids::{FeatureId, PartId, UserId};
pub use query::{composition_features, feature_closure, search_catalog};
pub use version::Version;
pub use workspace::Workspace;

use crate::codec::CompositionId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid feature id {0:?}")]
    InvalidFeatureId(String),
    #[error("invalid part id {0:?}")]
    InvalidPartId(String),
    #[error("invalid user id {0:?} (expected name@realm)")]
    InvalidUserId(String),
    #[error("invalid version {0:?} (expected major.minor.patch)")]
    InvalidVersion(String),
    #[error("invalid rect x={x} y={y} w={w} h={h} (micro-units)")]
    InvalidRect { x: u32, y: u32, w: u32, h: u32 },
    #[error("feature {0} depends on itself")]
    SelfDependency(FeatureId),
    #[error("feature {feature} lists dependency {dependency} more than once")]
    DuplicateDependency { feature: FeatureId, dependency: FeatureId },
    #[error("feature {feature} contributes part {part:?} more than once")]
    DuplicatePart { feature: FeatureId, part: PartId },
    #[error("composition references feature {0} more than once")]
    DuplicateRef(FeatureId),
    #[error("placement of part {part:?} names feature {feature}, which the composition does not reference")]
    DanglingPlacement { part: PartId, feature: FeatureId },
    #[error("category {0:?} is not part of the catalog")]
    UnknownCategory(String),
    #[error("no catalog entry satisfies {0} >= {1}")]
    UnresolvableRef(FeatureId, Version),
    #[error("dependency cycle: {}", display_cycle(.0))]
    DependencyCycle(Vec<FeatureId>),
    #[error("unknown composition {0}")]
    UnknownComposition(CompositionId),
    #[error("composition {0} is already part of the workspace")]
    DuplicateComposition(CompositionId),
}

fn display_cycle(cycle: &[FeatureId]) -> String {
    cycle.iter().map(FeatureId::as_str).collect::<Vec<_>>().join(" -> ")
}

/// NFC-normalizes free text so that canonical documents stay byte-stable.
pub(crate) fn nfc(s: &str) -> String {
    s.nfc().collect()
}
