//! Screenshot preview: map a pointer position to the placed part under it.

use serde::{Deserialize, Serialize};

use crate::model::{Catalog, Composition, Feature, FeatureId, PartId, Placement, Rect};

/// Source of human-readable feature names.
pub trait FeatureNames {
    fn display_name(&self, id: &FeatureId) -> Option<&str>;
}

impl FeatureNames for Catalog {
    fn display_name(&self, id: &FeatureId) -> Option<&str> {
        // newest known version wins
        let v = self.versions(id).last()?;
        self.get(id, v).map(|e| e.feature.display_name())
    }
}

impl FeatureNames for [Feature] {
    fn display_name(&self, id: &FeatureId) -> Option<&str> {
        self.iter().rev().find(|f| f.id() == id).map(Feature::display_name)
    }
}

impl FeatureNames for Vec<Feature> {
    fn display_name(&self, id: &FeatureId) -> Option<&str> {
        self.as_slice().display_name(id)
    }
}

/// The innermost placement containing `(x, y)`: smallest area, then lowest
/// `(part, feature)`.
pub fn hit_test(c: &Composition, x: f64, y: f64) -> Option<&Placement> {
    c.placements()
        .iter()
        .filter(|p| p.region.contains(x, y))
        .min_by(|a, b| {
            a.region
                .area_micros()
                .cmp(&b.region.area_micros())
                .then_with(|| (&a.part, &a.feature).cmp(&(&b.part, &b.feature)))
        })
}

/// One highlightable region of a preview.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub region: Rect,
    pub part: PartId,
    pub feature: FeatureId,
    pub feature_name: String,
}

/// One annotation per placement, in canonical placement order. Features
/// without known metadata are labelled with their id.
pub fn annotation_list<N: FeatureNames + ?Sized>(c: &Composition, names: &N) -> Vec<Annotation> {
    c.placements()
        .iter()
        .map(|p| Annotation {
            region: p.region,
            part: p.part.clone(),
            feature: p.feature.clone(),
            feature_name: names.display_name(&p.feature).unwrap_or(p.feature.as_str()).to_string(),
        })
        .collect()
}

/// A probe point and the expected hit, for checking other hit-test
/// implementations against this one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitProbe {
    /// Micro-units, so that fixtures stay float-free.
    pub x: u32,
    pub y: u32,
    pub hit: Option<(PartId, FeatureId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitFixture {
    pub annotations: Vec<Annotation>,
    pub probes: Vec<HitProbe>,
}

/// Builds a fixture from probe points given in micro-units.
pub fn hit_fixture<N: FeatureNames + ?Sized>(c: &Composition, names: &N, points: &[(u32, u32)]) -> HitFixture {
    let scale = f64::from(crate::model::MICROS);
    let probes = points
        .iter()
        .map(|&(x, y)| HitProbe {
            x,
            y,
            hit: hit_test(c, f64::from(x) / scale, f64::from(y) / scale).map(|p| (p.part.clone(), p.feature.clone())),
        })
        .collect();
    HitFixture { annotations: annotation_list(c, names), probes }
}
