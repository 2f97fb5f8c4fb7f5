use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{nfc, FeatureId, ModelError, PartId, Version};

/// A minimum-version constraint on another feature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dependency {
    pub id: FeatureId,
    pub min_version: Version,
}

impl Dependency {
    pub fn new(id: FeatureId, min_version: Version) -> Self {
        Self { id, min_version }
    }

    pub fn accepts(&self, version: Version) -> bool {
        version >= self.min_version
    }
}

/// A versioned installable unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "FeatureRaw")]
pub struct Feature {
    id: FeatureId,
    version: Version,
    display_name: String,
    description: String,
    category: String,
    dependencies: Vec<Dependency>,
    parts: Vec<PartId>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRaw {
    id: FeatureId,
    version: Version,
    display_name: String,
    description: String,
    category: String,
    dependencies: Vec<Dependency>,
    parts: Vec<PartId>,
}

impl TryFrom<FeatureRaw> for Feature {
    type Error = ModelError;

    fn try_from(r: FeatureRaw) -> Result<Self, Self::Error> {
        Feature::new(r.id, r.version, &r.display_name, &r.description, &r.category, r.dependencies, r.parts)
    }
}

impl Feature {
    pub fn new(
        id: FeatureId,
        version: Version,
        display_name: &str,
        description: &str,
        category: &str,
        mut dependencies: Vec<Dependency>,
        mut parts: Vec<PartId>,
    ) -> Result<Self, ModelError> {
        dependencies.sort();
        for pair in dependencies.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateDependency { feature: id, dependency: pair[0].id.clone() });
            }
        }
        if dependencies.iter().any(|d| d.id == id) {
            return Err(ModelError::SelfDependency(id));
        }
        parts.sort();
        for pair in parts.windows(2) {
            if pair[0] == pair[1] {
                return Err(ModelError::DuplicatePart { feature: id, part: pair[0].clone() });
            }
        }
        Ok(Self {
            id,
            version,
            display_name: nfc(display_name),
            description: nfc(description),
            category: nfc(category),
            dependencies,
            parts,
        })
    }

    pub fn id(&self) -> &FeatureId {
        &self.id
    }
    pub fn version(&self) -> Version {
        self.version
    }
    pub fn display_name(&self) -> &str {
        &self.display_name
    }
    pub fn description(&self) -> &str {
        &self.description
    }
    pub fn category(&self) -> &str {
        &self.category
    }
    /// Dependencies, sorted by feature id.
    pub fn dependencies(&self) -> &[Dependency] {
        &self.dependencies
    }
    /// Contributed parts, sorted.
    pub fn parts(&self) -> &[PartId] {
        &self.parts
    }
}

/// A catalog entry: feature metadata plus, when known locally, its payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub feature: Feature,
    pub payload: Option<Arc<[u8]>>,
}

/// The set of features known to a peer, keyed by `(id, version)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    entries: BTreeMap<(FeatureId, Version), CatalogEntry>,
    categories: BTreeSet<String>,
}

impl Catalog {
    pub fn new<I, S>(categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            entries: BTreeMap::new(),
            categories: categories.into_iter().map(|c| nfc(c.as_ref())).collect(),
        }
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(String::as_str)
    }

    pub fn add_category(&mut self, label: &str) {
        self.categories.insert(nfc(label));
    }

    /// Inserts or replaces an entry. The feature's category must already be known.
    pub fn insert(&mut self, feature: Feature, payload: Option<Arc<[u8]>>) -> Result<(), ModelError> {
        if !self.categories.contains(feature.category()) {
            return Err(ModelError::UnknownCategory(feature.category().to_string()));
        }
        let key = (feature.id().clone(), feature.version());
        self.entries.insert(key, CatalogEntry { feature, payload });
        Ok(())
    }

    /// Adds metadata learned from a peer without touching payloads already held.
    pub fn merge_metadata(&mut self, feature: Feature) {
        self.add_category(&feature.category().to_string());
        let key = (feature.id().clone(), feature.version());
        self.entries.entry(key).or_insert(CatalogEntry { feature, payload: None });
    }

    pub fn set_payload(&mut self, id: &FeatureId, version: Version, payload: Arc<[u8]>) -> bool {
        match self.entries.get_mut(&(id.clone(), version)) {
            Some(entry) => {
                entry.payload = Some(payload);
                true
            }
            None => false,
        }
    }

    pub fn get(&self, id: &FeatureId, version: Version) -> Option<&CatalogEntry> {
        self.entries.get(&(id.clone(), version))
    }

    /// Lowest catalog version of `id` that is `>= min`.
    pub fn resolve(&self, id: &FeatureId, min: Version) -> Option<&CatalogEntry> {
        self.entries
            .range((id.clone(), min)..=(id.clone(), Version::new(u32::MAX, u32::MAX, u32::MAX)))
            .map(|(_, e)| e)
            .next()
    }

    pub fn versions<'a>(&'a self, id: &'a FeatureId) -> impl Iterator<Item = Version> + 'a {
        self.entries
            .range((id.clone(), Version::new(0, 0, 0))..)
            .take_while(move |((eid, _), _)| eid == id)
            .map(|((_, v), _)| *v)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    pub fn features(&self) -> impl Iterator<Item = &Feature> {
        self.entries.values().map(|e| &e.feature)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that every dependency of every entry is satisfiable and every
    /// category is declared.
    pub fn validate(&self) -> Result<(), ModelError> {
        for entry in self.entries.values() {
            let f = &entry.feature;
            if !self.categories.contains(f.category()) {
                return Err(ModelError::UnknownCategory(f.category().to_string()));
            }
            for dep in f.dependencies() {
                if self.resolve(&dep.id, dep.min_version).is_none() {
                    return Err(ModelError::UnresolvableRef(dep.id.clone(), dep.min_version));
                }
            }
        }
        Ok(())
    }
}
