use std::collections::{BTreeMap, BTreeSet};

use super::{Catalog, Composition, Feature, FeatureId, ModelError, Version};

type Node = (FeatureId, Version);

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    InProgress,
    Done,
}

/// Reflexive-transitive dependency closure of `id >= min`.
///
/// Every edge, including the root, resolves to the lowest catalog version
/// satisfying its minimum, so the result may hold two versions of one feature
/// when different dependents ask for different minimums.
pub fn feature_closure(id: &FeatureId, min: Version, cat: &Catalog) -> Result<BTreeSet<Node>, ModelError> {
    let mut marks = BTreeMap::new();
    let mut stack = Vec::new();
    visit(id, min, cat, &mut marks, &mut stack)?;
    Ok(marks.into_keys().collect())
}

fn visit(
    id: &FeatureId,
    min: Version,
    cat: &Catalog,
    marks: &mut BTreeMap<Node, Mark>,
    stack: &mut Vec<Node>,
) -> Result<(), ModelError> {
    let entry = cat.resolve(id, min).ok_or_else(|| ModelError::UnresolvableRef(id.clone(), min))?;
    let node = (id.clone(), entry.feature.version());
    match marks.get(&node) {
        Some(Mark::Done) => return Ok(()),
        Some(Mark::InProgress) => {
            let start = stack.iter().position(|n| n == &node).unwrap_or(0);
            let mut cycle: Vec<FeatureId> = stack[start..].iter().map(|(f, _)| f.clone()).collect();
            cycle.push(node.0);
            return Err(ModelError::DependencyCycle(cycle));
        }
        None => {}
    }
    marks.insert(node.clone(), Mark::InProgress);
    stack.push(node.clone());
    for dep in entry.feature.dependencies() {
        visit(&dep.id, dep.min_version, cat, marks, stack)?;
    }
    stack.pop();
    marks.insert(node, Mark::Done);
    Ok(())
}

/// Every feature a composition needs: its references plus their dependency
/// closures, including features that contribute no placed part.
///
/// Sorted by `(id, version)`.
pub fn composition_features<'c>(c: &Composition, cat: &'c Catalog) -> Result<Vec<&'c Feature>, ModelError> {
    let mut nodes = BTreeSet::new();
    for r in c.feature_refs() {
        nodes.extend(feature_closure(&r.id, r.version, cat)?);
    }
    Ok(nodes
        .into_iter()
        .map(|(id, v)| &cat.get(&id, v).expect("closure nodes come from the catalog").feature)
        .collect())
}

/// Filters the catalog by exact category and case-insensitive substring match
/// on display name or description. Sorted by display name, then newest version
/// first, then id.
pub fn search_catalog<'c>(cat: &'c Catalog, category: Option<&str>, text: Option<&str>) -> Vec<&'c Feature> {
    let needle = text.map(str::to_lowercase);
    let mut hits: Vec<&Feature> = cat
        .features()
        .filter(|f| category.is_none_or(|c| f.category() == c))
        .filter(|f| match &needle {
            None => true,
            Some(n) => f.display_name().to_lowercase().contains(n) || f.description().to_lowercase().contains(n),
        })
        .collect();
    hits.sort_by(|a, b| {
        a.display_name()
            .cmp(b.display_name())
            .then_with(|| b.version().cmp(&a.version()))
            .then_with(|| a.id().cmp(b.id()))
    });
    hits
}
