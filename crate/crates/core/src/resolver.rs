//! Install planning: classify a shared composition's features against the
//! local workspace, order what is missing, and apply the result.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::codec::{self, CompositionId, Digest};
use crate::model::{feature_closure, Catalog, Composition, FeatureId, FeatureRef, ModelError, UserId, Version, Workspace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("feature {0} is not referenced by the composition")]
    NotInComposition(FeatureId),
    #[error("plan was made for composition {planned}, not {given}")]
    WrongComposition { planned: CompositionId, given: CompositionId },
    #[error("refusing to change installed versions of {}", .0.iter().map(|m| m.id.as_str()).collect::<Vec<_>>().join(", "))]
    ConflictRefused(Vec<Mismatch>),
    #[error("catalog has no payload for {0} {1}")]
    PayloadMissing(FeatureId, Version),
    #[error("workspace changed since the plan was made")]
    StaleWorkspace,
}

/// An installed feature that is older than the composition requires.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mismatch {
    pub id: FeatureId,
    pub local: Version,
    pub required: Version,
}

/// The classified difference between a shared composition and a workspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstallPlan {
    pub composition: CompositionId,
    pub source: UserId,
    /// Composition refs the user chose, sorted.
    pub selected: Vec<FeatureId>,
    pub already_present: Vec<FeatureRef>,
    pub missing: Vec<FeatureRef>,
    pub version_mismatch: Vec<Mismatch>,
    /// Missing features and upgrade candidates, dependencies first.
    pub install_order: Vec<FeatureRef>,
    /// The composition itself was requested and is not in the workspace yet.
    pub include_composition: bool,
    /// Fingerprint of the workspace the plan was computed against.
    pub workspace: Digest,
}

impl InstallPlan {
    /// True when applying the plan would change nothing.
    pub fn is_noop(&self) -> bool {
        self.install_order.is_empty() && !self.include_composition
    }
}

/// Whether `apply` may replace older installed versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpgradePolicy {
    #[default]
    Refuse,
    Force,
}

/// One line of the install event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstallEvent {
    pub feature: FeatureId,
    pub version: Version,
    pub source: UserId,
}

impl fmt::Display for InstallEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.feature, self.version, self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub workspace: Workspace,
    pub events: Vec<InstallEvent>,
}

/// Digest over the parts of a workspace an install depends on.
pub fn workspace_fingerprint(w: &Workspace) -> Digest {
    let ids: Vec<String> = w.compositions().iter().map(|c| c.id().to_string()).collect();
    let doc = codec::to_canonical(&json!({ "compositions": ids, "installed": w.installed() }))
        .expect("workspace fingerprint has no floats");
    Digest::of(doc.as_bytes())
}

/// Classifies the closure of the selected composition refs against `w`.
///
/// `selected = None` selects every ref. Only the closure of the selection is
/// ever considered, never anything else the sharer has installed.
pub fn diff(
    c: &Composition,
    selected: Option<&BTreeSet<FeatureId>>,
    include_composition: bool,
    w: &Workspace,
    cat: &Catalog,
) -> Result<InstallPlan, ResolveError> {
    let refs: Vec<&FeatureRef> = match selected {
        None => c.feature_refs().iter().collect(),
        Some(ids) => ids
            .iter()
            .map(|id| c.feature_ref(id).ok_or_else(|| ResolveError::NotInComposition(id.clone())))
            .collect::<Result<_, _>>()?,
    };

    let mut closure = BTreeSet::new();
    for r in &refs {
        closure.extend(feature_closure(&r.id, r.version, cat)?);
    }
    // One version per feature: the highest any path asked for, which meets every minimum.
    let mut required: BTreeMap<FeatureId, Version> = BTreeMap::new();
    for (id, v) in closure {
        let slot = required.entry(id).or_insert(v);
        *slot = (*slot).max(v);
    }
    let graph = dependency_graph(&required, cat);
    if let Some(cycle) = find_cycle(&graph) {
        return Err(ModelError::DependencyCycle(cycle.into_iter().cloned().collect()).into());
    }

    let mut plan = InstallPlan {
        composition: *c.id(),
        source: c.owner().clone(),
        selected: refs.iter().map(|r| r.id.clone()).collect(),
        already_present: Vec::new(),
        missing: Vec::new(),
        version_mismatch: Vec::new(),
        install_order: Vec::new(),
        include_composition: include_composition && w.composition(c.id()).is_none(),
        workspace: workspace_fingerprint(w),
    };
    for (id, &version) in &required {
        match w.installed_version(id) {
            Some(local) if local >= version => plan.already_present.push(FeatureRef::new(id.clone(), version)),
            Some(local) => plan.version_mismatch.push(Mismatch { id: id.clone(), local, required: version }),
            None => plan.missing.push(FeatureRef::new(id.clone(), version)),
        }
    }
    let to_install: BTreeSet<&FeatureId> =
        plan.missing.iter().map(|r| &r.id).chain(plan.version_mismatch.iter().map(|m| &m.id)).collect();
    plan.install_order = install_order(&graph, &to_install)
        .into_iter()
        .map(|id| FeatureRef::new(id.clone(), required[id]))
        .collect();
    Ok(plan)
}

/// Edges from each chosen feature to the ids it depends on.
fn dependency_graph<'a>(
    required: &'a BTreeMap<FeatureId, Version>,
    cat: &'a Catalog,
) -> BTreeMap<&'a FeatureId, Vec<&'a FeatureId>> {
    required
        .iter()
        .map(|(id, &v)| {
            let entry = cat.get(id, v).expect("closure nodes come from the catalog");
            let deps = entry.feature.dependencies().iter().map(|d| &d.id).collect();
            (id, deps)
        })
        .collect()
}

/// Topological order of `subset` where a feature follows everything it
/// reaches in `graph`, ties broken by ascending id.
fn install_order<'a>(
    graph: &BTreeMap<&'a FeatureId, Vec<&'a FeatureId>>,
    subset: &BTreeSet<&'a FeatureId>,
) -> Vec<&'a FeatureId> {
    // prerequisites[u] = members of the subset reachable from u
    let mut waiting_on: BTreeMap<&FeatureId, usize> = BTreeMap::new();
    let mut unblocks: BTreeMap<&FeatureId, Vec<&FeatureId>> = BTreeMap::new();
    for &u in subset {
        let reach = reachable(graph, u);
        let prereqs: Vec<_> = reach.into_iter().filter(|v| *v != u && subset.contains(v)).collect();
        waiting_on.insert(u, prereqs.len());
        for v in prereqs {
            unblocks.entry(v).or_default().push(u);
        }
    }
    let mut ready: BinaryHeap<Reverse<&FeatureId>> =
        waiting_on.iter().filter(|(_, &n)| n == 0).map(|(&u, _)| Reverse(u)).collect();
    let mut order = Vec::with_capacity(subset.len());
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &next in unblocks.get(u).into_iter().flatten() {
            let n = waiting_on.get_mut(next).expect("every dependent is in the subset");
            *n -= 1;
            if *n == 0 {
                ready.push(Reverse(next));
            }
        }
    }
    order
}

fn reachable<'a>(graph: &BTreeMap<&'a FeatureId, Vec<&'a FeatureId>>, start: &'a FeatureId) -> BTreeSet<&'a FeatureId> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in graph.get(u).into_iter().flatten() {
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen
}

/// First cycle found by a depth-first search visiting ids in ascending order,
/// reported as a closed path such as `[a, b, a]`.
fn find_cycle<K: Ord + Clone>(graph: &BTreeMap<K, Vec<K>>) -> Option<Vec<K>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Closed,
    }
    fn dfs<K: Ord + Clone>(
        u: &K,
        graph: &BTreeMap<K, Vec<K>>,
        marks: &mut BTreeMap<K, Mark>,
        path: &mut Vec<K>,
    ) -> Option<Vec<K>> {
        marks.insert(u.clone(), Mark::Open);
        path.push(u.clone());
        let mut next: Vec<&K> = graph.get(u).map(|v| v.iter().collect()).unwrap_or_default();
        next.sort();
        for v in next {
            match marks.get(v) {
                Some(Mark::Open) => {
                    let start = path.iter().position(|p| p == v).expect("open nodes are on the path");
                    let mut cycle = path[start..].to_vec();
                    cycle.push(v.clone());
                    return Some(cycle);
                }
                Some(Mark::Closed) => {}
                None => {
                    if let Some(c) = dfs(v, graph, marks, path) {
                        return Some(c);
                    }
                }
            }
        }
        path.pop();
        marks.insert(u.clone(), Mark::Closed);
        None
    }

    let mut marks = BTreeMap::new();
    for u in graph.keys() {
        if !marks.contains_key(u) {
            if let Some(c) = dfs(u, graph, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

/// Checks the catalog's feature-level dependency graph for cycles.
///
/// An edge `a -> b` exists when any version of `a` depends on `b`.
pub fn validate_acyclic(cat: &Catalog) -> Result<(), ModelError> {
    let mut graph: BTreeMap<FeatureId, Vec<FeatureId>> = BTreeMap::new();
    for f in cat.features() {
        let deps = graph.entry(f.id().clone()).or_default();
        for d in f.dependencies() {
            if !deps.contains(&d.id) {
                deps.push(d.id.clone());
            }
        }
    }
    match find_cycle(&graph) {
        Some(cycle) => Err(ModelError::DependencyCycle(cycle)),
        None => Ok(()),
    }
}

/// Applies a plan made by [`diff`] against this same workspace.
///
/// Either every planned feature is installed (and the composition copied when
/// requested) or the workspace is returned untouched inside the error path.
pub fn apply(
    plan: &InstallPlan,
    c: &Composition,
    w: &Workspace,
    cat: &Catalog,
    policy: UpgradePolicy,
) -> Result<Applied, ResolveError> {
    if plan.composition != *c.id() {
        return Err(ResolveError::WrongComposition { planned: plan.composition, given: *c.id() });
    }
    if plan.workspace != workspace_fingerprint(w) {
        return Err(ResolveError::StaleWorkspace);
    }
    if !plan.version_mismatch.is_empty() && policy != UpgradePolicy::Force {
        return Err(ResolveError::ConflictRefused(plan.version_mismatch.clone()));
    }
    for r in &plan.install_order {
        let has_payload = cat.get(&r.id, r.version).is_some_and(|e| e.payload.is_some());
        if !has_payload {
            return Err(ResolveError::PayloadMissing(r.id.clone(), r.version));
        }
    }

    let mut next = w.clone();
    let mut events = Vec::with_capacity(plan.install_order.len());
    for r in &plan.install_order {
        next.install(r.id.clone(), r.version);
        events.push(InstallEvent { feature: r.id.clone(), version: r.version, source: plan.source.clone() });
    }
    if plan.include_composition && next.composition(c.id()).is_none() {
        next.add_composition(c.clone())?;
    }
    Ok(Applied { workspace: next, events })
}
