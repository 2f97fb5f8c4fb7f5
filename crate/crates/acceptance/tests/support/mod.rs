#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use compshare_core::codec::Digest;
use compshare_core::model::{
    Catalog, Composition, CompositionDraft, Dependency, Feature, FeatureId, FeatureRef, PartId, Placement, Rect,
    Timestamp, UserId, Version, Workspace,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fid(i: usize) -> FeatureId {
    FeatureId::new(&format!("org.test.f{i:03}")).unwrap()
}

pub const CATEGORIES: [&str; 4] = ["GUI", "Tools", "Languages", "Testing"];

/// Random acyclic catalog: feature `i` only depends on features `< i`, every
/// minimum is met by some existing version, and each feature has 1..=3 versions.
pub fn random_catalog(rng: &mut impl Rng, n: usize, max_deps: usize) -> Catalog {
    let mut cat = Catalog::new(CATEGORIES);
    let mut versions: Vec<Vec<Version>> = Vec::new();
    for i in 0..n {
        let count = rng.random_range(1..=3);
        let mut vs: Vec<Version> = (0..count)
            .map(|_| Version::new(rng.random_range(0..3), rng.random_range(0..4), rng.random_range(0..2)))
            .collect();
        vs.sort();
        vs.dedup();
        for v in &vs {
            let mut deps = Vec::new();
            if i > 0 {
                let k = rng.random_range(0..=max_deps.min(i));
                let mut targets: Vec<usize> = (0..i).collect();
                targets.shuffle(rng);
                for &t in targets.iter().take(k) {
                    let min = *versions[t].choose(rng).unwrap();
                    deps.push(Dependency::new(fid(t), min));
                }
            }
            let category = CATEGORIES[rng.random_range(0..CATEGORIES.len())];
            let f = Feature::new(fid(i), *v, &format!("Feature {i}"), "generated", category, deps, vec![]).unwrap();
            let payload: Arc<[u8]> = format!("payload {i} {v}").into_bytes().into();
            cat.insert(f, Some(payload)).unwrap();
        }
        versions.push(vs);
    }
    cat
}

/// Composition over `k` distinct random catalog features.
pub fn random_composition(rng: &mut impl Rng, cat: &Catalog, k: usize) -> Composition {
    let mut ids: Vec<FeatureId> = cat.features().map(|f| f.id().clone()).collect();
    ids.dedup();
    ids.shuffle(rng);
    let refs: Vec<FeatureRef> = ids
        .into_iter()
        .take(k)
        .map(|id| {
            let vs: Vec<Version> = cat.versions(&id).collect();
            FeatureRef::new(id, *vs.choose(rng).unwrap())
        })
        .collect();
    let placements = refs
        .iter()
        .take(3)
        .enumerate()
        .map(|(i, r)| Placement::new(PartId::new(&format!("part{i}")).unwrap(), r.id.clone(), random_rect(rng)))
        .collect();
    CompositionDraft {
        name: "random".into(),
        owner: UserId::new("john@acme").unwrap(),
        feature_refs: refs,
        placements,
        screenshot: Digest::of(&rng.random::<[u8; 8]>()),
        created_at: Timestamp(rng.random_range(0..2_000_000_000)),
    }
    .seal()
    .unwrap()
}

pub fn random_rect(rng: &mut impl Rng) -> Rect {
    let x = rng.random_range(0..1_000_000);
    let y = rng.random_range(0..1_000_000);
    let w = rng.random_range(1..=1_000_000 - x);
    let h = rng.random_range(1..=1_000_000 - y);
    Rect::from_micros(x, y, w, h).unwrap()
}

/// Workspace with roughly `n` catalog features installed at random catalog versions.
pub fn random_workspace(rng: &mut impl Rng, cat: &Catalog, n: usize) -> Workspace {
    let mut w = Workspace::new(UserId::new("peter@acme").unwrap());
    let mut ids: Vec<FeatureId> = cat.features().map(|f| f.id().clone()).collect();
    ids.dedup();
    ids.shuffle(rng);
    for id in ids.into_iter().take(n) {
        let vs: Vec<Version> = cat.versions(&id).collect();
        w.install(id, *vs.choose(rng).unwrap());
    }
    w
}

// ---- oracles: deliberately naive, sharing nothing with the library paths ----

/// Lowest version of `id` that is >= `min`, by linear scan.
pub fn scan_resolve(cat: &Catalog, id: &FeatureId, min: Version) -> Option<Version> {
    cat.features().filter(|f| f.id() == id && f.version() >= min).map(Feature::version).min()
}

fn scan_feature<'c>(cat: &'c Catalog, id: &FeatureId, v: Version) -> &'c Feature {
    cat.features().find(|f| f.id() == id && f.version() == v).unwrap()
}

/// Repeatedly unions direct dependencies until nothing changes.
pub fn fixpoint_closure(cat: &Catalog, roots: &[(FeatureId, Version)]) -> Option<BTreeSet<(FeatureId, Version)>> {
    let mut set = BTreeSet::new();
    for (id, min) in roots {
        set.insert((id.clone(), scan_resolve(cat, id, *min)?));
    }
    loop {
        let mut next = set.clone();
        for (id, v) in &set {
            for d in scan_feature(cat, id, *v).dependencies() {
                next.insert((d.id.clone(), scan_resolve(cat, &d.id, d.min_version)?));
            }
        }
        if next == set {
            return Some(set);
        }
        set = next;
    }
}

pub struct DiffOracle {
    pub present: BTreeSet<(FeatureId, Version)>,
    pub missing: BTreeSet<(FeatureId, Version)>,
    pub mismatch: BTreeSet<(FeatureId, Version, Version)>,
    /// For each feature to install: the features to install that it (transitively) needs.
    pub needs: BTreeMap<FeatureId, BTreeSet<FeatureId>>,
}

/// Exhaustive membership scan of the unified closure against the installed list.
pub fn diff_oracle(cat: &Catalog, roots: &[(FeatureId, Version)], w: &Workspace) -> DiffOracle {
    let closure = fixpoint_closure(cat, roots).unwrap();
    let mut required: BTreeMap<FeatureId, Version> = BTreeMap::new();
    for (id, v) in closure {
        let e = required.entry(id).or_insert(v);
        if v > *e {
            *e = v;
        }
    }
    let installed: Vec<(FeatureId, Version)> = w.installed().iter().map(|(k, v)| (k.clone(), *v)).collect();
    let mut o = DiffOracle { present: BTreeSet::new(), missing: BTreeSet::new(), mismatch: BTreeSet::new(), needs: BTreeMap::new() };
    for (id, v) in &required {
        match installed.iter().find(|(i, _)| i == id) {
            None => {
                o.missing.insert((id.clone(), *v));
            }
            Some((_, local)) if local >= v => {
                o.present.insert((id.clone(), *v));
            }
            Some((_, local)) => {
                o.mismatch.insert((id.clone(), *local, *v));
            }
        }
    }
    let install: BTreeSet<FeatureId> =
        o.missing.iter().map(|(i, _)| i.clone()).chain(o.mismatch.iter().map(|(i, _, _)| i.clone())).collect();
    for u in &install {
        // reachability by repeated expansion
        let mut reach: BTreeSet<FeatureId> = BTreeSet::from([u.clone()]);
        loop {
            let mut next = reach.clone();
            for x in &reach {
                for d in scan_feature(cat, x, required[x]).dependencies() {
                    next.insert(d.id.clone());
                }
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        reach.remove(u);
        o.needs.insert(u.clone(), reach.intersection(&install).cloned().collect());
    }
    o
}

/// Checks the order is a permutation of the install set, respects `needs`, and
/// at every step picks the smallest ready id.
pub fn check_install_order(order: &[FeatureId], needs: &BTreeMap<FeatureId, BTreeSet<FeatureId>>) -> Result<(), String> {
    let as_set: BTreeSet<&FeatureId> = order.iter().collect();
    if as_set.len() != order.len() || as_set != needs.keys().collect() {
        return Err(format!("order {order:?} is not a permutation of the install set"));
    }
    let mut placed: BTreeSet<&FeatureId> = BTreeSet::new();
    for u in order {
        let smallest_ready = needs
            .iter()
            .filter(|(k, _)| !placed.contains(k))
            .filter(|(_, n)| n.iter().all(|d| placed.contains(d)))
            .map(|(k, _)| k)
            .min()
            .ok_or("nothing ready")?;
        if smallest_ready != u {
            return Err(format!("expected {smallest_ready} next, got {u}"));
        }
        placed.insert(u);
    }
    Ok(())
}

/// Independent canonical JSON writer: bytewise-sorted keys, no whitespace, NFC strings.
pub fn canonical_oracle(v: &serde_json::Value) -> String {
    use serde_json::Value;
    use unicode_normalization::UnicodeNormalization;
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", canonical_oracle(&Value::String(k.clone())), canonical_oracle(&m[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical_oracle).collect::<Vec<_>>().join(",")),
        Value::String(s) => serde_json::to_string(&s.nfc().collect::<String>()).unwrap(),
        other => other.to_string(),
    }
}

/// SHA-256 of the id-less canonical document, hex encoded.
pub fn id_oracle(doc: &str) -> String {
    use sha2::Digest as _;
    let mut v: serde_json::Value = serde_json::from_str(doc).unwrap();
    v.as_object_mut().unwrap().remove("id");
    hex::encode(sha2::Sha256::digest(canonical_oracle(&v).as_bytes()))
}
