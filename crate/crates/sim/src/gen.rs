//! Synthetic feature catalogs.

use std::sync::Arc;

use compshare_core::model::{Catalog, Dependency, Feature, FeatureId, PartId, Version};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GEN_CATEGORIES: [&str; 4] = ["Languages", "Modeling", "Testing", "Tools"];

pub fn gen_id(i: usize) -> FeatureId {
    FeatureId::new(&format!("gen.f{i:03}")).expect("generated ids are valid")
}

/// Deterministic payload bytes for a feature version.
pub fn payload_for(id: &FeatureId, v: Version) -> Arc<[u8]> {
    format!("payload {id} {v}\n").into_bytes().into()
}

/// A deterministic acyclic catalog of `n` features. Each feature depends on at
/// most `max_deps` features generated before it. About half carry GUI parts.
pub fn gen_catalog(seed: u64, n: usize, max_deps: usize) -> Catalog {
    assert!(n >= 1, "a catalog needs at least one feature");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cat = Catalog::new(GEN_CATEGORIES);
    let mut versions = Vec::with_capacity(n);
    for i in 0..n {
        let id = gen_id(i);
        let v = Version::new(1, rng.random_range(0..4), rng.random_range(0..3));
        let k = rng.random_range(0..=max_deps.min(i));
        let deps = sample(&mut rng, i.max(1), k)
            .into_iter()
            .map(|j| Dependency::new(gen_id(j), versions[j]))
            .collect();
        let parts = if rng.random_bool(0.5) {
            (0..rng.random_range(1..3)).map(|p| PartId::new(&format!("View {i}.{p}")).expect("valid part")).collect()
        } else {
            Vec::new()
        };
        let category = GEN_CATEGORIES[rng.random_range(0..GEN_CATEGORIES.len())];
        let f = Feature::new(id.clone(), v, &format!("Feature {i}"), &format!("generated feature {i}"), category, deps, parts)
            .expect("generated features are valid");
        cat.insert(f, Some(payload_for(&id, v))).expect("category is known");
        versions.push(v);
    }
    cat
}
