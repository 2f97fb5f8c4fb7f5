//! Ready-made scripts: the Peter/John story and random scenarios.

use std::collections::{BTreeMap, BTreeSet};

use compshare_core::model::{
    feature_closure, Catalog, Dependency, Feature, FeatureId, FeatureRef, PartId, Placement, Rect, Timestamp, UserId, Version,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gen::gen_catalog;
use crate::script::{Action, CompositionSpec, PeerSetup, Script, TimedAction};

pub const GUI_COMPOSITION: &str = "GUI Development";

fn u(s: &str) -> UserId {
    UserId::new(s).expect("valid user")
}

fn fid(s: &str) -> FeatureId {
    FeatureId::new(s).expect("valid feature id")
}

fn v(s: &str) -> Version {
    s.parse().expect("valid version")
}

fn feature(id: &str, ver: &str, name: &str, category: &str, deps: &[(&str, &str)], parts: &[&str]) -> Feature {
    let deps = deps.iter().map(|(d, m)| Dependency::new(fid(d), v(m))).collect();
    let parts = parts.iter().map(|p| PartId::new(p).expect("valid part")).collect();
    Feature::new(fid(id), v(ver), name, &format!("{name} for Eclipse"), category, deps, parts).expect("valid feature")
}

pub fn peter() -> UserId {
    u("peter@acme.example")
}

pub fn john() -> UserId {
    u("john@acme.example")
}

/// John's catalog: the GUI Development features plus unrelated ones he keeps to himself.
pub fn john_catalog() -> Vec<Feature> {
    vec![
        feature("org.eclipse.platform", "3.5.0", "Eclipse Platform", "Platform", &[], &[]),
        feature("org.eclipse.jdt", "3.5.0", "Java Development Tools", "Languages", &[("org.eclipse.platform", "3.5.0")], &["Package Explorer"]),
        feature("org.eclipse.emf", "2.5.0", "Eclipse Modeling Framework", "Modeling", &[("org.eclipse.platform", "3.5.0")], &[]),
        feature("org.eclipse.gef", "3.5.0", "Graphical Editing Framework", "Modeling", &[("org.eclipse.platform", "3.5.0")], &["Graphical Viewer"]),
        feature(
            "org.eclipse.ve",
            "1.4.0",
            "Visual Editor",
            "Tools",
            &[("org.eclipse.emf", "2.5.0"), ("org.eclipse.gef", "3.5.0")],
            &["Palette", "Visual Editor"],
        ),
        feature("org.eclipse.cdt", "6.0.0", "C/C++ Development Tools", "Languages", &[("org.eclipse.platform", "3.5.0")], &["C/C++ Projects"]),
        feature("org.acme.timesheet", "1.0.0", "Timesheet", "Tools", &[], &["Hours"]),
    ]
}

pub fn gui_composition() -> CompositionSpec {
    let r = |id: &str, ver: &str| FeatureRef::new(fid(id), v(ver));
    let place = |part: &str, id: &str, x: u32, y: u32, w: u32, h: u32| {
        Placement::new(PartId::new(part).expect("valid part"), fid(id), Rect::from_micros(x, y, w, h).expect("valid rect"))
    };
    CompositionSpec {
        name: GUI_COMPOSITION.into(),
        feature_refs: vec![
            r("org.eclipse.ve", "1.4.0"),
            r("org.eclipse.jdt", "3.5.0"),
            r("org.eclipse.gef", "3.5.0"),
            r("org.eclipse.emf", "2.5.0"),
            r("org.eclipse.platform", "3.5.0"),
        ],
        placements: vec![
            place("Package Explorer", "org.eclipse.jdt", 0, 100_000, 250_000, 900_000),
            place("Palette", "org.eclipse.ve", 750_000, 100_000, 250_000, 800_000),
        ],
        screenshot: "PNG: John's GUI Development workbench".into(),
        created_at: Timestamp(1_255_000_000),
    }
}

pub fn john_setup() -> PeerSetup {
    let catalog = john_catalog();
    PeerSetup {
        user: john(),
        token: "john-secret".into(),
        sharing: true,
        contacts: vec![peter()],
        installed: catalog.iter().map(|f| FeatureRef::new(f.id().clone(), f.version())).collect(),
        catalog,
        compositions: vec![gui_composition()],
    }
}

pub fn peter_setup() -> PeerSetup {
    let platform = john_catalog().into_iter().next().expect("platform first");
    PeerSetup {
        user: peter(),
        token: "peter-secret".into(),
        sharing: true,
        contacts: vec![john()],
        installed: vec![FeatureRef::new(platform.id().clone(), platform.version())],
        catalog: vec![platform],
        compositions: vec![],
    }
}

/// The feature Peter picks from John's composition.
pub fn peter_selection() -> FeatureId {
    fid("org.eclipse.ve")
}

fn at(t: u64, user: UserId, action: Action) -> TimedAction {
    TimedAction { at: t, user, action }
}

/// Peter asks John which tools he uses for GUI work, browses and previews
/// John's "GUI Development" composition, then installs the Visual Editor and
/// the layout.
pub fn peter_john() -> Script {
    let install = Action::Install {
        from: john(),
        composition: GUI_COMPOSITION.into(),
        select: Some(vec![peter_selection()]),
        with_composition: true,
        force: false,
    };
    Script {
        seed: 2010,
        peers: vec![john_setup(), peter_setup()],
        actions: vec![
            at(0, john(), Action::Connect),
            at(10, peter(), Action::Connect),
            at(20, peter(), Action::Chat { to: john(), text: "Which tools should I use to build the settings dialog?".into() }),
            at(30, john(), Action::Chat { to: peter(), text: "The Visual Editor. Look at my GUI Development composition.".into() }),
            at(40, peter(), Action::CompsGet { from: john() }),
            at(
                50,
                peter(),
                Action::Preview {
                    from: john(),
                    composition: GUI_COMPOSITION.into(),
                    points: vec![(875_000, 500_000), (100_000, 500_000), (500_000, 50_000)],
                },
            ),
            at(
                60,
                peter(),
                Action::Plan {
                    from: john(),
                    composition: GUI_COMPOSITION.into(),
                    select: Some(vec![peter_selection()]),
                    with_composition: true,
                },
            ),
            at(70, peter(), install),
            at(90, peter(), Action::Chat { to: john(), text: "Installed, thanks!".into() }),
            at(100, john(), Action::Disconnect),
            at(110, peter(), Action::Disconnect),
        ],
    }
}

/// Like [`peter_john`], but John leaves while Peter's downloads are in flight.
pub fn disconnect_during_install() -> Script {
    let mut s = peter_john();
    s.actions.retain(|a| a.at <= 70);
    s.actions.push(at(72, john(), Action::Disconnect));
    s.actions.push(at(100, peter(), Action::Disconnect));
    s
}

/// A random script over at most `max_peers` peers and `max_actions` actions.
pub fn random_script(seed: u64, max_peers: usize, max_actions: usize) -> Script {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let universe = gen_catalog(seed ^ 0x5eed, 24, 3);
    let all: Vec<&Feature> = universe.features().collect();
    let n = rng.random_range(2..=max_peers.max(2));
    let users: Vec<UserId> = (0..n).map(|i| u(&format!("p{i}@sim"))).collect();
    let mut peers = Vec::with_capacity(n);
    for (i, user) in users.iter().enumerate() {
        let mut installed: BTreeMap<FeatureId, Version> = BTreeMap::new();
        for _ in 0..rng.random_range(1..5) {
            let f = all.choose(&mut rng).expect("catalog is not empty");
            for (id, ver) in feature_closure(f.id(), f.version(), &universe).expect("generated catalogs are acyclic") {
                installed.insert(id, ver);
            }
        }
        let catalog: Vec<Feature> = installed.iter().map(|(id, ver)| universe.get(id, *ver).expect("closure node").feature.clone()).collect();
        let mut compositions = Vec::new();
        let ids: Vec<&FeatureId> = installed.keys().collect();
        for k in 0..rng.random_range(0..3) {
            let k_refs = rng.random_range(1..=ids.len().min(4));
            let mut picked: Vec<&FeatureId> = ids.choose_multiple(&mut rng, k_refs).copied().collect();
            picked.sort();
            compositions.push(random_composition(&mut rng, &universe, &picked, &installed, user, k));
        }
        // now and then an outdated install, to exercise version conflicts
        if rng.random_bool(0.2) {
            if let Some(id) = ids.choose(&mut rng) {
                installed.insert((*id).clone(), Version::new(0, 9, 0));
            }
        }
        let contacts: Vec<UserId> = users.iter().filter(|c| *c != user && rng.random_bool(0.6)).cloned().collect();
        peers.push(PeerSetup {
            user: user.clone(),
            token: format!("t{i}"),
            sharing: rng.random_bool(0.8),
            contacts,
            catalog,
            installed: installed.into_iter().map(|(id, ver)| FeatureRef::new(id, ver)).collect(),
            compositions,
        });
    }

    let mut actions = Vec::new();
    let mut t = 0;
    let mut online = vec![false; n];
    for _ in 0..rng.random_range(0..=max_actions) {
        t += rng.random_range(0..15);
        let i = rng.random_range(0..n);
        let me = &peers[i];
        let other = users[rng.random_range(0..n)].clone();
        let source = me.contacts.choose(&mut rng).cloned().unwrap_or_else(|| other.clone());
        let src_comps: Vec<String> =
            peers.iter().find(|p| p.user == source).map(|p| p.compositions.iter().map(|c| c.name.clone()).collect()).unwrap_or_default();
        let comp = src_comps.choose(&mut rng).cloned().unwrap_or_else(|| "missing".into());
        let select = |rng: &mut ChaCha8Rng| -> Option<Vec<FeatureId>> {
            let spec = peers.iter().find(|p| p.user == source)?.compositions.iter().find(|c| c.name == comp)?;
            if rng.random_bool(0.5) {
                return None;
            }
            let mut ids: Vec<FeatureId> = spec.feature_refs.iter().map(|r| r.id.clone()).collect();
            ids.shuffle(rng);
            ids.truncate(rng.random_range(1..=ids.len()));
            Some(ids)
        };
        let action = if !online[i] && rng.random_bool(0.7) {
            Action::Connect
        } else {
            match rng.random_range(0..10) {
                0 => Action::Disconnect,
                1 => Action::Share { enabled: rng.random_bool(0.5) },
                2 => Action::RosterGet,
                3 | 4 => Action::CompsGet { from: source.clone() },
                5 => Action::Preview { from: source.clone(), composition: comp, points: vec![(rng.random_range(0..=1_000_000), rng.random_range(0..=1_000_000))] },
                6 => Action::Plan { from: source.clone(), select: select(&mut rng), composition: comp, with_composition: rng.random_bool(0.5) },
                7 | 8 => Action::Install {
                    from: source.clone(),
                    select: select(&mut rng),
                    composition: comp,
                    with_composition: rng.random_bool(0.5),
                    force: rng.random_bool(0.3),
                },
                _ => Action::Chat { to: other, text: format!("message {t}") },
            }
        };
        match action {
            Action::Connect => online[i] = true,
            Action::Disconnect => online[i] = false,
            _ => {}
        }
        actions.push(TimedAction { at: t, user: users[i].clone(), action });
    }
    Script { seed, peers, actions }
}

fn random_composition(
    rng: &mut ChaCha8Rng,
    universe: &Catalog,
    picked: &[&FeatureId],
    installed: &BTreeMap<FeatureId, Version>,
    owner: &UserId,
    k: usize,
) -> CompositionSpec {
    let mut placements = Vec::new();
    let mut seen = BTreeSet::new();
    for id in picked {
        let f = &universe.get(id, installed[*id]).expect("installed from catalog").feature;
        for part in f.parts() {
            if rng.random_bool(0.7) && seen.insert(part.clone()) {
                let w = rng.random_range(1..=500_000);
                let h = rng.random_range(1..=500_000);
                let region = Rect::from_micros(rng.random_range(0..=1_000_000 - w), rng.random_range(0..=1_000_000 - h), w, h).expect("fits");
                placements.push(Placement::new(part.clone(), (*id).clone(), region));
            }
        }
    }
    CompositionSpec {
        name: format!("comp {k}"),
        feature_refs: picked.iter().map(|id| FeatureRef::new((*id).clone(), installed[*id])).collect(),
        placements,
        screenshot: format!("screenshot {owner} {k}"),
        created_at: Timestamp(k as i64),
    }
}
