//! Runs every acceptance criterion and prints one PASS/FAIL line for each.

mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use compshare_core::codec::{deserialize_composition, serialize_composition, Digest};
use compshare_core::model::{
    feature_closure, Catalog, CompositionDraft, Feature, FeatureId, FeatureRef, PartId, Placement, Rect, Timestamp, UserId, Version,
    Workspace,
};
use compshare_core::preview::hit_test;
use compshare_core::resolver::diff;
use compshare_core::store::{BlobSource, MemoryBlobs, Store, StoreError};
use compshare_net::{ClientConfig, Event, RelayServer, Session};
use compshare_protocol::bodies::{Comps, ErrorBody, ErrorCode, FeatureGet};
use compshare_protocol::ids::MsgIds;
use compshare_protocol::peer::serve;
use compshare_protocol::relay::Relay;
use compshare_protocol::{Address, Envelope, Kind, MsgId};
use compshare_sim::fuzz::opt_out_fuzz;
use compshare_sim::scenarios::{john, john_setup, peter, peter_john, peter_selection, peter_setup};
use compshare_sim::{check, run_scenario, PeerSetup};
use rand::seq::SliceRandom;
use rand::Rng;
use support::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria = [
        Criterion { name: "round-trip + canonicality", limit: Some(Duration::from_secs(60)), run: round_trip },
        Criterion { name: "resolver vs oracle", limit: Some(Duration::from_secs(120)), run: resolver_vs_oracle },
        Criterion { name: "perspective-scoped filtering", limit: None, run: scoped_filtering },
        Criterion { name: "opt-out completeness", limit: None, run: opt_out },
        Criterion { name: "peter/john scenario", limit: None, run: peter_john_scenario },
        Criterion { name: "hit-test equivalence", limit: None, run: hit_test_equivalence },
        Criterion { name: "offline cache", limit: None, run: offline_cache },
        Criterion { name: "crash safety", limit: None, run: crash_safety },
    ];
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.iter().any(|f| c.name.contains(f.as_str()))) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if took > limit => Err(format!("took {took:.1?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS  {:<30} {detail} ({took:.1?})", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<30} {why} ({took:.1?})", c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

const NAME_PIECES: [&str; 14] = ["a", "Z", " ", "é", "e\u{301}", "A\u{30a}", "Å", "\"", "\\", "\n", "\u{1}", "中", "🦀", "/"];

fn random_name(r: &mut impl Rng) -> String {
    (0..r.random_range(0..12)).map(|_| NAME_PIECES[r.random_range(0..NAME_PIECES.len())]).collect()
}

fn round_trip() -> Outcome {
    let mut r = rng(0xc0dec);
    let cat = random_catalog(&mut r, 60, 3);
    let n = 10_000;
    for i in 0..n {
        let k = r.random_range(0..=12);
        let mut d = random_composition(&mut r, &cat, k).into_draft();
        d.name = random_name(&mut r);
        let c = d.clone().seal().map_err(|e| format!("#{i}: {e}"))?;
        let doc = serialize_composition(&c);
        let text = doc.as_str();
        let back = deserialize_composition(doc.as_bytes()).map_err(|e| format!("#{i}: {e}"))?;
        ensure!(back == c, "#{i}: round trip changed the composition");
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("#{i}: {e}"))?;
        ensure!(canonical_oracle(&value) == text, "#{i}: document is not canonical: {text}");
        ensure!(id_oracle(text) == c.id().to_string(), "#{i}: id is not the content hash");

        let mut permuted = d;
        permuted.feature_refs.shuffle(&mut r);
        permuted.placements.shuffle(&mut r);
        let p = permuted.seal().map_err(|e| format!("#{i}: {e}"))?;
        ensure!(serialize_composition(&p).as_bytes() == doc.as_bytes(), "#{i}: permuted input changed the document");
    }
    Ok(format!("{n} compositions"))
}

fn resolver_vs_oracle() -> Outcome {
    let mut r = rng(196);
    let rounds = 1_000;
    let mut largest = 0;
    let mut installs = 0;
    for round in 0..rounds {
        let n = if round % 10 == 0 { 196 } else { r.random_range(1..=196) };
        let cat = random_catalog(&mut r, n, 4);
        largest = largest.max(n);

        let root = fid(r.random_range(0..n));
        let vs: Vec<Version> = cat.versions(&root).collect();
        let min = vs[r.random_range(0..vs.len())];
        let got: BTreeSet<(FeatureId, Version)> =
            feature_closure(&root, min, &cat).map_err(|e| format!("round {round}: {e}"))?.into_iter().map(|n| (n.0, n.1)).collect();
        ensure!(Some(&got) == fixpoint_closure(&cat, &[(root.clone(), min)]).as_ref(), "round {round}: closure of {root} differs");

        let installed = r.random_range(0..=n.min(40));
        let w = random_workspace(&mut r, &cat, installed);
        let k = r.random_range(1..=n.min(12));
        let c = random_composition(&mut r, &cat, k);
        let mut refs = c.feature_refs().to_vec();
        refs.shuffle(&mut r);
        let keep = r.random_range(1..=refs.len());
        let selected: BTreeSet<FeatureId> = refs[..keep].iter().map(|f| f.id.clone()).collect();
        let roots: Vec<_> = refs[..keep].iter().map(|f| (f.id.clone(), f.version)).collect();
        let plan = diff(&c, Some(&selected), true, &w, &cat).map_err(|e| format!("round {round}: {e}"))?;
        let o = diff_oracle(&cat, &roots, &w);
        let present: BTreeSet<_> = plan.already_present.iter().map(|f| (f.id.clone(), f.version)).collect();
        let missing: BTreeSet<_> = plan.missing.iter().map(|f| (f.id.clone(), f.version)).collect();
        let mismatch: BTreeSet<_> = plan.version_mismatch.iter().map(|m| (m.id.clone(), m.local, m.required)).collect();
        ensure!(present == o.present, "round {round}: already_present differs");
        ensure!(missing == o.missing, "round {round}: missing differs");
        ensure!(mismatch == o.mismatch, "round {round}: version_mismatch differs");
        let order: Vec<_> = plan.install_order.iter().map(|f| f.id.clone()).collect();
        check_install_order(&order, &o.needs).map_err(|e| format!("round {round}: {e}"))?;
        installs += order.len();
    }
    Ok(format!("{rounds} catalogs up to {largest} features, {installs} ordered installs"))
}

fn scoped_filtering() -> Outcome {
    let mut r = rng(40);
    let owner = UserId::new("john@acme").unwrap();
    let asker = UserId::new("peter@acme").unwrap();
    let cases = 200;
    let mut hidden_total = 0;
    for case in 0..cases {
        let cat = random_catalog(&mut r, 60, 3);
        let base = random_workspace(&mut r, &cat, 40);
        let mut w = Workspace::new(owner.clone());
        for (id, v) in base.installed() {
            w.install(id.clone(), *v);
        }
        let mut installed: Vec<(FeatureId, Version)> = w.installed().iter().map(|(k, v)| (k.clone(), *v)).collect();
        installed.shuffle(&mut r);
        let k = r.random_range(1..=12.min(installed.len() - 1));
        let refs: Vec<FeatureRef> = installed[..k].iter().map(|(id, v)| FeatureRef::new(id.clone(), *v)).collect();
        let shot = format!("screenshot {case}").into_bytes();
        let mut blobs = MemoryBlobs::new();
        let c = CompositionDraft {
            name: format!("case {case}"),
            owner: owner.clone(),
            placements: vec![Placement::new(PartId::new("view").unwrap(), refs[0].id.clone(), random_rect(&mut r))],
            feature_refs: refs.clone(),
            screenshot: blobs.insert(shot),
            created_at: Timestamp(case),
        }
        .seal()
        .map_err(|e| e.to_string())?;
        w.add_composition(c.clone()).map_err(|e| e.to_string())?;

        let roots: Vec<_> = refs.iter().map(|f| (f.id.clone(), f.version)).collect();
        let allowed = fixpoint_closure(&cat, &roots).ok_or(format!("case {case}: unresolvable composition"))?;
        let allowed_ids: BTreeSet<&FeatureId> = allowed.iter().map(|(id, _)| id).collect();
        let hidden: Vec<&FeatureId> = cat.features().map(Feature::id).filter(|id| !allowed_ids.contains(id)).collect();
        hidden_total += hidden.len();

        let req = Envelope::new(Kind::CompsGet, asker.clone(), Address::User(owner.clone()), MsgId([1; 16]), &serde_json::json!({}));
        let replies = serve(&w, &cat, &blobs, &req);
        ensure!(replies.len() == 1 && replies[0].kind == Kind::Comps, "case {case}: expected one COMPS reply");
        let text = replies[0].body_text();
        for id in &hidden {
            ensure!(!text.contains(&format!("\"{id}\"")), "case {case}: COMPS mentions out-of-scope {id}");
        }
        let comps: Comps = replies[0].body().map_err(|e| e.to_string())?;
        for f in &comps.features {
            ensure!(allowed.contains(&(f.id().clone(), f.version())), "case {case}: COMPS carries {} {}", f.id(), f.version());
        }

        for f in cat.features() {
            let get = FeatureGet { id: f.id().clone(), version: f.version() };
            let req = Envelope::new(Kind::FeatureGet, asker.clone(), Address::User(owner.clone()), MsgId([2; 16]), &get);
            let replies = serve(&w, &cat, &blobs, &req);
            let served = replies.first().is_some_and(|e| e.kind == Kind::Feature);
            let in_scope = allowed.contains(&(f.id().clone(), f.version()));
            ensure!(served == in_scope, "case {case}: FEATURE_GET {} {} served={served}", f.id(), f.version());
            if !served {
                let err: ErrorBody = replies[0].body().map_err(|e| e.to_string())?;
                ensure!(err.code == ErrorCode::NotAvailable, "case {case}: unexpected error {:?}", err.code);
            }
        }

        let mut planning = Catalog::new(Vec::<String>::new());
        for f in comps.features {
            planning.merge_metadata(f);
        }
        let plan = diff(&c, None, true, &Workspace::new(asker.clone()), &planning).map_err(|e| format!("case {case}: {e}"))?;
        for f in plan.missing.iter().chain(&plan.install_order).chain(&plan.already_present) {
            ensure!(allowed_ids.contains(&f.id), "case {case}: plan mentions {}", f.id);
        }
    }
    ensure!(hidden_total > 0, "no case had out-of-scope features");
    Ok(format!("{cases} cases, {hidden_total} out-of-scope catalog entries never exposed"))
}

fn opt_out() -> Outcome {
    let report = opt_out_fuzz(0x0ff, 10_000);
    ensure!(report.requests == 10_000, "only {} requests sent", report.requests);
    ensure!(report.leaks.is_empty(), "{} leaks, first: {}", report.leaks.len(), report.leaks[0]);
    Ok(format!("{} requests, {} reached the sharer, 0 leaks", report.requests, report.forwarded))
}

fn peter_john_scenario() -> Outcome {
    let golden = include_str!("../../sim/tests/golden/peter_john.txt");
    let script = peter_john();
    let runs: Vec<_> = (0..5).map(|_| run_scenario(&script)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    for (i, o) in runs.iter().enumerate() {
        ensure!(o.transcript_text() == golden, "run {i}: transcript differs from the reviewed golden transcript");
    }
    let o = &runs[0];
    let v = check::violations(o);
    ensure!(v.is_empty(), "protocol invariants violated: {v:?}");

    let p = &o.peers[&peter()];
    let shared = o.peers[&john()].workspace.compositions()[0].clone();
    let sel = peter_selection();
    let root = shared.feature_ref(&sel).ok_or("selection not in composition")?;
    let closure = fixpoint_closure(&p.catalog, &[(sel.clone(), root.version)]).ok_or("unresolvable selection")?;
    let mut expected: BTreeMap<FeatureId, Version> = closure.into_iter().collect();
    for r in &peter_setup().installed {
        expected.entry(r.id.clone()).or_insert(r.version);
    }
    ensure!(p.workspace.installed() == &expected, "installed {:?}, expected {:?}", p.workspace.installed(), expected);
    ensure!(p.workspace.compositions() == [shared.clone()], "copied compositions differ");
    ensure!(p.blobs.contains(shared.screenshot()), "screenshot not stored");

    ensure!(p.installs.len() == 1, "expected one install, got {}", p.installs.len());
    let events = p.installs[0].result.as_ref().map_err(|e| e.clone())?;
    let mut have: BTreeSet<FeatureId> = p.installs[0].before.installed().keys().cloned().collect();
    for e in events {
        let f = p.catalog.get(&e.feature, e.version).ok_or(format!("no metadata for {}", e.feature))?;
        for d in f.feature.dependencies() {
            ensure!(have.contains(&d.id), "{} installed before its dependency {}", e.feature, d.id);
        }
        have.insert(e.feature.clone());
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    {
        let w = store.lock().map_err(|e| e.to_string())?;
        w.put_blob(&p.blobs.blob(shared.screenshot()).ok_or("no screenshot")?).map_err(|e| e.to_string())?;
        w.save_catalog(&p.catalog).map_err(|e| e.to_string())?;
        w.save_workspace(&p.workspace).map_err(|e| e.to_string())?;
    }
    let reopened = Store::open(dir.path()).map_err(|e| e.to_string())?;
    ensure!(reopened.load_workspace(&peter()).map_err(|e| e.to_string())? == p.workspace, "store round trip changed the workspace");
    ensure!(reopened.load_catalog().map_err(|e| e.to_string())? == p.catalog, "store round trip changed the catalog");
    let order: Vec<&str> = events.iter().map(|e| e.feature.as_str()).collect();
    Ok(format!("5 identical transcripts, installed {}", order.join(", ")))
}

fn hit_test_equivalence() -> Outcome {
    let mut r = rng(50);
    let mut ties = 0;
    let mut hits = 0;
    let rounds = 10;
    for round in 0..rounds {
        let refs: Vec<FeatureRef> = (0..10).map(|i| FeatureRef::new(fid(i), Version::new(1, 0, 0))).collect();
        let mut placements: Vec<Placement> = Vec::new();
        for i in 0..50 {
            let region = if i % 5 == 4 {
                let prev = &placements[i - 1].region;
                let (w, h) = (prev.w_micros(), prev.h_micros());
                Rect::from_micros(r.random_range(0..=1_000_000 - w), r.random_range(0..=1_000_000 - h), w, h).unwrap()
            } else if i % 7 == 6 {
                placements[i - 2].region
            } else {
                random_rect(&mut r)
            };
            placements.push(Placement::new(PartId::new(&format!("part{:02}", i % 17)).unwrap(), fid(i % 10), region));
        }
        let c = CompositionDraft {
            name: "overlaps".into(),
            owner: UserId::new("john@acme").unwrap(),
            feature_refs: refs,
            placements,
            screenshot: Digest::of(b""),
            created_at: Timestamp(0),
        }
        .seal()
        .map_err(|e| e.to_string())?;
        for _ in 0..1_000 {
            let (x, y) = if r.random_bool(0.1) {
                let p = &c.placements()[r.random_range(0..c.placements().len())].region;
                (f64::from(p.x_micros()) / 1e6, f64::from(p.y_micros() + p.h_micros()) / 1e6)
            } else {
                (r.random_range(0.0..=1.0), r.random_range(0.0..=1.0))
            };
            let area = |q: &Placement| u64::from(q.region.w_micros()) * u64::from(q.region.h_micros());
            let inside: Vec<&Placement> = c
                .placements()
                .iter()
                .filter(|p| {
                    let (px, py, pw, ph) = (p.region.x_micros(), p.region.y_micros(), p.region.w_micros(), p.region.h_micros());
                    x * 1e6 >= f64::from(px) && x * 1e6 <= f64::from(px + pw) && y * 1e6 >= f64::from(py) && y * 1e6 <= f64::from(py + ph)
                })
                .collect();
            let best = inside.iter().copied().min_by_key(|p| (area(p), p.part.clone(), p.feature.clone()));
            if let Some(b) = best {
                hits += 1;
                if inside.iter().filter(|p| area(p) == area(b)).count() > 1 {
                    ties += 1;
                }
            }
            ensure!(hit_test(&c, x, y) == best, "round {round}: point ({x}, {y}) differs from the linear scan");
        }
    }
    ensure!(ties > 0, "no smallest-area ties were exercised");
    Ok(format!("{} points over 50-region compositions, {hits} hits, {ties} ties", rounds * 1_000))
}

fn seed_store(dir: &Path, setup: &PeerSetup) -> Result<Store, String> {
    let (w, cat, blobs) = setup.materialize().map_err(|e| e.to_string())?;
    let store = Store::open(dir).map_err(|e| e.to_string())?;
    let writer = store.lock().map_err(|e| e.to_string())?;
    for c in w.compositions() {
        writer.put_blob(&blobs.blob(c.screenshot()).ok_or("missing blob")?).map_err(|e| e.to_string())?;
    }
    writer.save_catalog(&cat).map_err(|e| e.to_string())?;
    writer.save_workspace(&w).map_err(|e| e.to_string())?;
    drop(writer);
    Ok(store)
}

fn offline_cache() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let john_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let peter_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let john_store = seed_store(john_dir.path(), &john_setup())?;
        let peter_store = seed_store(peter_dir.path(), &peter_setup())?;
        let script = compshare_sim::Script { seed: 0, peers: vec![john_setup(), peter_setup()], actions: vec![] };
        let (users, rosters) = script.relay_tables();
        let relay = RelayServer::bind("127.0.0.1:0", Relay::new(users, rosters, Box::new(MsgIds::seeded(9)))).await.map_err(|e| e.to_string())?;
        let addr = relay.local_addr().to_string();
        let john_s = Session::open(&ClientConfig::new(addr.clone(), john(), "john-secret"), john_store).await.map_err(|e| e.to_string())?;
        let peter_s = Session::open(&ClientConfig::new(addr, peter(), "peter-secret"), peter_store).await.map_err(|e| e.to_string())?;
        let mut events = peter_s.client().subscribe();

        let wall = || std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap().as_secs() as i64;
        let before = wall();
        let live = peter_s.browse(&john()).await.map_err(|e| e.to_string())?;
        let after = wall();
        ensure!(live.cached_at.is_none(), "first browse should be live");
        let shared = live.compositions[0].clone();
        peter_s.screenshot(&john(), &shared).await.map_err(|e| e.to_string())?;

        john_s.close();
        tokio::time::timeout(Duration::from_secs(10), async {
            loop {
                match events.recv().await {
                    Some(Event::Presence { user, online: false, .. }) if user == john() => return Ok(()),
                    Some(_) => {}
                    None => return Err("event stream closed".to_string()),
                }
            }
        })
        .await
        .map_err(|_| "john never went offline".to_string())??;

        let cached = peter_s.browse(&john()).await.map_err(|e| e.to_string())?;
        let at = cached.cached_at.ok_or("browse after disconnect was not served from cache")?;
        ensure!((before..=after).contains(&at.0), "staleness timestamp {} outside fetch window {before}..={after}", at.0);
        ensure!(cached.compositions == live.compositions, "cached compositions differ from the live listing");
        for c in &cached.compositions {
            let doc = serialize_composition(c);
            ensure!(id_oracle(doc.as_str()) == c.id().to_string(), "cached composition {} fails hash check", c.name());
        }
        let view = peter_s.plan(&john(), "GUI Development", None, true).await.map_err(|e| e.to_string())?;
        ensure!(view.cached_at == Some(at), "plan did not use the cache");
        peter_s.close();
        relay.shutdown();

        let fresh = Store::open(peter_dir.path()).map_err(|e| e.to_string())?;
        let entry = fresh.cache_get(&john()).map_err(|e| e.to_string())?.ok_or("cache entry lost on reopen")?;
        ensure!(entry.compositions == live.compositions, "reopened cache differs");
        let shot = fresh.get_blob(shared.screenshot()).map_err(|e| e.to_string())?.ok_or("screenshot not cached")?;
        let hex_digest = {
            use sha2::Digest as _;
            hex::encode(sha2::Sha256::digest(&shot))
        };
        ensure!(hex_digest == shared.screenshot().to_string(), "cached screenshot fails hash check");
        Ok(format!("{} composition(s) browsable offline, cached at {}", cached.compositions.len(), at.0))
    })
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn crash_safety() -> Outcome {
    let pristine = tempfile::tempdir().map_err(|e| e.to_string())?;
    let me = UserId::new("peter@acme").unwrap();
    let contact = UserId::new("john@acme").unwrap();
    let a = fid(1);
    let mut catalog = Catalog::new(["GUI"]);
    let payload: Arc<[u8]> = b"feature payload".to_vec().into();
    catalog
        .insert(Feature::new(a.clone(), Version::new(1, 0, 0), "A", "", "GUI", vec![], vec![]).unwrap(), Some(payload))
        .map_err(|e| e.to_string())?;
    let shot = b"\x89PNG\r\n\x1a\nshot".to_vec();
    let comp = CompositionDraft {
        name: "GUI".into(),
        owner: me.clone(),
        feature_refs: vec![FeatureRef::new(a.clone(), Version::new(1, 0, 0))],
        placements: vec![Placement::new(PartId::new("view").unwrap(), a.clone(), Rect::new(0.0, 0.0, 0.5, 0.5).unwrap())],
        screenshot: Digest::of(&shot),
        created_at: Timestamp(7),
    }
    .seal()
    .map_err(|e| e.to_string())?;
    let mut previous = Workspace::new(me.clone());
    previous.install(a.clone(), Version::new(1, 0, 0));
    let mut workspace = previous.clone();
    workspace.add_composition(comp.clone()).map_err(|e| e.to_string())?;
    let workspace = workspace.set_active(comp.id()).map_err(|e| e.to_string())?;
    {
        let store = Store::open(pristine.path()).map_err(|e| e.to_string())?;
        let w = store.lock().map_err(|e| e.to_string())?;
        w.put_blob(&shot).map_err(|e| e.to_string())?;
        w.save_catalog(&catalog).map_err(|e| e.to_string())?;
        w.save_workspace(&previous).map_err(|e| e.to_string())?;
        w.save_workspace(&workspace).map_err(|e| e.to_string())?;
        w.cache_put(&contact, &[comp.clone()], &[], Timestamp(9)).map_err(|e| e.to_string())?;
    }

    let consistent = |what: &str, ok: bool, err: Option<StoreError>| -> Result<(), String> {
        match err {
            None if ok => Ok(()),
            None => Err(format!("{what}: silently loaded a different state")),
            Some(StoreError::CorruptStore(_)) => Ok(()),
            Some(e) => Err(format!("{what}: unexpected error {e}")),
        }
    };
    let mut checked = 0;
    for file in files(pristine.path()) {
        let rel = file.strip_prefix(pristine.path()).unwrap().to_path_buf();
        let len = fs::metadata(&file).map_err(|e| e.to_string())?.len();
        for cut in 0..len {
            let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
            copy_dir(pristine.path(), scratch.path());
            fs::OpenOptions::new().write(true).open(scratch.path().join(&rel)).unwrap().set_len(cut).unwrap();
            let store = Store::open(scratch.path()).map_err(|e| e.to_string())?;
            let at = format!("{} cut at {cut}", rel.display());
            match store.load_workspace(&me) {
                Ok(w) => consistent(&at, w == workspace, None)?,
                Err(e) => consistent(&at, false, Some(e))?,
            }
            match store.load_workspace_backup() {
                Ok(w) => consistent(&at, w == Some(previous.clone()), None)?,
                Err(e) => consistent(&at, false, Some(e))?,
            }
            match store.load_catalog() {
                Ok(c) => consistent(&at, c == catalog, None)?,
                Err(e) => consistent(&at, false, Some(e))?,
            }
            match store.cache_get(&contact) {
                Ok(Some(e)) => consistent(&at, e.compositions == [comp.clone()], None)?,
                Ok(None) => consistent(&at, false, None)?,
                Err(e) => consistent(&at, false, Some(e))?,
            }
            match store.get_blob(comp.screenshot()) {
                Ok(Some(b)) => consistent(&at, *b == *shot, None)?,
                Ok(None) => consistent(&at, false, None)?,
                Err(e) => consistent(&at, false, Some(e))?,
            }
            checked += 1;
        }
    }
    ensure!(checked > 500, "only {checked} truncations exercised");
    Ok(format!("{checked} truncations, none loaded silently corrupt"))
}
