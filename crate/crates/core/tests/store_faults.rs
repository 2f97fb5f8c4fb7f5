mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use compshare_core::codec::Digest;
use compshare_core::model::{Catalog, CompositionDraft, Feature, FeatureRef, PartId, Placement, Rect, Timestamp, UserId, Version, Workspace};
use compshare_core::store::{Store, StoreError};
use rand::Rng;

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

struct Fixture {
    workspace: Workspace,
    previous: Workspace,
    catalog: Catalog,
    john: UserId,
}

fn build_small_store(root: &Path) -> Fixture {
    let store = Store::open(root).unwrap();
    let peter = UserId::new("peter@acme").unwrap();
    let john = UserId::new("john@acme").unwrap();
    let a = common::fid(1);
    let mut catalog = Catalog::new(["GUI"]);
    let payload: Arc<[u8]> = b"feature payload".to_vec().into();
    catalog.insert(Feature::new(a.clone(), Version::new(1, 0, 0), "A", "", "GUI", vec![], vec![]).unwrap(), Some(payload)).unwrap();

    let shot = b"\x89PNG\r\n\x1a\nshot".to_vec();
    let comp = CompositionDraft {
        name: "GUI".into(),
        owner: peter.clone(),
        feature_refs: vec![FeatureRef::new(a.clone(), Version::new(1, 0, 0))],
        placements: vec![Placement::new(PartId::new("view").unwrap(), a.clone(), Rect::new(0.0, 0.0, 0.5, 0.5).unwrap())],
        screenshot: Digest::of(&shot),
        created_at: Timestamp(7),
    }
    .seal()
    .unwrap();

    let w = store.lock().unwrap();
    w.put_blob(&shot).unwrap();
    w.save_catalog(&catalog).unwrap();
    let mut previous = Workspace::new(peter.clone());
    previous.install(a.clone(), Version::new(1, 0, 0));
    w.save_workspace(&previous).unwrap();
    let mut workspace = previous.clone();
    workspace.add_composition(comp.clone()).unwrap();
    let workspace = workspace.set_active(comp.id()).unwrap();
    w.save_workspace(&workspace).unwrap();
    w.cache_put(&john, &[comp], &[], Timestamp(9)).unwrap();
    Fixture { workspace, previous, catalog, john }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fx = build_small_store(dir.path());
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.load_workspace(&UserId::new("x@y").unwrap()).unwrap(), fx.workspace);
    assert_eq!(store.load_workspace_backup().unwrap(), Some(fx.previous));
    assert_eq!(store.load_catalog().unwrap(), fx.catalog);
}

#[test]
fn random_workspaces_round_trip() {
    let mut r = common::rng(21);
    let cat = common::random_catalog(&mut r, 30, 3);
    for _ in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut w = common::random_workspace(&mut r, &cat, 15);
        w.set_sharing(r.random_bool(0.5));
        let writer = store.lock().unwrap();
        for _ in 0..r.random_range(0..4) {
            let shot: Vec<u8> = (0..16).map(|_| r.random()).collect();
            let mut d = common::random_composition(&mut r, &cat, 4).into_draft();
            d.screenshot = writer.put_blob(&shot).unwrap();
            let c = d.seal().unwrap();
            w.add_composition(c).unwrap();
        }
        if let Some(first) = w.compositions().first().map(|c| *c.id()) {
            w = w.set_active(&first).unwrap();
        }
        writer.save_workspace(&w).unwrap();
        writer.save_catalog(&cat).unwrap();
        assert_eq!(store.load_workspace(w.owner()).unwrap(), w);
        assert_eq!(store.load_catalog().unwrap(), cat);
    }
}

/// Truncates every file of a small store at every byte offset. Each load must
/// either fail with `CorruptStore` or return exactly the state that was saved.
#[test]
fn truncation_at_every_offset_is_detected() {
    let pristine = tempfile::tempdir().unwrap();
    let fx = build_small_store(pristine.path());
    let owner = fx.workspace.owner().clone();
    let mut checked = 0;
    for file in files(pristine.path()) {
        let rel = file.strip_prefix(pristine.path()).unwrap().to_path_buf();
        let len = fs::metadata(&file).unwrap().len();
        for cut in 0..len {
            let scratch = tempfile::tempdir().unwrap();
            copy_dir(pristine.path(), scratch.path());
            let target = scratch.path().join(&rel);
            fs::OpenOptions::new().write(true).open(&target).unwrap().set_len(cut).unwrap();
            let store = Store::open(scratch.path()).unwrap();

            match store.load_workspace(&owner) {
                Ok(w) => assert_eq!(w, fx.workspace, "{rel:?} cut at {cut}"),
                Err(StoreError::CorruptStore(_)) => {}
                Err(e) => panic!("{rel:?} cut at {cut}: {e}"),
            }
            match store.load_workspace_backup() {
                Ok(w) => assert_eq!(w, Some(fx.previous.clone()), "{rel:?} cut at {cut}"),
                Err(StoreError::CorruptStore(_)) => {}
                Err(e) => panic!("{rel:?} cut at {cut}: {e}"),
            }
            match store.load_catalog() {
                Ok(c) => assert_eq!(c, fx.catalog, "{rel:?} cut at {cut}"),
                Err(StoreError::CorruptStore(_)) => {}
                Err(e) => panic!("{rel:?} cut at {cut}: {e}"),
            }
            match store.cache_get(&fx.john) {
                Ok(Some(e)) => assert_eq!(e.compositions, fx.workspace.compositions(), "{rel:?} cut at {cut}"),
                Err(StoreError::CorruptStore(_)) => {}
                other => panic!("{rel:?} cut at {cut}: {other:?}"),
            }
            if rel == Path::new("workspace.json") {
                // the main document is gone but the previous state is still there
                assert!(store.load_workspace(&owner).is_err());
                assert_eq!(store.load_workspace_backup().unwrap(), Some(fx.previous.clone()));
            }
            checked += 1;
        }
    }
    assert!(checked > 500, "only {checked} truncations exercised");
}
