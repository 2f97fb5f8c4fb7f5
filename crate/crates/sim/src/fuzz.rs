//! A hostile peer hammering an opted-out sharer with every request kind.

use compshare_core::codec::Digest;
use compshare_core::model::{Catalog, CompositionDraft, FeatureRef, Timestamp, UserId, Workspace};
use compshare_core::store::MemoryBlobs;
use compshare_protocol::bodies::{AttachmentGet, FeatureGet, Hello};
use compshare_protocol::client::{ClientCore, Incoming};
use compshare_protocol::ids::MsgIds;
use compshare_protocol::peer::serve;
use compshare_protocol::relay::{Action, ConnId, Relay, Rosters, UserTable};
use compshare_protocol::{Address, Envelope, Kind, MsgId};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::gen::gen_catalog;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FuzzReport {
    pub requests: usize,
    /// Envelopes that reached the sharer.
    pub forwarded: usize,
    /// Everything the fuzzing peer received.
    pub received: Vec<Envelope>,
    pub leaks: Vec<String>,
}

const SHARER: ConnId = 1;
const FUZZER: ConnId = 2;

/// Sends `n` random envelopes from a fuzzing peer to a sharer whose sharing
/// is off, routing through a real relay, and reports any composition data
/// that came back.
pub fn opt_out_fuzz(seed: u64, n: usize) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sharer = UserId::new("sharer@fuzz").expect("valid");
    let fuzzer = UserId::new("fuzzer@fuzz").expect("valid");
    let cat = gen_catalog(seed, 40, 3);
    let features: Vec<_> = cat.features().cloned().collect();
    let (w, blobs) = opted_out_workspace(&sharer, &cat, &mut rng);

    let users = UserTable::parse("sharer@fuzz a\nfuzzer@fuzz b\n").expect("static table");
    let rosters = Rosters::parse("sharer@fuzz fuzzer@fuzz\nfuzzer@fuzz sharer@fuzz\n").expect("static rosters");
    let mut relay = Relay::new(users, rosters, Box::new(MsgIds::seeded(seed)));
    let mut sharer_core = ClientCore::new(sharer.clone(), Box::new(MsgIds::seeded(seed + 1)));
    let mut report = FuzzReport::default();

    let pump = |relay: &mut Relay, core: &mut ClientCore, report: &mut FuzzReport, actions: Vec<Action>| {
        let mut queue: std::collections::VecDeque<Action> = actions.into();
        while let Some(a) = queue.pop_front() {
            match a {
                Action::Send(SHARER, e) => {
                    report.forwarded += 1;
                    if let Incoming::Request(req) = core.incoming(e) {
                        for rep in serve(&w, &cat, &blobs, &req) {
                            queue.extend(relay.receive(SHARER, rep));
                        }
                    }
                }
                Action::Send(_, e) => report.received.push(e),
                Action::Close(_) => {}
            }
        }
    };

    relay.open(SHARER);
    relay.open(FUZZER);
    let hello = sharer_core.hello("a", false);
    let actions = relay.receive(SHARER, hello);
    pump(&mut relay, &mut sharer_core, &mut report, actions);
    let hello = Envelope::new(Kind::Hello, fuzzer.clone(), Address::Relay, MsgId([0; 16]), &Hello { token: "b".into(), sharing: true });
    let actions = relay.receive(FUZZER, hello);
    pump(&mut relay, &mut sharer_core, &mut report, actions);
    report.received.clear();

    let digests: Vec<Digest> = w.compositions().iter().map(|c| *c.screenshot()).collect();
    let targets = [Address::User(sharer.clone()), Address::User(sharer.clone()), Address::User(sharer.clone()), Address::Relay, Address::User(fuzzer.clone())];
    for _ in 0..n {
        let kind = Kind::ALL[rng.random_range(0..Kind::ALL.len())];
        let to = targets.choose(&mut rng).expect("non-empty").clone();
        let mut id = [0u8; 16];
        rng.fill(&mut id);
        let body = match (kind, rng.random_range(0..4)) {
            (_, 0) => json!({ "junk": rng.random::<u32>() }),
            (Kind::FeatureGet, _) => {
                let f = features.choose(&mut rng).expect("non-empty");
                serde_json::to_value(FeatureGet { id: f.id().clone(), version: f.version() }).expect("plain data")
            }
            (Kind::AttachmentGet, _) => serde_json::to_value(AttachmentGet { digest: *digests.choose(&mut rng).expect("non-empty") }).expect("plain data"),
            _ => json!({}),
        };
        let e = Envelope::new(kind, fuzzer.clone(), to, MsgId(id), &body);
        report.requests += 1;
        let actions = relay.receive(FUZZER, e);
        pump(&mut relay, &mut sharer_core, &mut report, actions);
    }

    let secrets: Vec<String> = w
        .compositions()
        .iter()
        .flat_map(|c| [c.id().to_string(), c.name().to_string()])
        .collect();
    let own = Address::User(fuzzer);
    for e in report.received.iter().filter(|e| e.from != own) {
        if matches!(e.kind, Kind::Comps | Kind::Feature | Kind::Attachment) {
            report.leaks.push(format!("received {} from {}", e.kind, e.from));
        }
        if let Some(s) = secrets.iter().find(|s| e.body_text().contains(s.as_str())) {
            report.leaks.push(format!("{} body contains {s}", e.kind));
        }
    }
    report
}

fn opted_out_workspace(owner: &UserId, cat: &Catalog, rng: &mut ChaCha8Rng) -> (Workspace, MemoryBlobs) {
    let mut w = Workspace::new(owner.clone());
    let mut blobs = MemoryBlobs::new();
    let all: Vec<_> = cat.features().collect();
    for f in &all {
        w.install(f.id().clone(), f.version());
    }
    for k in 0..3 {
        let refs = all.choose_multiple(rng, 4).map(|f| FeatureRef::new(f.id().clone(), f.version())).collect();
        let c = CompositionDraft {
            name: format!("secret layout {k}"),
            owner: owner.clone(),
            feature_refs: refs,
            placements: vec![],
            screenshot: blobs.insert(format!("secret screenshot {k}").into_bytes()),
            created_at: Timestamp(k),
        }
        .seal()
        .expect("distinct refs");
        w.add_composition(c).expect("distinct names");
    }
    w.set_sharing(false);
    (w, blobs)
}
