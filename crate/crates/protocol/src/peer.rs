//! Answering other peers' requests from the local workspace.
//!
//! Only what the owner's compositions need is ever served: their documents,
//! their screenshots, and the features in their dependency closures.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use compshare_core::codec::{deserialize_composition, serialize_composition, to_canonical, Digest};
use compshare_core::model::{composition_features, Catalog, Composition, Feature, FeatureId, Version, Workspace};
use compshare_core::store::BlobSource;

use crate::bodies::{Attachment, AttachmentGet, Comps, ErrorBody, ErrorCode, FeatureGet, FeatureReply};
use crate::{Envelope, Kind, ProtocolError};

/// Attachment chunk size.
pub const CHUNK_SIZE: usize = 256 * 1024;

/// What a workspace exposes to other peers while sharing is on.
#[derive(Debug, Clone, Default)]
pub struct SharedScope {
    pub features: BTreeMap<(FeatureId, Version), Feature>,
    pub screenshots: BTreeSet<Digest>,
}

impl SharedScope {
    pub fn of(w: &Workspace, cat: &Catalog) -> Self {
        let mut scope = Self::default();
        for c in w.compositions() {
            scope.screenshots.insert(*c.screenshot());
            if let Ok(fs) = composition_features(c, cat) {
                for f in fs {
                    scope.features.insert((f.id().clone(), f.version()), f.clone());
                }
            }
        }
        scope
    }

    fn payload<'c>(&self, cat: &'c Catalog, id: &FeatureId, v: Version) -> Option<&'c Arc<[u8]>> {
        if !self.features.contains_key(&(id.clone(), v)) {
            return None;
        }
        cat.get(id, v)?.payload.as_ref()
    }
}

/// Replies to a peer request. Non-request kinds yield nothing.
pub fn serve(w: &Workspace, cat: &Catalog, blobs: &dyn BlobSource, req: &Envelope) -> Vec<Envelope> {
    match req.kind {
        Kind::CompsGet => vec![handle_comps_get(w, cat, req)],
        Kind::FeatureGet => handle_feature_get(w, cat, req),
        Kind::AttachmentGet => handle_attachment_get(w, cat, blobs, req),
        _ => Vec::new(),
    }
}

fn error(req: &Envelope, code: ErrorCode, detail: impl Into<String>) -> Envelope {
    req.reply(Kind::Error, &ErrorBody::new(code, detail))
}

fn opted_out(req: &Envelope) -> Envelope {
    error(req, ErrorCode::SharingDisabled, "this user does not share compositions")
}

pub fn handle_comps_get(w: &Workspace, cat: &Catalog, req: &Envelope) -> Envelope {
    if !w.sharing_enabled() {
        return opted_out(req);
    }
    let compositions = w
        .compositions()
        .iter()
        .map(|c| serde_json::from_slice(serialize_composition(c).as_bytes()).expect("canonical documents are JSON"))
        .collect();
    let features = SharedScope::of(w, cat).features.into_values().collect();
    req.reply(Kind::Comps, &Comps { compositions, features })
}

pub fn handle_feature_get(w: &Workspace, cat: &Catalog, req: &Envelope) -> Vec<Envelope> {
    if !w.sharing_enabled() {
        return vec![opted_out(req)];
    }
    let Ok(get) = req.body::<FeatureGet>() else {
        return vec![error(req, ErrorCode::Malformed, "bad FEATURE_GET body")];
    };
    let scope = SharedScope::of(w, cat);
    let Some(payload) = scope.payload(cat, &get.id, get.version) else {
        return vec![error(req, ErrorCode::NotAvailable, format!("{} {} is not shared", get.id, get.version))];
    };
    let feature = scope.features[&(get.id, get.version)].clone();
    let digest = Digest::of(payload);
    let mut out = vec![req.reply(Kind::Feature, &FeatureReply { feature, payload_digest: digest, payload_size: payload.len() as u64 })];
    out.extend(chunks(digest, payload).iter().map(|a| req.reply(Kind::Attachment, a)));
    out
}

pub fn handle_attachment_get(w: &Workspace, cat: &Catalog, blobs: &dyn BlobSource, req: &Envelope) -> Vec<Envelope> {
    if !w.sharing_enabled() {
        return vec![opted_out(req)];
    }
    let Ok(get) = req.body::<AttachmentGet>() else {
        return vec![error(req, ErrorCode::Malformed, "bad ATTACHMENT_GET body")];
    };
    let scope = SharedScope::of(w, cat);
    let bytes = if scope.screenshots.contains(&get.digest) {
        blobs.blob(&get.digest)
    } else {
        scope.features.keys().filter_map(|(id, v)| scope.payload(cat, id, *v)).find(|p| Digest::of(p) == get.digest).cloned()
    };
    match bytes {
        Some(b) if get.digest.verifies(&b) => chunks(get.digest, &b).iter().map(|a| req.reply(Kind::Attachment, a)).collect(),
        _ => vec![error(req, ErrorCode::NotAvailable, format!("attachment {} is not shared", get.digest))],
    }
}

/// Decodes the compositions of a `COMPS` reply, verifying each id.
pub fn decode_comps(c: &Comps) -> Result<Vec<Composition>, ProtocolError> {
    c.compositions
        .iter()
        .map(|doc| {
            let bytes = to_canonical(doc).map_err(|e| ProtocolError::MalformedBody(Kind::Comps, e.to_string()))?;
            deserialize_composition(bytes.as_bytes()).map_err(|e| ProtocolError::MalformedBody(Kind::Comps, e.to_string()))
        })
        .collect()
}

/// Splits `bytes` into attachment chunks; empty input yields one empty chunk.
pub fn chunks(digest: Digest, bytes: &[u8]) -> Vec<Attachment> {
    let pieces: Vec<&[u8]> = if bytes.is_empty() { vec![&[]] } else { bytes.chunks(CHUNK_SIZE).collect() };
    let total = pieces.len() as u32;
    pieces
        .into_iter()
        .enumerate()
        .map(|(i, p)| Attachment { digest, index: i as u32, total, data: B64.encode(p) })
        .collect()
}

/// Reassembles attachment chunks and checks the digest.
#[derive(Debug, Clone)]
pub struct AttachmentAssembler {
    digest: Digest,
    total: Option<u32>,
    bytes: Vec<u8>,
    next: u32,
}

impl AttachmentAssembler {
    pub fn new(digest: Digest) -> Self {
        Self { digest, total: None, bytes: Vec::new(), next: 0 }
    }

    pub fn digest(&self) -> Digest {
        self.digest
    }

    /// Feeds the next chunk; returns the verified bytes after the last one.
    pub fn push(&mut self, a: &Attachment) -> Result<Option<Vec<u8>>, ProtocolError> {
        let bad = |m: String| Err(ProtocolError::BadAttachment(m));
        if a.digest != self.digest {
            return bad(format!("expected {}, got chunk of {}", self.digest, a.digest));
        }
        if a.total == 0 || *self.total.get_or_insert(a.total) != a.total {
            return bad(format!("inconsistent chunk total {}", a.total));
        }
        if a.index != self.next {
            return bad(format!("expected chunk {}, got {}", self.next, a.index));
        }
        match B64.decode(&a.data) {
            Ok(d) => self.bytes.extend_from_slice(&d),
            Err(e) => return bad(format!("chunk {} is not base64: {e}", a.index)),
        }
        self.next += 1;
        if self.next < a.total {
            return Ok(None);
        }
        if !self.digest.verifies(&self.bytes) {
            return bad(format!("content does not hash to {}", self.digest));
        }
        Ok(Some(std::mem::take(&mut self.bytes)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Empty;
    use crate::MsgId;
    use compshare_core::model::{CompositionDraft, FeatureRef, Timestamp, UserId};
    use compshare_core::store::MemoryBlobs;

    fn u(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }
    fn fid(s: &str) -> FeatureId {
        FeatureId::new(s).unwrap()
    }
    fn v1() -> Version {
        Version::new(1, 0, 0)
    }

    fn setup(n_comps: usize) -> (Workspace, Catalog, MemoryBlobs) {
        let mut cat = Catalog::new(["Tools"]);
        for name in ["shared", "private"] {
            let f = Feature::new(fid(name), v1(), name, "", "Tools", vec![], vec![]).unwrap();
            cat.insert(f, Some(format!("payload of {name}").into_bytes().into())).unwrap();
        }
        let mut w = Workspace::new(u("john@acme"));
        w.install(fid("shared"), v1());
        w.install(fid("private"), v1());
        let mut blobs = MemoryBlobs::new();
        for i in 0..n_comps {
            let shot = blobs.insert(format!("png {i}").into_bytes());
            let c = CompositionDraft {
                name: format!("comp {i}"),
                owner: u("john@acme"),
                feature_refs: vec![FeatureRef::new(fid("shared"), v1())],
                placements: vec![],
                screenshot: shot,
                created_at: Timestamp(i as i64),
            }
            .seal()
            .unwrap();
            w.add_composition(c).unwrap();
        }
        (w, cat, blobs)
    }

    fn req<B: serde::Serialize>(kind: Kind, body: &B) -> Envelope {
        Envelope::new(kind, u("peter@acme"), u("john@acme"), MsgId([5; 16]), body)
    }

    fn code(e: &Envelope) -> ErrorCode {
        assert_eq!(e.kind, Kind::Error);
        e.body::<ErrorBody>().unwrap().code
    }

    #[test]
    fn comps_for_empty_workspace() {
        let (w, cat, _) = setup(0);
        let rep = handle_comps_get(&w, &cat, &req(Kind::CompsGet, &Empty {}));
        let comps: Comps = rep.body().unwrap();
        assert!(comps.compositions.is_empty() && comps.features.is_empty());
        assert_eq!(rep.msg_id, MsgId([5; 16]));
    }

    #[test]
    fn comps_lists_documents_and_closure_only() {
        let (w, cat, _) = setup(3);
        let comps: Comps = handle_comps_get(&w, &cat, &req(Kind::CompsGet, &Empty {})).body().unwrap();
        assert_eq!(comps.compositions.len(), 3);
        let ids: Vec<_> = decode_comps(&comps).unwrap().iter().map(|c| *c.id()).collect();
        assert_eq!(ids, w.compositions().iter().map(|c| *c.id()).collect::<Vec<_>>());
        assert_eq!(comps.features.iter().map(|f| f.id().as_str()).collect::<Vec<_>>(), ["shared"]);
    }

    #[test]
    fn tampered_comps_rejected() {
        let (w, cat, _) = setup(1);
        let mut comps: Comps = handle_comps_get(&w, &cat, &req(Kind::CompsGet, &Empty {})).body().unwrap();
        comps.compositions[0]["name"] = "renamed".into();
        assert!(matches!(decode_comps(&comps), Err(ProtocolError::MalformedBody(Kind::Comps, _))));
    }

    #[test]
    fn sharing_disabled_refuses_everything() {
        let (mut w, cat, blobs) = setup(2);
        w.set_sharing(false);
        let shot = *w.compositions()[0].screenshot();
        let reqs = [
            req(Kind::CompsGet, &Empty {}),
            req(Kind::FeatureGet, &FeatureGet { id: fid("shared"), version: v1() }),
            req(Kind::AttachmentGet, &AttachmentGet { digest: shot }),
        ];
        for r in &reqs {
            let out = serve(&w, &cat, &blobs, r);
            assert_eq!(out.len(), 1);
            assert_eq!(code(&out[0]), ErrorCode::SharingDisabled);
            assert!(!out[0].body_text().contains("comp 0"));
        }
    }

    #[test]
    fn feature_get_streams_verified_payload() {
        let (w, cat, blobs) = setup(1);
        let out = serve(&w, &cat, &blobs, &req(Kind::FeatureGet, &FeatureGet { id: fid("shared"), version: v1() }));
        let meta: FeatureReply = out[0].body().unwrap();
        assert_eq!((meta.feature.id(), meta.feature.version()), (&fid("shared"), v1()));
        let mut asm = AttachmentAssembler::new(meta.payload_digest);
        let mut bytes = None;
        for e in &out[1..] {
            assert_eq!(e.kind, Kind::Attachment);
            bytes = asm.push(&e.body().unwrap()).unwrap();
        }
        let bytes = bytes.unwrap();
        assert_eq!(bytes, b"payload of shared");
        assert_eq!(Digest::of(&bytes), meta.payload_digest);
        assert_eq!(meta.payload_size, bytes.len() as u64);
    }

    #[test]
    fn out_of_scope_and_unknown_features_not_available() {
        let (w, cat, blobs) = setup(1);
        for (id, ver) in [("private", v1()), ("nope", v1()), ("shared", Version::new(9, 0, 0))] {
            let out = serve(&w, &cat, &blobs, &req(Kind::FeatureGet, &FeatureGet { id: fid(id), version: ver }));
            assert_eq!(code(&out[0]), ErrorCode::NotAvailable);
        }
        let private = Digest::of(b"payload of private");
        let out = serve(&w, &cat, &blobs, &req(Kind::AttachmentGet, &AttachmentGet { digest: private }));
        assert_eq!(code(&out[0]), ErrorCode::NotAvailable);
    }

    #[test]
    fn screenshot_attachment() {
        let (w, cat, blobs) = setup(1);
        let shot = *w.compositions()[0].screenshot();
        let out = serve(&w, &cat, &blobs, &req(Kind::AttachmentGet, &AttachmentGet { digest: shot }));
        let mut asm = AttachmentAssembler::new(shot);
        assert_eq!(asm.push(&out[0].body().unwrap()).unwrap().unwrap(), b"png 0");
    }

    #[test]
    fn chunking_boundaries() {
        for len in [0, 1, CHUNK_SIZE - 1, CHUNK_SIZE, CHUNK_SIZE + 1, 3 * CHUNK_SIZE] {
            let bytes: Vec<u8> = (0..len).map(|i| (i % 251) as u8).collect();
            let d = Digest::of(&bytes);
            let cs = chunks(d, &bytes);
            assert_eq!(cs.len(), len.div_ceil(CHUNK_SIZE).max(1));
            let mut asm = AttachmentAssembler::new(d);
            let (last, init) = cs.split_last().unwrap();
            for c in init {
                assert_eq!(asm.push(c).unwrap(), None);
            }
            assert_eq!(asm.push(last).unwrap().unwrap(), bytes);
        }
    }

    #[test]
    fn assembler_rejects_tampering() {
        let d = Digest::of(b"abc");
        let mut cs = chunks(d, b"abc");
        cs[0].data = B64.encode(b"abd");
        assert!(AttachmentAssembler::new(d).push(&cs[0]).is_err());
        let two = chunks(Digest::of(&[7; CHUNK_SIZE + 1]), &[7; CHUNK_SIZE + 1]);
        assert!(AttachmentAssembler::new(two[0].digest).push(&two[1]).is_err());
    }
}
