//! Installing from a peer: fetch what the plan needs, then apply it.
//!
//! [`InstallJob`] issues the `FEATURE_GET` and `ATTACHMENT_GET` requests,
//! absorbs the replies and finally runs the resolver's all-or-nothing apply.
//! Nothing is written anywhere until [`InstallJob::finish`] succeeds, so an
//! abandoned job leaves the workspace as it was.

use std::collections::BTreeMap;
use std::sync::Arc;

use compshare_core::codec::Digest;
use compshare_core::model::{Catalog, Composition, FeatureId, UserId, Version, Workspace};
use compshare_core::resolver::{self, Applied, InstallPlan, ResolveError, UpgradePolicy};
use thiserror::Error;

use crate::bodies::{Attachment, AttachmentGet, ErrorBody, ErrorCode, FeatureGet, FeatureReply};
use crate::ids::IdSource;
use crate::peer::AttachmentAssembler;
use crate::{Envelope, Kind, MsgId, ProtocolError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstallError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{peer} refused: {code}: {detail}")]
    Remote { peer: UserId, code: ErrorCode, detail: String },
    #[error("peer sent {id} {version} metadata that does not match the request")]
    WrongFeature { id: FeatureId, version: Version },
    #[error("install interrupted: {0}")]
    Interrupted(String),
    #[error("install still waiting for {0} replies")]
    Incomplete(usize),
}

/// Something a job finished downloading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fetched {
    Payload { id: FeatureId, version: Version, size: usize },
    Screenshot { digest: Digest, size: usize },
}

#[derive(Debug)]
enum Pending {
    Feature { id: FeatureId, version: Version, asm: Option<AttachmentAssembler> },
    Screenshot(AttachmentAssembler),
}

/// Successful outcome of an install job.
#[derive(Debug, Clone)]
pub struct Finished {
    pub applied: Applied,
    /// The catalog with the fetched payloads added.
    pub catalog: Catalog,
    /// Screenshot bytes, when the composition was copied and the blob fetched.
    pub screenshot: Option<Arc<[u8]>>,
}

#[derive(Debug)]
pub struct InstallJob {
    plan: InstallPlan,
    composition: Composition,
    policy: UpgradePolicy,
    catalog: Catalog,
    pending: BTreeMap<MsgId, Pending>,
    screenshot: Option<Arc<[u8]>>,
}

impl InstallJob {
    /// Checks the plan against the workspace and returns the requests to send.
    ///
    /// `catalog` must already hold the metadata the plan was computed from.
    /// `have_blob` reports whether the screenshot is already stored locally.
    pub fn start(
        me: UserId,
        plan: InstallPlan,
        composition: Composition,
        w: &Workspace,
        catalog: Catalog,
        have_blob: impl Fn(&Digest) -> bool,
        policy: UpgradePolicy,
        ids: &mut dyn IdSource,
    ) -> Result<(Self, Vec<Envelope>), InstallError> {
        if plan.composition != *composition.id() {
            return Err(ResolveError::WrongComposition { planned: plan.composition, given: *composition.id() }.into());
        }
        if plan.workspace != resolver::workspace_fingerprint(w) {
            return Err(ResolveError::StaleWorkspace.into());
        }
        if !plan.version_mismatch.is_empty() && policy != UpgradePolicy::Force {
            return Err(ResolveError::ConflictRefused(plan.version_mismatch.clone()).into());
        }
        let source = plan.source.clone();
        let mut pending = BTreeMap::new();
        let mut out = Vec::new();
        for r in &plan.install_order {
            if catalog.get(&r.id, r.version).is_some_and(|e| e.payload.is_some()) {
                continue;
            }
            let id = ids.next_id();
            out.push(Envelope::new(Kind::FeatureGet, me.clone(), source.clone(), id, &FeatureGet { id: r.id.clone(), version: r.version }));
            pending.insert(id, Pending::Feature { id: r.id.clone(), version: r.version, asm: None });
        }
        let shot = *composition.screenshot();
        if plan.include_composition && w.composition(composition.id()).is_none() && !have_blob(&shot) {
            let id = ids.next_id();
            out.push(Envelope::new(Kind::AttachmentGet, me.clone(), source, id, &AttachmentGet { digest: shot }));
            pending.insert(id, Pending::Screenshot(AttachmentAssembler::new(shot)));
        }
        let job = Self { plan, composition, policy, catalog, pending, screenshot: None };
        Ok((job, out))
    }

    pub fn plan(&self) -> &InstallPlan {
        &self.plan
    }

    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    /// Message ids still awaiting replies.
    pub fn awaiting(&self) -> impl Iterator<Item = &MsgId> {
        self.pending.keys()
    }

    pub fn is_ready(&self) -> bool {
        self.pending.is_empty()
    }

    /// True when `e` answers one of this job's requests.
    pub fn wants(&self, e: &Envelope) -> bool {
        self.pending.contains_key(&e.msg_id)
    }

    /// Feeds a reply. Returns what finished downloading, if anything.
    pub fn on_envelope(&mut self, e: &Envelope) -> Result<Option<Fetched>, InstallError> {
        let Some(slot) = self.pending.get_mut(&e.msg_id) else {
            return Ok(None);
        };
        if e.kind == Kind::Error {
            let body: ErrorBody = e.body()?;
            return Err(InstallError::Remote { peer: self.plan.source.clone(), code: body.code, detail: body.detail });
        }
        let fetched = match (slot, e.kind) {
            (Pending::Feature { id, version, asm: asm @ None }, Kind::Feature) => {
                let reply: FeatureReply = e.body()?;
                if reply.feature.id() != id || reply.feature.version() != *version {
                    return Err(InstallError::WrongFeature { id: reply.feature.id().clone(), version: reply.feature.version() });
                }
                self.catalog.merge_metadata(reply.feature);
                *asm = Some(AttachmentAssembler::new(reply.payload_digest));
                None
            }
            (Pending::Feature { id, version, asm: Some(asm) }, Kind::Attachment) => {
                let chunk: Attachment = e.body()?;
                match asm.push(&chunk)? {
                    Some(bytes) => {
                        let size = bytes.len();
                        self.catalog.set_payload(id, *version, bytes.into());
                        Some(Fetched::Payload { id: id.clone(), version: *version, size })
                    }
                    None => None,
                }
            }
            (Pending::Screenshot(asm), Kind::Attachment) => {
                let chunk: Attachment = e.body()?;
                match asm.push(&chunk)? {
                    Some(bytes) => {
                        let fetched = Fetched::Screenshot { digest: asm.digest(), size: bytes.len() };
                        self.screenshot = Some(bytes.into());
                        Some(fetched)
                    }
                    None => None,
                }
            }
            (_, kind) => return Err(ProtocolError::MalformedBody(kind, "unexpected reply kind".into()).into()),
        };
        if fetched.is_some() {
            self.pending.remove(&e.msg_id);
        }
        Ok(fetched)
    }

    /// Applies the plan once every download is in.
    pub fn finish(self, w: &Workspace) -> Result<Finished, InstallError> {
        if !self.pending.is_empty() {
            return Err(InstallError::Incomplete(self.pending.len()));
        }
        let applied = resolver::apply(&self.plan, &self.composition, w, &self.catalog, self.policy)?;
        Ok(Finished { applied, catalog: self.catalog, screenshot: self.screenshot })
    }
}
