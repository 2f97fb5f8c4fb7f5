//! Kind-specific envelope bodies.

use std::fmt;

use compshare_core::codec::Digest;
use compshare_core::model::{Feature, FeatureId, Timestamp, UserId, Version};
use serde::{Deserialize, Serialize};

/// Longest chat text accepted, in bytes.
pub const MAX_CHAT_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub token: String,
    pub sharing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelloOk {
    pub user: UserId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Presence {
    pub online: bool,
    pub sharing: bool,
}

/// Empty body used by `ROSTER_GET` and `COMPS_GET`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Empty {}

/// One contact as seen in a roster.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub user: UserId,
    pub online: bool,
    /// Last known sharing flag; kept while the contact is offline.
    pub sharing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roster {
    pub entries: Vec<RosterEntry>,
}

/// Reply to `COMPS_GET`: composition documents plus metadata of every feature
/// in their closures. Screenshots are fetched separately by digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comps {
    pub compositions: Vec<serde_json::Value>,
    pub features: Vec<Feature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachmentGet {
    pub digest: Digest,
}

/// One chunk of a binary attachment. `data` is base64.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attachment {
    pub digest: Digest,
    pub index: u32,
    pub total: u32,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureGet {
    pub id: FeatureId,
    pub version: Version,
}

/// Feature metadata; the payload follows as `ATTACHMENT` chunks with the same msg_id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureReply {
    pub feature: Feature,
    pub payload_digest: Digest,
    pub payload_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chat {
    pub text: String,
    pub sent_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Unauthenticated,
    UnknownRecipient,
    Offline,
    Malformed,
    Superseded,
    SharingDisabled,
    NotAvailable,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorCode::Unauthenticated => "unauthenticated",
            ErrorCode::UnknownRecipient => "unknown_recipient",
            ErrorCode::Offline => "offline",
            ErrorCode::Malformed => "malformed",
            ErrorCode::Superseded => "superseded",
            ErrorCode::SharingDisabled => "sharing_disabled",
            ErrorCode::NotAvailable => "not_available",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub detail: String,
}

impl ErrorBody {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }
}

/// A chat line as surfaced to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub from: UserId,
    pub to: UserId,
    pub text: String,
    pub sent_at: Timestamp,
}
