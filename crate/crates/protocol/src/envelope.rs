use std::fmt;
use std::str::FromStr;

use compshare_core::codec;
use compshare_core::model::UserId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Kind {
    Hello,
    HelloOk,
    Presence,
    RosterGet,
    Roster,
    CompsGet,
    Comps,
    AttachmentGet,
    Attachment,
    FeatureGet,
    Feature,
    Chat,
    Error,
}

impl Kind {
    pub const ALL: [Kind; 13] = [
        Kind::Hello,
        Kind::HelloOk,
        Kind::Presence,
        Kind::RosterGet,
        Kind::Roster,
        Kind::CompsGet,
        Kind::Comps,
        Kind::AttachmentGet,
        Kind::Attachment,
        Kind::FeatureGet,
        Kind::Feature,
        Kind::Chat,
        Kind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Hello => "HELLO",
            Kind::HelloOk => "HELLO_OK",
            Kind::Presence => "PRESENCE",
            Kind::RosterGet => "ROSTER_GET",
            Kind::Roster => "ROSTER",
            Kind::CompsGet => "COMPS_GET",
            Kind::Comps => "COMPS",
            Kind::AttachmentGet => "ATTACHMENT_GET",
            Kind::Attachment => "ATTACHMENT",
            Kind::FeatureGet => "FEATURE_GET",
            Kind::Feature => "FEATURE",
            Kind::Chat => "CHAT",
            Kind::Error => "ERROR",
        }
    }

    /// Kinds a peer sends to another peer expecting replies.
    pub fn is_peer_request(self) -> bool {
        matches!(self, Kind::CompsGet | Kind::AttachmentGet | Kind::FeatureGet)
    }

    /// Kinds that only ever answer an earlier request.
    pub fn is_reply(self) -> bool {
        matches!(self, Kind::HelloOk | Kind::Roster | Kind::Comps | Kind::Attachment | Kind::Feature | Kind::Error)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Either the relay itself (`*`) or a user.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Address {
    Relay,
    User(UserId),
}

impl Address {
    pub fn user(&self) -> Option<&UserId> {
        match self {
            Address::Relay => None,
            Address::User(u) => Some(u),
        }
    }
}

impl From<UserId> for Address {
    fn from(u: UserId) -> Self {
        Address::User(u)
    }
}

impl From<&UserId> for Address {
    fn from(u: &UserId) -> Self {
        Address::User(u.clone())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::Relay => f.write_str("*"),
            Address::User(u) => u.fmt(f),
        }
    }
}

impl FromStr for Address {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "*" {
            return Ok(Address::Relay);
        }
        UserId::new(s).map(Address::User).map_err(|e| ProtocolError::MalformedEnvelope(e.to_string()))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// 16-byte message token, hex on the wire.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsgId(pub [u8; 16]);

impl fmt::Debug for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MsgId({self})")
    }
}

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for MsgId {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 16];
        if s.len() != 32 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(ProtocolError::MalformedEnvelope(format!("invalid msg_id {s:?}")));
        }
        hex::decode_to_slice(s, &mut out).map_err(|_| ProtocolError::MalformedEnvelope(format!("invalid msg_id {s:?}")))?;
        Ok(Self(out))
    }
}

impl Serialize for MsgId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MsgId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A routed protocol message.
///
/// The body is kept as the exact JSON text it arrived with, so the relay can
/// forward it without re-encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub kind: Kind,
    pub from: Address,
    pub to: Address,
    pub msg_id: MsgId,
    body: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireEnvelope<'a> {
    #[serde(borrow)]
    body: &'a RawValue,
    from: Address,
    kind: Kind,
    msg_id: MsgId,
    to: Address,
}

impl Envelope {
    /// Builds an envelope with a canonically encoded body.
    pub fn new<B: Serialize>(kind: Kind, from: impl Into<Address>, to: impl Into<Address>, msg_id: MsgId, body: &B) -> Self {
        let body = codec::to_canonical(body).expect("protocol bodies contain no floats");
        Self { kind, from: from.into(), to: to.into(), msg_id, body: body.as_str().to_string() }
    }

    /// An envelope answering `self`: addresses swapped, msg_id echoed.
    pub fn reply<B: Serialize>(&self, kind: Kind, body: &B) -> Self {
        Self::new(kind, self.to.clone(), self.from.clone(), self.msg_id, body)
    }

    pub fn body_text(&self) -> &str {
        &self.body
    }

    /// Decodes the body leniently.
    pub fn body<B: DeserializeOwned>(&self) -> Result<B, ProtocolError> {
        codec::from_lenient(self.body.as_bytes()).map_err(|e| ProtocolError::MalformedBody(self.kind, e.to_string()))
    }

    /// The wire payload: `{"body":…,"from":…,"kind":…,"msg_id":…,"to":…}`, keys sorted.
    pub fn encode(&self) -> Vec<u8> {
        let quote = |s: &str| serde_json::to_string(s).expect("strings always encode");
        let mut out = Vec::with_capacity(self.body.len() + 160);
        out.extend_from_slice(b"{\"body\":");
        out.extend_from_slice(self.body.as_bytes());
        out.extend_from_slice(b",\"from\":");
        out.extend_from_slice(quote(&self.from.to_string()).as_bytes());
        out.extend_from_slice(b",\"kind\":");
        out.extend_from_slice(quote(self.kind.as_str()).as_bytes());
        out.extend_from_slice(b",\"msg_id\":");
        out.extend_from_slice(quote(&self.msg_id.to_string()).as_bytes());
        out.extend_from_slice(b",\"to\":");
        out.extend_from_slice(quote(&self.to.to_string()).as_bytes());
        out.push(b'}');
        out
    }

    pub fn decode(payload: &[u8]) -> Result<Self, ProtocolError> {
        let wire: WireEnvelope<'_> =
            serde_json::from_slice(payload).map_err(|e| ProtocolError::MalformedEnvelope(e.to_string()))?;
        let body = wire.body.get();
        if !body.starts_with('{') {
            return Err(ProtocolError::MalformedEnvelope("body must be an object".into()));
        }
        Ok(Self { kind: wire.kind, from: wire.from, to: wire.to, msg_id: wire.msg_id, body: body.to_string() })
    }
}
