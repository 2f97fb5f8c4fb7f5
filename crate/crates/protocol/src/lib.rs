//! Wire format and protocol logic for composition sharing.
//!
//! Everything here is free of I/O: the relay and the peer-side handlers are
//! state machines fed with envelopes, so the same code drives the TCP
//! transport and the deterministic simulator.

pub mod bodies;
pub mod client;
mod envelope;
pub mod frame;
pub mod ids;
pub mod install;
pub mod peer;
pub mod relay;
pub mod roster;

use thiserror::Error;

pub use envelope::{Address, Envelope, Kind, MsgId};
pub use frame::{frame, unframe, MAX_BODY, MAX_FRAME};

/// Default relay TCP port.
pub const DEFAULT_RELAY_PORT: u16 = 7474;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("malformed {0} body: {1}")]
    MalformedBody(Kind, String),
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("truncated frame: need {needed} bytes, have {available}")]
    TruncatedFrame { needed: usize, available: usize },
    #[error("chat text of {0} bytes exceeds 64 KiB")]
    ChatTooLong(usize),
    #[error("attachment rejected: {0}")]
    BadAttachment(String),
}
