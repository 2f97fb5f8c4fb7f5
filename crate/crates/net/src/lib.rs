//! Networking for composition sharing: a framed TCP relay server, a
//! thread-safe client handle, and [`Session`], which ties a client to an
//! on-disk store for browsing, previewing, installing and chatting.
//!
//! The protocol logic lives in `compshare-protocol` as pure state machines;
//! this crate only moves their envelopes over sockets.

mod client;
mod codec;
mod error;
mod relay_server;
mod session;

pub use client::{Client, ClientConfig, Event, Responder, StoreResponder};
pub use codec::EnvelopeCodec;
pub use error::{ErrorClass, NetError};
pub use relay_server::RelayServer;
pub use session::{cached_browse, lookup, Browse, PlanView, Session};
