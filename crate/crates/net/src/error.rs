use std::io;

use compshare_core::model::ModelError;
use compshare_core::resolver::ResolveError;
use compshare_core::store::StoreError;
use compshare_protocol::bodies::{ErrorBody, ErrorCode};
use compshare_protocol::install::InstallError;
use compshare_protocol::ProtocolError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("relay refused the session: {}: {}", .0.code, .0.detail)]
    Rejected(ErrorBody),
    #[error("{code} ({peer}): {detail}")]
    Remote { peer: String, code: ErrorCode, detail: String },
    #[error("not connected to the relay")]
    Disconnected,
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("{0}")]
    NotFound(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Install(#[from] InstallError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Coarse error classes, as surfaced by exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    NotFound,
    Network,
    Conflict,
    Corrupt,
}

impl NetError {
    pub fn class(&self) -> ErrorClass {
        match self {
            NetError::Io(_) | NetError::Protocol(_) | NetError::Rejected(_) | NetError::Disconnected | NetError::Timeout(_) => {
                ErrorClass::Network
            }
            NetError::Remote { code: ErrorCode::UnknownRecipient, .. } => ErrorClass::NotFound,
            NetError::Remote { .. } => ErrorClass::Network,
            NetError::NotFound(_) => ErrorClass::NotFound,
            NetError::Store(e) => store_class(e),
            NetError::Resolve(e) => resolve_class(e),
            NetError::Install(InstallError::Resolve(e)) => resolve_class(e),
            NetError::Install(InstallError::Remote { code: ErrorCode::NotAvailable, .. }) => ErrorClass::NotFound,
            NetError::Install(_) => ErrorClass::Network,
            NetError::Model(_) => ErrorClass::Usage,
        }
    }

    /// True when a cached copy may stand in for a live answer.
    pub fn is_unreachable(&self) -> bool {
        match self {
            NetError::Remote { code, .. } => matches!(code, ErrorCode::Offline | ErrorCode::UnknownRecipient),
            NetError::Disconnected | NetError::Timeout(_) | NetError::Io(_) => true,
            _ => false,
        }
    }
}

fn store_class(e: &StoreError) -> ErrorClass {
    match e {
        StoreError::LockHeld | StoreError::StaleCacheWrite { .. } => ErrorClass::Conflict,
        StoreError::CorruptStore(_) | StoreError::MissingBlob(_) | StoreError::Io(_) => ErrorClass::Corrupt,
    }
}

fn resolve_class(e: &ResolveError) -> ErrorClass {
    match e {
        ResolveError::ConflictRefused(_) | ResolveError::StaleWorkspace => ErrorClass::Conflict,
        ResolveError::PayloadMissing(..) => ErrorClass::NotFound,
        ResolveError::Model(_) | ResolveError::NotInComposition(_) | ResolveError::WrongComposition { .. } => ErrorClass::Usage,
    }
}
