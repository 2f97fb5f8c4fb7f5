//! Canonical text encoding, content digests and composition documents.

mod canonical;
mod composition;
mod digest;

use thiserror::Error;

pub use canonical::{from_lenient, from_strict, to_canonical, CanonicalDocument};
pub use composition::{composition_id, deserialize_composition, serialize_composition, COMPOSITION_FORMAT};
pub use digest::{CompositionId, Digest};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("document states id {stated} but its content hashes to {computed}")]
    HashMismatch { stated: CompositionId, computed: CompositionId },
    #[error("document is not in canonical form")]
    NonCanonical,
    #[error("floating point numbers are not allowed in canonical documents")]
    FloatNotAllowed,
}
