//! Length-prefixed framing: 4-byte big-endian payload length, then the payload.

use crate::{Envelope, ProtocolError};

/// Largest envelope body accepted.
pub const MAX_BODY: usize = 16 * 1024 * 1024;
/// Largest frame payload accepted: the body plus room for the envelope fields.
pub const MAX_FRAME: usize = MAX_BODY + 4096;

pub fn frame(e: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    if e.body_text().len() > MAX_BODY {
        return Err(ProtocolError::FrameTooLarge(e.body_text().len()));
    }
    let payload = e.encode();
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Declared payload length of the frame at the start of `buf`, once the
/// prefix is complete.
pub fn declared_len(buf: &[u8]) -> Result<Option<usize>, ProtocolError> {
    let Some(prefix) = buf.get(..4) else {
        return Ok(None);
    };
    let len = u32::from_be_bytes(prefix.try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME {
        return Err(ProtocolError::FrameTooLarge(len));
    }
    Ok(Some(len))
}

/// Decodes the first frame in `buf`, returning it and the bytes consumed.
pub fn unframe(buf: &[u8]) -> Result<(Envelope, usize), ProtocolError> {
    let len = declared_len(buf)?.ok_or(ProtocolError::TruncatedFrame { needed: 4, available: buf.len() })?;
    let end = 4 + len;
    if buf.len() < end {
        return Err(ProtocolError::TruncatedFrame { needed: end, available: buf.len() });
    }
    Ok((Envelope::decode(&buf[4..end])?, end))
}
