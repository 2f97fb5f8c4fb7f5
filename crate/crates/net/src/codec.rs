use bytes::{Buf, BytesMut};
use compshare_protocol::frame::declared_len;
use compshare_protocol::{frame, unframe, Envelope};
use tokio_util::codec::{Decoder, Encoder};

use crate::NetError;

/// Length-prefixed envelope frames for `tokio_util` framed streams.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnvelopeCodec;

impl Decoder for EnvelopeCodec {
    type Item = Envelope;
    type Error = NetError;

    fn decode(&mut self, src: &mut BytesMut) -> Result<Option<Envelope>, NetError> {
        let Some(len) = declared_len(src)? else {
            return Ok(None);
        };
        if src.len() < 4 + len {
            src.reserve(4 + len - src.len());
            return Ok(None);
        }
        let (e, used) = unframe(src)?;
        src.advance(used);
        Ok(Some(e))
    }
}

impl Encoder<Envelope> for EnvelopeCodec {
    type Error = NetError;

    fn encode(&mut self, e: Envelope, dst: &mut BytesMut) -> Result<(), NetError> {
        dst.extend_from_slice(&frame(&e)?);
        Ok(())
    }
}
