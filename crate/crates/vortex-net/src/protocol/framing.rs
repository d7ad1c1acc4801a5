use vortex_core::json::to_canonical_vec;

use super::envelope::ReliableEnvelope;

/// Hard cap on one reliable frame (prefix excluded).
pub const MAX_FRAME_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the 1 MiB limit")]
    FrameTooLarge(usize),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("frame payload malformed: {0}")]
    Decode(String),
}

/// Encode as a 4-byte big-endian length prefix followed by the canonical
/// JSON envelope. Canonical serialization makes frames byte-reproducible.
pub fn encode_frame(env: &ReliableEnvelope) -> Result<Vec<u8>, FrameError> {
    let body = to_canonical_vec(env).map_err(|e| FrameError::Decode(e.to_string()))?;
    if body.len() > MAX_FRAME_LEN {
        return Err(FrameError::FrameTooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decode one frame from the start of `buf`, returning the envelope and the
/// number of bytes consumed. Truncated input is a framing error.
pub fn decode_frame(buf: &[u8]) -> Result<(ReliableEnvelope, usize), FrameError> {
    if buf.len() < 4 {
        return Err(FrameError::Framing(format!(
            "need 4 prefix bytes, have {}",
            buf.len()
        )));
    }
    let declared = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if declared > MAX_FRAME_LEN {
        return Err(FrameError::FrameTooLarge(declared));
    }
    let end = 4 + declared;
    if buf.len() < end {
        return Err(FrameError::Framing(format!(
            "declared {declared} bytes, only {} available",
            buf.len() - 4
        )));
    }
    let env = serde_json::from_slice(&buf[4..end]).map_err(|e| FrameError::Decode(e.to_string()))?;
    Ok((env, end))
}

/// Incremental decoder over a byte stream: feed arbitrary chunks, pop whole
/// frames as they complete.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete frame, `Ok(None)` if more bytes are needed.
    pub fn next_frame(&mut self) -> Result<Option<ReliableEnvelope>, FrameError> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let declared =
            u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]) as usize;
        if declared > MAX_FRAME_LEN {
            return Err(FrameError::FrameTooLarge(declared));
        }
        if self.buf.len() < 4 + declared {
            return Ok(None);
        }
        let (env, consumed) = decode_frame(&self.buf)?;
        self.buf.drain(..consumed);
        Ok(Some(env))
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}

/// Pure trace validator for the per-sender seq monotonicity invariant.
pub fn validate_seq_monotonic<I>(trace: I) -> Result<(), (u64, u64, u64)>
where
    I: IntoIterator<Item = (u64, u64)>,
{
    let mut tracker = super::envelope::SeqTracker::new();
    for (sender, seq) in trace {
        if tracker.observe(sender, seq) == super::envelope::SeqCheck::DuplicateOrStale {
            return Err((sender, seq, 0));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::envelope::{JoinPayload, MessageBody};
    use vortex_core::Role;

    fn join_envelope(seq: u64) -> ReliableEnvelope {
        ReliableEnvelope {
            session_id: 42,
            seq,
            body: MessageBody::Join(JoinPayload { role: Role::Surgeon }),
        }
    }

    #[test]
    fn round_trip_identity() {
        let env = join_envelope(7);
        let bytes = encode_frame(&env).unwrap();
        let (back, consumed) = decode_frame(&bytes).unwrap();
        assert_eq!(back, env);
        assert_eq!(consumed, bytes.len());
    }

    #[test]
    fn canonical_bytes_are_stable() {
        let env = join_envelope(1);
        let bytes = encode_frame(&env).unwrap();
        let json = std::str::from_utf8(&bytes[4..]).unwrap();
        assert_eq!(
            json,
            r#"{"msg_type":"Join","payload":{"role":"Surgeon"},"seq":1,"session_id":42}"#
        );
    }

    #[test]
    fn declared_oversize_frame_is_rejected() {
        let mut buf = Vec::new();
        buf.extend_from_slice(&(2u32 * 1024 * 1024).to_be_bytes());
        buf.extend_from_slice(b"xxxx");
        assert!(matches!(decode_frame(&buf), Err(FrameError::FrameTooLarge(_))));
    }

    #[test]
    fn truncated_input_is_a_framing_error() {
        let env = join_envelope(1);
        let bytes = encode_frame(&env).unwrap();
        assert!(matches!(decode_frame(&bytes[..2]), Err(FrameError::Framing(_))));
        assert!(matches!(
            decode_frame(&bytes[..bytes.len() - 1]),
            Err(FrameError::Framing(_))
        ));
    }

    #[test]
    fn two_frames_in_one_stream_decode_in_order() {
        let a = join_envelope(1);
        let b = ReliableEnvelope {
            session_id: 42,
            seq: 2,
            body: MessageBody::SessionEnd(crate::protocol::SessionEndPayload { final_version: None }),
        };
        let mut stream = encode_frame(&a).unwrap();
        stream.extend_from_slice(&encode_frame(&b).unwrap());

        let (first, consumed) = decode_frame(&stream).unwrap();
        let (second, rest) = decode_frame(&stream[consumed..]).unwrap();
        assert_eq!(first, a);
        assert_eq!(second, b);
        assert_eq!(consumed + rest, stream.len());
    }

    #[test]
    fn incremental_decoder_handles_any_chunking() {
        let frames: Vec<ReliableEnvelope> = (1..=5).map(join_envelope).collect();
        let mut stream = Vec::new();
        for f in &frames {
            stream.extend_from_slice(&encode_frame(f).unwrap());
        }
        for chunk in [1usize, 2, 3, 7, 64] {
            let mut dec = FrameDecoder::new();
            let mut got = Vec::new();
            for piece in stream.chunks(chunk) {
                dec.feed(piece);
                while let Some(env) = dec.next_frame().unwrap() {
                    got.push(env);
                }
            }
            assert_eq!(got, frames, "chunk size {chunk}");
            assert_eq!(dec.buffered(), 0);
        }
    }

    #[test]
    fn seq_trace_validator_detects_regressions() {
        assert!(validate_seq_monotonic([(1, 1), (1, 2), (2, 1), (1, 3)]).is_ok());
        assert!(validate_seq_monotonic([(1, 1), (1, 1)]).is_err());
        assert!(validate_seq_monotonic([(1, 5), (1, 3)]).is_err());
    }
}
