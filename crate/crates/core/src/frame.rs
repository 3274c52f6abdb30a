//! Length-prefixed wire frames: `[u32 LE length][u8 flags][payload]`.
//!
//! `length` counts the flags byte plus the payload, so it is never zero.

use alloc::vec::Vec;

/// Bytes before the payload: length prefix and flags.
pub const HEADER_LEN: usize = 5;

/// Default cap on the length field.
pub const DEFAULT_MAX_FRAME_LEN: u32 = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame length field is zero; it must count the flags byte")]
    ZeroLength,
    #[error("frame length {len} exceeds the {max}-byte limit")]
    TooLarge { len: u64, max: u32 },
    #[error("reserved frame flag bits set: {0:#04x}")]
    ReservedFlags(u8),
}

/// Per-frame flag byte. Only bit 0 is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct FrameFlags(u8);

impl FrameFlags {
    pub const COMPRESSED: FrameFlags = FrameFlags(0b0000_0001);
    pub const NONE: FrameFlags = FrameFlags(0);

    pub fn from_bits(bits: u8) -> Result<Self, FrameError> {
        if bits & !Self::COMPRESSED.0 != 0 {
            Err(FrameError::ReservedFlags(bits))
        } else {
            Ok(FrameFlags(bits))
        }
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_compressed(self) -> bool {
        self.0 & Self::COMPRESSED.0 != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub flags: FrameFlags,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(flags: FrameFlags, payload: Vec<u8>) -> Self {
        Frame { flags, payload }
    }

    pub fn raw(payload: Vec<u8>) -> Self {
        Frame::new(FrameFlags::NONE, payload)
    }

    pub fn compressed(payload: Vec<u8>) -> Self {
        Frame::new(FrameFlags::COMPRESSED, payload)
    }

    /// Value of the length field.
    pub fn length_field(&self) -> u64 {
        1 + self.payload.len() as u64
    }

    /// Total bytes on the wire, header included.
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn check(&self, max_len: u32) -> Result<(), FrameError> {
        if self.length_field() > u64::from(max_len) {
            return Err(FrameError::TooLarge {
                len: self.length_field(),
                max: max_len,
            });
        }
        Ok(())
    }

    pub fn header(&self) -> [u8; HEADER_LEN] {
        let len = u32::try_from(self.length_field()).expect("payload checked against u32 cap");
        let mut h = [0u8; HEADER_LEN];
        h[..4].copy_from_slice(&len.to_le_bytes());
        h[4] = self.flags.bits();
        h
    }

    /// Appends the wire encoding to `out`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.reserve(self.wire_len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.payload);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut out);
        out
    }

    /// Decodes one frame from the front of `buf`.
    ///
    /// Returns `Ok(None)` if `buf` holds only part of a frame, otherwise the
    /// frame and the number of bytes it occupied.
    pub fn decode(buf: &[u8], max_len: u32) -> Result<Option<(Frame, usize)>, FrameError> {
        let Some(header) = buf.get(..HEADER_LEN) else {
            return Ok(None);
        };
        let (payload_len, flags) = parse_header(header.try_into().expect("5 bytes"), max_len)?;
        let end = HEADER_LEN + payload_len;
        match buf.get(HEADER_LEN..end) {
            Some(payload) => Ok(Some((Frame::new(flags, payload.to_vec()), end))),
            None => Ok(None),
        }
    }
}

/// Validates a frame header and returns the payload length and flags.
pub fn parse_header(
    header: &[u8; HEADER_LEN],
    max_len: u32,
) -> Result<(usize, FrameFlags), FrameError> {
    let len = u32::from_le_bytes([header[0], header[1], header[2], header[3]]);
    if len == 0 {
        return Err(FrameError::ZeroLength);
    }
    if len > max_len {
        return Err(FrameError::TooLarge {
            len: u64::from(len),
            max: max_len,
        });
    }
    let flags = FrameFlags::from_bits(header[4])?;
    Ok((len as usize - 1, flags))
}
