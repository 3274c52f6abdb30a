use alloc::vec::Vec;

use super::CodecError;
use crate::varint::{self, VarintError};

/// Reads the uncompressed length from a block preamble.
pub fn decompressed_len(block: &[u8]) -> Result<usize, CodecError> {
    preamble(block).map(|(len, _)| len)
}

fn preamble(block: &[u8]) -> Result<(usize, usize), CodecError> {
    match varint::decode_u32(block) {
        Ok((len, used)) => Ok((len as usize, used)),
        Err(VarintError::Truncated) => Err(CodecError::Truncated { at: block.len() }),
        Err(VarintError::Overflow) => Err(CodecError::BadPreamble),
    }
}

/// Decompresses a Snappy raw block into a new buffer.
pub fn decompress(block: &[u8]) -> Result<Vec<u8>, CodecError> {
    let len = decompressed_len(block)?;
    // No element yields more than 64 output bytes per 3 input bytes; refuse to
    // allocate for claims no block of this size could satisfy.
    if len / 64 > block.len() {
        return Err(CodecError::Truncated { at: block.len() });
    }
    let mut out = alloc::vec![0u8; len];
    decompress_into(block, &mut out)?;
    Ok(out)
}

/// Decompresses `block` into the front of `dst`, returning the number of bytes
/// written.
///
/// Only `dst[..declared]` is ever written, and `block` is never indexed past
/// its end; every malformed element is reported as a [`CodecError`].
pub fn decompress_into(block: &[u8], dst: &mut [u8]) -> Result<usize, CodecError> {
    let (declared, mut s) = preamble(block)?;
    if dst.len() < declared {
        return Err(CodecError::BufferTooSmall {
            need: declared,
            have: dst.len(),
        });
    }
    let dst = &mut dst[..declared];
    let mut d = 0usize;

    while s < block.len() {
        let at = s;
        let tag = block[s];
        match tag & 0b11 {
            0b00 => {
                let mut len = usize::from(tag >> 2);
                s += 1;
                if len >= 60 {
                    let extra = len - 59;
                    let bytes = block
                        .get(s..s + extra)
                        .ok_or(CodecError::Truncated { at })?;
                    let mut le = [0u8; 4];
                    le[..extra].copy_from_slice(bytes);
                    len = u32::from_le_bytes(le) as usize;
                    s += extra;
                }
                let len = len.checked_add(1).ok_or(CodecError::Overrun { at, declared })?;
                if len > block.len() - s {
                    return Err(CodecError::Truncated { at });
                }
                if len > declared - d {
                    return Err(CodecError::Overrun { at, declared });
                }
                dst[d..d + len].copy_from_slice(&block[s..s + len]);
                s += len;
                d += len;
            }
            kind => {
                let (len, offset, width) = match kind {
                    0b01 => {
                        let b = *block.get(s + 1).ok_or(CodecError::Truncated { at })?;
                        let len = 4 + usize::from((tag >> 2) & 0b111);
                        let offset = (usize::from(tag & 0xe0) << 3) | usize::from(b);
                        (len, offset, 2)
                    }
                    0b10 => {
                        let b = block.get(s + 1..s + 3).ok_or(CodecError::Truncated { at })?;
                        let len = 1 + usize::from(tag >> 2);
                        (len, usize::from(u16::from_le_bytes([b[0], b[1]])), 3)
                    }
                    _ => {
                        let b = block.get(s + 1..s + 5).ok_or(CodecError::Truncated { at })?;
                        let len = 1 + usize::from(tag >> 2);
                        let offset = u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
                        (len, offset, 5)
                    }
                };
                s += width;
                if offset == 0 || offset > d {
                    return Err(CodecError::OffsetOutOfRange { offset, produced: d });
                }
                if len > declared - d {
                    return Err(CodecError::Overrun { at, declared });
                }
                let src = d - offset;
                if offset >= len {
                    dst.copy_within(src..src + len, d);
                } else {
                    // Overlapping copy repeats the last `offset` bytes.
                    for i in 0..len {
                        dst[d + i] = dst[src + i];
                    }
                }
                d += len;
            }
        }
    }

    if d != declared {
        return Err(CodecError::LengthMismatch {
            declared,
            produced: d,
        });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn empty_block() {
        assert_eq!(decompress(&[0x00]).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn missing_preamble() {
        assert_eq!(decompress(&[]), Err(CodecError::Truncated { at: 0 }));
        assert_eq!(decompress(&[0x80]), Err(CodecError::Truncated { at: 1 }));
        assert_eq!(
            decompress(&[0xff, 0xff, 0xff, 0xff, 0x7f]),
            Err(CodecError::BadPreamble)
        );
    }

    #[test]
    fn short_stream_is_length_mismatch() {
        // Declares 4 bytes; a 3-byte literal then nothing.
        assert_eq!(
            decompress(&[0x04, 0x08, 0x61, 0x05, 0x61]),
            Err(CodecError::LengthMismatch {
                declared: 4,
                produced: 3
            })
        );
    }

    #[test]
    fn literal_running_off_the_end() {
        assert_eq!(
            decompress(&[0x05, 0x10, 0x61, 0x62]),
            Err(CodecError::Truncated { at: 1 })
        );
        // Extended literal length with its length byte missing.
        assert_eq!(
            decompress(&[0x40, 60 << 2]),
            Err(CodecError::Truncated { at: 1 })
        );
    }

    #[test]
    fn copy_offsets_are_checked() {
        // Copy before any output exists.
        assert_eq!(
            decompress(&[0x04, 0x01, 0x01]),
            Err(CodecError::OffsetOutOfRange {
                offset: 1,
                produced: 0
            })
        );
        // Offset 0 is never valid.
        assert_eq!(
            decompress(&[0x05, 0x00, 0x61, 0x01, 0x00]),
            Err(CodecError::OffsetOutOfRange {
                offset: 0,
                produced: 1
            })
        );
        // 4-byte-offset copy pointing past produced output.
        assert_eq!(
            decompress(&[0x05, 0x00, 0x61, 0x0f, 0x02, 0, 0, 0]),
            Err(CodecError::OffsetOutOfRange {
                offset: 2,
                produced: 1
            })
        );
        // Copy tag with its offset byte missing.
        assert_eq!(
            decompress(&[0x05, 0x00, 0x61, 0x01]),
            Err(CodecError::Truncated { at: 3 })
        );
    }

    #[test]
    fn overlapping_copy_expands_run() {
        // 'a' then copy(offset 1, len 5) -> "aaaaaa".
        assert_eq!(
            decompress(&[0x06, 0x00, 0x61, 0x05, 0x01]).unwrap(),
            b"aaaaaa"
        );
        // copy-4 form, "ab" then copy(offset 2, len 4).
        assert_eq!(
            decompress(&[0x06, 0x04, 0x61, 0x62, (3 << 2) | 3, 2, 0, 0, 0]).unwrap(),
            b"ababab"
        );
    }

    #[test]
    fn output_past_declared_length_is_rejected() {
        assert_eq!(
            decompress(&[0x01, 0x04, 0x61, 0x62]),
            Err(CodecError::Overrun { at: 1, declared: 1 })
        );
        assert_eq!(
            decompress(&[0x02, 0x00, 0x61, 0x05, 0x01]),
            Err(CodecError::Overrun { at: 3, declared: 2 })
        );
    }

    #[test]
    fn writes_stay_inside_declared_prefix() {
        let block = super::super::compress(b"hello hello hello hello").unwrap();
        let mut buf = vec![0xEEu8; 64];
        let n = decompress_into(&block, &mut buf).unwrap();
        assert_eq!(&buf[..n], b"hello hello hello hello");
        assert!(buf[n..].iter().all(|&b| b == 0xEE));

        let mut small = vec![0u8; 3];
        assert_eq!(
            decompress_into(&block, &mut small),
            Err(CodecError::BufferTooSmall { need: 23, have: 3 })
        );
    }

    #[test]
    fn absurd_length_claim_does_not_allocate() {
        assert_eq!(
            decompress(&[0xff, 0xff, 0xff, 0xff, 0x0f]),
            Err(CodecError::Truncated { at: 5 })
        );
    }
}
