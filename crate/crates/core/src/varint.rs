//! Base-128 little-endian unsigned varints, as used by the Snappy preamble.

/// Longest encoding of a `u32`.
pub const MAX_U32_LEN: usize = 5;

/// Writes `value` into `dst` and returns the number of bytes used.
///
/// `dst` must hold at least [`MAX_U32_LEN`] bytes.
pub fn encode_u32(mut value: u32, dst: &mut [u8]) -> usize {
    let mut i = 0;
    while value >= 0x80 {
        dst[i] = (value as u8) | 0x80;
        value >>= 7;
        i += 1;
    }
    dst[i] = value as u8;
    i + 1
}

/// Number of bytes [`encode_u32`] writes for `value`.
pub fn encoded_len(value: u32) -> usize {
    match value {
        0..=0x7f => 1,
        0x80..=0x3fff => 2,
        0x4000..=0x1f_ffff => 3,
        0x20_0000..=0x0fff_ffff => 4,
        _ => 5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarintError {
    /// Input ended while the continuation bit was still set.
    Truncated,
    /// The value does not fit in 32 bits.
    Overflow,
}

/// Decodes a `u32` from the front of `src`, returning the value and the number
/// of bytes consumed.
pub fn decode_u32(src: &[u8]) -> Result<(u32, usize), VarintError> {
    let mut value: u64 = 0;
    for (i, &byte) in src.iter().enumerate().take(MAX_U32_LEN) {
        value |= u64::from(byte & 0x7f) << (7 * i);
        if byte & 0x80 == 0 {
            return u32::try_from(value)
                .map(|v| (v, i + 1))
                .map_err(|_| VarintError::Overflow);
        }
    }
    if src.len() >= MAX_U32_LEN {
        Err(VarintError::Overflow)
    } else {
        Err(VarintError::Truncated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encodings() {
        let mut buf = [0u8; MAX_U32_LEN];
        assert_eq!(encode_u32(0, &mut buf), 1);
        assert_eq!(buf[0], 0);
        assert_eq!(encode_u32(16, &mut buf), 1);
        assert_eq!(buf[0], 0x10);
        assert_eq!(encode_u32(1024, &mut buf), 2);
        assert_eq!(&buf[..2], &[0x80, 0x08]);
        assert_eq!(encode_u32(u32::MAX, &mut buf), 5);
        assert_eq!(buf, [0xff, 0xff, 0xff, 0xff, 0x0f]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(decode_u32(&[]), Err(VarintError::Truncated));
        assert_eq!(decode_u32(&[0x80, 0x80]), Err(VarintError::Truncated));
        // 2^32 needs a 5th byte of 0x10.
        assert_eq!(
            decode_u32(&[0x80, 0x80, 0x80, 0x80, 0x10]),
            Err(VarintError::Overflow)
        );
        assert_eq!(
            decode_u32(&[0xff, 0xff, 0xff, 0xff, 0xff, 0x01]),
            Err(VarintError::Overflow)
        );
    }

    proptest! {
        #[test]
        fn roundtrip(value: u32) {
            let mut buf = [0u8; MAX_U32_LEN];
            let n = encode_u32(value, &mut buf);
            prop_assert_eq!(n, encoded_len(value));
            prop_assert_eq!(decode_u32(&buf[..n]), Ok((value, n)));
        }
    }
}
