use alloc::vec::Vec;

use super::{max_compressed_length, CodecError, MAX_INPUT_LEN};
use crate::varint;

const TAG_LITERAL: u8 = 0b00;
const TAG_COPY1: u8 = 0b01;
const TAG_COPY2: u8 = 0b10;

/// Inputs are matched in independent fragments of this size, so every copy
/// offset fits in 16 bits.
const FRAGMENT_SIZE: usize = 1 << 16;

const TABLE_BITS: u32 = 14;
pub(super) const TABLE_SIZE: usize = 1 << TABLE_BITS;

/// Bytes at the end of a fragment that are never probed, so 8-byte lookahead
/// loads stay in bounds.
const INPUT_MARGIN: usize = 16 - 1;

/// Fragments shorter than this are emitted as a single literal.
const MIN_MATCHABLE_FRAGMENT: usize = 1 + 1 + INPUT_MARGIN;

/// Compresses `input` into a fresh Snappy raw block.
pub fn compress(input: &[u8]) -> Result<Vec<u8>, CodecError> {
    let mut table = alloc::vec![0u16; TABLE_SIZE];
    let mut out = Vec::with_capacity(max_compressed_length(input.len()));
    compress_with_table(input, &mut out, &mut table)?;
    Ok(out)
}

pub(super) fn compress_with_table(
    input: &[u8],
    out: &mut Vec<u8>,
    table: &mut [u16],
) -> Result<(), CodecError> {
    if input.len() > MAX_INPUT_LEN {
        return Err(CodecError::InputTooLarge { len: input.len() });
    }
    debug_assert_eq!(table.len(), TABLE_SIZE);
    out.reserve(max_compressed_length(input.len()));

    let mut preamble = [0u8; varint::MAX_U32_LEN];
    let n = varint::encode_u32(input.len() as u32, &mut preamble);
    out.extend_from_slice(&preamble[..n]);

    for fragment in input.chunks(FRAGMENT_SIZE) {
        if fragment.len() < MIN_MATCHABLE_FRAGMENT {
            emit_literal(out, fragment);
        } else {
            table.fill(0);
            compress_fragment(fragment, out, table);
        }
    }
    Ok(())
}

#[inline]
fn load32(src: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([src[i], src[i + 1], src[i + 2], src[i + 3]])
}

#[inline]
fn load64(src: &[u8], i: usize) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&src[i..i + 8]);
    u64::from_le_bytes(b)
}

#[inline]
fn hash(word: u32) -> usize {
    (word.wrapping_mul(0x1e35_a7bd) >> (32 - TABLE_BITS)) as usize
}

/// Greedy single-probe matcher over one fragment (`len <= FRAGMENT_SIZE`).
///
/// After 32 consecutive misses the probe stride grows by one byte, and keeps
/// growing, so incompressible data is skipped quickly.
fn compress_fragment(src: &[u8], out: &mut Vec<u8>, table: &mut [u16]) {
    let s_limit = src.len() - INPUT_MARGIN;
    let mut next_emit = 0usize;
    let mut s = 1usize;
    let mut next_hash = hash(load32(src, s));

    'outer: loop {
        let mut skip = 32usize;
        let mut next_s = s;
        let mut candidate;
        loop {
            s = next_s;
            let stride = skip >> 5;
            next_s = s + stride;
            skip += stride;
            if next_s > s_limit {
                break 'outer;
            }
            candidate = table[next_hash] as usize;
            table[next_hash] = s as u16;
            next_hash = hash(load32(src, next_s));
            if load32(src, s) == load32(src, candidate) {
                break;
            }
        }

        emit_literal(out, &src[next_emit..s]);

        // Emit back-to-back copies while the byte right after a match starts
        // another match.
        loop {
            let base = s;
            s += 4;
            let mut i = candidate + 4;
            while s < src.len() && src[i] == src[s] {
                i += 1;
                s += 1;
            }
            emit_copy(out, base - candidate, s - base);
            next_emit = s;
            if s >= s_limit {
                break 'outer;
            }

            let x = load64(src, s - 1);
            table[hash(x as u32)] = (s - 1) as u16;
            let cur = hash((x >> 8) as u32);
            candidate = table[cur] as usize;
            table[cur] = s as u16;
            if (x >> 8) as u32 != load32(src, candidate) {
                next_hash = hash((x >> 16) as u32);
                s += 1;
                break;
            }
        }
    }

    if next_emit < src.len() {
        emit_literal(out, &src[next_emit..]);
    }
}

fn emit_literal(out: &mut Vec<u8>, lit: &[u8]) {
    if lit.is_empty() {
        return;
    }
    let n = lit.len() - 1;
    if n < 60 {
        out.push(((n as u8) << 2) | TAG_LITERAL);
    } else {
        let extra = match n {
            0..=0xff => 1u8,
            0x100..=0xffff => 2,
            0x1_0000..=0xff_ffff => 3,
            _ => 4,
        };
        out.push(((59 + extra) << 2) | TAG_LITERAL);
        out.extend_from_slice(&(n as u32).to_le_bytes()[..extra as usize]);
    }
    out.extend_from_slice(lit);
}

/// Emits a back-reference; `offset` is below 2^16 and `length` at least 4.
fn emit_copy(out: &mut Vec<u8>, offset: usize, mut length: usize) {
    debug_assert!((1..FRAGMENT_SIZE).contains(&offset));
    debug_assert!(length >= 4);
    let off = (offset as u16).to_le_bytes();
    // Long runs: 64-byte pieces, leaving a tail of at least 4 so the final
    // piece can still use the short form.
    while length >= 68 {
        out.extend_from_slice(&[(63 << 2) | TAG_COPY2, off[0], off[1]]);
        length -= 64;
    }
    if length > 64 {
        out.extend_from_slice(&[(59 << 2) | TAG_COPY2, off[0], off[1]]);
        length -= 60;
    }
    if length >= 12 || offset >= 2048 {
        out.extend_from_slice(&[(((length - 1) as u8) << 2) | TAG_COPY2, off[0], off[1]]);
    } else {
        out.push((((offset >> 8) as u8) << 5) | (((length - 4) as u8) << 2) | TAG_COPY1);
        out.push(offset as u8);
    }
}
