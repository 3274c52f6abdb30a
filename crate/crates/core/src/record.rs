//! Power readings and their fixed 16-byte binary layout.
//!
//! A serialized batch is the concatenation, per reading, of the timestamp as a
//! little-endian `u64` followed by the power as a little-endian IEEE-754
//! `f64`.

use alloc::vec::Vec;
use core::num::NonZeroUsize;

/// Bytes per serialized reading.
pub const READING_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("line {line}: expected `<timestamp> <power>`")]
    Malformed { line: usize },
    #[error("line {line}: power must be finite")]
    NonFinite { line: usize },
    #[error("power reading is not finite")]
    NonFiniteValue,
    #[error("raw block has {actual} bytes, expected {expected} for {count} readings")]
    LengthMismatch {
        expected: usize,
        actual: usize,
        count: usize,
    },
    #[error("a batch needs at least one reading")]
    EmptyBatch,
}

/// One appliance power sample: whole seconds since the Unix epoch and watts.
///
/// `power` is always finite; equality compares the bit pattern of the double,
/// so round trips are checked bit-exactly.
#[derive(Debug, Clone, Copy)]
pub struct Reading {
    timestamp: u64,
    power: f64,
}

impl Reading {
    pub fn new(timestamp: u64, power: f64) -> Result<Self, RecordError> {
        if power.is_finite() {
            Ok(Reading { timestamp, power })
        } else {
            Err(RecordError::NonFiniteValue)
        }
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn to_bytes(&self) -> [u8; READING_SIZE] {
        let mut out = [0u8; READING_SIZE];
        out[..8].copy_from_slice(&self.timestamp.to_le_bytes());
        out[8..].copy_from_slice(&self.power.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; READING_SIZE]) -> Result<Self, RecordError> {
        let mut ts = [0u8; 8];
        let mut pw = [0u8; 8];
        ts.copy_from_slice(&bytes[..8]);
        pw.copy_from_slice(&bytes[8..]);
        Reading::new(u64::from_le_bytes(ts), f64::from_le_bytes(pw))
    }
}

impl PartialEq for Reading {
    fn eq(&self, other: &Self) -> bool {
        self.timestamp == other.timestamp && self.power.to_bits() == other.power.to_bits()
    }
}

impl Eq for Reading {}

/// Parses one line of a REDD low-frequency channel file:
/// `<decimal-integer><whitespace><decimal-number>`.
///
/// `line_no` is only used to position errors.
pub fn parse_redd_line(line: &str, line_no: usize) -> Result<Reading, RecordError> {
    let malformed = RecordError::Malformed { line: line_no };
    let mut fields = line.split_ascii_whitespace();
    let (Some(ts), Some(power), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(malformed);
    };
    if !ts.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed);
    }
    let timestamp: u64 = ts.parse().map_err(|_| malformed.clone())?;
    // Rust's float grammar also admits "inf" and "NaN"; those are rejected as
    // non-finite rather than malformed.
    let power: f64 = power.parse().map_err(|_| malformed)?;
    if !power.is_finite() {
        return Err(RecordError::NonFinite { line: line_no });
    }
    Ok(Reading { timestamp, power })
}

/// A non-empty, ordered run of readings sent as one message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    readings: Vec<Reading>,
}

impl Batch {
    pub fn new(readings: Vec<Reading>) -> Result<Self, RecordError> {
        if readings.is_empty() {
            Err(RecordError::EmptyBatch)
        } else {
            Ok(Batch { readings })
        }
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    pub fn into_readings(self) -> Vec<Reading> {
        self.readings
    }

    pub fn len(&self) -> NonZeroUsize {
        NonZeroUsize::new(self.readings.len()).expect("batch is never empty")
    }

    /// Length of [`Batch::serialize`]'s output.
    pub fn serialized_len(&self) -> usize {
        self.readings.len() * READING_SIZE
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        serialize_into(&self.readings, &mut out);
        out
    }

    /// Inverse of [`Batch::serialize`]; `raw` must hold exactly `count`
    /// readings.
    pub fn deserialize(raw: &[u8], count: usize) -> Result<Self, RecordError> {
        let expected = count
            .checked_mul(READING_SIZE)
            .ok_or(RecordError::LengthMismatch {
                expected: usize::MAX,
                actual: raw.len(),
                count,
            })?;
        if raw.len() != expected {
            return Err(RecordError::LengthMismatch {
                expected,
                actual: raw.len(),
                count,
            });
        }
        Batch::new(deserialize_all(raw)?)
    }
}

/// Appends the 16-byte encoding of each reading to `out`.
pub fn serialize_into(readings: &[Reading], out: &mut Vec<u8>) {
    out.reserve(readings.len() * READING_SIZE);
    for r in readings {
        out.extend_from_slice(&r.to_bytes());
    }
}

/// Decodes a whole number of readings from `raw`.
pub fn deserialize_all(raw: &[u8]) -> Result<Vec<Reading>, RecordError> {
    if raw.len() % READING_SIZE != 0 {
        return Err(RecordError::LengthMismatch {
            expected: raw.len() - raw.len() % READING_SIZE,
            actual: raw.len(),
            count: raw.len() / READING_SIZE,
        });
    }
    raw.chunks_exact(READING_SIZE)
        .map(|c| Reading::from_bytes(c.try_into().expect("exact chunk")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn r(ts: u64, p: f64) -> Reading {
        Reading::new(ts, p).unwrap()
    }

    #[test]
    fn parses_redd_lines() {
        assert_eq!(parse_redd_line("1303132930 245.0", 1), Ok(r(1303132930, 245.0)));
        assert_eq!(parse_redd_line("0 0", 1), Ok(r(0, 0.0)));
        assert_eq!(parse_redd_line("1303132930\t12.5\r", 3), Ok(r(1303132930, 12.5)));
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(
            parse_redd_line("12ab 5.0", 7),
            Err(RecordError::Malformed { line: 7 })
        );
        assert_eq!(parse_redd_line("", 1), Err(RecordError::Malformed { line: 1 }));
        assert_eq!(parse_redd_line("5", 1), Err(RecordError::Malformed { line: 1 }));
        assert_eq!(parse_redd_line("-5 1.0", 1), Err(RecordError::Malformed { line: 1 }));
        assert_eq!(parse_redd_line("5 1.0 2", 1), Err(RecordError::Malformed { line: 1 }));
        assert_eq!(parse_redd_line("5 watts", 1), Err(RecordError::Malformed { line: 1 }));
        assert_eq!(parse_redd_line("5 NaN", 4), Err(RecordError::NonFinite { line: 4 }));
        assert_eq!(parse_redd_line("5 inf", 4), Err(RecordError::NonFinite { line: 4 }));
        assert_eq!(parse_redd_line("5 1e999", 4), Err(RecordError::NonFinite { line: 4 }));
    }

    #[test]
    fn rejects_non_finite_construction() {
        assert_eq!(Reading::new(1, f64::NAN), Err(RecordError::NonFiniteValue));
        assert_eq!(Reading::new(1, f64::NEG_INFINITY), Err(RecordError::NonFiniteValue));
    }

    #[test]
    fn serialized_layout() {
        let b = Batch::new(vec![r(1, 2.0)]).unwrap();
        assert_eq!(
            b.serialize(),
            [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x40]
        );
        let big = Batch::new((0..1000).map(|i| r(i, 1.5)).collect()).unwrap();
        assert_eq!(big.serialize().len(), 16000);
    }

    #[test]
    fn deserialize_examples() {
        assert_eq!(
            Batch::deserialize(&[0u8; 16], 1).unwrap().readings(),
            &[r(0, 0.0)]
        );
        let raw = Batch::new(vec![r(1, 2.0)]).unwrap().serialize();
        assert_eq!(Batch::deserialize(&raw, 1).unwrap().readings(), &[r(1, 2.0)]);
        assert_eq!(
            Batch::deserialize(&[0u8; 17], 1),
            Err(RecordError::LengthMismatch {
                expected: 16,
                actual: 17,
                count: 1
            })
        );
        assert_eq!(Batch::deserialize(&[], 0), Err(RecordError::EmptyBatch));
    }

    #[test]
    fn deserialize_rejects_nan_payload() {
        let mut raw = [0u8; 16];
        raw[8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(Batch::deserialize(&raw, 1), Err(RecordError::NonFiniteValue));
    }

    #[test]
    fn negative_zero_is_distinct() {
        assert_ne!(r(0, 0.0), r(0, -0.0));
    }

    fn reading() -> impl Strategy<Value = Reading> {
        (any::<u64>(), any::<f64>().prop_filter("finite", |p| p.is_finite()))
            .prop_map(|(t, p)| Reading::new(t, p).unwrap())
    }

    proptest! {
        #[test]
        fn roundtrip_and_length_law(readings in prop::collection::vec(reading(), 1..200)) {
            let b = Batch::new(readings).unwrap();
            let raw = b.serialize();
            prop_assert_eq!(raw.len(), 16 * b.readings().len());
            let back = Batch::deserialize(&raw, b.readings().len()).unwrap();
            prop_assert_eq!(back, b);
        }

        #[test]
        fn display_then_parse_is_exact(r in reading()) {
            let line = alloc::format!("{} {}", r.timestamp(), r.power());
            prop_assert_eq!(parse_redd_line(&line, 1).unwrap(), r);
        }
    }
}
