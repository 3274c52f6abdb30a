//! Transmit-versus-compute energy accounting in instruction-energy units.
//!
//! One unit is the energy of executing one instruction. Sending one bit costs
//! `tx_cost_per_bit` units (480 by default), and compressing costs
//! `instructions_per_byte` units per input byte. Compression pays off when the
//! transmit energy it saves exceeds the compute energy it spends.
//!
//! All arithmetic is exact over rationals, so break-even ties are decided
//! exactly rather than within a float tolerance.

use core::fmt;
use core::str::FromStr;

use num_rational::Ratio;

pub type Units = Ratio<i128>;

/// Default cost of one transmitted bit, in instruction units.
pub const DEFAULT_TX_COST_PER_BIT: i128 = 480;
/// Default compute proxy for compression, in instructions per input byte.
pub const DEFAULT_INSTRUCTIONS_PER_BYTE: i128 = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnergyError {
    #[error("{name} must be strictly positive")]
    NonPositive { name: &'static str },
    #[error("raw byte count must be at least 1")]
    EmptyInput,
    #[error("cannot parse {0:?} as a positive number")]
    BadNumber(alloc::string::String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyParams {
    tx_cost_per_bit: Units,
    instructions_per_byte: Units,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            tx_cost_per_bit: Units::from_integer(DEFAULT_TX_COST_PER_BIT),
            instructions_per_byte: Units::from_integer(DEFAULT_INSTRUCTIONS_PER_BYTE),
        }
    }
}

impl EnergyParams {
    pub fn new(tx_cost_per_bit: Units, instructions_per_byte: Units) -> Result<Self, EnergyError> {
        if tx_cost_per_bit <= Units::from_integer(0) {
            return Err(EnergyError::NonPositive {
                name: "tx_cost_per_bit",
            });
        }
        if instructions_per_byte <= Units::from_integer(0) {
            return Err(EnergyError::NonPositive {
                name: "instructions_per_byte",
            });
        }
        Ok(EnergyParams {
            tx_cost_per_bit,
            instructions_per_byte,
        })
    }

    pub fn tx_cost_per_bit(&self) -> Units {
        self.tx_cost_per_bit
    }

    pub fn instructions_per_byte(&self) -> Units {
        self.instructions_per_byte
    }

    fn tx_cost_per_byte(&self) -> Units {
        self.tx_cost_per_bit * 8
    }

    /// Compression ratio (raw / compressed) above which compressing is
    /// strictly worthwhile; `None` when compute alone costs at least as much
    /// as sending the raw bytes.
    ///
    /// Solves `8·tx·(raw − raw/ratio) = ipb·raw` for `ratio`.
    pub fn break_even_ratio(&self) -> Option<Units> {
        let per_byte = self.tx_cost_per_byte();
        if self.instructions_per_byte >= per_byte {
            None
        } else {
            Some(per_byte / (per_byte - self.instructions_per_byte))
        }
    }

    /// Closed-form decision for a given ratio, without byte counts.
    pub fn worthwhile_at_ratio(&self, ratio: Units) -> bool {
        self.break_even_ratio().is_some_and(|r| ratio > r)
    }
}

/// Modeled energy of sending a block raw versus compressing then sending it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyEstimate {
    /// Transmit cost of the raw bytes.
    pub raw_tx_units: Units,
    /// Transmit cost of the compressed bytes.
    pub compressed_tx_units: Units,
    /// Compute cost of compressing the raw bytes.
    pub compute_units: Units,
    /// `raw_tx − (compressed_tx + compute)`; negative when compression loses.
    pub net_savings_units: Units,
}

impl EnergyEstimate {
    /// True iff compressing saves energy strictly.
    pub fn worthwhile(&self) -> bool {
        self.net_savings_units > Units::from_integer(0)
    }
}

pub fn estimate(
    raw_bytes: u64,
    compressed_bytes: u64,
    params: &EnergyParams,
) -> Result<EnergyEstimate, EnergyError> {
    if raw_bytes == 0 {
        return Err(EnergyError::EmptyInput);
    }
    let per_byte = params.tx_cost_per_byte();
    let raw_tx_units = per_byte * i128::from(raw_bytes);
    let compressed_tx_units = per_byte * i128::from(compressed_bytes);
    let compute_units = params.instructions_per_byte * i128::from(raw_bytes);
    Ok(EnergyEstimate {
        raw_tx_units,
        compressed_tx_units,
        compute_units,
        net_savings_units: raw_tx_units - compressed_tx_units - compute_units,
    })
}

pub fn worthwhile(
    raw_bytes: u64,
    compressed_bytes: u64,
    params: &EnergyParams,
) -> Result<bool, EnergyError> {
    estimate(raw_bytes, compressed_bytes, params).map(|e| e.worthwhile())
}

/// Parses `"480"`, `"2.5"` or `"3/4"` into a strictly positive rational.
pub fn parse_positive(text: &str) -> Result<Units, EnergyError> {
    let bad = || EnergyError::BadNumber(text.into());
    let text = text.trim();
    let value = if let Some((n, d)) = text.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Units::new(n, d)
    } else if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int: i128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        // Keeps `int * scale` inside i128.
        if !(0..=10i128.pow(18)).contains(&int) {
            return Err(bad());
        }
        let scale = 10i128.pow(frac.len() as u32);
        let frac: i128 = frac.parse().map_err(|_| bad())?;
        Units::new(int * scale + frac, scale)
    } else {
        Units::from_integer(text.parse().map_err(|_| bad())?)
    };
    if value <= Units::from_integer(0) {
        return Err(bad());
    }
    Ok(value)
}

/// Integer rendering used in reports: whole units, rounded toward zero.
pub struct WholeUnits(pub Units);

impl fmt::Display for WholeUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.to_integer())
    }
}

impl FromStr for EnergyParams {
    type Err = EnergyError;

    /// `"<tx_cost_per_bit>:<instructions_per_byte>"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tx, ipb) = s
            .split_once(':')
            .ok_or_else(|| EnergyError::BadNumber(s.into()))?;
        EnergyParams::new(parse_positive(tx)?, parse_positive(ipb)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(v: i128) -> Units {
        Units::from_integer(v)
    }

    #[test]
    fn ten_to_one_example() {
        let e = estimate(16_000, 1_600, &EnergyParams::default()).unwrap();
        assert_eq!(e.raw_tx_units, int(61_440_000));
        assert_eq!(e.compressed_tx_units, int(6_144_000));
        assert_eq!(e.compute_units, int(160_000));
        assert_eq!(e.net_savings_units, int(55_136_000));
        assert!(e.worthwhile());
    }

    #[test]
    fn no_reduction_loses_compute() {
        let e = estimate(5_000, 5_000, &EnergyParams::default()).unwrap();
        assert_eq!(e.net_savings_units, int(-50_000));
        assert!(!worthwhile(5_000, 6_000, &EnergyParams::default()).unwrap());
    }

    #[test]
    fn exact_tie_is_not_worthwhile() {
        // One byte saved = 8 bits = 3840 units at 480/bit; compute 3840/raw per byte.
        let raw = 10u64;
        let p = EnergyParams::new(int(480), Units::new(3840, raw as i128)).unwrap();
        let e = estimate(raw, raw - 1, &p).unwrap();
        assert_eq!(e.net_savings_units, int(0));
        assert!(!e.worthwhile());
    }

    #[test]
    fn slow_codec_never_pays() {
        let p = EnergyParams::new(int(480), int(480 * 8)).unwrap();
        let e = estimate(16_000, 8_000, &p).unwrap();
        assert_eq!(e.net_savings_units, int(480 * 8 * 8_000 - 480 * 8 * 16_000));
        assert!(!e.worthwhile());
        assert_eq!(p.break_even_ratio(), None);
    }

    #[test]
    fn default_break_even() {
        let r = EnergyParams::default().break_even_ratio().unwrap();
        assert_eq!(r, Units::new(384, 383));
    }

    #[test]
    fn validation() {
        assert_eq!(
            estimate(0, 0, &EnergyParams::default()),
            Err(EnergyError::EmptyInput)
        );
        assert!(EnergyParams::new(int(0), int(1)).is_err());
        assert!(EnergyParams::new(int(1), int(-1)).is_err());
    }

    #[test]
    fn parses_numbers() {
        assert_eq!(parse_positive("480"), Ok(int(480)));
        assert_eq!(parse_positive("2.5"), Ok(Units::new(5, 2)));
        assert_eq!(parse_positive(".25"), Ok(Units::new(1, 4)));
        assert_eq!(parse_positive("3/4"), Ok(Units::new(3, 4)));
        for bad in ["0", "-1", "1/0", "x", "1.", "1.-5", "", "0.0"] {
            assert!(parse_positive(bad).is_err(), "{bad}");
        }
        assert_eq!(
            "480:10".parse::<EnergyParams>(),
            Ok(EnergyParams::default())
        );
    }

    #[test]
    fn whole_units_truncate() {
        assert_eq!(alloc::format!("{}", WholeUnits(int(-50_000))), "-50000");
        assert_eq!(alloc::format!("{}", WholeUnits(Units::new(7, 2))), "3");
    }

    proptest! {
        #[test]
        fn linear_in_sizes(raw in 1u64..1_000_000, frac in 0u64..=100, k in 1u64..1000) {
            let comp = raw * frac / 100;
            let p = EnergyParams::default();
            let one = estimate(raw, comp, &p).unwrap();
            let many = estimate(raw * k, comp * k, &p).unwrap();
            let k = i128::from(k);
            prop_assert_eq!(many.raw_tx_units, one.raw_tx_units * k);
            prop_assert_eq!(many.compressed_tx_units, one.compressed_tx_units * k);
            prop_assert_eq!(many.compute_units, one.compute_units * k);
            prop_assert_eq!(many.net_savings_units, one.net_savings_units * k);
        }

        #[test]
        fn monotone(raw in 2u64..1_000_000, a in 0u64..1_000_000, ipb in 1i128..10_000) {
            let a = a % raw;
            let p = EnergyParams::new(int(480), int(ipb)).unwrap();
            let q = EnergyParams::new(int(480), int(ipb + 1)).unwrap();
            let more_saved = estimate(raw, a, &p).unwrap().net_savings_units;
            let less_saved = estimate(raw, a + 1, &p).unwrap().net_savings_units;
            prop_assert!(more_saved > less_saved);
            prop_assert!(estimate(raw, a, &q).unwrap().net_savings_units < more_saved);
        }

        #[test]
        fn sign_law(raw in 1u64..100_000, comp in 0u64..200_000, ipb in 1i128..10_000) {
            let p = EnergyParams::new(int(480), int(ipb)).unwrap();
            let e = estimate(raw, comp, &p).unwrap();
            prop_assert_eq!(worthwhile(raw, comp, &p).unwrap(), e.net_savings_units > int(0));
        }
    }
}
