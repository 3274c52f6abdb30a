//! Deterministic stand-in for REDD appliance channels.
//!
//! Power is piecewise constant: the appliance sits in one state for a
//! geometrically distributed number of seconds, then jumps to another state.
//! Each visit to a state draws a slightly different wattage, as a real meter
//! would. Timestamps advance by exactly one second per reading.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::record::Reading;

/// First timestamp of the generated series (start of REDD house 1).
pub const DEFAULT_START: u64 = 1_303_132_929;

/// Power states and dwell behaviour of a simulated appliance.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceProfile {
    /// Nominal watts per state.
    pub levels: Vec<f64>,
    /// Mean seconds spent in a state before switching (geometric dwell).
    pub mean_dwell_s: u32,
    /// Relative spread of the wattage drawn on each visit to a state.
    pub level_jitter: f64,
}

impl Default for ApplianceProfile {
    /// A refrigerator-like load: off, standby, compressor, defrost heater.
    fn default() -> Self {
        ApplianceProfile {
            levels: alloc::vec![0.0, 6.2, 142.0, 415.0],
            mean_dwell_s: 60,
            level_jitter: 0.02,
        }
    }
}

/// Parameters of a synthetic dataset. Iterating twice yields the same readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub seed: u64,
    pub count: usize,
    pub start: u64,
    pub profile: ApplianceProfile,
}

impl Synthetic {
    pub fn new(seed: u64, count: usize) -> Self {
        Synthetic {
            seed,
            count,
            start: DEFAULT_START,
            profile: ApplianceProfile::default(),
        }
    }

    pub fn with_profile(mut self, profile: ApplianceProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn iter(&self) -> SyntheticIter<'_> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let state = if self.profile.levels.is_empty() {
            0
        } else {
            rng.random_range(0..self.profile.levels.len())
        };
        let mut it = SyntheticIter {
            spec: self,
            rng,
            index: 0,
            state,
            power: 0.0,
        };
        it.power = it.visit_power();
        it
    }

    pub fn readings(&self) -> Vec<Reading> {
        self.iter().collect()
    }
}

pub struct SyntheticIter<'a> {
    spec: &'a Synthetic,
    rng: ChaCha8Rng,
    index: usize,
    state: usize,
    power: f64,
}

impl SyntheticIter<'_> {
    fn visit_power(&mut self) -> f64 {
        let Some(&nominal) = self.spec.profile.levels.get(self.state) else {
            return 0.0;
        };
        let jitter = self.spec.profile.level_jitter;
        let factor = if jitter > 0.0 {
            1.0 + self.rng.random_range(-jitter..=jitter)
        } else {
            1.0
        };
        // Meters report to the centiwatt.
        ((nominal * factor * 100.0) as i64) as f64 / 100.0
    }

    fn maybe_switch(&mut self) {
        let levels = self.spec.profile.levels.len();
        if levels < 2 {
            return;
        }
        let p = 1.0 / f64::from(self.spec.profile.mean_dwell_s.max(1));
        if self.rng.random_bool(p) {
            let step = self.rng.random_range(1..levels);
            self.state = (self.state + step) % levels;
            self.power = self.visit_power();
        }
    }
}

impl Iterator for SyntheticIter<'_> {
    type Item = Reading;

    fn next(&mut self) -> Option<Reading> {
        if self.index >= self.spec.count {
            return None;
        }
        if self.index > 0 {
            self.maybe_switch();
        }
        let ts = self.spec.start + self.index as u64;
        self.index += 1;
        Some(Reading::new(ts, self.power).expect("generated power is finite"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.count - self.index;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SyntheticIter<'_> {}

/// Fraction of adjacent reading pairs with bit-identical power.
pub fn repeat_fraction(readings: &[Reading]) -> f64 {
    if readings.len() < 2 {
        return 1.0;
    }
    let same = readings
        .windows(2)
        .filter(|w| w[0].power().to_bits() == w[1].power().to_bits())
        .count();
    same as f64 / (readings.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = Synthetic::new(7, 5).readings();
        let b = Synthetic::new(7, 5).readings();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert_ne!(Synthetic::new(8, 500).readings(), Synthetic::new(7, 500).readings());
    }

    #[test]
    fn timestamps_step_by_one() {
        let r = Synthetic::new(1, 1000).readings();
        assert_eq!(r[0].timestamp(), DEFAULT_START);
        assert!(r.windows(2).all(|w| w[1].timestamp() == w[0].timestamp() + 1));
    }

    #[test]
    fn default_profile_is_run_heavy() {
        // Measured once at 0.983 for seed 7 over 100k readings; 1/mean_dwell
        // predicts ~0.983. Frozen with headroom as a regression floor.
        let r = Synthetic::new(7, 100_000).readings();
        let f = repeat_fraction(&r);
        assert!(f >= 0.9, "repeat fraction {f}");
        assert!(f < 0.999, "generator stopped switching states: {f}");
    }

    #[test]
    fn single_level_profile_is_constant() {
        let s = Synthetic::new(3, 50).with_profile(ApplianceProfile {
            levels: alloc::vec![60.0],
            mean_dwell_s: 1,
            level_jitter: 0.0,
        });
        assert!(s.iter().all(|r| r.power() == 60.0));
    }

    #[test]
    fn exact_size() {
        let s = Synthetic::new(3, 17);
        assert_eq!(s.iter().len(), 17);
    }
}
