//! Rate limiting for the emulated sensor link.
//!
//! Time is passed in as nanoseconds from an arbitrary origin so the bucket can
//! be driven by a real monotonic clock or by tests.

use core::num::NonZeroU64;
use core::time::Duration;

const NANOS_PER_SEC: u128 = 1_000_000_000;

/// Minimum time to push `bytes` through a link of `rate_bits_per_s`.
///
/// Rounded up to the next nanosecond so it stays a lower bound.
pub fn throttled_elapsed(bytes: u64, rate_bits_per_s: NonZeroU64) -> Duration {
    let bits = u128::from(bytes) * 8;
    let nanos = (bits * NANOS_PER_SEC).div_ceil(u128::from(rate_bits_per_s.get()));
    Duration::from_nanos(u64::try_from(nanos).unwrap_or(u64::MAX))
}

/// Token bucket in bits, allowed to go into debt.
///
/// A frame is admitted at once and the bucket may go negative; the caller must
/// hold the frame until [`TokenBucket::reserve`]'s returned instant. With a
/// burst of `B` bits, any run of frames totalling `N` bits that starts with a
/// full bucket finishes no earlier than `(N - B) / rate` after it started.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    rate: u64,
    /// Capacity, in bit-nanoseconds-per-second (bits × 10^9).
    capacity: i128,
    tokens: i128,
    last_ns: u64,
}

impl TokenBucket {
    /// A full bucket holding `burst_bits`.
    pub fn new(rate_bits_per_s: NonZeroU64, burst_bits: u64, now_ns: u64) -> Self {
        let capacity = i128::from(burst_bits) * NANOS_PER_SEC as i128;
        TokenBucket {
            rate: rate_bits_per_s.get(),
            capacity,
            tokens: capacity,
            last_ns: now_ns,
        }
    }

    /// Bucket whose burst equals `granularity` worth of traffic at `rate`.
    pub fn with_granularity(rate_bits_per_s: NonZeroU64, granularity: Duration, now_ns: u64) -> Self {
        let burst = u128::from(rate_bits_per_s.get()) * granularity.as_nanos() / NANOS_PER_SEC;
        TokenBucket::new(rate_bits_per_s, u64::try_from(burst).unwrap_or(u64::MAX), now_ns)
    }

    pub fn rate(&self) -> u64 {
        self.rate
    }

    pub fn burst_bits(&self) -> u64 {
        (self.capacity / NANOS_PER_SEC as i128) as u64
    }

    fn refill(&mut self, now_ns: u64) {
        if now_ns > self.last_ns {
            let gained = i128::from(now_ns - self.last_ns) * i128::from(self.rate);
            self.tokens = (self.tokens + gained).min(self.capacity);
            self.last_ns = now_ns;
        }
    }

    /// Charges `bytes` against the bucket and returns the time (same origin as
    /// `now_ns`) at which the transfer is complete.
    pub fn reserve(&mut self, now_ns: u64, bytes: u64) -> u64 {
        self.refill(now_ns);
        self.tokens -= i128::from(bytes) * 8 * NANOS_PER_SEC as i128;
        if self.tokens >= 0 {
            now_ns
        } else {
            let rate = i128::from(self.rate);
            let wait = (-self.tokens + rate - 1) / rate;
            now_ns.saturating_add(u64::try_from(wait).unwrap_or(u64::MAX))
        }
    }
}
