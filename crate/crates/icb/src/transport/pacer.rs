use std::num::NonZeroU64;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use icb_core::TokenBucket;

use super::PACING_BURST;

/// Below this, `pace` spins instead of sleeping. Sleeps typically overshoot by
/// tens of microseconds but occasionally by milliseconds, which would make
/// large frames look slower than the link; 2 ms covers a 16 KB frame at
/// 100 Mbit/s, so at benchmark rates the wire wait is spun entirely.
const SPIN_THRESHOLD: Duration = Duration::from_millis(2);

/// Holds each frame until the emulated wire has had time to carry it.
///
/// Shared by every sender on the same wire.
#[derive(Debug)]
pub(crate) struct Pacer {
    origin: Instant,
    bucket: Mutex<TokenBucket>,
}

impl Pacer {
    pub(crate) fn new(rate: NonZeroU64) -> Self {
        Pacer {
            origin: Instant::now(),
            bucket: Mutex::new(TokenBucket::with_granularity(rate, PACING_BURST, 0)),
        }
    }

    /// Blocks until `bytes` more could have crossed the wire.
    pub(crate) fn pace(&self, bytes: usize) {
        let ready_ns = {
            let mut bucket = self.bucket.lock().expect("pacer lock");
            bucket.reserve(self.origin.elapsed().as_nanos() as u64, bytes as u64)
        };
        let deadline = self.origin + Duration::from_nanos(ready_ns);
        loop {
            let now = Instant::now();
            if now >= deadline {
                return;
            }
            let left = deadline - now;
            if left > SPIN_THRESHOLD {
                thread::sleep(left - SPIN_THRESHOLD);
            } else {
                std::hint::spin_loop();
            }
        }
    }
}
