//! Message pacing: consecutive messages of one interface are spaced by at
//! least the configured interval.

use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Below this the pacer stops sleeping and spins; sleep wakeups are too
/// coarse for sub-millisecond intervals.
const SPIN_WINDOW: Duration = Duration::from_micros(200);
const MAX_SLEEP: Duration = Duration::from_millis(20);

#[derive(Debug)]
pub struct Pacer {
    last: Option<Instant>,
    jitter: f64,
    guard: f64,
    rng: StdRng,
}

impl Pacer {
    /// Each gap is `interval * (1 + guard + u)` with `u` uniform on
    /// `[0, jitter)`.
    pub fn new(jitter: f64, guard: f64, seed: u64) -> Self {
        Pacer {
            last: None,
            jitter: jitter.max(0.0),
            guard: guard.max(0.0),
            rng: StdRng::seed_from_u64(seed),
        }
    }

    pub fn gap(&mut self, interval: Duration) -> Duration {
        let u = if self.jitter > 0.0 {
            self.rng.gen_range(0.0..self.jitter)
        } else {
            0.0
        };
        interval.mul_f64(1.0 + self.guard + u)
    }

    /// Blocks until the next message may go out. Returns false if `stop`
    /// was raised while waiting.
    pub fn wait(&mut self, interval: Duration, stop: &AtomicBool) -> bool {
        match self.last {
            Some(last) => sleep_until(last + self.gap(interval), stop),
            None => !stop.load(Ordering::Relaxed),
        }
    }

    /// Call once the message has left; the next gap counts from here, so
    /// a delay while building or sending cannot shorten it.
    pub fn sent(&mut self) {
        self.last = Some(Instant::now());
    }

    /// Forgets the previous message, e.g. after a client reconnects.
    pub fn reset(&mut self) {
        self.last = None;
    }
}

/// Sleeps in bounded steps, then spins for the final stretch.
pub fn sleep_until(deadline: Instant, stop: &AtomicBool) -> bool {
    loop {
        if stop.load(Ordering::Relaxed) {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        let left = deadline - now;
        if left > SPIN_WINDOW {
            thread::sleep((left - SPIN_WINDOW).min(MAX_SLEEP));
        } else {
            thread::yield_now();
        }
    }
}
