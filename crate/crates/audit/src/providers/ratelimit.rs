use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::Clock;

/// Spaces request issue times at least `interval` apart, which bounds every
/// half-open one-second window to `floor(rate)` requests (one request for
/// rates below 1/s).
pub struct RateLimiter {
    interval: Duration,
    clock: Arc<dyn Clock>,
    next_free: Mutex<Option<Duration>>,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64, clock: Arc<dyn Clock>) -> Self {
        assert!(rate_per_sec > 0.0 && rate_per_sec.is_finite(), "rate limit must be positive");
        let per_window = if rate_per_sec >= 1.0 { rate_per_sec.floor() } else { rate_per_sec };
        let nanos = (1e9 / per_window).ceil() as u64;
        RateLimiter { interval: Duration::from_nanos(nanos), clock, next_free: Mutex::new(None) }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks until the next slot and returns the issue time. Callers are
    /// served one at a time.
    pub fn acquire(&self) -> Duration {
        let mut next_free = self.next_free.lock().unwrap();
        if let Some(next) = *next_free {
            self.clock.sleep_until(next);
        }
        let issued = self.clock.now();
        *next_free = Some(issued + self.interval);
        issued
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ManualClock;

    #[test]
    fn intervals() {
        let clock = Arc::new(ManualClock::new());
        assert_eq!(RateLimiter::new(10.0, clock.clone()).interval(), Duration::from_millis(100));
        assert_eq!(RateLimiter::new(2.5, clock.clone()).interval(), Duration::from_millis(500));
        assert_eq!(RateLimiter::new(0.5, clock).interval(), Duration::from_secs(2));
    }

    #[test]
    fn fifty_requests_at_ten_per_second_take_4_9_seconds() {
        let clock = Arc::new(ManualClock::new());
        let limiter = RateLimiter::new(10.0, clock.clone());
        let times: Vec<Duration> = (0..50).map(|_| limiter.acquire()).collect();
        assert_eq!(times[0], Duration::ZERO);
        assert_eq!(*times.last().unwrap(), Duration::from_millis(4900));
    }

    #[test]
    fn idle_time_is_not_banked() {
        let clock = Arc::new(ManualClock::new());
        let limiter = RateLimiter::new(1.0, clock.clone());
        limiter.acquire();
        clock.advance(Duration::from_secs(10));
        let a = limiter.acquire();
        let b = limiter.acquire();
        assert_eq!(b - a, Duration::from_secs(1));
    }
}
