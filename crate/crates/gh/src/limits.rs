use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

/// Retry schedule for throttled or failing requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay: Duration::from_secs(1), max_delay: Duration::from_secs(300) }
    }
}

impl RetryPolicy {
    /// Exponential delay before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub fn thread_sleeper() -> Sleeper {
    Arc::new(std::thread::sleep)
}

/// Spaces requests so that at most `per_hour` are issued per hour.
pub struct RateBudget {
    interval: Option<Duration>,
    next: Mutex<Option<Instant>>,
}

impl RateBudget {
    /// `None` disables throttling.
    pub fn new(per_hour: Option<u32>) -> Self {
        let interval = per_hour.filter(|n| *n > 0).map(|n| Duration::from_secs_f64(3600.0 / n as f64));
        Self { interval, next: Mutex::new(None) }
    }

    /// Reserves the next slot and returns how long to wait for it.
    pub fn reserve(&self) -> Duration {
        let Some(interval) = self.interval else { return Duration::ZERO };
        let now = Instant::now();
        let mut next = self.next.lock().expect("budget lock");
        let slot = next.map_or(now, |n| n.max(now));
        *next = Some(slot + interval);
        slot - now
    }
}

/// Counting semaphore limiting in-flight requests.
pub struct ConcurrencyCap {
    limit: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    cap: &'a ConcurrencyCap,
}

impl ConcurrencyCap {
    pub fn new(limit: usize) -> Self {
        Self { limit: limit.max(1), in_use: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_use.lock().expect("cap lock");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("cap lock");
        }
        *n += 1;
        Permit { cap: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.cap.in_use.lock().expect("cap lock") -= 1;
        self.cap.freed.notify_one();
    }
}
