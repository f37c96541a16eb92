use std::time::{Duration, Instant};

/// Time source driving the match loop.
pub trait Clock {
    /// Time since the clock was created.
    fn now(&self) -> Duration;
    /// Blocks until `now() >= t`.
    fn sleep_until(&mut self, t: Duration);
}

pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            start: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep_until(&mut self, t: Duration) {
        let now = self.now();
        if t > now {
            std::thread::sleep(t - now);
        }
    }
}

/// Virtual clock that jumps straight to every deadline.
#[derive(Clone, Debug, Default)]
pub struct MockClock {
    now: Duration,
    sleeps: u64,
}

impl MockClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&mut self, dt: Duration) {
        self.now += dt;
    }

    /// Number of `sleep_until` calls that had to wait.
    pub fn sleeps(&self) -> u64 {
        self.sleeps
    }
}

impl Clock for MockClock {
    fn now(&self) -> Duration {
        self.now
    }

    fn sleep_until(&mut self, t: Duration) {
        if t > self.now {
            self.now = t;
            self.sleeps += 1;
        }
    }
}
