use std::time::{Duration, Instant};

/// Paces a tick loop.
pub trait Clock {
    /// Seconds since the clock started.
    fn now(&self) -> f64;
    /// Block (or jump) until `t`. Returns how late the call was, in seconds.
    fn wait_until(&mut self, t: f64) -> f64;
}

/// Time advances only when asked. Default for tests and batch runs.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    t: f64,
}

impl Clock for VirtualClock {
    fn now(&self) -> f64 {
        self.t
    }

    fn wait_until(&mut self, t: f64) -> f64 {
        let late = (self.t - t).max(0.0);
        self.t = self.t.max(t);
        late
    }
}

/// Sleeps on the monotonic clock. Overruns are reported, never compensated.
#[derive(Debug, Clone)]
pub struct WallClock {
    origin: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn wait_until(&mut self, t: f64) -> f64 {
        let now = self.now();
        if t > now {
            std::thread::sleep(Duration::from_secs_f64(t - now));
            0.0
        } else {
            now - t
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_jumps() {
        let mut c = VirtualClock::default();
        assert_eq!(c.wait_until(0.5), 0.0);
        assert_eq!(c.now(), 0.5);
        assert_eq!(c.wait_until(0.25), 0.25);
        assert_eq!(c.now(), 0.5);
    }

    #[test]
    fn wall_clock_sleeps() {
        let mut c = WallClock::default();
        c.wait_until(0.01);
        assert!(c.now() >= 0.01);
    }
}
