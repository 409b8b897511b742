//! Session time sources. Everything that paces itself goes through `Clock`
//! so tests can swap in simulated time.

use std::time::{Duration, Instant};

pub trait Clock {
    /// Seconds since the clock's origin.
    fn now_s(&self) -> f64;
    /// Blocks (or jumps) until `now_s() >= t_s`.
    fn sleep_until(&mut self, t_s: f64);
}

/// Simulated time: `sleep_until` jumps forward instantly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimClock {
    now_s: f64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&mut self, dt_s: f64) {
        assert!(dt_s >= 0.0, "time runs forward");
        self.now_s += dt_s;
    }
}

impl Clock for SimClock {
    fn now_s(&self) -> f64 {
        self.now_s
    }

    fn sleep_until(&mut self, t_s: f64) {
        if t_s > self.now_s {
            self.now_s = t_s;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_s(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn sleep_until(&mut self, t_s: f64) {
        let wait = t_s - self.now_s();
        if wait > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_clock_only_moves_forward() {
        let mut c = SimClock::new();
        c.sleep_until(2.5);
        c.sleep_until(1.0);
        assert_eq!(c.now_s(), 2.5);
        c.advance(0.5);
        assert_eq!(c.now_s(), 3.0);
    }

    #[test]
    fn wall_clock_sleeps() {
        let mut c = WallClock::new();
        c.sleep_until(0.02);
        assert!(c.now_s() >= 0.02);
    }
}
