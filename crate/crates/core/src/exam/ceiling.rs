use serde::{Deserialize, Serialize};

/// Stops a sub-test after `k` consecutive zero scores. `k = 0` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeilingTracker {
    pub k: u32,
    pub consecutive_errors: u32,
    pub stopped: bool,
}

impl CeilingTracker {
    pub fn new(k: u32) -> Self {
        CeilingTracker { k, consecutive_errors: 0, stopped: false }
    }

    /// Record a score; returns true once the ceiling is reached.
    pub fn record(&mut self, h: u8) -> bool {
        assert!(!self.stopped, "score recorded after the ceiling");
        if h == 0 {
            self.consecutive_errors += 1;
        } else {
            self.consecutive_errors = 0;
        }
        self.stopped = self.k > 0 && self.consecutive_errors >= self.k;
        self.stopped
    }

    /// One more error would stop the test.
    pub fn at_warning(&self) -> bool {
        self.k > 0 && !self.stopped && self.consecutive_errors + 1 == self.k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_on_fourth_zero() {
        let mut t = CeilingTracker::new(4);
        let stops: Vec<bool> = [1, 0, 0, 0].iter().map(|&h| t.record(h)).collect();
        assert_eq!(stops, vec![false; 4]);
        assert!(t.at_warning());
        assert!(t.record(0));
    }

    #[test]
    fn disabled_never_stops() {
        let mut t = CeilingTracker::new(0);
        assert!((0..50).all(|_| !t.record(0)));
    }
}
