//! Drifting hardware clocks and regression-based synchronization.
//!
//! A node's local time is an affine function of real time. Reference
//! points `(local, global)` collected from SYNC and SLEEP broadcasts are
//! fitted by least squares to map local time back onto the sink's notion
//! of global time.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Default number of reference points kept per node.
pub const DEFAULT_TABLE_CAPACITY: usize = 8;
/// Largest drift accepted for a hardware clock, ppm.
pub const MAX_DRIFT_PPM: f64 = 100.0;
/// Minimum number of points before the skew is fitted rather than assumed.
pub const MIN_REGRESSION_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClockError {
    #[error("reference point local time {got} µs does not follow {last} µs")]
    NonMonotone { last: f64, got: f64 },
    #[error("drift {0} ppm exceeds ±{MAX_DRIFT_PPM} ppm")]
    DriftOutOfRange(f64),
}

/// Free-running oscillator of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareClock {
    pub drift_ppm: f64,
    /// Local reading at real time zero, µs.
    pub boot_offset: f64,
}

impl HardwareClock {
    pub fn new(drift_ppm: f64, boot_offset: f64) -> Result<Self, ClockError> {
        if !(drift_ppm.abs() <= MAX_DRIFT_PPM) {
            return Err(ClockError::DriftOutOfRange(drift_ppm));
        }
        Ok(Self { drift_ppm, boot_offset })
    }

    pub fn ideal() -> Self {
        Self {
            drift_ppm: 0.0,
            boot_offset: 0.0,
        }
    }

    pub fn rate(&self) -> f64 {
        1.0 + self.drift_ppm * 1e-6
    }

    pub fn local_time(&self, t_real: f64) -> f64 {
        self.rate() * t_real + self.boot_offset
    }

    /// Real time at which the clock shows `local`.
    pub fn real_time(&self, local: f64) -> f64 {
        (local - self.boot_offset) / self.rate()
    }
}

/// Bounded history of reference points, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncTable {
    points: VecDeque<(f64, f64)>,
    capacity: usize,
}

impl Default for SyncTable {
    fn default() -> Self {
        Self::new(DEFAULT_TABLE_CAPACITY)
    }
}

impl SyncTable {
    pub fn new(capacity: usize) -> Self {
        Self {
            points: VecDeque::with_capacity(capacity.max(1)),
            capacity: capacity.max(1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied()
    }

    pub fn clear(&mut self) {
        self.points.clear();
    }

    /// Appends a point, evicting the oldest when full.
    pub fn add_reference_point(&mut self, local_ts: f64, global_ts: f64) -> Result<(), ClockError> {
        if let Some(&(last, _)) = self.points.back() {
            if !(local_ts > last) {
                return Err(ClockError::NonMonotone { last, got: local_ts });
            }
        }
        if self.points.len() == self.capacity {
            self.points.pop_front();
        }
        self.points.push_back((local_ts, global_ts));
        Ok(())
    }

    /// Fits `global = theta * local + phi`. Returns `None` on an empty table.
    pub fn estimate_skew(&self) -> Option<SkewEstimate> {
        let &(last_local, last_global) = self.points.back()?;
        let n = self.points.len();
        if n < MIN_REGRESSION_POINTS {
            return Some(SkewEstimate {
                theta_hat: 1.0,
                phi_hat: last_global - last_local,
                n_points: n,
            });
        }
        // centre on the first point to keep the sums well conditioned
        let (x0, y0) = self.points[0];
        let nf = n as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(x, y) in &self.points {
            sx += x - x0;
            sy += y - y0;
        }
        let (mx, my) = (sx / nf, sy / nf);
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for &(x, y) in &self.points {
            let dx = x - x0 - mx;
            let dy = y - y0 - my;
            sxx += dx * dx;
            sxy += dx * dy;
        }
        let theta = sxy / sxx;
        // line passes through the centroid (x0 + mx, y0 + my)
        let phi = (y0 + my) - theta * (x0 + mx);
        Some(SkewEstimate {
            theta_hat: theta,
            phi_hat: phi,
            n_points: n,
        })
    }
}

/// Fitted mapping from local to global time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewEstimate {
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub n_points: usize,
}

impl SkewEstimate {
    pub fn identity() -> Self {
        Self {
            theta_hat: 1.0,
            phi_hat: 0.0,
            n_points: 0,
        }
    }

    pub fn global_time_estimate(&self, local_ts: f64) -> f64 {
        self.theta_hat * local_ts + self.phi_hat
    }

    /// Local reading at which the estimate reaches `global_ts`; used to arm
    /// wake-up alarms.
    pub fn local_alarm(&self, global_ts: f64) -> f64 {
        (global_ts - self.phi_hat) / self.theta_hat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn local_time_examples() {
        assert_eq!(HardwareClock::ideal().local_time(1e6), 1e6);
        let fast = HardwareClock::new(40.0, 0.0).unwrap();
        assert!((fast.local_time(1e6) - 1_000_040.0).abs() < 1e-6);
        let slow = HardwareClock::new(-40.0, 500.0).unwrap();
        assert!((slow.local_time(1e6) - 1_000_460.0).abs() < 1e-6);
        assert!((slow.real_time(slow.local_time(123_456.0)) - 123_456.0).abs() < 1e-6);
        assert!(HardwareClock::new(150.0, 0.0).is_err());
    }

    #[test]
    fn table_insert_and_evict() {
        let mut t = SyncTable::new(8);
        t.add_reference_point(100.0, 105.0).unwrap();
        assert_eq!(t.len(), 1);
        for i in 1..9 {
            t.add_reference_point(100.0 + i as f64 * 10.0, 0.0).unwrap();
        }
        assert_eq!(t.len(), 8);
        assert_eq!(t.points().next().unwrap().0, 110.0);
        assert!(matches!(t.add_reference_point(50.0, 0.0), Err(ClockError::NonMonotone { .. })));
        assert!(t.add_reference_point(180.0, 0.0).is_err());
        assert_eq!(t.len(), 8);
    }

    #[test]
    fn noise_free_regression_is_exact() {
        let mut t = SyncTable::default();
        for i in 0..5 {
            let local = 3.0e9 + i as f64 * 30e6;
            t.add_reference_point(local, 1.00004 * local - 500.0).unwrap();
        }
        let est = t.estimate_skew().unwrap();
        assert!((est.theta_hat - 1.00004).abs() < 1e-9, "{est:?}");
        assert!((est.phi_hat + 500.0).abs() < 0.01, "{est:?}");
        let local = 3.5e9;
        assert!((est.global_time_estimate(local) - (1.00004 * local - 500.0)).abs() < 1e-3);
    }

    #[test]
    fn few_points_fall_back_to_offset() {
        let mut t = SyncTable::default();
        assert!(t.estimate_skew().is_none());
        t.add_reference_point(1000.0, 1500.0).unwrap();
        t.add_reference_point(2000.0, 2510.0).unwrap();
        let est = t.estimate_skew().unwrap();
        assert_eq!(est.theta_hat, 1.0);
        assert_eq!(est.phi_hat, 510.0);
        assert_eq!(est.n_points, 2);
    }

    #[test]
    fn identity_estimate() {
        let est = SkewEstimate::identity();
        assert_eq!(est.global_time_estimate(42.0), 42.0);
        assert_eq!(est.local_alarm(42.0), 42.0);
    }

    #[test]
    fn jittered_regression_within_two_ppm() {
        // 5 points over 150 s with uniform ±50 µs jitter on the global stamp
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let drift: f64 = rng.gen_range(-40.0..40.0);
            let theta = 1.0 + drift * 1e-6;
            let mut t = SyncTable::default();
            for i in 0..5 {
                let local = 1.0e9 + i as f64 * 37.5e6;
                let jitter: f64 = rng.gen_range(-50.0..50.0);
                t.add_reference_point(local, theta * local + 1234.0 + jitter).unwrap();
            }
            let est = t.estimate_skew().unwrap();
            worst = worst.max((est.theta_hat - theta).abs());
        }
        assert!(worst <= 2e-6, "worst skew error {worst}");
    }

    proptest! {
        #[test]
        fn noise_free_wakeup_error_below_one_microsecond(
            drift in -100.0f64..100.0,
            offset in -1e7f64..1e7,
            start in 0.0f64..1e10,
            spacing in 1e6f64..1e9,
            count in 3usize..9,
            horizon in 0.0f64..1.1e10,
        ) {
            let clock = HardwareClock::new(drift, offset).unwrap();
            let mut t = SyncTable::default();
            for i in 0..count {
                let real = start + i as f64 * spacing;
                t.add_reference_point(clock.local_time(real), real).unwrap();
            }
            let est = t.estimate_skew().unwrap();
            let target = start + horizon;
            let woke = clock.real_time(est.local_alarm(target));
            prop_assert!((woke - target).abs() < 1.0, "error {}", woke - target);
        }

        #[test]
        fn table_never_exceeds_capacity(cap in 1usize..12, inserts in 0usize..40) {
            let mut t = SyncTable::new(cap);
            for i in 0..inserts {
                t.add_reference_point(i as f64, i as f64).unwrap();
                prop_assert!(t.len() <= cap);
            }
            let locals: Vec<f64> = t.points().map(|p| p.0).collect();
            prop_assert!(locals.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
