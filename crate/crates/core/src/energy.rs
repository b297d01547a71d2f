//! Li-ion battery model.
//!
//! The open-circuit voltage is recovered from a loaded measurement through
//! the internal resistance, then mapped to state of charge with a
//! four-segment piecewise-linear curve. Drain is integrated from the
//! radio, sensing and sleep currents; a solar panel recharges during the
//! daylight window.

use serde::{Deserialize, Serialize};

/// Internal resistance of the cell, ohm.
pub const DEFAULT_R0: f64 = 0.15;
/// Rated capacity of the cell, mAh.
pub const DEFAULT_CAPACITY_MAH: f64 = 2200.0;
/// Load during a battery voltage measurement, A.
pub const MEASUREMENT_LOAD_A: f64 = 0.010;

const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("a SOC/OCV curve needs exactly 5 anchors (got {0})")]
    AnchorCount(usize),
    #[error("anchor voltages and charges must be strictly increasing")]
    NotIncreasing,
    #[error("curve must start at SOC 0 and end at SOC 1")]
    BadEndpoints,
    #[error("invalid battery parameters: {0}")]
    InvalidBattery(String),
    #[error("invalid current profile: {0}")]
    InvalidProfile(String),
}

/// Result of a SOC lookup; `clamped` marks voltages outside the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocLookup {
    pub soc: f64,
    pub clamped: bool,
}

/// Piecewise-linear SOC/OCV relation through five `(ocv, soc)` anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct SocOcvCurve {
    anchors: Vec<(f64, f64)>,
}

impl Default for SocOcvCurve {
    fn default() -> Self {
        Self {
            anchors: vec![(3.00, 0.00), (3.55, 0.10), (3.68, 0.35), (3.85, 0.75), (4.20, 1.00)],
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for SocOcvCurve {
    type Error = EnergyError;

    fn try_from(anchors: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(anchors)
    }
}

impl From<SocOcvCurve> for Vec<(f64, f64)> {
    fn from(c: SocOcvCurve) -> Self {
        c.anchors
    }
}

impl SocOcvCurve {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self, EnergyError> {
        if anchors.len() != 5 {
            return Err(EnergyError::AnchorCount(anchors.len()));
        }
        if anchors.iter().any(|&(v, s)| !v.is_finite() || !s.is_finite()) {
            return Err(EnergyError::NotIncreasing);
        }
        if !anchors.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1) {
            return Err(EnergyError::NotIncreasing);
        }
        if anchors[0].1 != 0.0 || anchors[4].1 != 1.0 {
            return Err(EnergyError::BadEndpoints);
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn soc_from_ocv(&self, ocv: f64) -> SocLookup {
        let (v_lo, _) = self.anchors[0];
        let (v_hi, _) = self.anchors[self.anchors.len() - 1];
        if !(ocv >= v_lo) {
            return SocLookup { soc: 0.0, clamped: true };
        }
        if ocv > v_hi {
            return SocLookup { soc: 1.0, clamped: true };
        }
        let soc = interpolate(&self.anchors, ocv, |a| a.0, |a| a.1);
        SocLookup { soc, clamped: false }
    }

    /// Inverse lookup; `soc` is clamped to [0, 1].
    pub fn ocv_from_soc(&self, soc: f64) -> f64 {
        let soc = soc.clamp(0.0, 1.0);
        interpolate(&self.anchors, soc, |a| a.1, |a| a.0)
    }
}

fn interpolate(
    anchors: &[(f64, f64)],
    x: f64,
    key: impl Fn(&(f64, f64)) -> f64,
    val: impl Fn(&(f64, f64)) -> f64,
) -> f64 {
    for w in anchors.windows(2) {
        let (x0, x1) = (key(&w[0]), key(&w[1]));
        if x <= x1 {
            let (y0, y1) = (val(&w[0]), val(&w[1]));
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    val(&anchors[anchors.len() - 1])
}

/// Open-circuit voltage from a loaded measurement.
pub fn ocv_from_loaded(v_measured: f64, i_load: f64, r0: f64) -> f64 {
    v_measured + i_load * r0
}

/// Currents drawn by a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentProfile {
    /// Radio transmitting, mA.
    pub radio_tx_ma: f64,
    /// Radio listening, mA.
    pub radio_rx_ma: f64,
    /// Whole node asleep, µA.
    pub sleep_ua: f64,
    /// Sensor burst current, mA.
    pub sense_ma: f64,
    /// Sensor burst duration per reading, ms.
    pub sense_ms: f64,
}

impl Default for CurrentProfile {
    fn default() -> Self {
        Self {
            radio_tx_ma: 17.4,
            radio_rx_ma: 18.8,
            sleep_ua: 6.0,
            sense_ma: 5.0,
            sense_ms: 200.0,
        }
    }
}

impl CurrentProfile {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let all = [self.radio_tx_ma, self.radio_rx_ma, self.sleep_ua, self.sense_ma, self.sense_ms];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(EnergyError::InvalidProfile("currents must be finite and non-negative".into()));
        }
        let hi = self.radio_tx_ma.max(self.radio_rx_ma);
        if hi > 0.0 && (self.radio_tx_ma - self.radio_rx_ma).abs() > 0.15 * hi {
            return Err(EnergyError::InvalidProfile(
                "transmit and receive currents must be within 15% of each other".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub rated_capacity: f64,
    pub remaining: f64,
    pub r0: f64,
}

impl BatteryState {
    pub fn new(rated_capacity: f64, initial_soc: f64, r0: f64) -> Result<Self, EnergyError> {
        if !(rated_capacity > 0.0 && rated_capacity.is_finite()) {
            return Err(EnergyError::InvalidBattery(format!("rated capacity {rated_capacity}")));
        }
        if !(0.0..=1.0).contains(&initial_soc) {
            return Err(EnergyError::InvalidBattery(format!("initial SOC {initial_soc}")));
        }
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(EnergyError::InvalidBattery(format!("internal resistance {r0}")));
        }
        Ok(Self {
            rated_capacity,
            remaining: rated_capacity * initial_soc,
            r0,
        })
    }

    pub fn full() -> Self {
        Self {
            rated_capacity: DEFAULT_CAPACITY_MAH,
            remaining: DEFAULT_CAPACITY_MAH,
            r0: DEFAULT_R0,
        }
    }

    pub fn soc(&self) -> f64 {
        self.remaining / self.rated_capacity
    }

    pub fn is_depleted(&self) -> bool {
        self.remaining <= 0.0
    }

    /// Integrates consumption over an interval and returns the mAh drawn.
    ///
    /// `radio_on_ms` is split between transmit and receive by `tx_fraction`.
    pub fn drain(
        &mut self,
        profile: &CurrentProfile,
        radio_on_ms: f64,
        tx_fraction: f64,
        sensed: u32,
        slept_ms: f64,
    ) -> f64 {
        let tx = tx_fraction.clamp(0.0, 1.0);
        let radio_ma_ms = radio_on_ms * (tx * profile.radio_tx_ma + (1.0 - tx) * profile.radio_rx_ma);
        let sense_ma_ms = f64::from(sensed) * profile.sense_ma * profile.sense_ms;
        let sleep_ma_ms = slept_ms * profile.sleep_ua * 1e-3;
        let used = (radio_ma_ms + sense_ma_ms + sleep_ma_ms) / MS_PER_HOUR;
        let before = self.remaining;
        self.remaining = (self.remaining - used).max(0.0);
        before - self.remaining
    }

    /// Adds `duration_ms` of charge at `rate_ma`, capped at the rated capacity.
    /// The caller supplies only the part of the interval inside daylight.
    pub fn charge(&mut self, rate_ma: f64, duration_ms: f64) -> f64 {
        let before = self.remaining;
        let added = rate_ma.max(0.0) * duration_ms.max(0.0) / MS_PER_HOUR;
        self.remaining = (self.remaining + added).min(self.rated_capacity);
        self.remaining - before
    }

    /// Terminal voltage under the measurement load, as a node reports it.
    pub fn reported_voltage(&self, curve: &SocOcvCurve) -> f64 {
        curve.ocv_from_soc(self.soc()) - MEASUREMENT_LOAD_A * self.r0
    }
}

/// Solar panel and the hours during which it charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolarParams {
    pub rate_ma: f64,
    /// Start of the daylight window, hours after midnight.
    pub start_hour: f64,
    /// End of the daylight window, hours after midnight.
    pub end_hour: f64,
}

impl Default for SolarParams {
    fn default() -> Self {
        Self {
            rate_ma: 120.0,
            start_hour: 6.0,
            end_hour: 18.0,
        }
    }
}

impl SolarParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(0.0..=24.0).contains(&self.start_hour)
            || !(0.0..=24.0).contains(&self.end_hour)
            || self.start_hour >= self.end_hour
        {
            return Err(EnergyError::InvalidBattery(format!(
                "daylight window {}..{} h",
                self.start_hour, self.end_hour
            )));
        }
        if !(self.rate_ma >= 0.0 && self.rate_ma.is_finite()) {
            return Err(EnergyError::InvalidBattery(format!("solar rate {}", self.rate_ma)));
        }
        Ok(())
    }

    pub fn is_daylight(&self, time_of_day_ms: f64) -> bool {
        let h = time_of_day_ms.rem_euclid(24.0 * MS_PER_HOUR) / MS_PER_HOUR;
        h >= self.start_hour && h < self.end_hour
    }

    /// Milliseconds of `[start, start + duration)` that fall inside daylight,
    /// with `start` measured from midnight of day zero.
    pub fn daylight_overlap_ms(&self, start_ms: f64, duration_ms: f64) -> f64 {
        if duration_ms <= 0.0 {
            return 0.0;
        }
        let day = 24.0 * MS_PER_HOUR;
        let end_ms = start_ms + duration_ms;
        let first_day = (start_ms / day).floor() as i64;
        let last_day = (end_ms / day).floor() as i64;
        let mut total = 0.0;
        for d in first_day..=last_day {
            let w0 = d as f64 * day + self.start_hour * MS_PER_HOUR;
            let w1 = d as f64 * day + self.end_hour * MS_PER_HOUR;
            let lo = start_ms.max(w0);
            let hi = end_ms.min(w1);
            if hi > lo {
                total += hi - lo;
            }
        }
        total
    }

    /// Charges `state` for the daylight part of an interval.
    pub fn solar_charge(&self, state: &mut BatteryState, start_ms: f64, duration_ms: f64) -> f64 {
        state.charge(self.rate_ma, self.daylight_overlap_ms(start_ms, duration_ms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HOUR: f64 = MS_PER_HOUR;

    #[test]
    fn loaded_to_open_circuit() {
        assert!((ocv_from_loaded(3.700, 0.100, 0.15) - 3.715).abs() < 1e-12);
        assert_eq!(ocv_from_loaded(3.700, 0.0, 0.15), 3.700);
        assert!((ocv_from_loaded(4.000, 0.100, 0.15) - 4.015).abs() < 1e-12);
    }

    #[test]
    fn anchors_and_midpoints() {
        let c = SocOcvCurve::default();
        for &(v, s) in c.anchors() {
            let l = c.soc_from_ocv(v);
            assert_eq!(l.soc, s);
            assert!(!l.clamped);
        }
        for w in c.anchors().windows(2) {
            let mid = (w[0].0 + w[1].0) / 2.0;
            assert!((c.soc_from_ocv(mid).soc - (w[0].1 + w[1].1) / 2.0).abs() < 1e-12);
        }
        assert_eq!(c.soc_from_ocv(2.5), SocLookup { soc: 0.0, clamped: true });
        assert_eq!(c.soc_from_ocv(4.5), SocLookup { soc: 1.0, clamped: true });
    }

    #[test]
    fn curve_validation() {
        assert_eq!(SocOcvCurve::new(vec![(3.0, 0.0)]), Err(EnergyError::AnchorCount(1)));
        let flat = vec![(3.0, 0.0), (3.5, 0.1), (3.5, 0.3), (3.9, 0.7), (4.2, 1.0)];
        assert_eq!(SocOcvCurve::new(flat), Err(EnergyError::NotIncreasing));
        let ends = vec![(3.0, 0.1), (3.5, 0.2), (3.6, 0.3), (3.9, 0.7), (4.2, 1.0)];
        assert_eq!(SocOcvCurve::new(ends), Err(EnergyError::BadEndpoints));
        let json = serde_json::to_string(&SocOcvCurve::default()).unwrap();
        let back: SocOcvCurve = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SocOcvCurve::default());
    }

    #[test]
    fn drain_examples() {
        let p = CurrentProfile::default();
        let mut b = BatteryState::full();
        assert_eq!(b.drain(&p, 0.0, 0.0, 0, 0.0), 0.0);
        assert_eq!(b.remaining, 2200.0);
        let used = b.drain(&p, HOUR, 0.0, 0, 0.0);
        assert!((used - 18.8).abs() < 1e-9);
        assert!((b.remaining - 2181.2).abs() < 1e-9);

        let mut b = BatteryState::full();
        let used = b.drain(&p, 0.0, 0.0, 1, 0.0);
        assert!((used - 5.0 * 200.0 / HOUR).abs() < 1e-12);

        let mut almost = BatteryState::new(2200.0, 0.0001, 0.15).unwrap();
        almost.drain(&p, 10.0 * HOUR, 0.5, 0, 0.0);
        assert_eq!(almost.remaining, 0.0);
        assert!(almost.is_depleted());
    }

    #[test]
    fn missing_sleep_costs_energy() {
        // sibling A sleeps after a 2 s slot; B idles until the 60 s timeout
        let p = CurrentProfile::default();
        let mut a = BatteryState::full();
        let mut b = BatteryState::full();
        a.drain(&p, 2_000.0, 0.01, 1, 58_000.0);
        b.drain(&p, 60_000.0, 0.01, 1, 0.0);
        assert!(b.remaining < a.remaining);
    }

    #[test]
    fn solar_examples() {
        let s = SolarParams::default();
        let mut b = BatteryState::new(2200.0, 0.5, 0.15).unwrap();
        assert_eq!(s.solar_charge(&mut b, 0.0, HOUR), 0.0);
        assert_eq!(b.remaining, 1100.0);
        let added = s.solar_charge(&mut b, 12.0 * HOUR, HOUR);
        assert!((added - 120.0).abs() < 1e-9);
        let mut full = BatteryState::full();
        assert_eq!(s.solar_charge(&mut full, 12.0 * HOUR, HOUR), 0.0);
        assert_eq!(full.remaining, 2200.0);
        // 17:30 -> 06:30 next day overlaps 30 + 30 minutes
        assert!((s.daylight_overlap_ms(17.5 * HOUR, 13.0 * HOUR) - HOUR).abs() < 1e-6);
        assert!(s.is_daylight(12.0 * HOUR));
        assert!(!s.is_daylight(18.5 * HOUR));
    }

    #[test]
    fn reported_voltage_inverts_through_ocv() {
        let c = SocOcvCurve::default();
        let b = BatteryState::new(2200.0, 0.6, DEFAULT_R0).unwrap();
        let v = b.reported_voltage(&c);
        let soc = c.soc_from_ocv(ocv_from_loaded(v, MEASUREMENT_LOAD_A, DEFAULT_R0)).soc;
        assert!((soc - 0.6).abs() < 1e-12);
        assert!(CurrentProfile::default().validate().is_ok());
        let lopsided = CurrentProfile {
            radio_tx_ma: 30.0,
            ..CurrentProfile::default()
        };
        assert!(lopsided.validate().is_err());
    }

    proptest! {
        #[test]
        fn soc_ocv_round_trip(v in 3.0001f64..4.1999) {
            let c = SocOcvCurve::default();
            let back = c.ocv_from_soc(c.soc_from_ocv(v).soc);
            prop_assert!((back - v).abs() < 1e-3);
        }

        #[test]
        fn no_gain_at_night(start_h in 18.0f64..30.0, dur_h in 0.0f64..12.0) {
            // every interval inside [18:00, 06:00) next day
            let s = SolarParams::default();
            let end_h = (start_h + dur_h).min(30.0);
            let mut b = BatteryState::new(2200.0, 0.5, 0.15).unwrap();
            let before = b.remaining;
            s.solar_charge(&mut b, start_h * HOUR, (end_h - start_h) * HOUR);
            b.drain(&CurrentProfile::default(), 1000.0, 0.1, 1, 1000.0);
            prop_assert!(b.remaining <= before);
        }

        #[test]
        fn remaining_stays_in_bounds(
            soc in 0.0f64..1.0,
            on in 0.0f64..1e8,
            charge in 0.0f64..1e8,
        ) {
            let mut b = BatteryState::new(2200.0, soc, 0.15).unwrap();
            b.drain(&CurrentProfile::default(), on, 0.2, 3, on);
            prop_assert!(b.remaining >= 0.0);
            b.charge(120.0, charge);
            prop_assert!(b.remaining <= b.rated_capacity);
        }
    }
}
