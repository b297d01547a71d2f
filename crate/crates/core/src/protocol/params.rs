use serde::{Deserialize, Serialize};

use crate::model::{DEFAULT_K1, DEFAULT_K2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid protocol parameter {field}: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

/// Tunables of the collection protocol. Durations are milliseconds unless
/// the name says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    pub ndm_count: u32,
    pub ndm_interval_ms: f64,
    pub ndm_window_ms: f64,
    /// Margin after the own NDM window before the neighbour list is final.
    pub discovery_guard_ms: f64,
    /// A node that hears nothing for this long after boot gives up.
    pub discovery_giveup_ms: f64,
    pub admission_fraction: f64,
    pub rssi_threshold: f64,
    /// Add the RSSI tier offset to every edge weight.
    pub tiering: bool,
    pub k1: f64,
    pub k2: f64,
    pub max_retries: u32,
    pub ack_timeout_ms: f64,
    /// Per-level allowance a parent waits for its subtree.
    pub child_timeout_ms: f64,
    pub sleep_timeout_ms: f64,
    pub dc_timeout_ms: f64,
    pub quiet_timeout_ms: f64,
    pub flood_stagger_ms: f64,
    pub nbm_queue_bound: usize,
    pub failure_miss_threshold: u32,
    pub dci_s: f64,
    pub slots_per_round: u32,
    pub initial_slot_delay_ms: f64,
    pub payload_capacity: usize,
    pub sync_interval_ms: f64,
    pub trigger_delay_ms: f64,
    /// Sink waits this long after the last CDM acknowledgement before syncing.
    pub cdm_settle_ms: f64,
    /// Sink sets the trigger anyway this long after sync starts.
    pub sync_fallback_ms: f64,
    /// Sink waits this long after redistributing a repaired tree before SLEEP.
    pub rebuild_settle_ms: f64,
    pub backoff_min_ms: f64,
    pub backoff_max_ms: f64,
    pub sync_table_capacity: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            ndm_count: 60,
            ndm_interval_ms: 5_000.0,
            ndm_window_ms: 300_000.0,
            discovery_guard_ms: 15_000.0,
            discovery_giveup_ms: 900_000.0,
            admission_fraction: 0.75,
            rssi_threshold: -85.0,
            tiering: true,
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            max_retries: 10,
            ack_timeout_ms: 250.0,
            child_timeout_ms: 2_000.0,
            sleep_timeout_ms: 60_000.0,
            dc_timeout_ms: 120_000.0,
            quiet_timeout_ms: 30_000.0,
            flood_stagger_ms: 2_000.0,
            nbm_queue_bound: 32,
            failure_miss_threshold: 2,
            dci_s: 600.0,
            slots_per_round: 50,
            initial_slot_delay_ms: 500.0,
            payload_capacity: 8,
            sync_interval_ms: 30_000.0,
            trigger_delay_ms: 120_000.0,
            cdm_settle_ms: 5_000.0,
            sync_fallback_ms: 120_000.0,
            rebuild_settle_ms: 3_000.0,
            backoff_min_ms: 1.0,
            backoff_max_ms: 10.0,
            sync_table_capacity: crate::clock::DEFAULT_TABLE_CAPACITY,
        }
    }
}

fn err(field: &'static str, reason: impl Into<String>) -> ParamError {
    ParamError {
        field,
        reason: reason.into(),
    }
}

impl ProtocolParams {
    pub fn dci_us(&self) -> f64 {
        self.dci_s * 1e6
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive: [(&'static str, f64); 16] = [
            ("ndm_interval_ms", self.ndm_interval_ms),
            ("ndm_window_ms", self.ndm_window_ms),
            ("discovery_giveup_ms", self.discovery_giveup_ms),
            ("ack_timeout_ms", self.ack_timeout_ms),
            ("child_timeout_ms", self.child_timeout_ms),
            ("sleep_timeout_ms", self.sleep_timeout_ms),
            ("dc_timeout_ms", self.dc_timeout_ms),
            ("quiet_timeout_ms", self.quiet_timeout_ms),
            ("dci_s", self.dci_s),
            ("sync_interval_ms", self.sync_interval_ms),
            ("trigger_delay_ms", self.trigger_delay_ms),
            ("sync_fallback_ms", self.sync_fallback_ms),
            ("rebuild_settle_ms", self.rebuild_settle_ms),
            ("k1", self.k1),
            ("backoff_max_ms", self.backoff_max_ms),
            ("admission_fraction", self.admission_fraction),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err(name, format!("must be positive, got {v}")));
            }
        }
        let non_negative: [(&'static str, f64); 5] = [
            ("discovery_guard_ms", self.discovery_guard_ms),
            ("flood_stagger_ms", self.flood_stagger_ms),
            ("initial_slot_delay_ms", self.initial_slot_delay_ms),
            ("cdm_settle_ms", self.cdm_settle_ms),
            ("backoff_min_ms", self.backoff_min_ms),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(err(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.admission_fraction > 1.0 {
            return Err(err("admission_fraction", "must not exceed 1"));
        }
        if !(self.k2 < 0.0) {
            return Err(err("k2", "must be negative"));
        }
        if !(self.rssi_threshold < 0.0) {
            return Err(err("rssi_threshold", "must be negative"));
        }
        if self.backoff_min_ms > self.backoff_max_ms {
            return Err(err("backoff_min_ms", "exceeds backoff_max_ms"));
        }
        if self.ndm_count == 0 || self.ndm_count > u32::from(u16::MAX) {
            return Err(err("ndm_count", "must be in 1..=65535"));
        }
        if self.max_retries == 0 {
            return Err(err("max_retries", "must be positive"));
        }
        if self.failure_miss_threshold < 2 {
            return Err(err("failure_miss_threshold", "must be at least 2"));
        }
        if self.slots_per_round == 0 {
            return Err(err("slots_per_round", "must be positive"));
        }
        if self.payload_capacity == 0 {
            return Err(err("payload_capacity", "must be positive"));
        }
        if self.nbm_queue_bound == 0 {
            return Err(err("nbm_queue_bound", "must be positive"));
        }
        if self.sync_table_capacity == 0 {
            return Err(err("sync_table_capacity", "must be positive"));
        }
        if self.sleep_timeout_ms >= self.dci_s * 1000.0 {
            return Err(err("sleep_timeout_ms", "must be shorter than the collection interval"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ProtocolParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let p = ProtocolParams {
            failure_miss_threshold: 1,
            ..ProtocolParams::default()
        };
        assert_eq!(p.validate().unwrap_err().field, "failure_miss_threshold");
        let p = ProtocolParams {
            ack_timeout_ms: 0.0,
            ..ProtocolParams::default()
        };
        assert_eq!(p.validate().unwrap_err().field, "ack_timeout_ms");
        let p = ProtocolParams {
            dci_s: 30.0,
            ..ProtocolParams::default()
        };
        assert_eq!(p.validate().unwrap_err().field, "sleep_timeout_ms");
    }
}
