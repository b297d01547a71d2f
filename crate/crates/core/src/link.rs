//! Parametric radio model: log-distance path loss with static per-pair
//! shadowing and per-packet noise, a threshold receiver, and the RSSI
//! quality tiers used when weighting edges.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Cost offset added to links in the medium tier.
pub const MEDIUM_TIER_OFFSET: f64 = 10_000.0;
/// Cost offset added to links in the low tier.
pub const LOW_TIER_OFFSET: f64 = 20_000.0;
/// Lower bound (inclusive) of the good tier, dBm.
pub const GOOD_TIER_FLOOR: f64 = -70.0;
/// Lower bound (inclusive) of the medium tier, dBm.
pub const MEDIUM_TIER_FLOOR: f64 = -80.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkError {
    #[error("average RSSI {rssi} dBm is below the admission threshold {threshold} dBm")]
    BelowThreshold { rssi: f64, threshold: f64 },
    #[error("invalid link parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModelParams {
    /// Transmit power, dBm.
    pub tx_power: f64,
    /// Path loss at the 1 m reference distance, dB.
    pub pl0: f64,
    pub path_loss_exponent: f64,
    /// Standard deviation of the static per-pair shadowing, dB.
    pub shadow_sigma: f64,
    /// Standard deviation of the per-packet noise, dB.
    pub noise_sigma: f64,
    /// Receiver sensitivity, dBm.
    pub sensitivity: f64,
    /// Neighbour admission threshold on the average RSSI, dBm.
    pub rssi_threshold: f64,
}

impl Default for LinkModelParams {
    fn default() -> Self {
        Self {
            tx_power: 0.0,
            pl0: 55.0,
            path_loss_exponent: 2.7,
            shadow_sigma: 3.0,
            noise_sigma: 1.0,
            sensitivity: -90.0,
            rssi_threshold: -85.0,
        }
    }
}

impl LinkModelParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let finite = [
            self.tx_power,
            self.pl0,
            self.path_loss_exponent,
            self.shadow_sigma,
            self.noise_sigma,
            self.sensitivity,
            self.rssi_threshold,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(LinkError::InvalidParams("all parameters must be finite".into()));
        }
        if !(self.sensitivity < self.rssi_threshold && self.rssi_threshold < 0.0) {
            return Err(LinkError::InvalidParams(format!(
                "need sensitivity < rssi_threshold < 0 (got {} / {})",
                self.sensitivity, self.rssi_threshold
            )));
        }
        if self.shadow_sigma < 0.0 || self.noise_sigma < 0.0 {
            return Err(LinkError::InvalidParams("sigmas must be non-negative".into()));
        }
        if self.path_loss_exponent <= 0.0 {
            return Err(LinkError::InvalidParams("path loss exponent must be positive".into()));
        }
        Ok(())
    }
}

/// Static properties of one transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairChannel {
    /// Separation in metres, > 0.
    pub distance: f64,
    /// Shadowing drawn once per pair per scenario, dB.
    pub shadow_offset: f64,
    /// Extra attenuation from obstacles, dB.
    pub obstacle_penalty: f64,
}

impl PairChannel {
    pub fn line_of_sight(distance: f64) -> Self {
        Self {
            distance,
            shadow_offset: 0.0,
            obstacle_penalty: 0.0,
        }
    }
}

/// Log-distance RSSI without the per-packet noise term.
pub fn mean_rssi(params: &LinkModelParams, channel: &PairChannel) -> f64 {
    params.tx_power
        - params.pl0
        - 10.0 * params.path_loss_exponent * channel.distance.log10()
        - channel.obstacle_penalty
        + channel.shadow_offset
}

/// Draws the RSSI of one packet. The rng is only advanced when the noise
/// term is non-zero.
pub fn rssi_sample<R: Rng + ?Sized>(params: &LinkModelParams, channel: &PairChannel, rng: &mut R) -> f64 {
    let mean = mean_rssi(params, channel);
    if params.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, params.noise_sigma).expect("validated sigma");
        mean + noise.sample(rng)
    } else {
        mean
    }
}

/// Draws a static shadowing offset for a pair.
pub fn draw_shadow<R: Rng + ?Sized>(params: &LinkModelParams, rng: &mut R) -> f64 {
    if params.shadow_sigma > 0.0 {
        Normal::new(0.0, params.shadow_sigma).expect("validated sigma").sample(rng)
    } else {
        0.0
    }
}

pub fn packet_delivered(rssi: f64, params: &LinkModelParams) -> bool {
    rssi >= params.sensitivity
}

/// Quality tier of an admitted link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkTier {
    Good,
    Medium,
    Low,
}

pub fn link_tier(avg_rssi: f64) -> LinkTier {
    if avg_rssi >= GOOD_TIER_FLOOR {
        LinkTier::Good
    } else if avg_rssi >= MEDIUM_TIER_FLOOR {
        LinkTier::Medium
    } else {
        LinkTier::Low
    }
}

/// Cost offset that orders links good < medium < low regardless of the
/// capacity/RSSI spread inside a tier.
pub fn tier_cost(avg_rssi: f64, rssi_threshold: f64) -> Result<f64, LinkError> {
    if !(avg_rssi >= rssi_threshold) {
        return Err(LinkError::BelowThreshold {
            rssi: avg_rssi,
            threshold: rssi_threshold,
        });
    }
    Ok(match link_tier(avg_rssi) {
        LinkTier::Good => 0.0,
        LinkTier::Medium => MEDIUM_TIER_OFFSET,
        LinkTier::Low => LOW_TIER_OFFSET,
    })
}
