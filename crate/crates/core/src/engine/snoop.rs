//! Passive snoopers: radios placed in the field that log every frame they
//! can decode, so a run can be analysed the way a real deployment is.

use rand_chacha::ChaCha8Rng;

use super::rng::{stream, Purpose};
use super::scenario::{NodeSpec, Scenario};
use super::trace::TraceRecord;
use crate::link::{mean_rssi, rssi_sample, PairChannel};

pub struct Snoopers {
    rngs: Vec<ChaCha8Rng>,
}

impl Snoopers {
    pub fn new(sc: &Scenario) -> Self {
        let rngs = (0..sc.snoopers.len())
            .map(|i| stream(sc.seed, i as u16, Purpose::Snoop))
            .collect();
        Self { rngs }
    }

    /// Returns the record if at least one snooper decoded the transmission.
    /// Every snooper in range draws a sample so the streams stay aligned
    /// regardless of which one captures first.
    pub fn capture(&mut self, sc: &Scenario, sender: &NodeSpec, tx: &TraceRecord) -> Option<TraceRecord> {
        let mut heard = false;
        for (s, rng) in sc.snoopers.iter().zip(self.rngs.iter_mut()) {
            let d = ((s.x - sender.x).powi(2) + (s.y - sender.y).powi(2)).sqrt();
            if d > s.capture_radius {
                continue;
            }
            let ch = PairChannel::line_of_sight(d);
            if mean_rssi(&sc.link, &ch) < sc.link.sensitivity {
                continue;
            }
            if rssi_sample(&sc.link, &ch, rng) >= sc.link.sensitivity {
                heard = true;
            }
        }
        heard.then(|| tx.clone())
    }
}
