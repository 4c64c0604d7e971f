//! Seeded lossy-link simulation.
//!
//! Each ordered participant pair owns an independent random stream, so a
//! fault that changes what one participant sends can never perturb the
//! delivery pattern between two other participants.

use super::ParticipantId;
use crate::rng::RngFactory;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Loss and latency parameters shared by all links.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LinkModel {
    /// Probability each unicast delivery is dropped.
    pub drop_probability: f64,
    /// Fixed propagation delay, seconds.
    pub latency_base_s: f64,
    /// Uniform extra delay in [0, jitter], seconds.
    pub latency_jitter_s: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            drop_probability: 0.0,
            latency_base_s: 0.005,
            latency_jitter_s: 0.010,
        }
    }
}

/// One scheduled unicast delivery.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub at: f64,
    pub seq: u64,
    pub from: ParticipantId,
    pub to: ParticipantId,
    pub bytes: Vec<u8>,
}

/// Deterministic network: decides per-unicast drop and latency.
#[derive(Debug)]
pub struct SimNetwork {
    model: LinkModel,
    factory: RngFactory,
    streams: BTreeMap<(ParticipantId, ParticipantId), ChaCha8Rng>,
    seq: u64,
}

impl SimNetwork {
    pub fn new(factory: RngFactory, model: LinkModel) -> Self {
        SimNetwork {
            model,
            factory,
            streams: BTreeMap::new(),
            seq: 0,
        }
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    fn stream(&mut self, from: &ParticipantId, to: &ParticipantId) -> &mut ChaCha8Rng {
        let key = (from.clone(), to.clone());
        let factory = self.factory;
        self.streams
            .entry(key)
            .or_insert_with(|| factory.stream(&["net", from.as_str(), to.as_str()]))
    }

    /// Schedules a unicast send at `now`; `None` means the link dropped it.
    pub fn send(
        &mut self,
        now: f64,
        from: &ParticipantId,
        to: &ParticipantId,
        bytes: Vec<u8>,
    ) -> Option<Delivery> {
        let model = self.model.clone();
        let rng = self.stream(from, to);
        let dropped = rng.gen::<f64>() < model.drop_probability;
        let jitter = rng.gen::<f64>() * model.latency_jitter_s;
        if dropped {
            return None;
        }
        let seq = self.seq;
        self.seq += 1;
        Some(Delivery {
            at: now + model.latency_base_s + jitter,
            seq,
            from: from.clone(),
            to: to.clone(),
            bytes,
        })
    }

    /// Broadcast helper: unicast to every peer except the sender.
    pub fn broadcast(
        &mut self,
        now: f64,
        from: &ParticipantId,
        peers: &[ParticipantId],
        bytes: &[u8],
    ) -> Vec<Delivery> {
        let mut out = Vec::new();
        for to in peers {
            if to == from {
                continue;
            }
            if let Some(d) = self.send(now, from, to, bytes.to_vec()) {
                out.push(d);
            }
        }
        out
    }
}

/// Orders deliveries for a phase-stepped exchange: by time, then by
/// sequence number for a deterministic total order.
pub fn sort_deliveries(deliveries: &mut [Delivery]) {
    deliveries.sort_by(|a, b| {
        a.at.partial_cmp(&b.at)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.seq.cmp(&b.seq))
    });
}
