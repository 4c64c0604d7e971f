//! Wire messages exchanged during a consensus round.
//!
//! Sensing messages are kept as raw canonical bytes once signed:
//! aggregates relay and vote on those exact bytes, so agreement is byte
//! agreement and immune to re-encoding drift.

use super::ParticipantId;
use crate::auth::{AuthMeta, KeyPair};
use crate::estimation::Observation;
use crate::geometry::{Cov2, Vec2};
use crate::wire::{Reader, WireError, Writer};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const SENSING_VERSION: u8 = 1;
pub const AGGREGATE_VERSION: u8 = 1;

/// SHA-256 of a canonical message encoding; the unit of agreement.
pub fn canonical_hash(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

/// Self-reported pose broadcast alongside observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedPose {
    pub position: Vec2,
    pub heading_rad: f64,
    pub loc_cov: Cov2,
}

impl ReportedPose {
    fn encode_into(&self, w: &mut Writer) {
        w.put_f64(self.position.x);
        w.put_f64(self.position.y);
        w.put_f64(self.heading_rad);
        w.put_f64(self.loc_cov.xx());
        w.put_f64(self.loc_cov.xy());
        w.put_f64(self.loc_cov.yy());
    }

    fn decode_from(r: &mut Reader) -> Result<Self, WireError> {
        let x = r.take_f64()?;
        let y = r.take_f64()?;
        let heading_rad = r.take_f64()?;
        let xx = r.take_f64()?;
        let xy = r.take_f64()?;
        let yy = r.take_f64()?;
        Ok(ReportedPose {
            position: Vec2::new(x, y),
            heading_rad,
            loc_cov: Cov2::new(xx, xy, yy).map_err(|_| WireError::Invalid("pose covariance"))?,
        })
    }
}

/// One participant's signed per-round report.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMessage {
    pub sender: ParticipantId,
    pub round: u64,
    pub observations: Vec<Observation>,
    pub pose: ReportedPose,
    pub auth: AuthMeta,
    pub signature: [u8; 64],
}

impl SensingMessage {
    pub fn new_signed(
        sender: ParticipantId,
        round: u64,
        observations: Vec<Observation>,
        pose: ReportedPose,
        auth: AuthMeta,
        keypair: &KeyPair,
    ) -> Self {
        let mut msg = SensingMessage {
            sender,
            round,
            observations,
            pose,
            auth,
            signature: [0; 64],
        };
        msg.signature = keypair.sign(&msg.body_bytes());
        msg
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(SENSING_VERSION);
        w.put_str(self.sender.as_str());
        w.put_u64(self.round);
        w.put_u32(self.observations.len() as u32);
        for obs in &self.observations {
            obs.encode_into(&mut w);
        }
        self.pose.encode_into(&mut w);
        self.auth.encode_into(&mut w);
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = self.body_bytes();
        bytes.extend_from_slice(&self.signature);
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < 64 {
            return Err(WireError::Truncated {
                wanted: 64,
                remaining: bytes.len(),
            });
        }
        let (body, sig) = bytes.split_at(bytes.len() - 64);
        let mut r = Reader::new(body);
        r.expect_version(SENSING_VERSION)?;
        let sender = ParticipantId(r.take_str()?);
        let round = r.take_u64()?;
        let count = r.take_u32()?;
        let mut observations = Vec::with_capacity(count.min(4096) as usize);
        for _ in 0..count {
            observations.push(Observation::decode_from(&mut r)?);
        }
        let pose = ReportedPose::decode_from(&mut r)?;
        let auth = AuthMeta::decode_from(&mut r)?;
        r.finish()?;
        Ok(SensingMessage {
            sender,
            round,
            observations,
            pose,
            auth,
            signature: sig.try_into().unwrap(),
        })
    }

    pub fn verify_signature(&self) -> bool {
        self.auth
            .public_key
            .verify_signature(&self.body_bytes(), &self.signature)
    }
}

/// The set of authenticated sensing messages one participant accumulated,
/// re-broadcast for the decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMessage {
    pub sender: ParticipantId,
    pub round: u64,
    /// Sender id -> exact sensing message bytes.
    pub accumulated: BTreeMap<ParticipantId, Vec<u8>>,
    pub signature: [u8; 64],
}

impl AggregateMessage {
    pub fn new_signed(
        sender: ParticipantId,
        round: u64,
        accumulated: BTreeMap<ParticipantId, Vec<u8>>,
        keypair: &KeyPair,
    ) -> Self {
        let mut msg = AggregateMessage {
            sender,
            round,
            accumulated,
            signature: [0; 64],
        };
        msg.signature = keypair.sign(&msg.body_bytes());
        msg
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(AGGREGATE_VERSION);
        w.put_str(self.sender.as_str());
        w.put_u64(self.round);
        w.put_u32(self.accumulated.len() as u32);
        for (id, bytes) in &self.accumulated {
            w.put_str(id.as_str());
            w.put_bytes(bytes);
        }
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = self.body_bytes();
        bytes.extend_from_slice(&self.signature);
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < 64 {
            return Err(WireError::Truncated {
                wanted: 64,
                remaining: bytes.len(),
            });
        }
        let (body, sig) = bytes.split_at(bytes.len() - 64);
        let mut r = Reader::new(body);
        r.expect_version(AGGREGATE_VERSION)?;
        let sender = ParticipantId(r.take_str()?);
        let round = r.take_u64()?;
        let count = r.take_u32()?;
        let mut accumulated = BTreeMap::new();
        for _ in 0..count {
            let id = ParticipantId(r.take_str()?);
            let bytes = r.take_bytes()?.to_vec();
            accumulated.insert(id, bytes);
        }
        r.finish()?;
        Ok(AggregateMessage {
            sender,
            round,
            accumulated,
            signature: sig.try_into().unwrap(),
        })
    }

    pub fn verify_signature(&self, key: &crate::auth::PublicKey) -> bool {
        key.verify_signature(&self.body_bytes(), &self.signature)
    }
}

/// Outcome for one sender slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecision {
    /// Canonical sensing bytes, or `None` when the slot decided as
    /// "no report this round".
    pub value: Option<Vec<u8>>,
    pub contested: bool,
    /// Aggregates that voted for the decided value.
    pub support: u32,
}

/// The per-round decision a participant reaches.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundDecision {
    pub round: u64,
    pub decided: BTreeMap<ParticipantId, SlotDecision>,
    /// True when any slot needed the tie-break.
    pub contested: bool,
    /// Aggregates that fed the decision.
    pub aggregate_count: u32,
}

impl RoundDecision {
    /// Hash of the decided value set (slot values only), for agreement
    /// comparison across nodes.
    pub fn decided_set_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (id, slot) in &self.decided {
            h.update((id.as_str().len() as u64).to_le_bytes());
            h.update(id.as_str().as_bytes());
            match &slot.value {
                Some(bytes) => {
                    h.update([1u8]);
                    h.update((bytes.len() as u64).to_le_bytes());
                    h.update(bytes);
                }
                None => h.update([0u8]),
            }
        }
        h.finalize().into()
    }
}
