//! Per-participant round state machine: collect sensing, exchange
//! aggregates, decide.

use super::messages::{AggregateMessage, RoundDecision, SensingMessage, SlotDecision};
use super::{canonical_hash, meets_threshold, ParticipantId};
use crate::auth::{AuthMeta, PublicKey, RejectReason};
use std::collections::{BTreeMap, BTreeSet};

/// Why an incoming message was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Malformed,
    WrongRound,
    /// Payload sender does not match the transport-level sender.
    SenderMismatch,
    UnknownSender,
    Duplicate,
    BadSignature,
    AuthRejected(RejectReason),
    /// Aggregate from a sender whose key was never authenticated.
    NoKey,
}

/// Hook into the auth layer: how this participant judges peer metadata.
pub trait PeerVerifier {
    /// Full check for a direct broadcast, recording the nonce on accept.
    fn verify_broadcast(&mut self, meta: &AuthMeta, now: f64) -> Result<(), RejectReason>;

    /// Check for a message relayed inside an aggregate: same token
    /// relation, but nonces are exempt because relaying is the point.
    fn verify_relayed(&self, meta: &AuthMeta, now: f64) -> Result<(), RejectReason>;
}

/// One participant's view of one consensus round.
#[derive(Debug)]
pub struct RoundEngine {
    pub me: ParticipantId,
    pub round: u64,
    pub roster: BTreeSet<ParticipantId>,
    sensing: BTreeMap<ParticipantId, Vec<u8>>,
    aggregates: BTreeMap<ParticipantId, AggregateMessage>,
    key_cache: BTreeMap<ParticipantId, PublicKey>,
    pub sensing_complete_at: Option<f64>,
    pub aggregates_complete_at: Option<f64>,
    pub drops: Vec<(ParticipantId, DropReason)>,
}

impl RoundEngine {
    /// Starts a round with the registered, authenticated roster.
    pub fn start(me: ParticipantId, round: u64, roster: BTreeSet<ParticipantId>) -> Self {
        RoundEngine {
            me,
            round,
            roster,
            sensing: BTreeMap::new(),
            aggregates: BTreeMap::new(),
            key_cache: BTreeMap::new(),
            sensing_complete_at: None,
            aggregates_complete_at: None,
            drops: Vec::new(),
        }
    }

    /// Records this participant's own sensing message.
    pub fn record_own_sensing(&mut self, msg: &SensingMessage, now: f64) {
        self.key_cache
            .insert(msg.sender.clone(), msg.auth.public_key);
        self.sensing.insert(msg.sender.clone(), msg.to_bytes());
        self.check_sensing_complete(now);
    }

    /// Handles a sensing broadcast delivered by the network.
    pub fn on_sensing(
        &mut self,
        transport_from: &ParticipantId,
        bytes: &[u8],
        verifier: &mut dyn PeerVerifier,
        now: f64,
    ) -> Result<(), DropReason> {
        let msg = match SensingMessage::from_bytes(bytes) {
            Ok(m) => m,
            Err(_) => return self.drop(transport_from, DropReason::Malformed),
        };
        if msg.round != self.round {
            return self.drop(transport_from, DropReason::WrongRound);
        }
        if &msg.sender != transport_from {
            return self.drop(transport_from, DropReason::SenderMismatch);
        }
        if !self.roster.contains(&msg.sender) {
            return self.drop(transport_from, DropReason::UnknownSender);
        }
        if self.sensing.contains_key(&msg.sender) {
            return self.drop(transport_from, DropReason::Duplicate);
        }
        if !msg.verify_signature() {
            return self.drop(transport_from, DropReason::BadSignature);
        }
        if let Err(reason) = verifier.verify_broadcast(&msg.auth, now) {
            return self.drop(transport_from, DropReason::AuthRejected(reason));
        }
        self.key_cache
            .insert(msg.sender.clone(), msg.auth.public_key);
        self.sensing.insert(msg.sender.clone(), bytes.to_vec());
        self.check_sensing_complete(now);
        Ok(())
    }

    fn drop(&mut self, from: &ParticipantId, reason: DropReason) -> Result<(), DropReason> {
        self.drops.push((from.clone(), reason));
        Err(reason)
    }

    fn check_sensing_complete(&mut self, now: f64) {
        if self.sensing_complete_at.is_none()
            && self.roster.iter().all(|id| self.sensing.contains_key(id))
        {
            self.sensing_complete_at = Some(now);
        }
    }

    /// True once a message from every registered participant arrived.
    pub fn sensing_complete(&self) -> bool {
        self.sensing_complete_at.is_some()
    }

    pub fn accepted_sensing(&self) -> &BTreeMap<ParticipantId, Vec<u8>> {
        &self.sensing
    }

    /// Builds this participant's aggregate from everything accepted so far.
    pub fn build_aggregate(&self, keypair: &crate::auth::KeyPair) -> AggregateMessage {
        AggregateMessage::new_signed(self.me.clone(), self.round, self.sensing.clone(), keypair)
    }

    /// Records this participant's own aggregate.
    pub fn record_own_aggregate(&mut self, agg: AggregateMessage, now: f64) {
        self.aggregates.insert(agg.sender.clone(), agg);
        self.check_aggregates_complete(now);
    }

    /// Handles an aggregate broadcast. Inner entries that fail to verify
    /// are stripped; the aggregate itself is kept.
    pub fn on_aggregate(
        &mut self,
        transport_from: &ParticipantId,
        bytes: &[u8],
        verifier: &mut dyn PeerVerifier,
        now: f64,
    ) -> Result<(), DropReason> {
        let mut agg = match AggregateMessage::from_bytes(bytes) {
            Ok(a) => a,
            Err(_) => return self.drop(transport_from, DropReason::Malformed),
        };
        if agg.round != self.round {
            return self.drop(transport_from, DropReason::WrongRound);
        }
        if &agg.sender != transport_from {
            return self.drop(transport_from, DropReason::SenderMismatch);
        }
        if !self.roster.contains(&agg.sender) {
            return self.drop(transport_from, DropReason::UnknownSender);
        }
        if self.aggregates.contains_key(&agg.sender) {
            return self.drop(transport_from, DropReason::Duplicate);
        }
        let key = match self.key_cache.get(&agg.sender) {
            Some(key) => *key,
            // sensing lost in transit: bootstrap the key from the
            // sender's own fully-verified entry inside the aggregate
            None => match agg.accumulated.get(&agg.sender) {
                Some(own_bytes) => {
                    let Ok(own) = SensingMessage::from_bytes(own_bytes) else {
                        return self.drop(transport_from, DropReason::NoKey);
                    };
                    if own.sender != agg.sender
                        || own.round != self.round
                        || !own.verify_signature()
                        || verifier.verify_relayed(&own.auth, now).is_err()
                    {
                        return self.drop(transport_from, DropReason::NoKey);
                    }
                    own.auth.public_key
                }
                None => return self.drop(transport_from, DropReason::NoKey),
            },
        };
        if !agg.verify_signature(&key) {
            return self.drop(transport_from, DropReason::BadSignature);
        }
        self.key_cache.insert(agg.sender.clone(), key);
        agg.accumulated.retain(|claimed_sender, inner_bytes| {
            let Ok(inner) = SensingMessage::from_bytes(inner_bytes) else {
                return false;
            };
            inner.sender == *claimed_sender
                && inner.round == self.round
                && self.roster.contains(&inner.sender)
                && inner.verify_signature()
                && verifier.verify_relayed(&inner.auth, now).is_ok()
        });
        self.aggregates.insert(agg.sender.clone(), agg);
        self.check_aggregates_complete(now);
        Ok(())
    }

    fn check_aggregates_complete(&mut self, now: f64) {
        if self.aggregates_complete_at.is_none()
            && self.roster.iter().all(|id| self.aggregates.contains_key(id))
        {
            self.aggregates_complete_at = Some(now);
        }
    }

    pub fn aggregates_complete(&self) -> bool {
        self.aggregates_complete_at.is_some()
    }

    /// One-step decision over the collected aggregates.
    ///
    /// Every sender slot is decided independently. With zero aggregates
    /// the round degenerates to this participant's own sensing set, fully
    /// contested.
    pub fn decide(&self) -> RoundDecision {
        let n = self.roster.len();
        let mut decided = BTreeMap::new();
        let mut any_contested = false;

        if self.aggregates.is_empty() {
            for id in &self.roster {
                decided.insert(
                    id.clone(),
                    SlotDecision {
                        value: self.sensing.get(id).cloned(),
                        contested: true,
                        support: 0,
                    },
                );
            }
            return RoundDecision {
                round: self.round,
                decided,
                contested: true,
                aggregate_count: 0,
            };
        }

        for slot_sender in &self.roster {
            // tally candidate values for this slot across aggregates;
            // absence is a candidate too
            let mut votes: BTreeMap<Option<[u8; 32]>, (usize, Option<Vec<u8>>)> = BTreeMap::new();
            for agg in self.aggregates.values() {
                let value = agg.accumulated.get(slot_sender);
                let key = value.map(|b| canonical_hash(b));
                let entry = votes.entry(key).or_insert_with(|| (0, value.cloned()));
                entry.0 += 1;
            }
            let winner = votes
                .iter()
                .filter(|(_, (count, _))| meets_threshold(*count, n))
                .max_by_key(|(_, (count, _))| *count);

            let slot = if let Some((_, (count, value))) = winner {
                SlotDecision {
                    value: value.clone(),
                    contested: false,
                    support: *count as u32,
                }
            } else {
                any_contested = true;
                // deterministic tie-break: lexicographically least
                // canonical hash among received (present) candidates
                let choice = votes
                    .iter()
                    .filter_map(|(hash, (count, value))| {
                        hash.map(|h| (h, *count, value.clone()))
                    })
                    .min_by(|a, b| a.0.cmp(&b.0));
                match choice {
                    Some((_, count, value)) => SlotDecision {
                        value,
                        contested: true,
                        support: count as u32,
                    },
                    None => SlotDecision {
                        value: None,
                        contested: true,
                        support: votes.get(&None).map_or(0, |(c, _)| *c) as u32,
                    },
                }
            };
            decided.insert(slot_sender.clone(), slot);
        }

        RoundDecision {
            round: self.round,
            decided,
            contested: any_contested,
            aggregate_count: self.aggregates.len() as u32,
        }
    }
}

/// Verifier that accepts everything; for engine-level tests that are not
/// exercising the auth layer.
pub struct AcceptAll;

impl PeerVerifier for AcceptAll {
    fn verify_broadcast(&mut self, _meta: &AuthMeta, _now: f64) -> Result<(), RejectReason> {
        Ok(())
    }
    fn verify_relayed(&self, _meta: &AuthMeta, _now: f64) -> Result<(), RejectReason> {
        Ok(())
    }
}

/// Production verifier: a participant's token wallet plus its replay
/// guard.
pub struct WalletVerifier<'a> {
    pub own_id: [u8; 32],
    pub wallet: &'a crate::auth::TokenWallet,
    pub current_round: u64,
    pub nonces: &'a mut crate::auth::NonceStore,
    pub cfg: &'a crate::auth::AuthConfig,
}

impl PeerVerifier for WalletVerifier<'_> {
    fn verify_broadcast(&mut self, meta: &AuthMeta, now: f64) -> Result<(), RejectReason> {
        crate::auth::verify_peer(
            &self.own_id,
            self.wallet,
            self.current_round,
            meta,
            self.nonces,
            now,
            self.cfg,
        )
    }

    fn verify_relayed(&self, meta: &AuthMeta, _now: f64) -> Result<(), RejectReason> {
        crate::auth::verify_peer_relation(&self.own_id, self.wallet, self.current_round, meta)
    }
}
