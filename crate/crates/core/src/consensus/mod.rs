//! Single-shot Byzantine-tolerant consensus on per-participant sensor
//! reports.
//!
//! Each round every participant broadcasts a signed sensing message, then
//! broadcasts the set of authenticated messages it received (the
//! aggregate). A slot per sender is then decided independently: a value
//! strictly above the one-step threshold wins outright; otherwise the
//! slot is marked contested and resolved by a deterministic tie-break so
//! the round always terminates. Agreement on contested values only needs
//! the honest nodes' candidate sets to coincide, which reliable
//! honest-to-honest aggregate delivery provides.

mod engine;
mod messages;
mod network;

pub use engine::{AcceptAll, DropReason, PeerVerifier, RoundEngine, WalletVerifier};
pub use messages::{
    canonical_hash, AggregateMessage, ReportedPose, RoundDecision, SensingMessage, SlotDecision,
    AGGREGATE_VERSION, SENSING_VERSION,
};
pub use network::{sort_deliveries, Delivery, LinkModel, SimNetwork};

use serde::{Deserialize, Serialize};

/// Stable participant identifier (configuration name).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParticipantId(pub String);

impl ParticipantId {
    pub fn new(s: impl Into<String>) -> Self {
        ParticipantId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Round cadence and exchange timeouts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusConfig {
    /// Seconds between round triggers.
    pub round_period_s: f64,
    /// Sensing exchange timeout, seconds.
    pub sensing_timeout_s: f64,
    /// Aggregate exchange timeout, seconds.
    pub aggregate_timeout_s: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            round_period_s: 1.0,
            sensing_timeout_s: 0.1,
            aggregate_timeout_s: 0.1,
        }
    }
}

/// Maximum tolerated Byzantine participants for a roster of `n`.
pub fn max_faults(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1) / 3
    }
}

/// One-step decision rule: a value with `count` matching aggregates out
/// of `n` registered participants wins iff count > (n + f_max) / 2.
pub fn meets_threshold(count: usize, n: usize) -> bool {
    2 * count > n + max_faults(n)
}
