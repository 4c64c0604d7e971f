//! Protocol library for secure cooperative perception among connected
//! vehicles and roadside sensors.
//!
//! The pipeline has three stages, run once per sensing round:
//!
//! 1. [`auth`] — three-party provisioning (manufacturer + government),
//!    periodically refreshed round signatures, RSU-issued ephemeral tokens,
//!    and peer-to-peer verification with replay protection.
//! 2. [`consensus`] — a single-shot, semi-synchronous Byzantine-tolerant
//!    exchange that fixes *which report each participant sent* this round,
//!    driven over a simulated lossy network.
//! 3. [`trust`] — post-consensus scoring: existence voting, deviation
//!    scores normalized by each sensor's advertised accuracy, missed
//!    detection penalties, and a revolving-buffer trust ledger that feeds
//!    back into fusion weights.
//!
//! [`estimation`] holds the numerical core (EKF prediction, probabilistic
//! association, trust-weighted UKF updates) and [`world`] provides the
//! synthetic ground truth, sensor models, and the fault injector used by
//! the simulation harness.
//!
//! Everything is deterministic: all randomness flows from named
//! [`rng`] streams derived from a single scenario seed, and every wire
//! structure has a canonical byte encoding.

pub mod auth;
pub mod consensus;
pub mod estimation;
pub mod geometry;
pub mod rng;
pub mod trust;
pub mod wire;
pub mod world;

pub use geometry::{Cov2, Vec2};
