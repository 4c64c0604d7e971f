//! Post-consensus trust scoring.
//!
//! Each round, every matched report is scored by how far it landed from
//! the fused estimate, normalized by the gap between the accuracy the
//! sensor *claimed* and the accuracy the fusion *achieved* (a deviation
//! score). Scores land in a per-participant revolving buffer whose mean
//! is the trust score; trust feeds back into fusion weights and
//! participants drifting past the cutoff are excluded outright.
//!
//! Byzantine tolerance comes from scoring only against the consensus
//! output, voting on track existence among coverage-eligible
//! participants, and a support gate: no track backed by fewer than three
//! matched sensors ever contributes a frame, so nobody attests to their
//! own accuracy in a vacuum.

mod scoring;

pub use scoring::{
    enforce_minimums, plain_round, score_round, FrameRecord, ParticipantReport, RoundInputs,
    RoundTrustOutcome, TrackSet,
};

use crate::consensus::ParticipantId;
use crate::estimation::TrackId;
use crate::geometry::{eig_sorted, Cov2, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Scoring thresholds and limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrustConfig {
    /// Trust score beyond which a participant is excluded from fusion.
    pub sds_max: f64,
    /// Revolving buffer capacity, frames.
    pub buffer_len: usize,
    /// Worst per-axis error a sensor may advertise, meters. Also fixes
    /// the missed-detection penalty at three times this value.
    pub min_sensor_accuracy: f64,
    /// Minimum advertised sensing range, meters.
    pub min_range_m: f64,
    /// Minimum advertised field of view, degrees.
    pub min_fov_deg: f64,
    /// Worst advertised localization error, meters.
    pub max_localization_error_m: f64,
    /// Minimum unoccluded fraction for coverage eligibility.
    pub visibility_threshold: f64,
    /// Floor on the deviation-score denominator.
    pub denominator_floor: f64,
    /// Frames required before the buffer mean replaces the neutral
    /// cold-start score of 1.
    pub cold_start_frames: usize,
    /// Single-link radius for clustering unclaimed observations into
    /// track births, meters.
    pub birth_cluster_radius_m: f64,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            sds_max: 3.0,
            buffer_len: 30,
            min_sensor_accuracy: 0.05,
            min_range_m: 3.0,
            min_fov_deg: 60.0,
            max_localization_error_m: 1.0,
            visibility_threshold: 0.5,
            denominator_floor: 1e-3,
            cold_start_frames: 5,
            birth_cluster_radius_m: 5.0,
        }
    }
}

impl TrustConfig {
    /// Missed-detection penalty frame value.
    pub fn rho(&self) -> f64 {
        3.0 * self.min_sensor_accuracy
    }
}

/// Who can currently see what: implemented over the world's sensor
/// geometry with reported poses.
pub trait Coverage {
    /// Whether `participant`'s sensors cover a target at `pos`.
    fn eligible(&self, participant: &ParticipantId, pos: Vec2, radius: f64) -> bool;
}

/// Per-participant revolving buffers of deviation-score frames.
#[derive(Debug, Clone, Default)]
pub struct TrustLedger {
    buffers: BTreeMap<ParticipantId, VecDeque<f64>>,
}

impl TrustLedger {
    pub fn new() -> Self {
        TrustLedger::default()
    }

    /// Appends a frame, evicting the oldest past capacity.
    pub fn push_frame(&mut self, id: &ParticipantId, value: f64, cfg: &TrustConfig) {
        let buf = self.buffers.entry(id.clone()).or_default();
        buf.push_back(value.max(0.0));
        while buf.len() > cfg.buffer_len {
            buf.pop_front();
        }
    }

    /// Buffer mean, or the neutral cold-start score while the buffer is
    /// still short.
    pub fn score(&self, id: &ParticipantId, cfg: &TrustConfig) -> f64 {
        match self.buffers.get(id) {
            Some(buf) if buf.len() >= cfg.cold_start_frames => {
                buf.iter().sum::<f64>() / buf.len() as f64
            }
            _ => 1.0,
        }
    }

    pub fn frames(&self, id: &ParticipantId) -> usize {
        self.buffers.get(id).map_or(0, |b| b.len())
    }

    pub fn participants(&self) -> impl Iterator<Item = &ParticipantId> {
        self.buffers.keys()
    }
}

/// Outcome of the per-track existence vote.
#[derive(Debug, Clone, Default)]
pub struct ExistenceTally {
    pub tracks: BTreeMap<TrackId, TrackTally>,
}

#[derive(Debug, Clone)]
pub struct TrackTally {
    pub eligible: BTreeSet<ParticipantId>,
    pub supporters: BTreeSet<ParticipantId>,
    pub exists: bool,
}

/// Strict-majority existence vote among eligible participants. Zero
/// eligible voters means insufficient coverage, not existence.
pub fn existence_vote(eligible: &BTreeSet<ParticipantId>, supporters: &BTreeSet<ParticipantId>) -> bool {
    let yes = supporters.intersection(eligible).count();
    2 * yes > eligible.len() && !eligible.is_empty()
}

/// Deviation score: distance between a reported position and the fused
/// estimate, normalized by the eigenvalue gap between the claimed and
/// fused covariances. The floor keeps the score finite when claimed and
/// fused accuracy coincide.
pub fn calc_sds(mu: Vec2, sigma: &Cov2, x_hat: Vec2, p: &Cov2, floor: f64) -> f64 {
    let numerator = (mu - x_hat).norm();
    let (s0, s1) = eig_sorted(sigma);
    let (p0, p1) = eig_sorted(p);
    let denominator = ((s0 - p0).powi(2) + (s1 - p1).powi(2)).sqrt().max(floor);
    numerator / denominator
}

/// Accuracy half of the support gate: the fused track must be at least
/// three times as accurate as the sensor's own claim, comparing
/// hypotenuses (sqrt of covariance trace).
pub fn accuracy_gate(track_cov: &Cov2, claimed_cov: &Cov2) -> bool {
    track_cov.hypotenuse() <= claimed_cov.hypotenuse() / 3.0
}

/// Full support gate: at least three matched sensors, and the fused
/// accuracy clears [`accuracy_gate`].
pub fn support_gate(matched_sensors: usize, track_cov: &Cov2, claimed_cov: &Cov2) -> bool {
    matched_sensors >= 3 && accuracy_gate(track_cov, claimed_cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(l0: f64, l1: f64) -> Cov2 {
        Cov2::new(l0, 0.0, l1).unwrap()
    }

    #[test]
    fn sds_zero_for_exact_agreement() {
        let sds = calc_sds(
            Vec2::new(3.0, -1.0),
            &diag(2.0, 1.0),
            Vec2::new(3.0, -1.0),
            &diag(1.0, 0.5),
            1e-3,
        );
        assert_eq!(sds, 0.0);
    }

    #[test]
    fn sds_matches_hand_computed_values() {
        // 1 / sqrt((2-1)^2 + (1-0.5)^2)
        let sds = calc_sds(
            Vec2::new(1.0, 0.0),
            &diag(2.0, 1.0),
            Vec2::ZERO,
            &diag(1.0, 0.5),
            1e-3,
        );
        assert_abs_diff_eq!(sds, 1.0 / 1.25f64.sqrt(), epsilon = 1e-9);

        // 3 / sqrt((4-1)^2 + (2-1)^2)
        let sds = calc_sds(
            Vec2::new(0.0, 3.0),
            &diag(4.0, 2.0),
            Vec2::ZERO,
            &diag(1.0, 1.0),
            1e-3,
        );
        assert_abs_diff_eq!(sds, 3.0 / 10f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn sds_floor_prevents_blowup() {
        let sds = calc_sds(
            Vec2::new(1.0, 0.0),
            &diag(1.0, 1.0),
            Vec2::ZERO,
            &diag(1.0, 1.0),
            1e-3,
        );
        assert_eq!(sds, 1000.0);
        assert!(sds.is_finite());
    }

    #[test]
    fn sds_monotone_in_distance() {
        let sigma = diag(2.0, 1.5);
        let p = diag(0.5, 0.25);
        let mut prev = -1.0;
        for k in 0..50 {
            let d = k as f64 * 0.2;
            let sds = calc_sds(Vec2::new(d, 0.0), &sigma, Vec2::ZERO, &p, 1e-3);
            assert!(sds >= prev);
            prev = sds;
        }
    }

    #[test]
    fn sds_translation_and_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let mu = Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let xh = Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let sigma = Cov2::from_axis_aligned(
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.1..0.5),
                rng.gen_range(-3.0..3.0),
            );
            let p = Cov2::from_axis_aligned(
                rng.gen_range(0.01..0.4),
                rng.gen_range(0.001..0.01),
                rng.gen_range(-3.0..3.0),
            );
            let base = calc_sds(mu, &sigma, xh, &p, 1e-3);

            let t = Vec2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let translated = calc_sds(mu + t, &sigma, xh + t, &p, 1e-3);
            assert_abs_diff_eq!(base, translated, epsilon = 1e-9);

            let angle = rng.gen_range(-3.0..3.0);
            let rotated = calc_sds(
                mu.rotated(angle),
                &sigma.rotated(angle),
                xh.rotated(angle),
                &p.rotated(angle),
                1e-3,
            );
            assert_abs_diff_eq!(base, rotated, epsilon = 1e-9);
        }
    }

    #[test]
    fn ledger_buffer_revolves_and_averages() {
        let cfg = TrustConfig {
            buffer_len: 4,
            cold_start_frames: 2,
            ..TrustConfig::default()
        };
        let mut ledger = TrustLedger::new();
        let id = ParticipantId::new("cav1");
        assert_eq!(ledger.score(&id, &cfg), 1.0);
        ledger.push_frame(&id, 2.0, &cfg);
        assert_eq!(ledger.score(&id, &cfg), 1.0, "cold start holds at one frame");
        ledger.push_frame(&id, 4.0, &cfg);
        assert_abs_diff_eq!(ledger.score(&id, &cfg), 3.0);
        for _ in 0..4 {
            ledger.push_frame(&id, 1.0, &cfg);
        }
        assert_eq!(ledger.frames(&id), 4);
        assert_abs_diff_eq!(ledger.score(&id, &cfg), 1.0);
    }

    #[test]
    fn existence_needs_strict_majority() {
        let ids: Vec<ParticipantId> = (0..5)
            .map(|i| ParticipantId::new(format!("p{i}")))
            .collect();
        let eligible: BTreeSet<_> = ids.iter().cloned().collect();
        let three: BTreeSet<_> = ids[..3].iter().cloned().collect();
        let two: BTreeSet<_> = ids[..2].iter().cloned().collect();
        assert!(existence_vote(&eligible, &three));
        assert!(!existence_vote(&eligible, &two));
        assert!(!existence_vote(&BTreeSet::new(), &three));

        let four: BTreeSet<_> = ids[..4].iter().cloned().collect();
        assert!(!existence_vote(&four, &BTreeSet::new()));
    }

    #[test]
    fn support_gate_rules() {
        let claimed = diag(0.81, 0.81); // hyp = sqrt(1.62) ~ 1.27
        let tight = diag(0.01, 0.01); // hyp = sqrt(0.02) ~ 0.14
        let loose = diag(0.16, 0.16); // hyp = sqrt(0.32) ~ 0.57
        assert!(!support_gate(2, &tight, &claimed), "two sensors never enough");
        assert!(support_gate(3, &tight, &claimed));
        assert!(
            !support_gate(4, &loose, &claimed),
            "fused accuracy must be 3x better"
        );
    }

    #[test]
    fn rho_tracks_min_accuracy() {
        let cfg = TrustConfig {
            min_sensor_accuracy: 0.05,
            ..TrustConfig::default()
        };
        assert_abs_diff_eq!(cfg.rho(), 0.15);
    }
}
