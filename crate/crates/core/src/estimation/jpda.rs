//! Gated probabilistic association of one scan of observations to tracks.
//!
//! Weights are soft: for each track the observation weights plus a miss
//! hypothesis sum to one. Likelihoods are computed over all pairs first
//! and pairs outside the chi-square gate then forfeit their mass to the
//! miss hypothesis, so tightening the gate can only zero a weight, never
//! raise it.

use super::{EstimationConfig, Observation, TrackState};
use std::f64::consts::TAU;

/// Soft assignment between one scan and the current track set.
#[derive(Debug, Clone, Default)]
pub struct AssociationResult {
    /// weights[track][observation] in [0, 1].
    pub weights: Vec<Vec<f64>>,
    /// Per-track probability that none of this scan's observations
    /// originated from the track.
    pub miss: Vec<f64>,
}

impl AssociationResult {
    /// Index of the track this observation most strongly matches, if any
    /// gated pair exists.
    pub fn best_track_for(&self, obs_idx: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (ti, row) in self.weights.iter().enumerate() {
            let w = row[obs_idx];
            if w > 0.0 && best.map_or(true, |(_, bw)| w > bw) {
                best = Some((ti, w));
            }
        }
        best.map(|(ti, _)| ti)
    }
}

/// Associates `observations` (one scan from a single platform) to
/// `tracks`, gating on Mahalanobis distance.
pub fn jpda_associate(
    tracks: &[TrackState],
    observations: &[Observation],
    cfg: &EstimationConfig,
) -> AssociationResult {
    let n_obs = observations.len();
    let mut result = AssociationResult {
        weights: vec![vec![0.0; n_obs]; tracks.len()],
        miss: vec![1.0; tracks.len()],
    };
    if tracks.is_empty() {
        return result;
    }

    let miss_raw = (cfg.clutter_density * (1.0 - cfg.detection_prob)).max(1e-12);
    for (ti, track) in tracks.iter().enumerate() {
        let p_pos = track.position_cov();
        let mut raw = vec![0.0; n_obs];
        let mut gated = vec![false; n_obs];
        for (oi, obs) in observations.iter().enumerate() {
            // object extent widens the gate alongside both uncertainties
            let extent = crate::geometry::Cov2::isotropic(0.5 * obs.radius);
            let s = p_pos.add(&obs.covariance).add(&extent);
            let nu = obs.position - track.position();
            let d2 = s.mahalanobis_sq(nu);
            let det = s.det().max(1e-300);
            raw[oi] = cfg.detection_prob * (-0.5 * d2).exp() / (TAU * det.sqrt());
            gated[oi] = d2 <= cfg.gate_threshold;
        }
        let total: f64 = miss_raw + raw.iter().sum::<f64>();
        let mut miss = miss_raw / total;
        for oi in 0..n_obs {
            let w = raw[oi] / total;
            if gated[oi] {
                result.weights[ti][oi] = w;
            } else {
                miss += w;
            }
        }
        result.miss[ti] = miss;
    }
    result
}
