//! Unscented measurement update with per-observation trust weighting.

use super::{EstimationConfig, EstimationError, Observation, TrackState};
use crate::geometry::Vec2;
use nalgebra::{Cholesky, Matrix2, Matrix4, Matrix4x2, Vector2, Vector4};

/// One observation entering a track update, with its association weight
/// and the contributor's current trust score.
#[derive(Debug, Clone)]
pub struct WeightedObservation {
    pub observation: Observation,
    /// Association weight from [`super::jpda_associate`], in [0, 1].
    pub weight: f64,
    /// Contributor trust score; scores above 1 inflate the effective
    /// measurement covariance proportionally.
    pub trust: f64,
}

/// Applies the weighted observations to a predicted track.
///
/// Observations are folded in sequentially. Each one enters with
/// effective covariance `cov * max(1, trust) / weight`, so a weight of
/// zero contributes nothing and a trust score at or below one leaves the
/// advertised accuracy untouched. With no effective observations the
/// predicted track is returned unchanged.
pub fn ukf_update(
    track: &TrackState,
    observations: &[WeightedObservation],
    cfg: &EstimationConfig,
) -> Result<TrackState, EstimationError> {
    let mut out = track.clone();
    let mut updated = false;
    for wo in observations {
        if wo.weight <= 0.0 {
            continue;
        }
        let inflation = wo.trust.max(1.0) / wo.weight;
        let r = wo.observation.covariance.scaled(inflation);
        let r = Matrix2::new(r.xx(), r.xy(), r.xy(), r.yy());
        let z = Vector2::new(wo.observation.position.x, wo.observation.position.y);
        unscented_position_update(&mut out, z, &r, cfg)?;
        updated = true;
    }
    if updated {
        out.enforce_invariants(cfg.v_max);
    }
    Ok(out)
}

/// Single unscented update against a position measurement.
fn unscented_position_update(
    track: &mut TrackState,
    z: Vector2<f64>,
    r: &Matrix2<f64>,
    cfg: &EstimationConfig,
) -> Result<(), EstimationError> {
    const N: usize = 4;
    let nf = N as f64;
    let lambda = cfg.ukf_alpha * cfg.ukf_alpha * (nf + cfg.ukf_kappa) - nf;
    let scale = nf + lambda;

    let sqrt_cov = cholesky_with_jitter(&track.cov)?;
    let spread = sqrt_cov * scale.sqrt();

    // 2N + 1 sigma points
    let mut points = [Vector4::zeros(); 2 * N + 1];
    points[0] = track.mean;
    for i in 0..N {
        let col = spread.column(i).into_owned();
        points[1 + i] = track.mean + col;
        points[1 + N + i] = track.mean - col;
    }

    let w_mean0 = lambda / scale;
    let w_cov0 = w_mean0 + (1.0 - cfg.ukf_alpha * cfg.ukf_alpha + cfg.ukf_beta);
    let w_rest = 0.5 / scale;

    // measurement function: position components
    let h = |x: &Vector4<f64>| Vector2::new(x[0], x[1]);

    let mut z_pred = h(&points[0]) * w_mean0;
    for p in points.iter().skip(1) {
        z_pred += h(p) * w_rest;
    }

    let mut s = *r;
    let mut cross = Matrix4x2::zeros();
    for (i, p) in points.iter().enumerate() {
        let wc = if i == 0 { w_cov0 } else { w_rest };
        let dz = h(p) - z_pred;
        let dx = p - track.mean;
        s += dz * dz.transpose() * wc;
        cross += dx * dz.transpose() * wc;
    }

    let s_inv = s
        .try_inverse()
        .ok_or(EstimationError::CovarianceDegenerate)?;
    let gain = cross * s_inv;
    track.mean += gain * (z - z_pred);
    track.cov -= gain * s * gain.transpose();
    track.cov = 0.5 * (track.cov + track.cov.transpose());
    Ok(())
}

fn cholesky_with_jitter(cov: &Matrix4<f64>) -> Result<Matrix4<f64>, EstimationError> {
    let mut jitter = 0.0;
    for _ in 0..6 {
        let candidate = if jitter == 0.0 {
            *cov
        } else {
            cov + Matrix4::identity() * jitter
        };
        if let Some(ch) = Cholesky::new(candidate) {
            return Ok(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 100.0 };
    }
    Err(EstimationError::CovarianceDegenerate)
}

/// Innovation statistics helper used by consistency tests: squared
/// Mahalanobis distance of the position error under the track's
/// position marginal.
pub fn position_nees(track: &TrackState, truth: Vec2) -> f64 {
    let err = track.position() - truth;
    track.position_cov().mahalanobis_sq(err)
}
