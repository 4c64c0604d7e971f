//! Constant-velocity prediction step.

use super::{EstimationConfig, EstimationError, TrackState};
use nalgebra::Matrix4;

/// Propagates a track forward by `dt` seconds under the constant-velocity
/// model, inflating the covariance with exactly-discretized
/// white-noise-acceleration process noise.
pub fn ekf_predict(
    track: &TrackState,
    dt: f64,
    cfg: &EstimationConfig,
) -> Result<TrackState, EstimationError> {
    if dt < 0.0 {
        return Err(EstimationError::NegativeDt(dt));
    }
    let f = transition(dt);
    let q = process_noise(dt, cfg.process_noise_density);
    let mut out = track.clone();
    out.mean = f * track.mean;
    out.cov = f * track.cov * f.transpose() + q;
    out.enforce_invariants(cfg.v_max);
    Ok(out)
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Exact discretization of continuous white-noise acceleration with
/// spectral density `q`: per-axis blocks [[dt^3/3, dt^2/2], [dt^2/2, dt]].
fn process_noise(dt: f64, q: f64) -> Matrix4<f64> {
    let dt2 = dt * dt;
    let dt3 = dt2 * dt;
    let mut m = Matrix4::zeros();
    for axis in 0..2 {
        let (p, v) = (axis, axis + 2);
        m[(p, p)] = q * dt3 / 3.0;
        m[(p, v)] = q * dt2 / 2.0;
        m[(v, p)] = q * dt2 / 2.0;
        m[(v, v)] = q * dt;
    }
    m
}
