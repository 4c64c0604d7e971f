//! Numerical tracking core: constant-velocity prediction, gated
//! probabilistic data association, and trust-weighted unscented updates.
//!
//! State is 4-dimensional (x, y, vx, vy). All operations are pure
//! functions over immutable inputs.

mod ekf;
mod jpda;
mod ukf;

pub use ekf::ekf_predict;
pub use jpda::{jpda_associate, AssociationResult};
pub use ukf::{position_nees, ukf_update, WeightedObservation};

use crate::geometry::{Cov2, Vec2};
use crate::wire::{Reader, WireError, Writer};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("negative time step {0}")]
    NegativeDt(f64),
    #[error("track covariance lost positive semi-definiteness")]
    CovarianceDegenerate,
}

/// Identifier for a fused object hypothesis.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct TrackId(pub u64);

/// Tuning knobs for the tracking pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationConfig {
    /// Spectral density of the white-noise-acceleration process model,
    /// m^2/s^3.
    pub process_noise_density: f64,
    /// Chi-square association gate on 2-DOF Mahalanobis distance.
    pub gate_threshold: f64,
    /// Probability a sensor detects an object inside its coverage.
    pub detection_prob: f64,
    /// Clutter spatial density feeding the miss hypothesis, 1/m^2.
    pub clutter_density: f64,
    /// Unscented transform spread parameters.
    pub ukf_alpha: f64,
    pub ukf_beta: f64,
    pub ukf_kappa: f64,
    /// Hard cap on track speed, m/s.
    pub v_max: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            process_noise_density: 0.5,
            gate_threshold: 9.21,
            detection_prob: 0.95,
            clutter_density: 0.01,
            ukf_alpha: 1e-3,
            ukf_beta: 2.0,
            ukf_kappa: 0.0,
            v_max: 15.0,
        }
    }
}

/// Where an observation came from, for trust attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationSource {
    /// Merged output of a platform's local sensors.
    Fused,
    Camera,
    Lidar,
    /// A participant's own reported pose, treated as an observation of
    /// its own vehicle.
    SelfReport,
}

impl ObservationSource {
    fn tag(self) -> u8 {
        match self {
            ObservationSource::Fused => 0,
            ObservationSource::Camera => 1,
            ObservationSource::Lidar => 2,
            ObservationSource::SelfReport => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, WireError> {
        Ok(match tag {
            0 => ObservationSource::Fused,
            1 => ObservationSource::Camera,
            2 => ObservationSource::Lidar,
            3 => ObservationSource::SelfReport,
            _ => return Err(WireError::Invalid("observation source")),
        })
    }
}

/// One sensed object report: position with the reporter's claimed accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub position: Vec2,
    pub covariance: Cov2,
    /// Object extent, a per-class fixed radius that widens the
    /// association gate.
    pub radius: f64,
    pub source: ObservationSource,
    /// Sensing round the observation belongs to.
    pub frame: u64,
}

impl Observation {
    pub fn encode_into(&self, w: &mut Writer) {
        w.put_f64(self.position.x);
        w.put_f64(self.position.y);
        w.put_f64(self.covariance.xx());
        w.put_f64(self.covariance.xy());
        w.put_f64(self.covariance.yy());
        w.put_f64(self.radius);
        w.put_u8(self.source.tag());
        w.put_u64(self.frame);
    }

    pub fn decode_from(r: &mut Reader) -> Result<Self, WireError> {
        let x = r.take_f64()?;
        let y = r.take_f64()?;
        let xx = r.take_f64()?;
        let xy = r.take_f64()?;
        let yy = r.take_f64()?;
        let radius = r.take_f64()?;
        let source = ObservationSource::from_tag(r.take_u8()?)?;
        let frame = r.take_u64()?;
        let covariance =
            Cov2::new(xx, xy, yy).map_err(|_| WireError::Invalid("observation covariance"))?;
        if !(x.is_finite() && y.is_finite() && radius.is_finite()) {
            return Err(WireError::Invalid("non-finite observation"));
        }
        Ok(Observation {
            position: Vec2::new(x, y),
            covariance,
            radius,
            source,
            frame,
        })
    }
}

/// Fused object hypothesis: mean, covariance, and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: TrackId,
    /// (x, y, vx, vy) in meters and meters/second.
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
    /// Simulation time of the last measurement update, seconds.
    pub last_update: f64,
}

impl TrackState {
    pub fn new(id: TrackId, mean: Vector4<f64>, cov: Matrix4<f64>, now: f64) -> Self {
        let mut t = TrackState {
            id,
            mean,
            cov,
            last_update: now,
        };
        t.enforce_invariants(f64::INFINITY);
        t
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.mean[2], self.mean[3])
    }

    /// Position marginal of the covariance.
    pub fn position_cov(&self) -> Cov2 {
        Cov2::new(self.cov[(0, 0)], 0.5 * (self.cov[(0, 1)] + self.cov[(1, 0)]), self.cov[(1, 1)])
            .unwrap_or_else(|_| Cov2::isotropic(1e6))
    }

    /// Symmetrizes the covariance, clamps tiny negative eigenvalues, and
    /// caps the speed at `v_max`.
    pub fn enforce_invariants(&mut self, v_max: f64) {
        self.cov = 0.5 * (self.cov + self.cov.transpose());
        let eig = nalgebra::SymmetricEigen::new(self.cov);
        if eig.eigenvalues.iter().any(|&l| l < 0.0) {
            let mut vals = eig.eigenvalues;
            for v in vals.iter_mut() {
                *v = v.max(0.0);
            }
            self.cov = eig.eigenvectors * Matrix4::from_diagonal(&vals) * eig.eigenvectors.transpose();
            self.cov = 0.5 * (self.cov + self.cov.transpose());
        }
        let speed = self.velocity().norm();
        if speed > v_max {
            let k = v_max / speed;
            self.mean[2] *= k;
            self.mean[3] *= k;
        }
    }
}
