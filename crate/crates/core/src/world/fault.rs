//! Fault and attack injection taxonomy.
//!
//! Fourteen scenarios cover sensor extrinsics (e1-e3), detection-level
//! tampering (e4-e6), mis-weighting (e7-e9), and communication faults and
//! attacks (e10-e14). Magnitude units depend on the scenario: degrees,
//! probabilities, percentages, or meters.

use super::WorldError;
use crate::consensus::ParticipantId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// e1: camera extrinsics skewed by N degrees.
    CameraShift,
    /// e2: lidar extrinsics skewed by N degrees.
    LidarShift,
    /// e3: camera and lidar both skewed by the same N degrees.
    CameraLidarShift,
    /// e4: each detection dropped with probability N.
    RandomDetectionLoss,
    /// e5: detections inside the intersection region dropped with
    /// probability N.
    TargetedRemoval,
    /// e6: phantom detections injected into the intersection region with
    /// probability N per round.
    PhantomInjection,
    /// e7: actual localization error scaled by (1 + N/100), advertised
    /// accuracy unchanged.
    LocalizationDegradation,
    /// e8: lidar covariance entering local fusion shrunk by N percent.
    LocalFusionMisweight,
    /// e9: the covariance this participant advertises to global fusion
    /// shrunk by N percent.
    GlobalFusionMisweight,
    /// e10: authentication challenge invalidated.
    InvalidChallenge,
    /// e11: participant broadcasts with an expired round token.
    ExpiredToken,
    /// e12: outgoing sensing packet dropped each round.
    PacketDrop,
    /// e13: participant replays a peer's prior-round broadcast.
    ReplayAttack,
    /// e14: self-reported pose offset by N meters.
    SpoofedPose,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 14] = [
        ErrorKind::CameraShift,
        ErrorKind::LidarShift,
        ErrorKind::CameraLidarShift,
        ErrorKind::RandomDetectionLoss,
        ErrorKind::TargetedRemoval,
        ErrorKind::PhantomInjection,
        ErrorKind::LocalizationDegradation,
        ErrorKind::LocalFusionMisweight,
        ErrorKind::GlobalFusionMisweight,
        ErrorKind::InvalidChallenge,
        ErrorKind::ExpiredToken,
        ErrorKind::PacketDrop,
        ErrorKind::ReplayAttack,
        ErrorKind::SpoofedPose,
    ];

    /// Short scenario code, `e1` through `e14`.
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::CameraShift => "e1",
            ErrorKind::LidarShift => "e2",
            ErrorKind::CameraLidarShift => "e3",
            ErrorKind::RandomDetectionLoss => "e4",
            ErrorKind::TargetedRemoval => "e5",
            ErrorKind::PhantomInjection => "e6",
            ErrorKind::LocalizationDegradation => "e7",
            ErrorKind::LocalFusionMisweight => "e8",
            ErrorKind::GlobalFusionMisweight => "e9",
            ErrorKind::InvalidChallenge => "e10",
            ErrorKind::ExpiredToken => "e11",
            ErrorKind::PacketDrop => "e12",
            ErrorKind::ReplayAttack => "e13",
            ErrorKind::SpoofedPose => "e14",
        }
    }

    pub fn from_code(code: &str) -> Result<Self, WorldError> {
        Self::ALL
            .into_iter()
            .find(|k| k.code() == code)
            .ok_or_else(|| WorldError::UnknownErrorKind(code.to_string()))
    }

    /// Whether the fault is detected through the auth/consensus channel
    /// rather than the trust ledger.
    pub fn is_communication_fault(self) -> bool {
        matches!(
            self,
            ErrorKind::InvalidChallenge
                | ErrorKind::ExpiredToken
                | ErrorKind::PacketDrop
                | ErrorKind::ReplayAttack
        )
    }

    /// Validates a magnitude against the scenario's legal domain.
    pub fn validate_magnitude(self, magnitude: f64) -> Result<(), WorldError> {
        let ok = match self {
            ErrorKind::CameraShift | ErrorKind::LidarShift | ErrorKind::CameraLidarShift => {
                magnitude.is_finite() && magnitude.abs() <= 180.0
            }
            ErrorKind::RandomDetectionLoss
            | ErrorKind::TargetedRemoval
            | ErrorKind::PhantomInjection => (0.0..=1.0).contains(&magnitude),
            ErrorKind::LocalizationDegradation => magnitude >= 0.0,
            ErrorKind::LocalFusionMisweight | ErrorKind::GlobalFusionMisweight => {
                (0.0..100.0).contains(&magnitude)
            }
            ErrorKind::InvalidChallenge
            | ErrorKind::ExpiredToken
            | ErrorKind::PacketDrop
            | ErrorKind::ReplayAttack => true,
            ErrorKind::SpoofedPose => magnitude.is_finite() && magnitude >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(WorldError::BadMagnitude {
                kind: self.code(),
                magnitude,
            })
        }
    }
}

/// One injected fault: what, on whom, how hard, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: ErrorKind,
    pub target: ParticipantId,
    pub magnitude: f64,
    /// Injection time; drawn uniformly from the scenario's injection
    /// window when absent.
    pub inject_at_s: Option<f64>,
}

impl FaultSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        self.kind.validate_magnitude(self.magnitude)
    }
}

/// A fault pinned to its realized injection time.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveFault {
    pub kind: ErrorKind,
    pub target: ParticipantId,
    pub magnitude: f64,
    pub inject_at_s: f64,
}

impl ActiveFault {
    /// True when `kind` is active for `id` at time `t`.
    pub fn applies(&self, id: &ParticipantId, t: f64, kind: ErrorKind) -> bool {
        self.kind == kind && &self.target == id && t >= self.inject_at_s
    }

    pub fn active_for(&self, id: &ParticipantId, t: f64) -> bool {
        &self.target == id && t >= self.inject_at_s
    }
}
