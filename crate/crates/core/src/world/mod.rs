//! Synthetic ground truth, parameterized sensor models, and fault hooks.
//!
//! Trajectories are closed-form in `t`, so world state is a pure function
//! of time and two queries at the same instant agree bit-for-bit. Noise
//! is drawn from per-(participant, round) streams in a fixed object
//! order, which keeps a fault injected into one participant from
//! perturbing anything another participant senses.

mod fault;

pub use fault::{ActiveFault, ErrorKind, FaultSpec};

use crate::consensus::{ParticipantId, ReportedPose};
use crate::estimation::{Observation, ObservationSource};
use crate::geometry::{Cov2, Vec2};
use crate::rng::RngFactory;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("unknown error kind code {0:?}")]
    UnknownErrorKind(String),
    #[error("magnitude {magnitude} outside the legal domain for {kind}")]
    BadMagnitude { kind: &'static str, magnitude: f64 },
    #[error("sensor FOV {0} outside (0, 360]")]
    BadFov(f64),
    #[error("negative error model coefficient")]
    NegativeErrorModel,
    #[error("trajectory speed {speed:.3} m/s exceeds cap {cap:.3} m/s")]
    SpeedCap { speed: f64, cap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Camera,
    Lidar,
}

/// One physical sensor: field of view, range, and a radial error model
/// sigma(d) = a + b*d that also produces the advertised covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorSpec {
    pub kind: SensorKind,
    pub fov_deg: f64,
    pub range_m: f64,
    pub mount_yaw_deg: f64,
    /// Constant term of sigma(d), meters.
    pub error_a_m: f64,
    /// Distance-proportional term of sigma(d), meters per meter.
    pub error_b_per_m: f64,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(WorldError::BadFov(self.fov_deg));
        }
        if self.error_a_m < 0.0 || self.error_b_per_m < 0.0 {
            return Err(WorldError::NegativeErrorModel);
        }
        Ok(())
    }

    pub fn sigma_at(&self, distance: f64) -> f64 {
        self.error_a_m + self.error_b_per_m * distance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Cav,
    Cis,
}

/// Closed-form motion. Speeds stay at or below the scaled-world cap by
/// construction of the parameters; `validate_speed` checks it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Fixed {
        pos: [f64; 2],
        heading_deg: f64,
    },
    /// Counter-clockwise circle.
    Circle {
        center: [f64; 2],
        radius_m: f64,
        period_s: f64,
        phase_deg: f64,
    },
    /// Sinusoidal sweep along a fixed axis through `center`.
    LineSine {
        center: [f64; 2],
        axis_deg: f64,
        amplitude_m: f64,
        period_s: f64,
        phase_deg: f64,
    },
}

/// Pose and velocity of a moving body at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruePose {
    pub position: Vec2,
    pub heading_rad: f64,
    pub velocity: Vec2,
}

impl Trajectory {
    pub fn pose_at(&self, t: f64) -> TruePose {
        match self {
            Trajectory::Fixed { pos, heading_deg } => TruePose {
                position: Vec2::new(pos[0], pos[1]),
                heading_rad: heading_deg.to_radians(),
                velocity: Vec2::ZERO,
            },
            Trajectory::Circle {
                center,
                radius_m,
                period_s,
                phase_deg,
            } => {
                let omega = TAU / period_s;
                let theta = omega * t + phase_deg.to_radians();
                let (s, c) = theta.sin_cos();
                let position = Vec2::new(center[0] + radius_m * c, center[1] + radius_m * s);
                let velocity = Vec2::new(-radius_m * omega * s, radius_m * omega * c);
                TruePose {
                    position,
                    heading_rad: velocity.bearing(),
                    velocity,
                }
            }
            Trajectory::LineSine {
                center,
                axis_deg,
                amplitude_m,
                period_s,
                phase_deg,
            } => {
                let omega = TAU / period_s;
                let theta = omega * t + phase_deg.to_radians();
                let axis = axis_deg.to_radians();
                let along = amplitude_m * theta.sin();
                let speed = amplitude_m * omega * theta.cos();
                let dir = Vec2::new(axis.cos(), axis.sin());
                let heading = if speed >= 0.0 {
                    axis
                } else {
                    axis + std::f64::consts::PI
                };
                TruePose {
                    position: Vec2::new(center[0], center[1]) + dir * along,
                    heading_rad: heading,
                    velocity: dir * speed,
                }
            }
        }
    }

    /// Peak speed reached anywhere on the trajectory.
    pub fn max_speed(&self) -> f64 {
        match self {
            Trajectory::Fixed { .. } => 0.0,
            Trajectory::Circle {
                radius_m, period_s, ..
            } => radius_m * TAU / period_s,
            Trajectory::LineSine {
                amplitude_m,
                period_s,
                ..
            } => amplitude_m * TAU / period_s,
        }
    }

    pub fn validate_speed(&self, cap: f64) -> Result<(), WorldError> {
        let speed = self.max_speed();
        if speed > cap + 1e-9 {
            return Err(WorldError::SpeedCap { speed, cap });
        }
        Ok(())
    }
}

/// One CAV or roadside sensor platform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticipantSpec {
    pub id: ParticipantId,
    pub role: Role,
    pub sensors: Vec<SensorSpec>,
    pub trajectory: Trajectory,
    /// Actual and advertised localization noise, meters (per axis).
    pub loc_sigma_m: f64,
    /// Physical extent when sensed by others (CAVs only; roadside units
    /// are not traffic objects).
    pub radius_m: f64,
}

/// Scripted non-communicating traffic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub radius_m: f64,
    pub trajectory: Trajectory,
}

/// Axis-aligned rectangle around the intersection, the target region for
/// the removal/insertion scenarios.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Region {
    pub half_x_m: f64,
    pub half_y_m: f64,
}

impl Region {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x.abs() <= self.half_x_m && p.y.abs() <= self.half_y_m
    }
}

/// Static description of the synthetic world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    pub participants: Vec<ParticipantSpec>,
    pub objects: Vec<ObjectSpec>,
    /// Speed cap for every trajectory, m/s.
    pub speed_cap: f64,
    pub intersection: Region,
    /// Minimum unoccluded angular fraction for a detection.
    pub visibility_threshold: f64,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        for p in &self.participants {
            for s in &p.sensors {
                s.validate()?;
            }
            p.trajectory.validate_speed(self.speed_cap)?;
        }
        for o in &self.objects {
            o.trajectory.validate_speed(self.speed_cap)?;
        }
        Ok(())
    }
}

/// One physical object as ground truth sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthObject {
    /// Participant id for CAV vehicles, object id otherwise.
    pub key: String,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Ground truth at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    /// Sorted by key.
    pub objects: Vec<TruthObject>,
    pub poses: BTreeMap<ParticipantId, TruePose>,
}

/// Evaluates ground truth at `t`.
pub fn step_world(cfg: &WorldConfig, t: f64) -> WorldState {
    let mut poses = BTreeMap::new();
    let mut objects = Vec::new();
    for p in &cfg.participants {
        let pose = p.trajectory.pose_at(t);
        if p.role == Role::Cav {
            objects.push(TruthObject {
                key: p.id.as_str().to_string(),
                position: pose.position,
                velocity: pose.velocity,
                radius: p.radius_m,
            });
        }
        poses.insert(p.id.clone(), pose);
    }
    for o in &cfg.objects {
        let pose = o.trajectory.pose_at(t);
        objects.push(TruthObject {
            key: o.id.clone(),
            position: pose.position,
            velocity: pose.velocity,
            radius: o.radius_m,
        });
    }
    objects.sort_by(|a, b| a.key.cmp(&b.key));
    WorldState { t, objects, poses }
}

/// Unoccluded angular fraction of the target disc seen from `eye`,
/// ray-cast against the other discs.
pub fn visibility_fraction(
    eye: Vec2,
    target_pos: Vec2,
    target_radius: f64,
    occluders: &[(Vec2, f64)],
) -> f64 {
    let rel = target_pos - eye;
    let dist = rel.norm();
    if dist <= target_radius {
        return 1.0;
    }
    let target_bearing = rel.bearing();
    let target_half = (target_radius / dist).asin();
    if target_half <= 0.0 {
        return 1.0;
    }
    // collect blocked sub-intervals of [-target_half, +target_half],
    // angles measured relative to the target bearing
    let mut blocked: Vec<(f64, f64)> = Vec::new();
    for (opos, oradius) in occluders {
        let orel = *opos - eye;
        let odist = orel.norm();
        if odist >= dist || odist <= *oradius {
            continue;
        }
        let ohalf = (oradius / odist).asin();
        let mut delta = orel.bearing() - target_bearing;
        while delta > std::f64::consts::PI {
            delta -= TAU;
        }
        while delta < -std::f64::consts::PI {
            delta += TAU;
        }
        let lo = (delta - ohalf).max(-target_half);
        let hi = (delta + ohalf).min(target_half);
        if lo < hi {
            blocked.push((lo, hi));
        }
    }
    if blocked.is_empty() {
        return 1.0;
    }
    blocked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut covered = 0.0;
    let mut cursor = -target_half;
    for (lo, hi) in blocked {
        let lo = lo.max(cursor);
        if hi > lo {
            covered += hi - lo;
            cursor = hi;
        }
    }
    1.0 - covered / (2.0 * target_half)
}

/// Everything one participant contributes to a round before signing.
#[derive(Debug, Clone, PartialEq)]
pub struct SensedReport {
    pub observations: Vec<Observation>,
    pub reported_pose: ReportedPose,
}

/// Coverage oracle built from advertised sensor geometry and the poses
/// participants reported this round. Feeds the trust module's
/// eligibility tests; it never consults ground truth.
#[derive(Debug, Default)]
pub struct CoverageModel {
    entries: BTreeMap<ParticipantId, CoverageEntry>,
    /// Tracked objects acting as occluders.
    occluders: Vec<(Vec2, f64)>,
    visibility_threshold: f64,
}

#[derive(Debug)]
struct CoverageEntry {
    sensors: Vec<SensorSpec>,
    position: Vec2,
    heading_rad: f64,
    self_radius_m: f64,
}

impl CoverageModel {
    pub fn new(visibility_threshold: f64) -> Self {
        CoverageModel {
            entries: BTreeMap::new(),
            occluders: Vec::new(),
            visibility_threshold,
        }
    }

    pub fn add_participant(
        &mut self,
        id: ParticipantId,
        sensors: Vec<SensorSpec>,
        position: Vec2,
        heading_rad: f64,
        self_radius_m: f64,
    ) {
        self.entries.insert(
            id,
            CoverageEntry {
                sensors,
                position,
                heading_rad,
                self_radius_m,
            },
        );
    }

    pub fn set_occluders(&mut self, occluders: Vec<(Vec2, f64)>) {
        self.occluders = occluders;
    }
}

impl crate::trust::Coverage for CoverageModel {
    fn eligible(&self, participant: &ParticipantId, pos: Vec2, radius: f64) -> bool {
        let Some(entry) = self.entries.get(participant) else {
            return false;
        };
        // a platform is always on the hook for localizing itself
        if entry.self_radius_m > 0.0
            && (pos - entry.position).norm() <= 2.0 * entry.self_radius_m.max(radius)
        {
            return true;
        }
        // ignore the target itself in the occluder list
        let occluders: Vec<(Vec2, f64)> = self
            .occluders
            .iter()
            .filter(|(opos, _)| (*opos - pos).norm() > radius)
            .cloned()
            .collect();
        entry.sensors.iter().any(|s| {
            sensor_covers(
                s,
                entry.position,
                entry.heading_rad,
                pos,
                radius,
                &occluders,
                self.visibility_threshold,
            )
        })
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Coverage test shared by sensing and the trust module's eligibility
/// logic: in range, inside the field of view, and sufficiently
/// unoccluded.
pub fn sensor_covers(
    sensor: &SensorSpec,
    eye: Vec2,
    heading_rad: f64,
    target_pos: Vec2,
    target_radius: f64,
    occluders: &[(Vec2, f64)],
    visibility_threshold: f64,
) -> bool {
    let rel = target_pos - eye;
    let dist = rel.norm();
    if dist > sensor.range_m || dist == 0.0 {
        return false;
    }
    if sensor.fov_deg < 360.0 {
        let facing = heading_rad + sensor.mount_yaw_deg.to_radians();
        let mut delta = rel.bearing() - facing;
        while delta > std::f64::consts::PI {
            delta -= TAU;
        }
        while delta < -std::f64::consts::PI {
            delta += TAU;
        }
        if delta.abs() > 0.5 * sensor.fov_deg.to_radians() {
            return false;
        }
    }
    visibility_fraction(eye, target_pos, target_radius, occluders)
        >= visibility_threshold
}

/// Runs one participant's full sensing pipeline for `round`: per-sensor
/// detection with calibrated noise, local camera/lidar fusion, reported
/// localization, and any active fault hooks.
pub fn sense_world(
    spec: &ParticipantSpec,
    world: &WorldState,
    factory: &RngFactory,
    round: u64,
    fault: Option<&ActiveFault>,
    world_cfg: &WorldConfig,
) -> SensedReport {
    let t = world.t;
    let true_pose = world.poses[&spec.id];
    let mut noise = factory.stream_n(&["sense", spec.id.as_str()], round);

    // localization error drawn first so the sensing draws line up across
    // fault variants
    let mut loc_scale = 1.0;
    if let Some(f) = fault {
        if f.applies(&spec.id, t, ErrorKind::LocalizationDegradation) {
            loc_scale = 1.0 + f.magnitude / 100.0;
        }
    }
    let loc_err = Vec2::new(
        standard_normal(&mut noise) * spec.loc_sigma_m * loc_scale,
        standard_normal(&mut noise) * spec.loc_sigma_m * loc_scale,
    );
    let mut reported_position = true_pose.position + loc_err;
    if let Some(f) = fault {
        if f.applies(&spec.id, t, ErrorKind::SpoofedPose) {
            // fixed offset direction; magnitude in meters
            reported_position = reported_position + Vec2::new(f.magnitude, 0.0);
        }
    }
    let reported_pose = ReportedPose {
        position: reported_position,
        heading_rad: true_pose.heading_rad,
        loc_cov: Cov2::isotropic(spec.loc_sigma_m),
    };

    // per-sensor relative measurements, objects in sorted order
    let mut per_object: BTreeMap<&str, Vec<(Vec2, Cov2)>> = BTreeMap::new();
    for obj in &world.objects {
        if obj.key == spec.id.as_str() {
            continue;
        }
        let occluders: Vec<(Vec2, f64)> = world
            .objects
            .iter()
            .filter(|o| o.key != obj.key && o.key != spec.id.as_str())
            .map(|o| (o.position, o.radius))
            .collect();
        for sensor in &spec.sensors {
            // draws happen for every (sensor, object) pair regardless of
            // coverage so fault hooks never shift the stream
            let n_r = standard_normal(&mut noise);
            let n_t = standard_normal(&mut noise);
            if !sensor_covers(
                sensor,
                true_pose.position,
                true_pose.heading_rad,
                obj.position,
                obj.radius,
                &occluders,
                world_cfg.visibility_threshold,
            ) {
                continue;
            }
            let rel = obj.position - true_pose.position;
            let dist = rel.norm();
            let sigma = sensor.sigma_at(dist);
            let bearing = rel.bearing();
            let err = Vec2::new(n_r * sigma, n_t * sigma).rotated(bearing);
            let mut measured = rel + err;
            let mut advertised = Cov2::from_axis_aligned(sigma * sigma, sigma * sigma, bearing);

            if let Some(f) = fault {
                let rotate = match sensor.kind {
                    SensorKind::Camera => {
                        f.applies(&spec.id, t, ErrorKind::CameraShift)
                            || f.applies(&spec.id, t, ErrorKind::CameraLidarShift)
                    }
                    SensorKind::Lidar => {
                        f.applies(&spec.id, t, ErrorKind::LidarShift)
                            || f.applies(&spec.id, t, ErrorKind::CameraLidarShift)
                    }
                };
                if rotate {
                    measured = measured.rotated(f.magnitude.to_radians());
                }
                if sensor.kind == SensorKind::Lidar
                    && f.applies(&spec.id, t, ErrorKind::LocalFusionMisweight)
                {
                    advertised = advertised.scaled(1.0 - f.magnitude / 100.0);
                }
            }
            per_object
                .entry(obj.key.as_str())
                .or_default()
                .push((measured, advertised));
        }
    }

    // local fusion: information-merge the per-sensor readings
    let mut observations = Vec::new();
    for obj in &world.objects {
        let Some(readings) = per_object.get(obj.key.as_str()) else {
            continue;
        };
        let (mut merged_pos, mut merged_cov) = readings[0];
        for (pos, cov) in &readings[1..] {
            let (cov_m, w) = merged_cov.information_merge(cov);
            // merged mean = W*current + (I-W)*next
            let a = merged_pos;
            let b = *pos;
            merged_pos = Vec2::new(
                w[0][0] * a.x + w[0][1] * a.y + (1.0 - w[0][0]) * b.x - w[0][1] * b.y,
                w[1][0] * a.x + w[1][1] * a.y - w[1][0] * b.x + (1.0 - w[1][1]) * b.y,
            );
            merged_cov = cov_m;
        }
        let global_pos = reported_pose.position + merged_pos;
        let covariance = merged_cov.add(&Cov2::isotropic(spec.loc_sigma_m));
        observations.push(Observation {
            position: global_pos,
            covariance,
            radius: obj.radius,
            source: ObservationSource::Fused,
            frame: round,
        });
    }

    // detection-level fault hooks draw from their own stream
    if let Some(f) = fault {
        if f.active_for(&spec.id, t) {
            let mut fault_rng = factory.stream_n(&["fault", spec.id.as_str()], round);
            match f.kind {
                ErrorKind::RandomDetectionLoss => {
                    observations.retain(|_| fault_rng.gen::<f64>() >= f.magnitude);
                }
                ErrorKind::TargetedRemoval => {
                    observations.retain(|o| {
                        !world_cfg.intersection.contains(o.position)
                            || fault_rng.gen::<f64>() >= f.magnitude
                    });
                }
                ErrorKind::PhantomInjection => {
                    if fault_rng.gen::<f64>() < f.magnitude {
                        let px = fault_rng.gen_range(
                            -world_cfg.intersection.half_x_m..world_cfg.intersection.half_x_m,
                        );
                        let py = fault_rng.gen_range(
                            -world_cfg.intersection.half_y_m..world_cfg.intersection.half_y_m,
                        );
                        let pos = Vec2::new(px, py);
                        let dist = (pos - reported_pose.position).norm();
                        let sigma = spec
                            .sensors
                            .first()
                            .map(|s| s.sigma_at(dist))
                            .unwrap_or(1.0);
                        observations.push(Observation {
                            position: pos,
                            covariance: Cov2::isotropic(sigma),
                            radius: 1.0,
                            source: ObservationSource::Fused,
                            frame: round,
                        });
                    }
                }
                ErrorKind::GlobalFusionMisweight => {
                    let k = 1.0 - f.magnitude / 100.0;
                    for obs in &mut observations {
                        obs.covariance = obs.covariance.scaled(k);
                    }
                }
                _ => {}
            }
        }
    }

    SensedReport {
        observations,
        reported_pose,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> SensorSpec {
        SensorSpec {
            kind: SensorKind::Camera,
            fov_deg: 160.0,
            range_m: 100.0,
            mount_yaw_deg: 0.0,
            error_a_m: 0.05,
            error_b_per_m: 0.01,
        }
    }

    fn world_cfg(participants: Vec<ParticipantSpec>, objects: Vec<ObjectSpec>) -> WorldConfig {
        WorldConfig {
            participants,
            objects,
            speed_cap: 2.0,
            intersection: Region {
                half_x_m: 10.0,
                half_y_m: 10.0,
            },
            visibility_threshold: 0.5,
        }
    }

    fn cav(id: &str, trajectory: Trajectory) -> ParticipantSpec {
        ParticipantSpec {
            id: ParticipantId::new(id),
            role: Role::Cav,
            sensors: vec![camera()],
            trajectory,
            loc_sigma_m: 0.1,
            radius_m: 1.0,
        }
    }

    #[test]
    fn error_model_evaluates_linearly() {
        let s = camera();
        assert!((s.sigma_at(10.0) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn world_state_is_pure_in_t() {
        let cfg = world_cfg(
            vec![cav(
                "cav1",
                Trajectory::Circle {
                    center: [0.0, 40.0],
                    radius_m: 40.0,
                    period_s: 200.0,
                    phase_deg: 0.0,
                },
            )],
            vec![],
        );
        assert_eq!(step_world(&cfg, 12.5), step_world(&cfg, 12.5));
        assert_ne!(
            step_world(&cfg, 12.5).poses,
            step_world(&cfg, 13.5).poses
        );
    }

    #[test]
    fn start_poses_match_config() {
        let cfg = world_cfg(
            vec![cav(
                "cav1",
                Trajectory::Fixed {
                    pos: [3.0, -4.0],
                    heading_deg: 90.0,
                },
            )],
            vec![],
        );
        let w = step_world(&cfg, 0.0);
        assert_eq!(
            w.poses[&ParticipantId::new("cav1")].position,
            Vec2::new(3.0, -4.0)
        );
    }

    #[test]
    fn speed_cap_validated_over_trajectories() {
        let fast = Trajectory::Circle {
            center: [0.0, 0.0],
            radius_m: 100.0,
            period_s: 60.0,
            phase_deg: 0.0,
        };
        assert!(fast.validate_speed(2.0).is_err());
        let slow = Trajectory::Circle {
            center: [0.0, 0.0],
            radius_m: 19.0,
            period_s: 60.0,
            phase_deg: 0.0,
        };
        assert!(slow.validate_speed(2.0).is_ok());
        // sampled speeds stay at or below the analytic max
        for i in 0..100 {
            let t = i as f64 * 0.7;
            assert!(slow.pose_at(t).velocity.norm() <= slow.max_speed() + 1e-9);
        }
    }

    #[test]
    fn object_behind_camera_not_seen() {
        let observer = cav(
            "cav1",
            Trajectory::Fixed {
                pos: [0.0, 0.0],
                heading_deg: 0.0,
            },
        );
        let behind = ObjectSpec {
            id: "obj1".into(),
            radius_m: 1.0,
            trajectory: Trajectory::Fixed {
                pos: [-20.0, 0.0],
                heading_deg: 0.0,
            },
        };
        let cfg = world_cfg(vec![observer.clone()], vec![behind]);
        let w = step_world(&cfg, 0.0);
        let report = sense_world(&observer, &w, &RngFactory::new(1), 0, None, &cfg);
        assert!(report.observations.is_empty());
    }

    #[test]
    fn noiseless_model_reproduces_truth() {
        let mut observer = cav(
            "cav1",
            Trajectory::Fixed {
                pos: [0.0, 0.0],
                heading_deg: 0.0,
            },
        );
        observer.sensors[0].error_a_m = 0.0;
        observer.sensors[0].error_b_per_m = 0.0;
        observer.loc_sigma_m = 0.0;
        let obj = ObjectSpec {
            id: "obj1".into(),
            radius_m: 1.0,
            trajectory: Trajectory::Fixed {
                pos: [20.0, 5.0],
                heading_deg: 0.0,
            },
        };
        let cfg = world_cfg(vec![observer.clone()], vec![obj]);
        let w = step_world(&cfg, 0.0);
        let report = sense_world(&observer, &w, &RngFactory::new(1), 0, None, &cfg);
        assert_eq!(report.observations.len(), 1);
        assert!((report.observations[0].position - Vec2::new(20.0, 5.0)).norm() < 1e-12);
    }

    #[test]
    fn occlusion_hides_object() {
        let observer = cav(
            "cav1",
            Trajectory::Fixed {
                pos: [0.0, 0.0],
                heading_deg: 0.0,
            },
        );
        let blocker = ObjectSpec {
            id: "blocker".into(),
            radius_m: 3.0,
            trajectory: Trajectory::Fixed {
                pos: [10.0, 0.0],
                heading_deg: 0.0,
            },
        };
        let hidden = ObjectSpec {
            id: "hidden".into(),
            radius_m: 1.0,
            trajectory: Trajectory::Fixed {
                pos: [20.0, 0.0],
                heading_deg: 0.0,
            },
        };
        let cfg = world_cfg(vec![observer.clone()], vec![blocker, hidden]);
        let w = step_world(&cfg, 0.0);
        let report = sense_world(&observer, &w, &RngFactory::new(1), 0, None, &cfg);
        // blocker fully occludes the hidden object; only the blocker shows
        assert_eq!(report.observations.len(), 1);
    }

    #[test]
    fn visibility_fraction_bounds() {
        let full = visibility_fraction(Vec2::ZERO, Vec2::new(10.0, 0.0), 1.0, &[]);
        assert_eq!(full, 1.0);
        let blocked = visibility_fraction(
            Vec2::ZERO,
            Vec2::new(20.0, 0.0),
            1.0,
            &[(Vec2::new(10.0, 0.0), 3.0)],
        );
        assert_eq!(blocked, 0.0);
        let partial = visibility_fraction(
            Vec2::ZERO,
            Vec2::new(20.0, 0.0),
            1.0,
            &[(Vec2::new(10.0, 0.45), 0.5)],
        );
        assert!(partial > 0.0 && partial < 1.0, "partial {partial}");
    }

    #[test]
    fn seed_determinism_and_fault_locality() {
        let observer = cav(
            "cav1",
            Trajectory::Fixed {
                pos: [0.0, 0.0],
                heading_deg: 0.0,
            },
        );
        let peer = cav(
            "cav2",
            Trajectory::Fixed {
                pos: [15.0, 2.0],
                heading_deg: 180.0,
            },
        );
        let cfg = world_cfg(vec![observer.clone(), peer.clone()], vec![]);
        let w = step_world(&cfg, 200.0);
        let factory = RngFactory::new(77);

        let a = sense_world(&observer, &w, &factory, 5, None, &cfg);
        let b = sense_world(&observer, &w, &factory, 5, None, &cfg);
        assert_eq!(a, b);

        // a fault on cav2 changes nothing cav1 senses
        let fault = ActiveFault {
            kind: ErrorKind::CameraShift,
            target: ParticipantId::new("cav2"),
            magnitude: 5.0,
            inject_at_s: 0.0,
        };
        let c = sense_world(&observer, &w, &factory, 5, Some(&fault), &cfg);
        assert_eq!(a, c);
        // and zero-probability detection loss is a no-op for the target
        let noop = ActiveFault {
            kind: ErrorKind::RandomDetectionLoss,
            target: ParticipantId::new("cav1"),
            magnitude: 0.0,
            inject_at_s: 0.0,
        };
        let d = sense_world(&observer, &w, &factory, 5, Some(&noop), &cfg);
        assert_eq!(a, d);
    }

    #[test]
    fn camera_shift_rotates_detections_and_preserves_count() {
        let observer = cav(
            "cav1",
            Trajectory::Fixed {
                pos: [0.0, 0.0],
                heading_deg: 0.0,
            },
        );
        let obj = ObjectSpec {
            id: "obj1".into(),
            radius_m: 1.0,
            trajectory: Trajectory::Fixed {
                pos: [30.0, 0.0],
                heading_deg: 0.0,
            },
        };
        let cfg = world_cfg(vec![observer.clone()], vec![obj]);
        let w = step_world(&cfg, 0.0);
        let factory = RngFactory::new(3);
        let clean = sense_world(&observer, &w, &factory, 1, None, &cfg);
        let fault = ActiveFault {
            kind: ErrorKind::CameraShift,
            target: ParticipantId::new("cav1"),
            magnitude: 2.0,
            inject_at_s: 0.0,
        };
        let skewed = sense_world(&observer, &w, &factory, 1, Some(&fault), &cfg);
        assert_eq!(clean.observations.len(), skewed.observations.len());
        let offset = (skewed.observations[0].position - clean.observations[0].position).norm();
        // |2 sin(1 deg)| * 30 m, give or take the noise rotation
        assert!(offset > 0.5 && offset < 1.5, "offset {offset}");
    }

    #[test]
    fn advertised_covariance_matches_sampling_noise() {
        // calibration property the trust scoring assumes; 10k draws at a
        // fixed geometry
        let observer = cav(
            "cav1",
            Trajectory::Fixed {
                pos: [0.0, 0.0],
                heading_deg: 0.0,
            },
        );
        let obj = ObjectSpec {
            id: "obj1".into(),
            radius_m: 1.0,
            trajectory: Trajectory::Fixed {
                pos: [25.0, 3.0],
                heading_deg: 0.0,
            },
        };
        let cfg = world_cfg(vec![observer.clone()], vec![obj]);
        let w = step_world(&cfg, 0.0);
        let factory = RngFactory::new(40);

        let mut sum = Vec2::ZERO;
        let mut sum_xx = 0.0;
        let mut sum_yy = 0.0;
        let mut sum_xy = 0.0;
        let n = 10_000;
        let mut advertised = Cov2::isotropic(0.0);
        for round in 0..n {
            let report = sense_world(&observer, &w, &factory, round, None, &cfg);
            let err = report.observations[0].position - Vec2::new(25.0, 3.0);
            advertised = report.observations[0].covariance;
            sum = sum + err;
            sum_xx += err.x * err.x;
            sum_yy += err.y * err.y;
            sum_xy += err.x * err.y;
        }
        let nf = n as f64;
        let mean = sum * (1.0 / nf);
        assert!(mean.norm() < 0.02, "bias {:?}", mean);
        let sample_xx = sum_xx / nf;
        let sample_yy = sum_yy / nf;
        let sample_xy = sum_xy / nf;
        assert!(
            (sample_xx - advertised.xx()).abs() / advertised.xx() < 0.10,
            "xx: sample {sample_xx} advertised {}",
            advertised.xx()
        );
        assert!(
            (sample_yy - advertised.yy()).abs() / advertised.yy() < 0.10,
            "yy: sample {sample_yy} advertised {}",
            advertised.yy()
        );
        assert!((sample_xy - advertised.xy()).abs() < 0.02);
    }
}
