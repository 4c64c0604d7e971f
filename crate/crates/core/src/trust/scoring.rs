//! The per-round scoring pipeline.
//!
//! Order of operations each round: predict tracks, associate every
//! participant's scan, run a preliminary trust-weighted update, vote on
//! existence, strip reports that failed the vote, attribute deviation
//! and penalty frames, re-apply the advertised-minimum and trust-cutoff
//! exclusions, then run the final update from the curated set. Track
//! births and retirements happen at the end of the round.

use super::{
    accuracy_gate, calc_sds, existence_vote, Coverage, ExistenceTally, TrackTally, TrustConfig,
    TrustLedger,
};
use crate::consensus::{ParticipantId, ReportedPose};
use crate::estimation::{
    ekf_predict, jpda_associate, ukf_update, AssociationResult, EstimationConfig, Observation,
    ObservationSource, TrackId, TrackState, WeightedObservation,
};
use crate::geometry::{Cov2, Vec2};
use nalgebra::{Matrix4, Vector4};
use std::collections::{BTreeMap, BTreeSet};

/// One participant's slot from the consensus output, plus the static
/// capabilities it advertises.
#[derive(Debug, Clone)]
pub struct ParticipantReport {
    pub observations: Vec<Observation>,
    pub pose: ReportedPose,
    pub advertised_range_m: f64,
    pub advertised_fov_deg: f64,
    /// Physical radius of the participant's own vehicle; zero for
    /// roadside units, which have no self-track.
    pub self_radius_m: f64,
}

/// Everything scoring needs for one round.
pub struct RoundInputs<'a> {
    pub round: u64,
    pub dt: f64,
    /// Decided slots; participants whose slot decided "no report" are
    /// absent here but still in `registered`.
    pub reports: &'a BTreeMap<ParticipantId, ParticipantReport>,
    pub registered: &'a BTreeSet<ParticipantId>,
    pub coverage: &'a dyn Coverage,
}

/// The tracker state that persists across rounds.
#[derive(Debug, Default)]
pub struct TrackSet {
    pub tracks: Vec<TrackState>,
    next_id: u64,
    miss_streaks: BTreeMap<TrackId, u32>,
    radii: BTreeMap<TrackId, f64>,
}

impl TrackSet {
    pub fn new() -> Self {
        TrackSet::default()
    }

    pub fn radius_of(&self, id: TrackId) -> f64 {
        self.radii.get(&id).copied().unwrap_or(1.0)
    }

    fn spawn(&mut self, mean: Vector4<f64>, cov: Matrix4<f64>, radius: f64, now: f64) -> TrackId {
        let id = TrackId(self.next_id);
        self.next_id += 1;
        self.tracks.push(TrackState::new(id, mean, cov, now));
        self.radii.insert(id, radius);
        id
    }

    fn retire(&mut self, ids: &BTreeSet<TrackId>) {
        self.tracks.retain(|t| !ids.contains(&t.id));
        for id in ids {
            self.miss_streaks.remove(id);
            self.radii.remove(id);
        }
    }
}

/// One trust frame attributed this round.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub participant: ParticipantId,
    pub track: TrackId,
    pub value: f64,
    /// True for missed-detection penalty frames.
    pub penalty: bool,
}

/// What one scoring round produced.
#[derive(Debug, Default)]
pub struct RoundTrustOutcome {
    pub frames: Vec<FrameRecord>,
    /// Participants excluded from the final fusion this round.
    pub excluded: BTreeSet<ParticipantId>,
    /// Post-round trust score per registered participant.
    pub trust: BTreeMap<ParticipantId, f64>,
    pub tally: ExistenceTally,
    pub births: u32,
    pub removed_observations: u32,
}

/// Advertised-capability violations: too short a range, too narrow a
/// field of view, claimed sensing error beyond the accuracy bound, or
/// claimed localization error beyond its bound.
fn minimum_violations(
    reports: &BTreeMap<ParticipantId, ParticipantReport>,
    cfg: &TrustConfig,
) -> BTreeSet<ParticipantId> {
    let mut out = BTreeSet::new();
    for (id, report) in reports {
        let claimed_sense_error = report
            .observations
            .iter()
            .map(|o| o.covariance.eigenvalues().0.sqrt())
            .fold(0.0f64, f64::max);
        let claimed_loc_error = report.pose.loc_cov.eigenvalues().0.sqrt();
        if report.advertised_range_m < cfg.min_range_m
            || report.advertised_fov_deg < cfg.min_fov_deg
            || claimed_sense_error > cfg.min_sensor_accuracy
            || claimed_loc_error > cfg.max_localization_error_m
        {
            out.insert(id.clone());
        }
    }
    out
}

/// Participants whose trust score currently exceeds the cutoff. The
/// comparison is strict: a score exactly at the cutoff is retained.
fn trust_violations(
    ids: impl Iterator<Item = ParticipantId>,
    ledger: &TrustLedger,
    cfg: &TrustConfig,
) -> BTreeSet<ParticipantId> {
    ids.filter(|id| ledger.score(id, cfg) > cfg.sds_max)
        .collect()
}

/// Exclusion set from both rules.
pub fn enforce_minimums(
    reports: &BTreeMap<ParticipantId, ParticipantReport>,
    registered: &BTreeSet<ParticipantId>,
    ledger: &TrustLedger,
    cfg: &TrustConfig,
) -> BTreeSet<ParticipantId> {
    let mut out = minimum_violations(reports, cfg);
    out.extend(trust_violations(registered.iter().cloned(), ledger, cfg));
    out
}

/// A participant's scan: reported observations plus its own pose recast
/// as an observation of its own vehicle.
fn build_scan(report: &ParticipantReport, round: u64) -> Vec<Observation> {
    let mut scan = report.observations.clone();
    if report.self_radius_m > 0.0 {
        scan.push(Observation {
            position: report.pose.position,
            covariance: report.pose.loc_cov,
            radius: report.self_radius_m,
            source: ObservationSource::SelfReport,
            frame: round,
        });
    }
    scan
}

struct Associated {
    scans: BTreeMap<ParticipantId, Vec<Observation>>,
    assoc: BTreeMap<ParticipantId, AssociationResult>,
    /// track index -> participant -> indices of matched observations.
    matched: Vec<BTreeMap<ParticipantId, Vec<usize>>>,
    /// (participant, obs index) pairs claimed by no track.
    orphans: Vec<(ParticipantId, usize)>,
}

fn associate_scans(
    predicted: &[TrackState],
    scans: BTreeMap<ParticipantId, Vec<Observation>>,
    est: &EstimationConfig,
) -> Associated {
    let mut assoc = BTreeMap::new();
    let mut matched = vec![BTreeMap::<ParticipantId, Vec<usize>>::new(); predicted.len()];
    let mut orphans = Vec::new();
    for (id, scan) in &scans {
        let result = jpda_associate(predicted, scan, est);
        for oi in 0..scan.len() {
            match result.best_track_for(oi) {
                Some(ti) => matched[ti].entry(id.clone()).or_default().push(oi),
                None => orphans.push((id.clone(), oi)),
            }
        }
        assoc.insert(id.clone(), result);
    }
    Associated {
        scans,
        assoc,
        matched,
        orphans,
    }
}

fn pooled_update(
    predicted: &[TrackState],
    a: &Associated,
    trust_of: &dyn Fn(&ParticipantId) -> f64,
    keep: &dyn Fn(&ParticipantId, usize) -> bool,
    est: &EstimationConfig,
) -> Vec<TrackState> {
    predicted
        .iter()
        .enumerate()
        .map(|(ti, track)| {
            let mut pooled = Vec::new();
            for (pid, result) in &a.assoc {
                let scan = &a.scans[pid];
                for (oi, obs) in scan.iter().enumerate() {
                    let w = result.weights[ti][oi];
                    if w > 0.0 && keep(pid, oi) {
                        pooled.push(WeightedObservation {
                            observation: obs.clone(),
                            weight: w,
                            trust: trust_of(pid),
                        });
                    }
                }
            }
            ukf_update(track, &pooled, est).unwrap_or_else(|_| track.clone())
        })
        .collect()
}

/// Single-link clusters of orphan observations, for track birth.
fn cluster_orphans(
    a: &Associated,
    radius: f64,
) -> Vec<Vec<(ParticipantId, usize)>> {
    let items: Vec<(ParticipantId, usize, Vec2)> = a
        .orphans
        .iter()
        .map(|(pid, oi)| (pid.clone(), *oi, a.scans[pid][*oi].position))
        .collect();
    let mut cluster_of: Vec<usize> = (0..items.len()).collect();
    // union-find without the fanciness: n is tiny
    fn root(cluster_of: &mut Vec<usize>, mut i: usize) -> usize {
        while cluster_of[i] != i {
            cluster_of[i] = cluster_of[cluster_of[i]];
            i = cluster_of[i];
        }
        i
    }
    for i in 0..items.len() {
        for j in (i + 1)..items.len() {
            if (items[i].2 - items[j].2).norm() <= radius {
                let (ri, rj) = (root(&mut cluster_of, i), root(&mut cluster_of, j));
                if ri != rj {
                    cluster_of[ri] = rj;
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<(ParticipantId, usize)>> = BTreeMap::new();
    for i in 0..items.len() {
        let r = root(&mut cluster_of, i);
        clusters
            .entry(r)
            .or_default()
            .push((items[i].0.clone(), items[i].1));
    }
    clusters.into_values().collect()
}

fn birth_from_cluster(
    members: &[(ParticipantId, usize)],
    scans: &BTreeMap<ParticipantId, Vec<Observation>>,
    est: &EstimationConfig,
    now: f64,
    tracks: &mut TrackSet,
) -> TrackId {
    let mut merged_pos = Vec2::ZERO;
    let mut merged_cov = Cov2::isotropic(0.0);
    let mut first = true;
    let mut radius = 1.0;
    for (pid, oi) in members {
        let obs = &scans[pid][*oi];
        radius = obs.radius.max(radius);
        if first {
            merged_pos = obs.position;
            merged_cov = obs.covariance;
            first = false;
        } else {
            let (cov, w) = merged_cov.information_merge(&obs.covariance);
            let a = merged_pos;
            let b = obs.position;
            merged_pos = Vec2::new(
                w[0][0] * a.x + w[0][1] * a.y + (1.0 - w[0][0]) * b.x - w[0][1] * b.y,
                w[1][0] * a.x + w[1][1] * a.y - w[1][0] * b.x + (1.0 - w[1][1]) * b.y,
            );
            merged_cov = cov;
        }
    }
    let vel_var = (0.5 * est.v_max).powi(2);
    let mut cov = Matrix4::zeros();
    cov[(0, 0)] = merged_cov.xx();
    cov[(0, 1)] = merged_cov.xy();
    cov[(1, 0)] = merged_cov.xy();
    cov[(1, 1)] = merged_cov.yy();
    cov[(2, 2)] = vel_var;
    cov[(3, 3)] = vel_var;
    tracks.spawn(
        Vector4::new(merged_pos.x, merged_pos.y, 0.0, 0.0),
        cov,
        radius,
        now,
    )
}

/// Runs the full trust-scoring pipeline for one round and advances both
/// the track set and the ledger.
pub fn score_round(
    tracks: &mut TrackSet,
    ledger: &mut TrustLedger,
    inputs: &RoundInputs,
    cfg: &TrustConfig,
    est: &EstimationConfig,
) -> RoundTrustOutcome {
    let now = inputs.round as f64 * inputs.dt;
    let mut outcome = RoundTrustOutcome::default();

    // exclusions in force entering the round
    let pre_excluded = enforce_minimums(inputs.reports, inputs.registered, ledger, cfg);

    // predict
    let predicted: Vec<TrackState> = tracks
        .tracks
        .iter()
        .map(|t| ekf_predict(t, inputs.dt, est).unwrap_or_else(|_| t.clone()))
        .collect();

    // associate the non-excluded scans
    let scans: BTreeMap<ParticipantId, Vec<Observation>> = inputs
        .reports
        .iter()
        .filter(|(id, _)| !pre_excluded.contains(*id))
        .map(|(id, report)| (id.clone(), build_scan(report, inputs.round)))
        .collect();
    let a = associate_scans(&predicted, scans, est);

    // preliminary trust-weighted fusion
    let pre_trust = |pid: &ParticipantId| ledger.score(pid, cfg);
    let prelim = pooled_update(&predicted, &a, &pre_trust, &|_, _| true, est);

    // existence votes among coverage-eligible voters
    let electorate: BTreeSet<ParticipantId> = inputs
        .registered
        .iter()
        .filter(|id| !pre_excluded.contains(*id))
        .cloned()
        .collect();
    let mut exists = vec![false; predicted.len()];
    for (ti, track) in predicted.iter().enumerate() {
        let radius = tracks.radius_of(track.id);
        let eligible: BTreeSet<ParticipantId> = electorate
            .iter()
            .filter(|id| inputs.coverage.eligible(id, track.position(), radius))
            .cloned()
            .collect();
        let supporters: BTreeSet<ParticipantId> = a.matched[ti].keys().cloned().collect();
        exists[ti] = existence_vote(&eligible, &supporters);
        outcome.tally.tracks.insert(
            track.id,
            TrackTally {
                eligible,
                supporters,
                exists: exists[ti],
            },
        );
    }

    // truncate: observations matched to failed tracks are removed, and
    // orphans only survive into the birth path
    let mut removed: BTreeSet<(ParticipantId, usize)> = BTreeSet::new();
    for (ti, per_participant) in a.matched.iter().enumerate() {
        if !exists[ti] {
            for (pid, indices) in per_participant {
                for oi in indices {
                    removed.insert((pid.clone(), *oi));
                }
            }
        }
    }
    outcome.removed_observations = removed.len() as u32;

    // deviation and penalty frames, in deterministic track order
    let rho = cfg.rho();
    for (ti, track) in prelim.iter().enumerate() {
        if !exists[ti] {
            continue;
        }
        let tally = &outcome.tally.tracks[&predicted[ti].id];
        if tally.supporters.len() < 3 {
            continue;
        }
        let fused_cov = track.position_cov();
        for (pid, indices) in &a.matched[ti] {
            for oi in indices {
                let obs = &a.scans[pid][*oi];
                if accuracy_gate(&fused_cov, &obs.covariance) {
                    let value = calc_sds(
                        obs.position,
                        &obs.covariance,
                        track.position(),
                        &fused_cov,
                        cfg.denominator_floor,
                    );
                    outcome.frames.push(FrameRecord {
                        participant: pid.clone(),
                        track: predicted[ti].id,
                        value,
                        penalty: false,
                    });
                }
            }
        }
        for pid in tally.eligible.difference(&tally.supporters) {
            outcome.frames.push(FrameRecord {
                participant: pid.clone(),
                track: predicted[ti].id,
                value: rho,
                penalty: true,
            });
        }
    }
    for frame in &outcome.frames {
        ledger.push_frame(&frame.participant, frame.value, cfg);
    }

    // re-apply exclusions with the scores just updated
    let post_excluded = enforce_minimums(inputs.reports, inputs.registered, ledger, cfg);

    // final fusion from the curated set
    let post_trust = |pid: &ParticipantId| ledger.score(pid, cfg);
    let keep = |pid: &ParticipantId, oi: usize| {
        !post_excluded.contains(pid) && !removed.contains(&(pid.clone(), oi))
    };
    let mut updated = pooled_update(&predicted, &a, &post_trust, &keep, est);

    // births from well-supported orphan clusters; orphans that fail the
    // support test are the removed "failing existence" leftovers
    for cluster in cluster_orphans(&a, cfg.birth_cluster_radius_m) {
        let members: Vec<(ParticipantId, usize)> = cluster
            .into_iter()
            .filter(|(pid, _)| !post_excluded.contains(pid))
            .collect();
        let distinct: BTreeSet<&ParticipantId> = members.iter().map(|(p, _)| p).collect();
        let centroid = {
            let mut c = Vec2::ZERO;
            for (pid, oi) in &members {
                c = c + a.scans[pid][*oi].position;
            }
            c * (1.0 / members.len().max(1) as f64)
        };
        let eligible: Vec<&ParticipantId> = electorate
            .iter()
            .filter(|id| inputs.coverage.eligible(id, centroid, 1.0))
            .collect();
        if distinct.len() < 3 || eligible.is_empty() || 2 * distinct.len() <= eligible.len() {
            outcome.removed_observations += members.len() as u32;
            continue;
        }
        birth_from_cluster(&members, &a.scans, est, now, tracks);
        outcome.births += 1;
    }

    // retire tracks that keep missing
    let mut dead: BTreeSet<TrackId> = BTreeSet::new();
    for (ti, track) in predicted.iter().enumerate() {
        let streak = tracks.miss_streaks.entry(track.id).or_insert(0);
        if a.matched[ti].is_empty() {
            *streak += 1;
        } else {
            *streak = 0;
        }
        if *streak >= 5 || updated[ti].position_cov().trace() > 400.0 {
            dead.insert(track.id);
        }
    }
    // swap updated states into the persistent set, then retire
    for (ti, t) in updated.drain(..).enumerate() {
        debug_assert_eq!(t.id, predicted[ti].id);
        if let Some(slot) = tracks.tracks.iter_mut().find(|x| x.id == t.id) {
            *slot = t;
        }
    }
    tracks.retire(&dead);

    outcome.excluded = post_excluded;
    for id in inputs.registered {
        outcome.trust.insert(id.clone(), ledger.score(id, cfg));
    }
    outcome
}

/// Reference tracker without trust scoring: same prediction,
/// association, fusion, and birth mechanics, but no weighting, no
/// existence filtering, and no exclusions. The harness runs it next to
/// the scored tracker to measure what the scoring buys.
pub fn plain_round(
    tracks: &mut TrackSet,
    inputs: &RoundInputs,
    cfg: &TrustConfig,
    est: &EstimationConfig,
) -> u32 {
    let now = inputs.round as f64 * inputs.dt;
    let predicted: Vec<TrackState> = tracks
        .tracks
        .iter()
        .map(|t| ekf_predict(t, inputs.dt, est).unwrap_or_else(|_| t.clone()))
        .collect();
    let scans: BTreeMap<ParticipantId, Vec<Observation>> = inputs
        .reports
        .iter()
        .map(|(id, report)| (id.clone(), build_scan(report, inputs.round)))
        .collect();
    let a = associate_scans(&predicted, scans, est);
    let mut updated = pooled_update(&predicted, &a, &|_| 1.0, &|_, _| true, est);

    let mut births = 0;
    for cluster in cluster_orphans(&a, cfg.birth_cluster_radius_m) {
        let distinct: BTreeSet<&ParticipantId> = cluster.iter().map(|(p, _)| p).collect();
        if distinct.len() < 3 {
            continue;
        }
        birth_from_cluster(&cluster, &a.scans, est, now, tracks);
        births += 1;
    }
    let mut dead: BTreeSet<TrackId> = BTreeSet::new();
    for (ti, track) in predicted.iter().enumerate() {
        let streak = tracks.miss_streaks.entry(track.id).or_insert(0);
        if a.matched[ti].is_empty() {
            *streak += 1;
        } else {
            *streak = 0;
        }
        if *streak >= 5 || updated[ti].position_cov().trace() > 400.0 {
            dead.insert(track.id);
        }
    }
    for (ti, t) in updated.drain(..).enumerate() {
        debug_assert_eq!(t.id, predicted[ti].id);
        if let Some(slot) = tracks.tracks.iter_mut().find(|x| x.id == t.id) {
            *slot = t;
        }
    }
    tracks.retire(&dead);
    births
}
