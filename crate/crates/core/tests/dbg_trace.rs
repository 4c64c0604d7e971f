use consort_core::consensus::{ParticipantId, ReportedPose};
use consort_core::estimation::{EstimationConfig, Observation, ObservationSource};
use consort_core::geometry::{Cov2, Vec2};
use consort_core::rng::RngFactory;
use consort_core::trust::{score_round, Coverage, ParticipantReport, RoundInputs, TrackSet, TrustConfig, TrustLedger};
use rand_distr::{Distribution, StandardNormal};
use std::collections::{BTreeMap, BTreeSet};

struct FullCoverage;
impl Coverage for FullCoverage {
    fn eligible(&self, _p: &ParticipantId, _pos: Vec2, _radius: f64) -> bool { true }
}
fn normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 { StandardNormal.sample(rng) }

#[test]
fn dbg_trace() {
    let factory = RngFactory::new(11);
    let sigma = 1.0;
    let cfg = TrustConfig { min_sensor_accuracy: 2.0, buffer_len: 60, ..TrustConfig::default() };
    let est = EstimationConfig { process_noise_density: 0.01, v_max: 5.0, ..EstimationConfig::default() };
    let mut tracks = TrackSet::new();
    let mut ledger = TrustLedger::new();
    let registered: BTreeSet<ParticipantId> = (0..6).map(|i| ParticipantId::new(format!("p{i}"))).collect();
    let objects = [Vec2::new(40.0, 10.0), Vec2::new(-35.0, 25.0), Vec2::new(5.0, -45.0)];
    for round in 0..30u64 {
        let mut reports = BTreeMap::new();
        for pi in 0..6usize {
            let id = ParticipantId::new(format!("p{pi}"));
            let mut rng = factory.stream_n(&["feed", &pi.to_string()], round);
            let observations = objects.iter().map(|pos| Observation {
                position: *pos + Vec2::new(normal(&mut rng) * sigma, normal(&mut rng) * sigma),
                covariance: Cov2::isotropic(sigma),
                radius: 1.0,
                source: ObservationSource::Fused,
                frame: round,
            }).collect();
            reports.insert(id, ParticipantReport {
                observations,
                pose: ReportedPose { position: Vec2::new(pi as f64 * 10.0, -60.0), heading_rad: 0.0, loc_cov: Cov2::isotropic(0.3) },
                advertised_range_m: 300.0,
                advertised_fov_deg: 360.0,
                self_radius_m: 0.0,
            });
        }
        let inputs = RoundInputs { round, dt: 1.0, reports: &reports, registered: &registered, coverage: &FullCoverage };
        let out = score_round(&mut tracks, &mut ledger, &inputs, &cfg, &est);
        let n_frames = out.frames.len();
        let n_penalty = out.frames.iter().filter(|f| f.penalty).count();
        let mean_frame = if n_frames > 0 { out.frames.iter().map(|f| f.value).sum::<f64>() / n_frames as f64 } else { 0.0 };
        let lp = tracks.tracks.first().map(|t| t.position_cov().eigenvalues()).unwrap_or((0.0,0.0));
        let t0 = out.trust[&ParticipantId::new("p0")];
        println!("round {round:2}: tracks={} frames={n_frames} penalties={n_penalty} mean_frame={mean_frame:.3} lP=({:.3},{:.3}) trust_p0={t0:.3}", tracks.tracks.len(), lp.0, lp.1);
    }
}
