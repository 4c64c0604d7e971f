//! End-to-end filter consistency: tracking a constant-velocity target
//! with model-matched process noise and unbiased Gaussian observations,
//! the normalized position error squared must behave like a 2-DOF
//! chi-square variable.

use consort_core::estimation::{
    ekf_predict, position_nees, ukf_update, EstimationConfig, Observation, ObservationSource,
    TrackId, TrackState, WeightedObservation,
};
use consort_core::geometry::{Cov2, Vec2};
use nalgebra::{Cholesky, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

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

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sample_gaussian4(cov: &Matrix4<f64>, rng: &mut ChaCha8Rng) -> Vector4<f64> {
    let l = Cholesky::new(*cov + Matrix4::identity() * 1e-12)
        .expect("psd")
        .l();
    let z = Vector4::new(normal(rng), normal(rng), normal(rng), normal(rng));
    l * z
}

#[test]
fn time_averaged_position_nees_within_chi_square_band() {
    let cfg = EstimationConfig {
        process_noise_density: 0.2,
        v_max: 50.0,
        ..EstimationConfig::default()
    };
    let dt = 1.0;
    let sigma_obs = 1.0;
    let q = process_noise(dt, cfg.process_noise_density);
    let prior = Matrix4::identity();
    let runs = 200;
    let steps = 60;
    let sample_at = [40usize, 60usize];

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut nees_samples = Vec::new();

    for _ in 0..runs {
        let mut truth = Vector4::new(
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        // consistent initialization: estimate = truth + sample from prior
        let mut track = TrackState::new(
            TrackId(0),
            truth + sample_gaussian4(&prior, &mut rng),
            prior,
            0.0,
        );
        for step in 1..=steps {
            // truth propagates under the same model the filter assumes
            truth = Vector4::new(
                truth[0] + truth[2] * dt,
                truth[1] + truth[3] * dt,
                truth[2],
                truth[3],
            ) + sample_gaussian4(&q, &mut rng);

            track = ekf_predict(&track, dt, &cfg).unwrap();
            let z = Vec2::new(
                truth[0] + sigma_obs * normal(&mut rng),
                truth[1] + sigma_obs * normal(&mut rng),
            );
            track = ukf_update(
                &track,
                &[WeightedObservation {
                    observation: Observation {
                        position: z,
                        covariance: Cov2::isotropic(sigma_obs),
                        radius: 0.0,
                        source: ObservationSource::Fused,
                        frame: step as u64,
                    },
                    weight: 1.0,
                    trust: 1.0,
                }],
                &cfg,
            )
            .unwrap();

            if sample_at.contains(&step) {
                nees_samples.push(position_nees(&track, Vec2::new(truth[0], truth[1])));
            }
        }
    }

    let n = nees_samples.len();
    let mean = nees_samples.iter().sum::<f64>() / n as f64;
    let chi = ChiSquared::new(2.0 * n as f64).unwrap();
    let lo = chi.inverse_cdf(0.025) / n as f64;
    let hi = chi.inverse_cdf(0.975) / n as f64;
    assert!(
        mean >= lo && mean <= hi,
        "time-averaged NEES {mean:.4} outside [{lo:.4}, {hi:.4}] over {n} samples"
    );
}
