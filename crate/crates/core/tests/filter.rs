//! End-to-end checks of the particle filter against exact Bayesian inference
//! and against its own convergence contract.

use bellgyro::bell::{outcome_distribution, outcome_distribution_dense};
use bellgyro::estimator::{Ensemble, FilterConfig, Particle, PriorConfig};
use bellgyro::experiment::{bell_schedule, run_bell_trial, EstimatorKind, ExperimentConfig};
use bellgyro::linalg::{BellKind, RotationVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// With process noise and resampling off and particles pinned to a fixed
/// hypothesis grid, the filter is exact Bayesian inference on that grid; the
/// weights must match a brute-force posterior computed through the dense
/// density-matrix route.
#[test]
fn filter_matches_brute_force_bayes_on_grid() {
    let grid: Vec<RotationVector> = {
        let mut pts = Vec::new();
        let vals: Vec<f64> = (0..9).map(|i| -0.15 + 0.0375 * i as f64).collect();
        for &x in &vals {
            for &y in &vals {
                for &z in &vals {
                    pts.push(RotationVector::new(x, y, z));
                }
            }
        }
        pts
    };
    assert!(grid.len() <= 1000);

    let particles: Vec<Particle> = grid
        .iter()
        .map(|&theta| Particle { theta, weight: 1.0 })
        .collect();
    let mut ensemble = Ensemble::from_particles(particles, 0).unwrap();
    let no_noise = FilterConfig {
        process_noise_coeff: 0.0,
        ..FilterConfig::default()
    };

    let truth = RotationVector::new(0.04, -0.07, 0.05);
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut log_posterior = vec![0.0f64; grid.len()];

    for m in 1..=50 {
        let (prepared, axis) = bell_schedule(m);
        let dist = outcome_distribution(prepared, &truth, &axis, 0.0).unwrap();
        let observed = dist.sample(rng.gen::<f64>());

        ensemble.predict(&no_noise); // no-op with zero coefficient
        ensemble
            .update_weights(prepared, &axis, observed, 0.0)
            .unwrap();

        for (lp, theta) in log_posterior.iter_mut().zip(&grid) {
            let p = outcome_distribution_dense(prepared, theta, &axis, 0.0)
                .unwrap()
                .get(observed);
            *lp += p.max(1e-300).ln();
        }
    }

    // Normalize the brute-force posterior in a numerically safe way.
    let max_lp = log_posterior.iter().cloned().fold(f64::MIN, f64::max);
    let weights: Vec<f64> = log_posterior.iter().map(|lp| (lp - max_lp).exp()).collect();
    let total: f64 = weights.iter().sum();

    for (particle, w) in ensemble.particles().iter().zip(&weights) {
        assert!(
            (particle.weight - w / total).abs() < 1e-10,
            "filter {} vs brute force {}",
            particle.weight,
            w / total
        );
    }
}

/// More measurements must shrink the error: the run-median total error after
/// 600 Bell measurements is strictly below the median after 60.
#[test]
fn posterior_contracts_with_measurements() {
    let cfg = ExperimentConfig {
        estimator: EstimatorKind::BellPf,
        n_runs: 50,
        max_resources: 1200,
        record_stride: 120,
        master_seed: 314,
        ..ExperimentConfig::default()
    };
    let mut early = Vec::new();
    let mut late = Vec::new();
    for run in 0..cfg.n_runs {
        let record = run_bell_trial(&cfg, run).unwrap();
        early.push(record.checkpoints.first().unwrap().total_error);
        late.push(record.checkpoints.last().unwrap().total_error);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let early_median = median(&mut early);
    let late_median = median(&mut late);
    assert!(
        late_median < early_median,
        "no contraction: median after 600 measurements {late_median} vs after 60 {early_median}"
    );
}

/// A zero true rotation with a pure state: the filter must land well inside
/// the prior, and no Ψ⁻ outcome can ever be drawn.
#[test]
fn zero_truth_converges_within_prior() {
    let prior_sigma = PriorConfig::default().sigma_prior;
    for seed in 0..20 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut ensemble = Ensemble::from_prior(&PriorConfig::default(), rng.gen()).unwrap();
        let cfg = FilterConfig::default();
        let truth = RotationVector::ZERO;
        for m in 1..=1000 {
            let (prepared, axis) = bell_schedule(m);
            let observed = outcome_distribution(prepared, &truth, &axis, 0.0)
                .unwrap()
                .sample(rng.gen::<f64>());
            assert_ne!(observed, BellKind::PsiMinus);
            ensemble.predict(&cfg);
            ensemble
                .update_weights(prepared, &axis, observed, 0.0)
                .unwrap();
            if ensemble.effective_sample_size() < 0.5 * ensemble.len() as f64 {
                ensemble.resample_defensive(&cfg);
            }
        }
        let (estimate, _) = ensemble.estimate();
        assert!(
            estimate.norm() < prior_sigma,
            "seed {seed}: error {} above prior σ {prior_sigma}",
            estimate.norm()
        );
    }
}
