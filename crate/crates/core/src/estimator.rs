//! Sequential Monte Carlo estimation of the three rotation components, plus
//! the cycling single-qubit baseline.
//!
//! The particle filter represents the posterior over the rotation vector by
//! `N` weighted candidate rotations. Each Bell measurement multiplies every
//! weight by the probability that this particle's rotation would have
//! produced the observed outcome, renormalizes, and — when the effective
//! sample size collapses below a threshold — resamples with defensive
//! jitter. Between measurements the particles receive shrinking Gaussian
//! process noise so the cloud cannot freeze prematurely.
//!
//! The single-qubit baseline cycles prepare/measure axis pairs so that each
//! measurement is a Bernoulli trial on one rotation component, inverted in
//! closed form by an arcsine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bell::{BellError, MeasurementAxis, MeasurementSetting};
use crate::linalg::{Axis, BellKind, RotationVector};

/// Errors raised while filtering.
#[derive(Debug, Error)]
pub enum FilterError {
    #[error(
        "all particle weights vanished at measurement {measurement}; the likelihood is degenerate"
    )]
    DegenerateLikelihood { measurement: usize },
    #[error("measurement index must be at least 1")]
    ZeroMeasurementIndex,
    #[error("ensemble needs at least 2 particles, got {0}")]
    TooFewParticles(usize),
    #[error("tally for measured axis {0:?} is empty")]
    EmptyTally(Axis),
    #[error(transparent)]
    Bell(#[from] BellError),
}

/// One candidate rotation and its posterior mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: RotationVector,
    pub weight: f64,
}

/// Prior over rotations: independent zero-mean Gaussians per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Standard deviation of each rotation component, radians.
    pub sigma_prior: f64,
    /// Number of particles.
    pub n_theta: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            sigma_prior: 0.1745,
            n_theta: 1000,
        }
    }
}

/// Particle-filter tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Resample when N_eff falls below this fraction of the particle count.
    pub resample_threshold_fraction: f64,
    /// Jitter covariance scale used for most resampled particles.
    pub defensive_small_scale: f64,
    /// Fraction of resampled particles that get the small-scale jitter; the
    /// rest draw from the full particle covariance.
    pub defensive_small_prob: f64,
    /// Process noise is coeff · m^exponent at measurement m.
    pub process_noise_coeff: f64,
    pub process_noise_exponent: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            resample_threshold_fraction: 0.5,
            defensive_small_scale: 0.1,
            defensive_small_prob: 0.9,
            process_noise_coeff: 0.1,
            process_noise_exponent: -2.0 / 3.0,
        }
    }
}

/// Shrinking process-noise schedule: coeff · m^exponent for the m-th
/// measurement (m ≥ 1).
pub fn process_noise_sigma(m: usize, cfg: &FilterConfig) -> Result<f64, FilterError> {
    if m == 0 {
        return Err(FilterError::ZeroMeasurementIndex);
    }
    Ok(cfg.process_noise_coeff * (m as f64).powf(cfg.process_noise_exponent))
}

/// Weighted particle set with its own seeded random stream.
#[derive(Debug, Clone)]
pub struct Ensemble {
    particles: Vec<Particle>,
    measurement_index: usize,
    rng: ChaCha12Rng,
}

impl Ensemble {
    /// Draw a fresh ensemble from the Gaussian prior: every component of
    /// every particle is an independent N(0, σ_prior²) sample, and all
    /// weights start at 1/N.
    pub fn from_prior(prior: &PriorConfig, seed: u64) -> Result<Self, FilterError> {
        if prior.n_theta < 2 {
            return Err(FilterError::TooFewParticles(prior.n_theta));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, prior.sigma_prior).expect("positive sigma");
        let w = 1.0 / prior.n_theta as f64;
        let particles = (0..prior.n_theta)
            .map(|_| Particle {
                theta: RotationVector::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                ),
                weight: w,
            })
            .collect();
        Ok(Ensemble {
            particles,
            measurement_index: 0,
            rng,
        })
    }

    /// Build an ensemble from explicit particles (e.g. pinned to a hypothesis
    /// grid for exact-posterior comparisons). Weights are normalized.
    pub fn from_particles(mut particles: Vec<Particle>, seed: u64) -> Result<Self, FilterError> {
        if particles.len() < 2 {
            return Err(FilterError::TooFewParticles(particles.len()));
        }
        let total: f64 = neumaier_sum(particles.iter().map(|p| p.weight));
        for p in &mut particles {
            p.weight /= total;
        }
        Ok(Ensemble {
            particles,
            measurement_index: 0,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Number of weight updates absorbed so far.
    pub fn measurement_index(&self) -> usize {
        self.measurement_index
    }

    /// Perturb every particle component with independent Gaussian process
    /// noise at the schedule value for the upcoming measurement. Weights are
    /// untouched.
    pub fn predict(&mut self, cfg: &FilterConfig) {
        let sigma = process_noise_sigma(self.measurement_index + 1, cfg)
            .expect("measurement_index + 1 >= 1");
        if sigma == 0.0 {
            return;
        }
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        for p in &mut self.particles {
            p.theta.x += normal.sample(&mut self.rng);
            p.theta.y += normal.sample(&mut self.rng);
            p.theta.z += normal.sample(&mut self.rng);
        }
    }

    /// Bayes update: multiply each weight by the likelihood of the observed
    /// Bell outcome under the particle's rotation, then renormalize.
    ///
    /// Fails with [`FilterError::DegenerateLikelihood`] when every weight
    /// vanishes — possible only for outcomes the model assigns probability
    /// zero, such as a Ψ⁻ observation under a pure-state (α = 0) model.
    pub fn update_weights(
        &mut self,
        prepared: BellKind,
        axis: &MeasurementAxis,
        observed: BellKind,
        alpha: f64,
    ) -> Result<(), FilterError> {
        let setting = MeasurementSetting::new(prepared, axis);
        self.update_weights_with(|theta| setting.probability(theta, observed, alpha))
    }

    /// Bayes update with an arbitrary per-particle likelihood.
    pub fn update_weights_with<F>(&mut self, likelihood: F) -> Result<(), FilterError>
    where
        F: Fn(&RotationVector) -> f64,
    {
        for p in &mut self.particles {
            p.weight *= likelihood(&p.theta);
        }
        let total = neumaier_sum(self.particles.iter().map(|p| p.weight));
        if total <= 0.0 || !total.is_finite() {
            return Err(FilterError::DegenerateLikelihood {
                measurement: self.measurement_index + 1,
            });
        }
        for p in &mut self.particles {
            p.weight /= total;
        }
        self.measurement_index += 1;
        Ok(())
    }

    /// Effective sample size 1/Σw²; ranges from 1 (one dominant particle) to
    /// N (uniform weights).
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / neumaier_sum(self.particles.iter().map(|p| p.weight * p.weight))
    }

    /// Multinomial resampling with defensive jitter.
    ///
    /// Each offspring is selected independently by inverting the cumulative
    /// weight distribution with a uniform draw, then perturbed by a zero-mean
    /// Gaussian whose covariance is `defensive_small_scale · Σ` with
    /// probability `defensive_small_prob` and the full pre-resampling
    /// weighted covariance `Σ` otherwise. Weights reset to 1/N.
    pub fn resample_defensive(&mut self, cfg: &FilterConfig) {
        let n = self.particles.len();
        let (_, covariance) = self.estimate();

        // Cholesky factors for the two jitter scales; a tiny ridge keeps a
        // collapsed cloud factorizable.
        let mut ridged = covariance;
        for (i, row) in ridged.iter_mut().enumerate() {
            row[i] += 1e-12;
        }
        let l_full = cholesky3(&ridged);
        let small = scale3(&ridged, cfg.defensive_small_scale);
        let l_small = cholesky3(&small);

        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for p in &self.particles {
            acc += p.weight;
            cumulative.push(acc);
        }

        let w = 1.0 / n as f64;
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut offspring = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = self.rng.gen();
            let idx = match cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) => i + 1,
                Err(i) => i,
            }
            .min(n - 1);
            let l = if self.rng.gen::<f64>() < cfg.defensive_small_prob {
                &l_small
            } else {
                &l_full
            };
            let z = [
                normal.sample(&mut self.rng),
                normal.sample(&mut self.rng),
                normal.sample(&mut self.rng),
            ];
            let base = self.particles[idx].theta;
            offspring.push(Particle {
                theta: RotationVector::new(
                    base.x + l[0][0] * z[0],
                    base.y + l[1][0] * z[0] + l[1][1] * z[1],
                    base.z + l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2],
                ),
                weight: w,
            });
        }
        self.particles = offspring;
    }

    /// Posterior summary: weighted mean and weighted covariance of the
    /// particle positions.
    pub fn estimate(&self) -> (RotationVector, [[f64; 3]; 3]) {
        let mut mean = [0.0; 3];
        for p in &self.particles {
            let t = p.theta.as_array();
            for (m, v) in mean.iter_mut().zip(t) {
                *m += p.weight * v;
            }
        }
        let mut cov = [[0.0; 3]; 3];
        for p in &self.particles {
            let t = p.theta.as_array();
            let d = [t[0] - mean[0], t[1] - mean[1], t[2] - mean[2]];
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += p.weight * d[i] * d[j];
                }
            }
        }
        (RotationVector::from_array(mean), cov)
    }

    /// Total weight; 1 within rounding after any successful update.
    pub fn weight_sum(&self) -> f64 {
        neumaier_sum(self.particles.iter().map(|p| p.weight))
    }
}

/// Compensated (Neumaier) summation; keeps weight normalization well below
/// the 1e-12 contract even for large ensembles.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn scale3(m: &[[f64; 3]; 3], s: f64) -> [[f64; 3]; 3] {
    let mut out = *m;
    for row in &mut out {
        for v in row {
            *v *= s;
        }
    }
    out
}

/// Lower Cholesky factor of a symmetric positive-definite 3x3 matrix.
fn cholesky3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for (x, y) in l[i][..j].iter().zip(&l[j][..j]) {
                s -= x * y;
            }
            if i == j {
                l[i][j] = s.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { s / l[j][j] } else { 0.0 };
            }
        }
    }
    l
}

// --- single-qubit baseline ---------------------------------------------

/// Per-axis Bernoulli counts for the cycling single-qubit scheme, indexed by
/// the measured spin axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleQubitTally {
    /// (n_plus, n_total) for measurements of σx, σy, σz respectively.
    pub counts: [(u64, u64); 3],
}

impl SingleQubitTally {
    pub fn record(&mut self, measured: Axis, plus: bool) {
        let slot = &mut self.counts[measured.index()];
        slot.1 += 1;
        if plus {
            slot.0 += 1;
        }
    }

    pub fn n_plus(&self, measured: Axis) -> u64 {
        self.counts[measured.index()].0
    }

    pub fn n_total(&self, measured: Axis) -> u64 {
        self.counts[measured.index()].1
    }
}

/// Probability of the +1/2 outcome when measuring the spin component
/// orthogonal to both the preparation axis and a rotation by `theta_rot`
/// about the estimated axis: (1 + sin θ)/2.
pub fn single_qubit_success_prob(theta_rot: f64) -> f64 {
    0.5 * (1.0 + theta_rot.sin())
}

/// Prepare/measure schedule for the m-th single-qubit measurement (m ≥ 1):
/// cycles (prepare z, measure x → θy), (x, y → θz), (y, z → θx).
pub fn single_qubit_cycle_schedule(m: usize) -> (Axis, Axis, Axis) {
    match (m - 1) % 3 {
        0 => (Axis::Z, Axis::X, Axis::Y),
        1 => (Axis::X, Axis::Y, Axis::Z),
        _ => (Axis::Y, Axis::Z, Axis::X),
    }
}

/// Which rotation component a measurement of `measured` spin estimates.
pub fn estimated_component(measured: Axis) -> Axis {
    match measured {
        Axis::X => Axis::Y,
        Axis::Y => Axis::Z,
        Axis::Z => Axis::X,
    }
}

/// Invert the tally into per-component angle estimates and variances.
///
/// Each component is arcsin(2n/N - 1) from the counts of the axis that
/// estimates it; the estimated variance simplifies to 1/N. Boundary counts
/// (n = 0 or n = N) clamp the arcsine argument just inside ±1.
pub fn single_qubit_estimate(
    tally: &SingleQubitTally,
) -> Result<(RotationVector, [f64; 3]), FilterError> {
    let mut estimates = [0.0; 3];
    let mut variances = [0.0; 3];
    for measured in Axis::ALL {
        let (n_plus, n_total) = tally.counts[measured.index()];
        if n_total == 0 {
            return Err(FilterError::EmptyTally(measured));
        }
        let ratio = (2.0 * n_plus as f64 / n_total as f64 - 1.0).clamp(-(1.0 - 1e-12), 1.0 - 1e-12);
        let component = estimated_component(measured);
        estimates[component.index()] = ratio.asin();
        variances[component.index()] = 1.0 / n_total as f64;
    }
    Ok((RotationVector::from_array(estimates), variances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{outcome_distribution, PHI_PLUS_AXIS};

    fn axis(pair: (f64, f64)) -> MeasurementAxis {
        MeasurementAxis::new(pair.0, pair.1).unwrap()
    }

    #[test]
    fn prior_ensemble_statistics() {
        let prior = PriorConfig {
            sigma_prior: 0.1745,
            n_theta: 1000,
        };
        let ens = Ensemble::from_prior(&prior, 99).unwrap();
        assert_eq!(ens.len(), 1000);
        for p in ens.particles() {
            assert_eq!(p.weight, 1.0 / 1000.0);
        }
        for comp in 0..3 {
            let vals: Vec<f64> = ens
                .particles()
                .iter()
                .map(|p| p.theta.as_array()[comp])
                .collect();
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
            let std = var.sqrt();
            assert!((0.15..0.20).contains(&std), "component {comp} std {std}");
        }
    }

    #[test]
    fn same_seed_same_ensemble() {
        let prior = PriorConfig::default();
        let a = Ensemble::from_prior(&prior, 1234).unwrap();
        let b = Ensemble::from_prior(&prior, 1234).unwrap();
        assert_eq!(a.particles(), b.particles());
    }

    #[test]
    fn prior_requires_two_particles() {
        let prior = PriorConfig {
            sigma_prior: 0.1,
            n_theta: 1,
        };
        assert!(matches!(
            Ensemble::from_prior(&prior, 0),
            Err(FilterError::TooFewParticles(1))
        ));
    }

    #[test]
    fn process_noise_schedule_values() {
        let cfg = FilterConfig::default();
        assert!((process_noise_sigma(1, &cfg).unwrap() - 0.1).abs() < 1e-15);
        assert!((process_noise_sigma(8, &cfg).unwrap() - 0.025).abs() < 1e-15);
        assert!((process_noise_sigma(1000, &cfg).unwrap() - 0.001).abs() < 1e-15);
        assert!(process_noise_sigma(0, &cfg).is_err());
    }

    #[test]
    fn predict_without_noise_is_identity() {
        let cfg = FilterConfig {
            process_noise_coeff: 0.0,
            ..FilterConfig::default()
        };
        let mut ens = Ensemble::from_prior(&PriorConfig::default(), 5).unwrap();
        let before = ens.particles().to_vec();
        ens.predict(&cfg);
        assert_eq!(before, ens.particles());
    }

    #[test]
    fn predict_noise_magnitude_and_weights() {
        let cfg = FilterConfig::default();
        let prior = PriorConfig {
            sigma_prior: 0.1745,
            n_theta: 100_000,
        };
        let mut ens = Ensemble::from_prior(&prior, 7).unwrap();
        let before: Vec<RotationVector> = ens.particles().iter().map(|p| p.theta).collect();
        let weights_before: Vec<f64> = ens.particles().iter().map(|p| p.weight).collect();
        ens.predict(&cfg);
        let sigma = process_noise_sigma(1, &cfg).unwrap();
        let deltas: Vec<f64> = ens
            .particles()
            .iter()
            .zip(&before)
            .flat_map(|(p, b)| [p.theta.x - b.x, p.theta.y - b.y, p.theta.z - b.z])
            .collect();
        let var = deltas.iter().map(|d| d * d).sum::<f64>() / deltas.len() as f64;
        assert!(
            (var.sqrt() - sigma).abs() / sigma < 0.02,
            "sample std {} vs σ {}",
            var.sqrt(),
            sigma
        );
        let weights_after: Vec<f64> = ens.particles().iter().map(|p| p.weight).collect();
        assert_eq!(weights_before, weights_after);
    }

    #[test]
    fn update_weights_normalizes_and_orders() {
        // Two particles with likelihoods 0.2 and 0.6 end at weights 0.25/0.75.
        let particles = vec![
            Particle {
                theta: RotationVector::new(1.0, 0.0, 0.0),
                weight: 0.5,
            },
            Particle {
                theta: RotationVector::new(2.0, 0.0, 0.0),
                weight: 0.5,
            },
        ];
        let mut ens = Ensemble::from_particles(particles, 0).unwrap();
        ens.update_weights_with(|theta| if theta.x < 1.5 { 0.2 } else { 0.6 })
            .unwrap();
        assert!((ens.particles()[0].weight - 0.25).abs() < 1e-15);
        assert!((ens.particles()[1].weight - 0.75).abs() < 1e-15);
        assert_eq!(ens.measurement_index(), 1);
    }

    #[test]
    fn update_gives_weight_to_better_matching_particle() {
        let truth = RotationVector::new(0.05, -0.02, 0.08);
        let ax = axis(PHI_PLUS_AXIS);
        let particles = vec![
            Particle {
                theta: truth,
                weight: 0.5,
            },
            Particle {
                theta: RotationVector::new(-0.4, 0.3, -0.2),
                weight: 0.5,
            },
        ];
        let dist = outcome_distribution(BellKind::PhiPlus, &truth, &ax, 0.0).unwrap();
        // Pick the most likely outcome under the truth.
        let observed = BellKind::ALL
            .into_iter()
            .max_by(|a, b| dist.get(*a).partial_cmp(&dist.get(*b)).unwrap())
            .unwrap();
        let far_likelihood = outcome_distribution(BellKind::PhiPlus, &particles[1].theta, &ax, 0.0)
            .unwrap()
            .get(observed);
        let mut ens = Ensemble::from_particles(particles, 0).unwrap();
        ens.update_weights(BellKind::PhiPlus, &ax, observed, 0.0)
            .unwrap();
        if dist.get(observed) > far_likelihood {
            assert!(ens.particles()[0].weight > ens.particles()[1].weight);
        }
    }

    #[test]
    fn psi_minus_under_pure_model_is_degenerate() {
        let mut ens = Ensemble::from_prior(&PriorConfig::default(), 3).unwrap();
        let err = ens
            .update_weights(
                BellKind::PhiPlus,
                &axis(PHI_PLUS_AXIS),
                BellKind::PsiMinus,
                0.0,
            )
            .unwrap_err();
        assert!(matches!(err, FilterError::DegenerateLikelihood { .. }));
    }

    #[test]
    fn psi_minus_with_mixing_is_uninformative_but_valid() {
        let mut ens = Ensemble::from_prior(&PriorConfig::default(), 3).unwrap();
        let before: Vec<f64> = ens.particles().iter().map(|p| p.weight).collect();
        ens.update_weights(
            BellKind::PhiPlus,
            &axis(PHI_PLUS_AXIS),
            BellKind::PsiMinus,
            0.02,
        )
        .unwrap();
        // Constant likelihood α/4: weights unchanged after renormalization.
        for (b, p) in before.iter().zip(ens.particles()) {
            assert!((b - p.weight).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_sum_stays_normalized() {
        let mut ens = Ensemble::from_prior(&PriorConfig::default(), 11).unwrap();
        let ax = axis(PHI_PLUS_AXIS);
        let cfg = FilterConfig::default();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let truth = RotationVector::new(0.03, -0.06, 0.02);
        for _ in 0..50 {
            ens.predict(&cfg);
            let dist = outcome_distribution(BellKind::PhiPlus, &truth, &ax, 0.0).unwrap();
            let observed = dist.sample(rng.gen());
            ens.update_weights(BellKind::PhiPlus, &ax, observed, 0.0)
                .unwrap();
            assert!((ens.weight_sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_sample_size_cases() {
        let uniform = Ensemble::from_prior(
            &PriorConfig {
                sigma_prior: 0.1,
                n_theta: 500,
            },
            0,
        )
        .unwrap();
        assert!((uniform.effective_sample_size() - 500.0).abs() < 1e-9);

        let mut skewed = vec![
            Particle {
                theta: RotationVector::ZERO,
                weight: 1.0,
            };
            4
        ];
        skewed[1].weight = 0.0;
        skewed[2].weight = 0.0;
        skewed[3].weight = 0.0;
        let ens = Ensemble::from_particles(skewed, 0).unwrap();
        assert!((ens.effective_sample_size() - 1.0).abs() < 1e-12);

        let two = vec![
            Particle {
                theta: RotationVector::ZERO,
                weight: 0.5,
            },
            Particle {
                theta: RotationVector::new(1.0, 0.0, 0.0),
                weight: 0.5,
            },
            Particle {
                theta: RotationVector::new(2.0, 0.0, 0.0),
                weight: 0.0,
            },
        ];
        let ens = Ensemble::from_particles(two, 0).unwrap();
        assert!((ens.effective_sample_size() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resample_resets_weights_and_clusters() {
        let mut particles = vec![
            Particle {
                theta: RotationVector::new(0.5, -0.5, 0.25),
                weight: 1.0,
            };
            200
        ];
        for p in particles.iter_mut().skip(1) {
            p.theta = RotationVector::new(-10.0, 10.0, -10.0);
            p.weight = 0.0;
        }
        let mut ens = Ensemble::from_particles(particles, 21).unwrap();
        ens.resample_defensive(&FilterConfig::default());
        for p in ens.particles() {
            assert_eq!(p.weight, 1.0 / 200.0);
            // Everything descends from the single weighted particle; the
            // covariance is ~0 so jitter is at the ridge scale.
            assert!((p.theta.x - 0.5).abs() < 1e-3);
            assert!((p.theta.y + 0.5).abs() < 1e-3);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn resample_preserves_mean_in_expectation() {
        let prior = PriorConfig {
            sigma_prior: 0.2,
            n_theta: 4000,
        };
        let mut failures = 0;
        for seed in 0..10 {
            let mut ens = Ensemble::from_prior(&prior, seed).unwrap();
            // Tilt the weights deterministically so resampling is non-trivial.
            ens.update_weights_with(|t| (1.0 + t.x).max(1e-6)).unwrap();
            let (before, cov) = ens.estimate();
            ens.resample_defensive(&FilterConfig::default());
            let (after, _) = ens.estimate();
            // Standard error of the resampled mean per component.
            for i in 0..3 {
                let se = (cov[i][i] / prior.n_theta as f64).sqrt() * (1.0 + 1.0);
                if (after.as_array()[i] - before.as_array()[i]).abs() > 3.0 * se {
                    failures += 1;
                }
            }
        }
        assert!(failures <= 2, "{failures} mean shifts beyond 3 SE of 30");
    }

    #[test]
    fn estimate_single_and_symmetric_pairs() {
        let single = vec![
            Particle {
                theta: RotationVector::new(0.1, 0.2, 0.3),
                weight: 1.0,
            },
            Particle {
                theta: RotationVector::new(0.1, 0.2, 0.3),
                weight: 0.0,
            },
        ];
        let (mean, cov) = Ensemble::from_particles(single, 0).unwrap().estimate();
        assert!((mean.x - 0.1).abs() < 1e-15);
        for row in cov {
            for v in row {
                assert!(v.abs() < 1e-15);
            }
        }

        let v = [0.2, -0.1, 0.4];
        let pair = vec![
            Particle {
                theta: RotationVector::from_array(v),
                weight: 0.5,
            },
            Particle {
                theta: RotationVector::new(-v[0], -v[1], -v[2]),
                weight: 0.5,
            },
        ];
        let (mean, cov) = Ensemble::from_particles(pair, 0).unwrap().estimate();
        assert!(mean.norm() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                assert!((cov[i][j] - v[i] * v[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn prior_covariance_matches_sigma() {
        let prior = PriorConfig {
            sigma_prior: 0.1745,
            n_theta: 100_000,
        };
        let ens = Ensemble::from_prior(&prior, 17).unwrap();
        let (_, cov) = ens.estimate();
        let want = prior.sigma_prior * prior.sigma_prior;
        for i in 0..3 {
            assert!(
                (cov[i][i] - want).abs() / want < 0.03,
                "diag {} vs {}",
                cov[i][i],
                want
            );
            for j in 0..3 {
                if i != j {
                    assert!(cov[i][j].abs() < 0.03 * want);
                }
            }
        }
    }

    #[test]
    fn success_prob_values() {
        assert!((single_qubit_success_prob(0.0) - 0.5).abs() < 1e-15);
        assert!((single_qubit_success_prob(std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert!((single_qubit_success_prob(0.1) - 0.549917).abs() < 1e-6);
    }

    #[test]
    fn cycle_schedule() {
        assert_eq!(single_qubit_cycle_schedule(1), (Axis::Z, Axis::X, Axis::Y));
        assert_eq!(single_qubit_cycle_schedule(2), (Axis::X, Axis::Y, Axis::Z));
        assert_eq!(single_qubit_cycle_schedule(3), (Axis::Y, Axis::Z, Axis::X));
        assert_eq!(single_qubit_cycle_schedule(4), (Axis::Z, Axis::X, Axis::Y));
    }

    #[test]
    fn arcsin_estimator_cases() {
        let mut tally = SingleQubitTally::default();
        for axis in Axis::ALL {
            for i in 0..100 {
                tally.record(axis, i < 50);
            }
        }
        let (est, var) = single_qubit_estimate(&tally).unwrap();
        assert!(est.norm() < 1e-12);
        for v in var {
            assert!((v - 0.01).abs() < 1e-15);
        }

        let mut extreme = SingleQubitTally::default();
        for axis in Axis::ALL {
            for _ in 0..10 {
                extreme.record(axis, true);
            }
        }
        let (est, _) = single_qubit_estimate(&extreme).unwrap();
        // All-plus counts clamp just below π/2.
        assert!(est.y <= std::f64::consts::FRAC_PI_2);
        assert!(est.y > std::f64::consts::FRAC_PI_2 - 1e-5);

        assert!(single_qubit_estimate(&SingleQubitTally::default()).is_err());
    }

    #[test]
    fn empirical_variance_matches_one_over_n() {
        // Var(arcsin(2 p̂ - 1)) ≈ 1/N for moderate angles.
        let n = 10_000u64;
        let repeats = 400;
        let mut rng = ChaCha12Rng::seed_from_u64(71);
        for theta in [0.0, 0.05, 0.1] {
            let p = single_qubit_success_prob(theta);
            let mut estimates = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let mut plus = 0u64;
                for _ in 0..n {
                    if rng.gen::<f64>() < p {
                        plus += 1;
                    }
                }
                let ratio = (2.0 * plus as f64 / n as f64 - 1.0).clamp(-(1.0 - 1e-12), 1.0 - 1e-12);
                estimates.push(ratio.asin());
            }
            let mean: f64 = estimates.iter().sum::<f64>() / repeats as f64;
            let var: f64 = estimates
                .iter()
                .map(|e| (e - mean) * (e - mean))
                .sum::<f64>()
                / (repeats - 1) as f64;
            let expected = 1.0 / n as f64;
            assert!(
                (var - expected).abs() / expected < 0.15,
                "θ={theta}: var {var:.3e} vs 1/N {expected:.3e}"
            );
        }
    }
}
