//! Seeded Monte Carlo campaigns comparing the Bell-pair and single-qubit
//! estimation schemes at equal resource budgets.
//!
//! Each run draws an unknown true rotation, streams simulated measurements
//! into the configured estimator, and records the total angular error
//! (Euclidean norm of the three component errors) on a fixed resource grid.
//! Campaigns aggregate many runs into per-checkpoint means and standard
//! deviations — the data behind error-versus-resources curves and
//! mixing-fraction sweeps.
//!
//! The estimators model the preparations as pure states: outcomes are
//! sampled from the mixed-state distribution at the configured `alpha`, but
//! weight updates use the α = 0 likelihood, the way a deployed filter that
//! does not know the decoherence level would run. For Bell runs this makes a
//! Ψ⁻ observation (probability α/4 per measurement) a model-impossible
//! event: the update degenerates and the run restarts from the prior, which
//! is exactly the mechanism that erodes the entangled scheme's advantage as
//! mixing grows while the single-qubit scheme barely notices.
//!
//! Everything is a pure function of (config, master seed): per-run seeds are
//! derived by hashing, runs execute in parallel, and aggregation sorts by
//! run index.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bell::{
    outcome_distribution, BellError, MeasurementAxis, MeasurementSetting, OutcomeDistribution,
    PHI_MINUS_AXIS, PHI_PLUS_AXIS,
};
use crate::estimator::{
    estimated_component, single_qubit_cycle_schedule, single_qubit_estimate,
    single_qubit_success_prob, Ensemble, FilterConfig, FilterError, PriorConfig, SingleQubitTally,
};
use crate::linalg::{pauli, Axis, BellKind, ComplexMatrix, DensityMatrix, RotationVector};

/// Which estimation scheme a campaign runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Particle filter over Bell-measurement outcomes.
    BellPf,
    /// Cycling single-qubit scheme with the closed-form arcsine estimator.
    SingleQubitAnalytic,
    /// Cycling single-qubit scheme feeding a particle filter.
    SingleQubitPf,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::BellPf => "bell_pf",
            EstimatorKind::SingleQubitAnalytic => "single_qubit_analytic",
            EstimatorKind::SingleQubitPf => "single_qubit_pf",
        }
    }

    pub fn is_single_qubit(self) -> bool {
        matches!(
            self,
            EstimatorKind::SingleQubitAnalytic | EstimatorKind::SingleQubitPf
        )
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bell_pf" => Ok(EstimatorKind::BellPf),
            "single_qubit_analytic" => Ok(EstimatorKind::SingleQubitAnalytic),
            "single_qubit_pf" => Ok(EstimatorKind::SingleQubitPf),
            other => Err(format!(
                "unknown estimator '{other}' (expected bell_pf, single_qubit_analytic or single_qubit_pf)"
            )),
        }
    }
}

/// How the resource ledger charges each measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceMode {
    /// Count elementary systems: 2 per Bell pair, 1 per single qubit.
    QubitCount,
    /// Charge the generator-trace value of the prepared state (1 per Φ±
    /// pair, 1 per single qubit). Kept as an alternative accounting; it is
    /// not equivalent to qubit counting and the two are deliberately not
    /// reconciled.
    TraceFormula,
}

impl ResourceMode {
    pub fn label(self) -> &'static str {
        match self {
            ResourceMode::QubitCount => "qubit_count",
            ResourceMode::TraceFormula => "trace_formula",
        }
    }
}

impl std::str::FromStr for ResourceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qubit_count" => Ok(ResourceMode::QubitCount),
            "trace_formula" => Ok(ResourceMode::TraceFormula),
            other => Err(format!(
                "unknown resource mode '{other}' (expected qubit_count or trace_formula)"
            )),
        }
    }
}

/// Full description of a campaign; a campaign is a pure function of this
/// struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub estimator: EstimatorKind,
    pub n_runs: usize,
    pub max_resources: u64,
    pub alpha: f64,
    /// Standard deviation of each true rotation component, radians.
    pub truth_sigma: f64,
    pub prior: PriorConfig,
    pub filter: FilterConfig,
    pub resource_mode: ResourceMode,
    pub master_seed: u64,
    /// Record an error checkpoint every this many resource units.
    pub record_stride: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            estimator: EstimatorKind::BellPf,
            n_runs: 100,
            max_resources: 4000,
            alpha: 0.0,
            truth_sigma: 0.0873,
            prior: PriorConfig::default(),
            filter: FilterConfig::default(),
            resource_mode: ResourceMode::QubitCount,
            master_seed: 0,
            record_stride: 80,
        }
    }
}

/// Errors from config parsing and validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid value for '{key}': {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("malformed line {line}: expected 'key = value', got '{text}'")]
    MalformedLine { line: usize, text: String },
    #[error("config constraint violated: {0}")]
    Constraint(String),
}

/// Errors from running campaigns.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bell(#[from] BellError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("run records do not share a checkpoint grid (run {0} differs)")]
    MismatchedCheckpoints(usize),
    #[error("no run records to aggregate")]
    NoRecords,
}

impl ExperimentConfig {
    /// Parse the plain-text key-value config format: one `key = value` per
    /// line, `#` comments, nested fields as dotted keys. Unknown keys are
    /// errors; missing keys take defaults.
    pub fn from_key_values(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut unknown = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::MalformedLine {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let invalid = |reason: String| ConfigError::InvalidValue {
                key: key.to_string(),
                reason,
            };
            match key {
                "estimator" => cfg.estimator = value.parse().map_err(invalid)?,
                "n_runs" => cfg.n_runs = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "max_resources" => {
                    cfg.max_resources = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "alpha" => cfg.alpha = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "truth_sigma" => {
                    cfg.truth_sigma = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "prior.sigma_prior" => {
                    cfg.prior.sigma_prior = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "prior.n_theta" => {
                    cfg.prior.n_theta = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "filter.resample_threshold_fraction" => {
                    cfg.filter.resample_threshold_fraction =
                        value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "filter.defensive_small_scale" => {
                    cfg.filter.defensive_small_scale =
                        value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "filter.defensive_small_prob" => {
                    cfg.filter.defensive_small_prob =
                        value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "filter.process_noise_coeff" => {
                    cfg.filter.process_noise_coeff =
                        value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "filter.process_noise_exponent" => {
                    cfg.filter.process_noise_exponent =
                        value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "resource_mode" => cfg.resource_mode = value.parse().map_err(invalid)?,
                "master_seed" => {
                    cfg.master_seed = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "record_stride" => {
                    cfg.record_stride = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                other => unknown.push(other.to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Render back to the key-value format; parses to an equal config.
    pub fn to_key_values(&self) -> String {
        format!(
            "estimator = {}\n\
             n_runs = {}\n\
             max_resources = {}\n\
             alpha = {}\n\
             truth_sigma = {}\n\
             prior.sigma_prior = {}\n\
             prior.n_theta = {}\n\
             filter.resample_threshold_fraction = {}\n\
             filter.defensive_small_scale = {}\n\
             filter.defensive_small_prob = {}\n\
             filter.process_noise_coeff = {}\n\
             filter.process_noise_exponent = {}\n\
             resource_mode = {}\n\
             master_seed = {}\n\
             record_stride = {}\n",
            self.estimator.label(),
            self.n_runs,
            self.max_resources,
            self.alpha,
            self.truth_sigma,
            self.prior.sigma_prior,
            self.prior.n_theta,
            self.filter.resample_threshold_fraction,
            self.filter.defensive_small_scale,
            self.filter.defensive_small_prob,
            self.filter.process_noise_coeff,
            self.filter.process_noise_exponent,
            self.resource_mode.label(),
            self.master_seed,
            self.record_stride,
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Constraint(msg));
        if self.n_runs < 1 {
            return fail("n_runs must be at least 1".into());
        }
        if self.max_resources < 2 {
            return fail("max_resources must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if self.truth_sigma <= 0.0 {
            return fail("truth_sigma must be positive".into());
        }
        if self.prior.sigma_prior <= 0.0 {
            return fail("prior.sigma_prior must be positive".into());
        }
        if self.prior.n_theta < 2 {
            return fail("prior.n_theta must be at least 2".into());
        }
        if self.record_stride < 1 {
            return fail("record_stride must be at least 1".into());
        }
        let f = &self.filter;
        if !(f.resample_threshold_fraction > 0.0 && f.resample_threshold_fraction <= 1.0) {
            return fail("filter.resample_threshold_fraction must be in (0, 1]".into());
        }
        if !(f.defensive_small_prob > 0.0 && f.defensive_small_prob <= 1.0) {
            return fail("filter.defensive_small_prob must be in (0, 1]".into());
        }
        if f.defensive_small_scale <= 0.0 {
            return fail("filter.defensive_small_scale must be positive".into());
        }
        if f.process_noise_coeff < 0.0 {
            return fail("filter.process_noise_coeff must be non-negative".into());
        }
        Ok(())
    }
}

/// Monotone count of elementary quantum systems consumed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLedger {
    total: u64,
}

impl ResourceLedger {
    pub fn new() -> Self {
        ResourceLedger::default()
    }

    pub fn charge(&mut self, units: u64) {
        self.total += units;
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// State of a run at one resource checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub resources: u64,
    pub estimate: RotationVector,
    pub truth: RotationVector,
    /// Euclidean norm of the three component errors.
    pub total_error: f64,
    /// Per-component absolute errors (x, y, z).
    pub component_errors: [f64; 3],
}

impl Checkpoint {
    fn new(resources: u64, estimate: RotationVector, truth: RotationVector) -> Self {
        let diff = [
            estimate.x - truth.x,
            estimate.y - truth.y,
            estimate.z - truth.z,
        ];
        Checkpoint {
            resources,
            estimate,
            truth,
            total_error: diff.iter().map(|d| d * d).sum::<f64>().sqrt(),
            component_errors: diff.map(f64::abs),
        }
    }
}

/// One seeded run: the truth it drew, its checkpoints, and how many times the
/// filter had to restart from the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    pub truth: RotationVector,
    pub checkpoints: Vec<Checkpoint>,
    pub restarts: u32,
}

/// Per-checkpoint statistics across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCheckpoint {
    pub resources: u64,
    pub mean_error: f64,
    pub std_error: f64,
}

/// Aggregated campaign curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub checkpoints: Vec<AggregateCheckpoint>,
    pub n_runs: usize,
}

/// Campaign output: every run plus the aggregate curve.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignResult {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub aggregate: AggregateResult,
    /// Total filter restarts across all runs.
    pub total_restarts: u64,
}

/// Derive a per-run seed from the master seed; splitmix64 over the pair so
/// neighbouring run indices get unrelated streams.
pub fn derive_run_seed(master_seed: u64, run_index: u64) -> u64 {
    let mut z =
        master_seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(run_index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generator-trace resource value of a two-qubit state:
/// Σ_j tr(ρ · σ_j ⊗ σ_j) over j = x, y, z.
///
/// Pure Φ± and Ψ⁺ give 1, the singlet gives -3, and the maximally mixed
/// state gives 0 — which is why this quantity is exposed for inspection but
/// does not drive the default ledger.
pub fn resource_trace_formula(state: &DensityMatrix) -> f64 {
    assert_eq!(state.dim(), 4, "trace formula is for two-qubit states");
    Axis::ALL
        .iter()
        .map(|&axis| {
            let s = pauli(axis);
            s.kron(&s).mul(state.matrix()).trace().re
        })
        .sum()
}

/// Resource units charged per Bell-pair measurement under the given mode.
fn bell_measurement_cost(mode: ResourceMode, prepared: BellKind) -> u64 {
    match mode {
        ResourceMode::QubitCount => 2,
        ResourceMode::TraceFormula => {
            let state = crate::linalg::bell_state(prepared, &ComplexMatrix::identity(2))
                .expect("identity frame is unitary");
            resource_trace_formula(&DensityMatrix::pure(&state)).round() as u64
        }
    }
}

/// The alternating Bell schedule: odd measurements prepare Φ⁺ and measure
/// along [`PHI_PLUS_AXIS`], even measurements prepare Φ⁻ and measure along
/// [`PHI_MINUS_AXIS`].
pub fn bell_schedule(m: usize) -> (BellKind, MeasurementAxis) {
    if m % 2 == 1 {
        (
            BellKind::PhiPlus,
            MeasurementAxis::new(PHI_PLUS_AXIS.0, PHI_PLUS_AXIS.1).expect("in range"),
        )
    } else {
        (
            BellKind::PhiMinus,
            MeasurementAxis::new(PHI_MINUS_AXIS.0, PHI_MINUS_AXIS.1).expect("in range"),
        )
    }
}

fn draw_truth(rng: &mut ChaCha12Rng, sigma: f64) -> RotationVector {
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    RotationVector::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
}

/// Filter-health check for the small-rotation regime.
///
/// The estimand is bounded to |component| < π/2 and the prior pins the
/// plausible scale, so an ensemble whose mean leaves the domain or whose
/// spread grows past twice the prior width has been captured by a spurious
/// likelihood basin; left alone, the defensive jitter then inflates the
/// cloud without bound (selection no longer contracts what jitter adds).
/// Such an ensemble is failed and the run restarts from the prior, exactly
/// like a degenerate weight update.
fn ensemble_diverged(ensemble: &Ensemble, prior_sigma: f64) -> bool {
    let (mean, cov) = ensemble.estimate();
    let max_component = mean.x.abs().max(mean.y.abs()).max(mean.z.abs());
    let spread_sq = cov[0][0] + cov[1][1] + cov[2][2];
    max_component >= std::f64::consts::FRAC_PI_2
        || spread_sq > 12.0 * prior_sigma * prior_sigma
        || !spread_sq.is_finite()
}

/// Resource values at which checkpoints are recorded.
fn checkpoint_grid(cfg: &ExperimentConfig) -> Vec<u64> {
    (1..=cfg.max_resources / cfg.record_stride)
        .map(|k| k * cfg.record_stride)
        .collect()
}

/// One seeded Bell-pair run: alternate Φ⁺/Φ⁻ preparations, filter the
/// outcome stream, restart from the prior on degenerate updates.
pub fn run_bell_trial(
    cfg: &ExperimentConfig,
    run_index: usize,
) -> Result<RunRecord, ExperimentError> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_run_seed(cfg.master_seed, run_index as u64));
    let truth = draw_truth(&mut rng, cfg.truth_sigma);
    let mut ensemble = Ensemble::from_prior(&cfg.prior, rng.next_u64())?;

    // The two measurement settings and the true outcome distributions are
    // fixed for the whole run.
    let settings: [(BellKind, MeasurementAxis, OutcomeDistribution, u64); 2] = {
        let mut out = Vec::with_capacity(2);
        for m in [1usize, 2] {
            let (prepared, axis) = bell_schedule(m);
            let dist = outcome_distribution(prepared, &truth, &axis, cfg.alpha)?;
            out.push((
                prepared,
                axis,
                dist,
                bell_measurement_cost(cfg.resource_mode, prepared),
            ));
        }
        [out[0], out[1]]
    };
    let likelihoods = [
        MeasurementSetting::new(settings[0].0, &settings[0].1),
        MeasurementSetting::new(settings[1].0, &settings[1].1),
    ];

    let grid = checkpoint_grid(cfg);
    let mut next_checkpoint = 0usize;
    let mut checkpoints = Vec::with_capacity(grid.len());
    let mut ledger = ResourceLedger::new();
    let mut restarts = 0u32;
    let threshold = cfg.filter.resample_threshold_fraction * cfg.prior.n_theta as f64;

    let mut m = 0usize;
    while ledger.total() < cfg.max_resources {
        m += 1;
        let slot = (m + 1) % 2; // odd m -> settings[0]
        let (_, _, ref true_dist, cost) = settings[slot];
        let setting = &likelihoods[slot];

        ensemble.predict(&cfg.filter);
        let observed = true_dist.sample(rng.gen::<f64>());
        // The filter models pure preparations: likelihoods at α = 0.
        match ensemble.update_weights_with(|theta| setting.probability(theta, observed, 0.0)) {
            Ok(()) => {
                if ensemble.effective_sample_size() < threshold {
                    ensemble.resample_defensive(&cfg.filter);
                    if ensemble_diverged(&ensemble, cfg.prior.sigma_prior) {
                        restarts += 1;
                        ensemble = Ensemble::from_prior(&cfg.prior, rng.next_u64())?;
                    }
                }
            }
            Err(FilterError::DegenerateLikelihood { .. }) => {
                restarts += 1;
                ensemble = Ensemble::from_prior(&cfg.prior, rng.next_u64())?;
            }
            Err(other) => return Err(other.into()),
        }

        ledger.charge(cost);
        while next_checkpoint < grid.len() && grid[next_checkpoint] <= ledger.total() {
            let (estimate, _) = ensemble.estimate();
            checkpoints.push(Checkpoint::new(grid[next_checkpoint], estimate, truth));
            next_checkpoint += 1;
        }
    }

    Ok(RunRecord {
        run_index,
        truth,
        checkpoints,
        restarts,
    })
}

/// One seeded single-qubit run through the cycling prepare/measure schedule,
/// with either the arcsine estimator or a particle filter.
pub fn run_single_qubit_trial(
    cfg: &ExperimentConfig,
    run_index: usize,
) -> Result<RunRecord, ExperimentError> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_run_seed(cfg.master_seed, run_index as u64));
    let truth = draw_truth(&mut rng, cfg.truth_sigma);
    let use_filter = cfg.estimator == EstimatorKind::SingleQubitPf;
    let mut ensemble = if use_filter {
        Some(Ensemble::from_prior(&cfg.prior, rng.next_u64())?)
    } else {
        None
    };
    let mut tally = SingleQubitTally::default();

    let grid = checkpoint_grid(cfg);
    let mut next_checkpoint = 0usize;
    let mut checkpoints = Vec::with_capacity(grid.len());
    let mut ledger = ResourceLedger::new();
    let mut restarts = 0u32;
    let threshold = cfg.filter.resample_threshold_fraction * cfg.prior.n_theta as f64;

    let mut m = 0usize;
    while ledger.total() < cfg.max_resources {
        m += 1;
        let (_prepare, measure, estimated) = single_qubit_cycle_schedule(m);
        debug_assert_eq!(estimated, estimated_component(measure));

        // Mixing a single qubit with I/2 flattens the Bernoulli probability
        // towards 1/2.
        let p_pure = single_qubit_success_prob(truth.component(estimated));
        let p_true = (1.0 - cfg.alpha) * p_pure + cfg.alpha / 2.0;
        let plus = rng.gen::<f64>() < p_true;
        tally.record(measure, plus);

        if let Some(ens) = ensemble.as_mut() {
            ens.predict(&cfg.filter);
            // Pure-state Bernoulli likelihood of the observed eigenvalue.
            ens.update_weights_with(|theta| {
                let p = single_qubit_success_prob(theta.component(estimated));
                if plus {
                    p
                } else {
                    1.0 - p
                }
            })?;
            if ens.effective_sample_size() < threshold {
                ens.resample_defensive(&cfg.filter);
                if ensemble_diverged(ens, cfg.prior.sigma_prior) {
                    restarts += 1;
                    *ens = Ensemble::from_prior(&cfg.prior, rng.next_u64())?;
                }
            }
        }

        ledger.charge(1);
        while next_checkpoint < grid.len() && grid[next_checkpoint] <= ledger.total() {
            let estimate = match ensemble.as_ref() {
                Some(ens) => ens.estimate().0,
                None => arcsin_estimate_or_zero(&tally),
            };
            checkpoints.push(Checkpoint::new(grid[next_checkpoint], estimate, truth));
            next_checkpoint += 1;
        }
    }

    Ok(RunRecord {
        run_index,
        truth,
        checkpoints,
        restarts,
    })
}

/// Arcsine estimate with the prior mean (zero) standing in for any component
/// whose axis has not been measured yet; only reachable when the record
/// stride is below one full prepare/measure cycle.
fn arcsin_estimate_or_zero(tally: &SingleQubitTally) -> RotationVector {
    match single_qubit_estimate(tally) {
        Ok((estimate, _)) => estimate,
        Err(_) => {
            let mut partial = *tally;
            for axis in Axis::ALL {
                if partial.n_total(axis) == 0 {
                    partial.record(axis, false);
                    partial.record(axis, true);
                }
            }
            single_qubit_estimate(&partial)
                .map(|(e, _)| e)
                .unwrap_or(RotationVector::ZERO)
        }
    }
}

/// Run one trial of whichever estimator the config selects.
pub fn run_trial(cfg: &ExperimentConfig, run_index: usize) -> Result<RunRecord, ExperimentError> {
    match cfg.estimator {
        EstimatorKind::BellPf => run_bell_trial(cfg, run_index),
        EstimatorKind::SingleQubitAnalytic | EstimatorKind::SingleQubitPf => {
            run_single_qubit_trial(cfg, run_index)
        }
    }
}

/// Per-checkpoint mean and standard deviation (population) of total angular
/// error across runs. All records must share the same checkpoint grid.
///
/// Summation follows run-index order regardless of how the slice is
/// arranged, so the result is independent of scheduling.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateResult, ExperimentError> {
    let first = records.first().ok_or(ExperimentError::NoRecords)?;
    let grid: Vec<u64> = first.checkpoints.iter().map(|c| c.resources).collect();
    for r in records {
        let same = r.checkpoints.len() == grid.len()
            && r.checkpoints
                .iter()
                .zip(&grid)
                .all(|(c, g)| c.resources == *g);
        if !same {
            return Err(ExperimentError::MismatchedCheckpoints(r.run_index));
        }
    }
    let mut ordered: Vec<&RunRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.run_index);
    let n = ordered.len() as f64;
    let checkpoints = grid
        .iter()
        .enumerate()
        .map(|(i, &resources)| {
            let mean = ordered
                .iter()
                .map(|r| r.checkpoints[i].total_error)
                .sum::<f64>()
                / n;
            let var = ordered
                .iter()
                .map(|r| {
                    let d = r.checkpoints[i].total_error - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            AggregateCheckpoint {
                resources,
                mean_error: mean,
                std_error: var.sqrt(),
            }
        })
        .collect();
    Ok(AggregateResult {
        checkpoints,
        n_runs: ordered.len(),
    })
}

/// Run a full campaign: `n_runs` independent seeded trials in parallel,
/// aggregated in run-index order.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult, ExperimentError> {
    cfg.validate()?;
    let mut records = (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| r.run_index);
    let aggregate = aggregate(&records)?;
    let total_restarts = records.iter().map(|r| r.restarts as u64).sum();
    Ok(CampaignResult {
        config: cfg.clone(),
        records,
        aggregate,
        total_restarts,
    })
}

/// One row of a mixing sweep: final-checkpoint statistics for an estimator
/// at one mixing fraction.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub estimator: EstimatorKind,
    pub resources: u64,
    pub mean_error: f64,
    pub std_error: f64,
    pub n_runs: usize,
    pub total_restarts: u64,
}

/// Sweep the mixing fraction for the Bell filter and the single-qubit
/// comparator, reporting final-checkpoint errors per (α, estimator) cell.
///
/// The comparator is the configured single-qubit estimator kind, or the
/// analytic one when the config selects `bell_pf`.
pub fn alpha_sweep(
    cfg: &ExperimentConfig,
    alphas: &[f64],
) -> Result<Vec<SweepRow>, ExperimentError> {
    cfg.validate()?;
    let single_kind = if cfg.estimator.is_single_qubit() {
        cfg.estimator
    } else {
        EstimatorKind::SingleQubitAnalytic
    };
    let mut rows = Vec::with_capacity(alphas.len() * 2);
    for (cell, &alpha) in alphas
        .iter()
        .flat_map(|a| [(EstimatorKind::BellPf, a), (single_kind, a)])
        .enumerate()
        .map(|(i, (kind, a))| ((i, kind), a))
    {
        let (cell_index, estimator) = cell;
        let mut cell_cfg = cfg.clone();
        cell_cfg.estimator = estimator;
        cell_cfg.alpha = alpha;
        cell_cfg.master_seed = derive_run_seed(cfg.master_seed, cell_index as u64);
        let result = run_campaign(&cell_cfg)?;
        let last = result
            .aggregate
            .checkpoints
            .last()
            .ok_or(ExperimentError::NoRecords)?;
        rows.push(SweepRow {
            alpha,
            estimator,
            resources: last.resources,
            mean_error: last.mean_error,
            std_error: last.std_error,
            n_runs: result.aggregate.n_runs,
            total_restarts: result.total_restarts,
        });
    }
    Ok(rows)
}

// --- results files -------------------------------------------------------

/// Flat CSV of an aggregate curve:
/// `resources,mean_error_rad,std_error_rad,estimator,alpha,n_runs`.
pub fn write_campaign_csv<W: std::io::Write>(
    mut w: W,
    result: &CampaignResult,
) -> std::io::Result<()> {
    writeln!(
        w,
        "resources,mean_error_rad,std_error_rad,estimator,alpha,n_runs"
    )?;
    for c in &result.aggregate.checkpoints {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            c.resources,
            crate::fmt_sig9(c.mean_error),
            crate::fmt_sig9(c.std_error),
            result.config.estimator.label(),
            crate::fmt_sig9(result.config.alpha),
            result.aggregate.n_runs,
        )?;
    }
    Ok(())
}

/// Same flat schema for sweep rows (one row per (α, estimator) cell).
pub fn write_sweep_csv<W: std::io::Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "resources,mean_error_rad,std_error_rad,estimator,alpha,n_runs"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.resources,
            crate::fmt_sig9(r.mean_error),
            crate::fmt_sig9(r.std_error),
            r.estimator.label(),
            crate::fmt_sig9(r.alpha),
            r.n_runs,
        )?;
    }
    Ok(())
}

/// JSON report: artifact version, full config echo, aggregate curve, and
/// (optionally) every run record.
pub fn campaign_json(result: &CampaignResult, include_runs: bool) -> serde_json::Value {
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": result.config,
        "master_seed": result.config.master_seed,
        "total_restarts": result.total_restarts,
        "aggregate": result.aggregate,
        "runs": if include_runs {
            serde_json::to_value(&result.records).expect("records serialize")
        } else {
            serde_json::Value::Null
        },
    })
}

/// JSON report for a sweep.
pub fn sweep_json(cfg: &ExperimentConfig, rows: &[SweepRow]) -> serde_json::Value {
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "master_seed": cfg.master_seed,
        "rows": rows,
    })
}

/// Write bytes to `path` atomically: write a sibling temp file, then rename
/// over the target so interrupted writes never leave partial output.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = match path.file_name() {
        Some(name) => {
            let mut n = name.to_os_string();
            n.push(".tmp");
            path.with_file_name(n)
        }
        None => {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "output path has no file name",
            ))
        }
    };
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::bell_state;

    fn small_cfg(estimator: EstimatorKind) -> ExperimentConfig {
        ExperimentConfig {
            estimator,
            n_runs: 4,
            max_resources: 240,
            record_stride: 80,
            prior: PriorConfig {
                sigma_prior: 0.1745,
                n_theta: 100,
            },
            master_seed: 7,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn trace_formula_values() {
        let id = ComplexMatrix::identity(2);
        let phi = DensityMatrix::pure(&bell_state(BellKind::PhiPlus, &id).unwrap());
        assert!((resource_trace_formula(&phi) - 1.0).abs() < 1e-12);
        let singlet = DensityMatrix::pure(&bell_state(BellKind::PsiMinus, &id).unwrap());
        assert!((resource_trace_formula(&singlet) + 3.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!(resource_trace_formula(&mixed).abs() < 1e-12);
    }

    #[test]
    fn seed_derivation_spreads() {
        let a = derive_run_seed(42, 0);
        let b = derive_run_seed(42, 1);
        let c = derive_run_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_run_seed(42, 0));
    }

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig {
            estimator: EstimatorKind::SingleQubitPf,
            n_runs: 17,
            max_resources: 1234,
            alpha: 0.015,
            master_seed: 99,
            ..ExperimentConfig::default()
        };
        let parsed = ExperimentConfig::from_key_values(&cfg.to_key_values()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = ExperimentConfig::from_key_values("n_runs = 3\nbogus_key = 1\nother = x\n")
            .unwrap_err();
        match err {
            ConfigError::UnknownKeys(keys) => {
                assert_eq!(keys, vec!["bogus_key".to_string(), "other".to_string()]);
            }
            other => panic!("expected UnknownKeys, got {other}"),
        }
    }

    #[test]
    fn config_accepts_comments_and_defaults() {
        let cfg =
            ExperimentConfig::from_key_values("# a comment\n\nn_runs = 5 # trailing comment\n")
                .unwrap();
        assert_eq!(cfg.n_runs, 5);
        assert_eq!(cfg.estimator, EstimatorKind::BellPf);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(ExperimentConfig::from_key_values("alpha = 1.5\n").is_err());
        assert!(ExperimentConfig::from_key_values("estimator = kalman\n").is_err());
        assert!(ExperimentConfig::from_key_values("n_runs zero\n").is_err());
    }

    #[test]
    fn bell_trial_is_deterministic() {
        let cfg = small_cfg(EstimatorKind::BellPf);
        let a = run_bell_trial(&cfg, 3).unwrap();
        let b = run_bell_trial(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = run_bell_trial(&cfg, 4).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn bell_ledger_charges_two_per_measurement() {
        let cfg = small_cfg(EstimatorKind::BellPf);
        let record = run_bell_trial(&cfg, 0).unwrap();
        let grid: Vec<u64> = record.checkpoints.iter().map(|c| c.resources).collect();
        assert_eq!(grid, vec![80, 160, 240]);
    }

    #[test]
    fn single_qubit_trial_checkpoints() {
        let cfg = small_cfg(EstimatorKind::SingleQubitAnalytic);
        let record = run_single_qubit_trial(&cfg, 1).unwrap();
        assert_eq!(record.checkpoints.len(), 3);
        assert_eq!(record.restarts, 0);
        // 240 measurements -> 80 per measured axis; estimates are finite.
        for c in &record.checkpoints {
            assert!(c.total_error.is_finite());
        }
    }

    #[test]
    fn no_psi_minus_restarts_when_pure() {
        let cfg = ExperimentConfig {
            n_runs: 6,
            ..small_cfg(EstimatorKind::BellPf)
        };
        let result = run_campaign(&cfg).unwrap();
        assert_eq!(result.total_restarts, 0);
    }

    #[test]
    fn mixing_produces_restarts() {
        let cfg = ExperimentConfig {
            alpha: 0.2,
            n_runs: 4,
            max_resources: 400,
            ..small_cfg(EstimatorKind::BellPf)
        };
        // At α = 0.2 a Ψ⁻ arrives on average every 20 measurements.
        let result = run_campaign(&cfg).unwrap();
        assert!(result.total_restarts > 0, "expected prior restarts");
    }

    #[test]
    fn aggregate_statistics() {
        let mk = |run_index: usize, errors: &[f64]| RunRecord {
            run_index,
            truth: RotationVector::ZERO,
            checkpoints: errors
                .iter()
                .enumerate()
                .map(|(i, &e)| Checkpoint {
                    resources: (i as u64 + 1) * 10,
                    estimate: RotationVector::ZERO,
                    truth: RotationVector::ZERO,
                    total_error: e,
                    component_errors: [0.0; 3],
                })
                .collect(),
            restarts: 0,
        };
        let single = aggregate(&[mk(0, &[0.5, 0.25])]).unwrap();
        assert_eq!(single.checkpoints[0].mean_error, 0.5);
        assert_eq!(single.checkpoints[0].std_error, 0.0);

        let same = aggregate(&[mk(0, &[0.4, 0.2]), mk(1, &[0.4, 0.2])]).unwrap();
        assert_eq!(same.checkpoints[1].std_error, 0.0);

        let known = aggregate(&[mk(0, &[0.2, 0.0]), mk(1, &[0.4, 0.0])]).unwrap();
        assert!((known.checkpoints[0].mean_error - 0.3).abs() < 1e-15);
        assert!((known.checkpoints[0].std_error - 0.1).abs() < 1e-15);

        let mismatched = aggregate(&[mk(0, &[0.2]), mk(1, &[0.4, 0.1])]);
        assert!(matches!(
            mismatched,
            Err(ExperimentError::MismatchedCheckpoints(1))
        ));
    }

    #[test]
    fn campaign_csv_is_stable() {
        let cfg = small_cfg(EstimatorKind::SingleQubitAnalytic);
        let result = run_campaign(&cfg).unwrap();
        let mut a = Vec::new();
        write_campaign_csv(&mut a, &result).unwrap();
        let result2 = run_campaign(&cfg).unwrap();
        let mut b = Vec::new();
        write_campaign_csv(&mut b, &result2).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("resources,mean_error_rad,std_error_rad,estimator,alpha,n_runs\n"));
        assert_eq!(text.lines().count(), 1 + 3);
    }

    #[test]
    fn trace_mode_halves_bell_cost() {
        assert_eq!(
            bell_measurement_cost(ResourceMode::QubitCount, BellKind::PhiPlus),
            2
        );
        assert_eq!(
            bell_measurement_cost(ResourceMode::TraceFormula, BellKind::PhiPlus),
            1
        );
        assert_eq!(
            bell_measurement_cost(ResourceMode::TraceFormula, BellKind::PhiMinus),
            1
        );
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert!(!path.with_file_name("out.csv.tmp").exists());
    }
}
