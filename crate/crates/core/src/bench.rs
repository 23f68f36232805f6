//! Synthetic scenarios, error metrics and the Monte Carlo harness.
//!
//! Every trial draws from its own ChaCha20 stream, selected by the trial
//! index under the scenario seed. The stream does not depend on the sweep
//! point, so neighbouring points see common random numbers.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circular::{wrap_angle, VonMises};
use crate::engine::{run, Options};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{grid_means, steering_vector, wrap_difference, wrap_distance, CMatrix, Estimate, MeasurementSet, PriorConfig};
use crate::sequential::{partition, run_sequential, SequentialOptions};

/// Cap on NMSE values, reached on an exact match.
pub const NMSE_FLOOR_DB: f64 = -300.0;

const MAX_REJECTIONS: usize = 100_000;

/// The generator name written next to every seed.
pub const RNG_NAME: &str = "ChaCha20";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrequencySource {
    /// Uniform on the circle.
    Uniform,
    /// `K` of the `N` grid von Mises distributions picked without
    /// replacement, one frequency drawn from each.
    VonMisesGrid { kappa0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimatorPrior {
    Uninformative,
    Grid { kappa0: f64 },
}

impl EstimatorPrior {
    pub fn config(&self, candidates: usize) -> Result<PriorConfig> {
        match *self {
            EstimatorPrior::Uninformative => PriorConfig::uninformative(candidates),
            EstimatorPrior::Grid { kappa0 } => PriorConfig::grid(candidates, kappa0),
        }
    }

    /// `0` stands for the flat prior.
    pub fn from_kappa0(kappa0: f64) -> Self {
        if kappa0 == 0.0 {
            EstimatorPrior::Uninformative
        } else {
            EstimatorPrior::Grid { kappa0 }
        }
    }

    pub fn kappa0(&self) -> f64 {
        match *self {
            EstimatorPrior::Uninformative => 0.0,
            EstimatorPrior::Grid { kappa0 } => kappa0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// True number of components `K`.
    pub components: usize,
    /// `M`.
    pub samples: usize,
    /// `L`.
    pub snapshots: usize,
    /// `N`, the estimator's candidate count.
    pub candidates: usize,
    /// `f64::INFINITY` means noiseless.
    pub snr_db: f64,
    /// Minimum pairwise wrap distance; `None` means `2π/N`.
    pub min_separation: Option<f64>,
    pub weight_mean: Complex64,
    pub weight_var: f64,
    pub frequency_source: FrequencySource,
    pub prior: EstimatorPrior,
    /// `1` runs the batch estimator, more splits the snapshots.
    pub groups: usize,
    pub carry_hyperparams: bool,
    pub options: Options,
    pub trials: usize,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            components: 3,
            samples: 20,
            snapshots: 8,
            candidates: 20,
            snr_db: 0.0,
            min_separation: None,
            weight_mean: Complex64::new(1.0, 0.0),
            weight_var: 0.1,
            frequency_source: FrequencySource::VonMisesGrid { kappa0: 1e4 },
            prior: EstimatorPrior::Uninformative,
            groups: 1,
            carry_hyperparams: false,
            options: Options::default(),
            trials: 200,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn separation(&self) -> f64 {
        self.min_separation.unwrap_or(2.0 * PI / self.candidates as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 || self.snapshots == 0 || self.candidates == 0 {
            return Err(Error::Config(format!(
                "need M >= 2, L >= 1 and N >= 1, got M = {}, L = {}, N = {}",
                self.samples, self.snapshots, self.candidates
            )));
        }
        if self.components > self.candidates {
            return Err(Error::Config(format!(
                "K = {} exceeds N = {}",
                self.components, self.candidates
            )));
        }
        let sep = self.separation();
        if !(sep >= 0.0) || sep * self.components as f64 >= 2.0 * PI {
            return Err(Error::Config(format!(
                "minimum separation {sep} is infeasible for K = {}",
                self.components
            )));
        }
        if !(self.weight_var >= 0.0) {
            return Err(Error::Config(format!("weight variance must be nonnegative, got {}", self.weight_var)));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("invalid SNR {}", self.snr_db)));
        }
        if self.groups == 0 || self.groups > self.snapshots {
            return Err(Error::Config(format!(
                "cannot split {} snapshots into {} groups",
                self.snapshots, self.groups
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let FrequencySource::VonMisesGrid { kappa0 } = self.frequency_source {
            VonMises::new(0.0, kappa0)?;
        }
        if let EstimatorPrior::Grid { kappa0 } = self.prior {
            VonMises::new(0.0, kappa0)?;
        }
        self.options.validate()
    }

    pub fn rng_for_trial(&self, trial: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(trial as u64);
        rng
    }
}

/// What a trial was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub thetas: Vec<f64>,
    /// `K × L`.
    pub weights: CMatrix,
    /// `A(θ) Wᵀ`.
    pub signal: CMatrix,
    /// Per-entry noise variance the noise was scaled to.
    pub noise_variance: f64,
    /// Realized SNR in dB.
    pub snr_db: f64,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One draw from `vm` (Best–Fisher rejection; wrapped normal for `κ > 10^6`).
pub(crate) fn sample_von_mises<R: Rng + ?Sized>(vm: &VonMises, rng: &mut R) -> f64 {
    let kappa = vm.concentration();
    let mu = vm.mean_direction();
    if kappa < 1e-8 {
        return wrap_angle(PI * (2.0 * rng.random::<f64>() - 1.0));
    }
    if kappa > 1e6 {
        let z: f64 = rng.sample(StandardNormal);
        return wrap_angle(mu + z / kappa.sqrt());
    }
    let s = if kappa < 1e-5 {
        1.0 / kappa + kappa
    } else {
        let r = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (r - (2.0 * r).sqrt()) / (2.0 * kappa);
        (1.0 + rho * rho) / (2.0 * rho)
    };
    let w = loop {
        let u: f64 = rng.random();
        let z = (PI * u).cos();
        let w = (1.0 + s * z) / (s + z);
        let y = kappa * (s - w);
        let v: f64 = rng.random();
        if y * (2.0 - y) - v >= 0.0 || (y / v).ln() + 1.0 - y >= 0.0 {
            break w;
        }
    };
    let mut theta = w.clamp(-1.0, 1.0).acos();
    if rng.random::<f64>() < 0.5 {
        theta = -theta;
    }
    wrap_angle(mu + theta)
}

fn separated(thetas: &[f64], min_separation: f64) -> bool {
    thetas
        .iter()
        .enumerate()
        .all(|(i, &a)| thetas[i + 1..].iter().all(|&b| wrap_distance(a, b) > min_separation))
}

fn draw_frequencies<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Vec<f64>> {
    let k = cfg.components;
    let sep = cfg.separation();
    let means = grid_means(cfg.candidates);
    for _ in 0..MAX_REJECTIONS {
        let thetas: Vec<f64> = match cfg.frequency_source {
            FrequencySource::Uniform => (0..k).map(|_| wrap_angle(PI * (2.0 * rng.random::<f64>() - 1.0))).collect(),
            FrequencySource::VonMisesGrid { kappa0 } => rand::seq::index::sample(rng, cfg.candidates, k)
                .into_iter()
                .map(|g| VonMises::new(means[g], kappa0).expect("validated concentration"))
                .collect::<Vec<_>>()
                .iter()
                .map(|vm| sample_von_mises(vm, rng))
                .collect(),
        };
        if separated(&thetas, sep) {
            return Ok(thetas);
        }
    }
    Err(Error::Config(format!(
        "no frequency set with separation {sep} after {MAX_REJECTIONS} attempts"
    )))
}

/// Draws one instance of the scenario: separated frequencies, Gaussian
/// weights and noise scaled to the exact requested SNR.
pub fn generate_trial<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<(MeasurementSet, GroundTruth)> {
    cfg.validate()?;
    let (m, l, k) = (cfg.samples, cfg.snapshots, cfg.components);
    let thetas = draw_frequencies(cfg, rng)?;
    let sd = cfg.weight_var.sqrt();
    let weights = CMatrix::from_fn(k, l, |_, _| cfg.weight_mean + complex_normal(rng) * sd);
    let mut signal = CMatrix::zeros(m, l);
    for (i, &t) in thetas.iter().enumerate() {
        signal += steering_vector(t, m) * weights.row(i);
    }
    let signal_energy = signal.norm_squared();
    let (noise, noise_variance, snr_db) = if cfg.snr_db == f64::INFINITY {
        (CMatrix::zeros(m, l), 0.0, f64::INFINITY)
    } else {
        let raw = CMatrix::from_fn(m, l, |_, _| complex_normal(rng));
        if k == 0 || signal_energy == 0.0 {
            (raw, 1.0, f64::NEG_INFINITY)
        } else {
            let target = signal_energy / 10f64.powf(cfg.snr_db / 10.0);
            let noise = raw.scale((target / raw.norm_squared()).sqrt());
            let realized = 10.0 * (signal_energy / noise.norm_squared()).log10();
            (noise, target / (m * l) as f64, realized)
        }
    };
    let y = MeasurementSet::new(&signal + noise)?;
    Ok((
        y,
        GroundTruth {
            thetas,
            weights,
            signal,
            noise_variance,
            snr_db,
        },
    ))
}

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    } else {
        NMSE_FLOOR_DB
    }
}

/// `‖X̂ − X‖²_F / ‖X‖²_F`.
pub fn signal_error_ratio(x_hat: &CMatrix, x_true: &CMatrix) -> Result<f64> {
    if x_hat.shape() != x_true.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, truth is {:?}",
            x_hat.shape(),
            x_true.shape()
        )));
    }
    let energy = x_true.norm_squared();
    if energy == 0.0 {
        return Err(Error::Domain("NMSE of a zero signal is undefined".into()));
    }
    Ok((x_hat - x_true).norm_squared() / energy)
}

pub fn nmse_signal(x_hat: &CMatrix, x_true: &CMatrix) -> Result<f64> {
    signal_error_ratio(x_hat, x_true).map(to_db)
}

/// Minimum-cost perfect matching on a square cost matrix; `result[row] = column`.
fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // potentials formulation, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost[r - 1][c - 1] - u[r] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for c in 1..=n {
        if owner[c] > 0 {
            result[owner[c] - 1] = c - 1;
        }
    }
    result
}

/// `Σ d_i² / ‖θ̃‖²` after selecting the `K` most concentrated estimates,
/// zero-filling missing ones and matching on wrap distance.
pub fn frequency_error_ratio(thetas: &[f64], concentrations: &[f64], truth: &[f64]) -> Result<f64> {
    if thetas.len() != concentrations.len() {
        return Err(Error::Dimension(format!(
            "{} frequencies but {} concentrations",
            thetas.len(),
            concentrations.len()
        )));
    }
    let energy: f64 = truth.iter().map(|t| t * t).sum();
    if energy == 0.0 {
        return Err(Error::Domain("NMSE of an all-zero frequency vector is undefined".into()));
    }
    let k = truth.len();
    let mut order: Vec<usize> = (0..thetas.len()).collect();
    order.sort_by(|&a, &b| concentrations[b].total_cmp(&concentrations[a]));
    let mut kept: Vec<f64> = order.iter().take(k).map(|&i| thetas[i]).collect();
    kept.resize(k, 0.0);
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|&t| kept.iter().map(|&e| wrap_distance(e, t)).collect())
        .collect();
    let matched = assignment(&cost);
    let error: f64 = truth
        .iter()
        .zip(&matched)
        .map(|(&t, &e)| wrap_difference(kept[e], t).powi(2))
        .sum();
    Ok(error / energy)
}

pub fn nmse_frequency(estimate: &Estimate, truth: &[f64]) -> Result<f64> {
    frequency_error_ratio(&estimate.thetas, &estimate.concentrations, truth).map(to_db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub true_thetas: Vec<f64>,
    pub est_thetas: Vec<f64>,
    pub k: usize,
    pub k_hat: usize,
    /// `None` when the true signal is zero.
    pub nmse_x_db: Option<f64>,
    pub nmse_theta_db: Option<f64>,
    pub order_correct: bool,
    pub order_over: bool,
    pub runtime_seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    x_ratio: Option<f64>,
    #[serde(skip)]
    theta_ratio: Option<f64>,
}

/// Runs the configured estimator (batch, or grouped when `groups > 1`).
pub fn estimate(cfg: &ScenarioConfig, y: &MeasurementSet) -> Result<Estimate> {
    let priors = cfg.prior.config(cfg.candidates)?;
    if cfg.groups == 1 {
        run(y, &priors, &cfg.options)
    } else {
        let plan = partition(y.snapshots(), cfg.groups)?;
        let options = SequentialOptions {
            engine: cfg.options.clone(),
            carry_hyperparams: cfg.carry_hyperparams,
        };
        run_sequential(y, &priors, &plan, &options)
    }
}

/// Generates and estimates trial `trial` of `cfg`.
pub fn run_trial(cfg: &ScenarioConfig, trial: usize, timing: bool) -> Result<TrialResult> {
    let mut rng = cfg.rng_for_trial(trial);
    let (y, truth) = generate_trial(cfg, &mut rng)?;
    let start = Instant::now();
    let est = estimate(cfg, &y)?;
    let runtime_seconds = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let x_ratio = signal_error_ratio(&est.x_hat, &truth.signal).ok();
    let theta_ratio = frequency_error_ratio(&est.thetas, &est.concentrations, &truth.thetas).ok();
    Ok(TrialResult {
        trial,
        true_thetas: truth.thetas,
        est_thetas: est.thetas.clone(),
        k: cfg.components,
        k_hat: est.k_hat,
        nmse_x_db: x_ratio.map(to_db),
        nmse_theta_db: theta_ratio.map(to_db),
        order_correct: est.k_hat == cfg.components,
        order_over: est.k_hat > cfg.components,
        runtime_seconds,
        iterations: est.iterations,
        converged: est.converged,
        x_ratio,
        theta_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    Snapshots,
    Samples,
    Candidates,
    Components,
    Groups,
    /// Estimator prior concentration; `0` selects the flat prior.
    PriorKappa0,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::Snapshots => "snapshots",
            SweepVariable::Samples => "samples",
            SweepVariable::Candidates => "candidates",
            SweepVariable::Components => "components",
            SweepVariable::Groups => "groups",
            SweepVariable::PriorKappa0 => "prior_kappa0",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "snr_db" => SweepVariable::SnrDb,
            "snapshots" => SweepVariable::Snapshots,
            "samples" => SweepVariable::Samples,
            "candidates" => SweepVariable::Candidates,
            "components" => SweepVariable::Components,
            "groups" => SweepVariable::Groups,
            "prior_kappa0" => SweepVariable::PriorKappa0,
            other => return Err(Error::Config(format!("unknown sweep variable `{other}`"))),
        })
    }

    fn apply(&self, cfg: &mut ScenarioConfig, value: f64) -> Result<()> {
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value < 1e9 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} must be a nonnegative integer, got {value}", self.name())))
            }
        };
        match self {
            SweepVariable::SnrDb => cfg.snr_db = value,
            SweepVariable::Snapshots => cfg.snapshots = count()?,
            SweepVariable::Samples => cfg.samples = count()?,
            SweepVariable::Candidates => cfg.candidates = count()?,
            SweepVariable::Components => cfg.components = count()?,
            SweepVariable::Groups => cfg.groups = count()?,
            SweepVariable::PriorKappa0 => cfg.prior = EstimatorPrior::from_kappa0(value),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// Cartesian product of axes, the first axis varying slowest. No axes is
/// the base scenario alone; an axis without values yields no points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axes: Vec<SweepAxis>,
}

impl Sweep {
    pub fn single(variable: SweepVariable, values: Vec<f64>) -> Self {
        Self {
            axes: vec![SweepAxis { variable, values }],
        }
    }

    pub fn then(mut self, variable: SweepVariable, values: Vec<f64>) -> Self {
        self.axes.push(SweepAxis { variable, values });
        self
    }

    pub fn points(&self) -> Vec<Vec<(SweepVariable, f64)>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((axis.variable, v));
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn variables(&self) -> Vec<SweepVariable> {
        self.axes.iter().map(|a| a.variable).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub point: Vec<(SweepVariable, f64)>,
    pub trials: usize,
    /// dB of the mean linear ratio over trials with a defined value.
    pub nmse_x_db: Option<f64>,
    pub nmse_theta_db: Option<f64>,
    pub median_nmse_theta_db: Option<f64>,
    pub p_correct: f64,
    pub p_over: f64,
    pub mean_k_hat: f64,
    pub runtime_seconds: f64,
}

pub fn aggregate(point: Vec<(SweepVariable, f64)>, trials: &[TrialResult]) -> AggregateRow {
    let n = trials.len() as f64;
    let mean_ratio = |f: fn(&TrialResult) -> Option<f64>| {
        let values: Vec<f64> = trials.iter().filter_map(f).collect();
        (!values.is_empty()).then(|| to_db(values.iter().sum::<f64>() / values.len() as f64))
    };
    let mut theta_db: Vec<f64> = trials.iter().filter_map(|t| t.nmse_theta_db).collect();
    theta_db.sort_by(|a, b| a.total_cmp(b));
    let median = (!theta_db.is_empty()).then(|| {
        let h = theta_db.len() / 2;
        if theta_db.len() % 2 == 1 {
            theta_db[h]
        } else {
            0.5 * (theta_db[h - 1] + theta_db[h])
        }
    });
    AggregateRow {
        point,
        trials: trials.len(),
        nmse_x_db: mean_ratio(|t| t.x_ratio),
        nmse_theta_db: mean_ratio(|t| t.theta_ratio),
        median_nmse_theta_db: median,
        p_correct: trials.iter().filter(|t| t.order_correct).count() as f64 / n,
        p_over: trials.iter().filter(|t| t.order_over).count() as f64 / n,
        mean_k_hat: trials.iter().map(|t| t.k_hat as f64).sum::<f64>() / n,
        runtime_seconds: trials.iter().map(|t| t.runtime_seconds).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub config: ScenarioConfig,
    pub row: AggregateRow,
    pub trials: Vec<TrialResult>,
}

/// Runs every sweep point with `cfg.trials` trials fanned out on `executor`.
///
/// With `timing` off the runtime fields are zero and the output depends
/// only on the configuration.
pub fn run_monte_carlo_detailed(cfg: &ScenarioConfig, sweep: &Sweep, executor: &Executor, timing: bool) -> Result<Vec<PointResult>> {
    let mut out = Vec::new();
    for point in sweep.points() {
        let mut config = cfg.clone();
        for &(var, value) in &point {
            var.apply(&mut config, value)?;
        }
        config.validate()?;
        let trials = executor
            .map(config.trials, |t| run_trial(&config, t, timing))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let row = aggregate(point, &trials);
        out.push(PointResult { config, row, trials });
    }
    Ok(out)
}

pub fn run_monte_carlo(cfg: &ScenarioConfig, sweep: &Sweep, executor: &Executor, timing: bool) -> Result<Vec<AggregateRow>> {
    Ok(run_monte_carlo_detailed(cfg, sweep, executor, timing)?
        .into_iter()
        .map(|p| p.row)
        .collect())
}

/// Named scenario and sweep combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// SNR sweep, `M = 20`, `L = 8`.
    SnrSweep,
    /// Snapshot sweep with `M = 30`, `SNR = 0 dB`.
    SnapshotSweepWide,
    /// Snapshot sweep with `M = 20`, `SNR = 4 dB`.
    SnapshotSweep,
    /// Sample-count sweep, `SNR = 0 dB`, `L = 8`.
    SampleSweep,
    /// Overestimation rate over `L ∈ {1, 3, 5, 7}` for both priors.
    Overestimation,
    /// Grouped processing, `G ∈ {1, 4, 8}` over SNR.
    Grouped,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::SnrSweep,
        Preset::SnapshotSweepWide,
        Preset::SnapshotSweep,
        Preset::SampleSweep,
        Preset::Overestimation,
        Preset::Grouped,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::SnrSweep => "snr-sweep",
            Preset::SnapshotSweepWide => "snapshot-sweep-wide",
            Preset::SnapshotSweep => "snapshot-sweep",
            Preset::SampleSweep => "sample-sweep",
            Preset::Overestimation => "overestimation",
            Preset::Grouped => "grouped",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
    }

    pub fn scenario(&self) -> ScenarioConfig {
        let base = ScenarioConfig::default();
        match self {
            Preset::SnrSweep | Preset::SampleSweep => base,
            Preset::SnapshotSweepWide => ScenarioConfig { samples: 30, ..base },
            Preset::SnapshotSweep => ScenarioConfig { snr_db: 4.0, ..base },
            Preset::Overestimation => ScenarioConfig {
                snr_db: 4.0,
                prior: EstimatorPrior::Grid { kappa0: 1e4 },
                trials: 1000,
                ..base
            },
            Preset::Grouped => ScenarioConfig {
                candidates: 10,
                frequency_source: FrequencySource::Uniform,
                ..base
            },
        }
    }

    pub fn sweep(&self) -> Sweep {
        let snapshots = (1..=8).map(f64::from).collect::<Vec<_>>();
        match self {
            Preset::SnrSweep => Sweep::single(SweepVariable::SnrDb, vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0]),
            Preset::SnapshotSweepWide | Preset::SnapshotSweep => Sweep::single(SweepVariable::Snapshots, snapshots),
            Preset::SampleSweep => Sweep::single(SweepVariable::Samples, vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]),
            Preset::Overestimation => Sweep::single(SweepVariable::PriorKappa0, vec![1e4, 0.0])
                .then(SweepVariable::Snapshots, vec![1.0, 3.0, 5.0, 7.0]),
            Preset::Grouped => Sweep::single(SweepVariable::Groups, vec![1.0, 4.0, 8.0])
                .then(SweepVariable::SnrDb, vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0]),
        }
    }
}
