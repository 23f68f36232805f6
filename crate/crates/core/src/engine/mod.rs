//! The batch estimator: initialization, greedy support search, weight,
//! model-parameter and frequency updates, iterated to convergence.

mod coupling;
mod fit;
mod hyper;
mod init;
mod support;

pub use coupling::{compute_coupling, frequency_message, moment_matrix, CouplingState};
pub use fit::{fit_frequency_posterior, log_posterior_derivatives, GRID_POINTS};
pub use hyper::{clamp_lambda, lower_bound, update_hyperparams};
pub use init::{initial_hyperparams, initialize, lag_moments, lower_quarter_eigen_mean, toeplitz};
pub use support::{apply_flip, flip_delta, ln_evidence, update_weights, Direction, FlipDelta};

pub(crate) use hyper::trace_coupled_covariance;
pub(crate) use support::{activation_variance, logit, weight_covariance};

use serde::{Deserialize, Serialize};

use crate::circular::VonMises;
use crate::error::{Error, Result};
use crate::model::{
    CMatrix, CVector, ComponentPosterior, Estimate, HyperParams, MeasurementSet, PriorConfig, WeightPosterior,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub max_iterations: usize,
    /// Relative change of `X̂` (Frobenius) below which the run stops.
    pub tolerance: f64,
    pub allow_deactivation: bool,
    /// `λ` is clamped to `[lambda_min, 1 - lambda_min]`.
    pub lambda_min: f64,
    /// Skip the data-driven parameter initialization and start here instead.
    #[serde(skip)]
    pub initial_hyper: Option<HyperParams>,
    /// Test hook: drive the support to exactly this size, ignoring the sign of flips.
    #[doc(hidden)]
    #[serde(skip)]
    pub fixed_support_size: Option<usize>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-5,
            allow_deactivation: true,
            lambda_min: 1e-3,
            initial_hyper: None,
            fixed_support_size: None,
        }
    }
}

impl Options {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be nonnegative, got {}", self.tolerance)));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < 0.5) {
            return Err(Error::Config(format!("lambda_min must lie in (0, 0.5), got {}", self.lambda_min)));
        }
        Ok(())
    }
}

/// Everything the iteration carries between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    /// Prior assigned to each component during initialization.
    pub priors: Vec<VonMises>,
    pub components: Vec<ComponentPosterior>,
    pub coupling: CouplingState,
    pub weights: WeightPosterior,
    pub hyper: HyperParams,
    pub nu_floor: f64,
}

impl EngineState {
    /// `X̂ = Σ_{i∈Ŝ} â_i ŵ_i^T`.
    pub fn x_hat(&self, m: usize) -> CMatrix {
        if self.weights.is_empty() {
            return CMatrix::zeros(m, self.weights.w_hat.ncols());
        }
        moment_matrix(&self.components, &self.weights.active, m) * &self.weights.w_hat
    }

    pub fn ln_evidence(&self) -> Result<f64> {
        ln_evidence(&self.weights.active, &self.coupling, &self.hyper)
    }
}

/// The per-iteration computations that admit a per-snapshot decomposition.
///
/// [`BatchKernel`] evaluates them with whole-matrix algebra; the parallel
/// module supplies one that works snapshot by snapshot.
pub trait UpdateKernel {
    fn weights(&self, coupling: &CouplingState, active: &[usize], hyper: &HyperParams) -> Result<WeightPosterior>;

    /// One flip candidate per component, in component order.
    fn flip_deltas(&self, coupling: &CouplingState, weights: &WeightPosterior, hyper: &HyperParams) -> Vec<FlipDelta>;

    fn hyperparams(&self, y: &MeasurementSet, state: &EngineState, lambda_min: f64) -> HyperParams;

    fn message(&self, i: usize, y: &MeasurementSet, state: &EngineState) -> CVector;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BatchKernel;

impl UpdateKernel for BatchKernel {
    fn weights(&self, coupling: &CouplingState, active: &[usize], hyper: &HyperParams) -> Result<WeightPosterior> {
        update_weights(coupling, active, hyper)
    }

    fn flip_deltas(&self, coupling: &CouplingState, weights: &WeightPosterior, hyper: &HyperParams) -> Vec<FlipDelta> {
        (0..coupling.j.nrows())
            .map(|k| flip_delta(k, coupling, weights, hyper))
            .collect()
    }

    fn hyperparams(&self, y: &MeasurementSet, state: &EngineState, lambda_min: f64) -> HyperParams {
        update_hyperparams(y, &state.components, &state.coupling, &state.weights, &state.hyper, lambda_min)
    }

    fn message(&self, i: usize, y: &MeasurementSet, state: &EngineState) -> CVector {
        frequency_message(i, y, &state.components, &state.weights, state.hyper.nu)
    }
}

fn choose_flip(deltas: Vec<FlipDelta>, weights: &WeightPosterior, options: &Options) -> Option<FlipDelta> {
    let wanted = options.fixed_support_size.map(|target| {
        if weights.len() < target {
            Some(Direction::Activate)
        } else if weights.len() > target {
            Some(Direction::Deactivate)
        } else {
            None
        }
    });
    let mut best: Option<FlipDelta> = None;
    for d in deltas {
        let allowed = match wanted {
            Some(Some(dir)) => d.direction == dir,
            Some(None) => false,
            None => d.direction == Direction::Activate || options.allow_deactivation,
        };
        if !allowed || d.delta.is_nan() {
            continue;
        }
        // strict comparison keeps the lowest index on ties
        if best.as_ref().is_none_or(|b| d.delta > b.delta) {
            best = Some(d);
        }
    }
    match wanted {
        Some(_) => best.filter(|b| b.delta > f64::NEG_INFINITY),
        None => best.filter(|b| b.delta > 0.0),
    }
}

/// Greedy single-flip ascent of `ln Z` from the current support.
///
/// Returns the number of accepted flips.
pub fn update_support_with<K: UpdateKernel + ?Sized>(state: &mut EngineState, options: &Options, kernel: &K) -> usize {
    let cap = 10 * state.components.len().max(1);
    let mut flips = 0;
    while flips < cap {
        let deltas = kernel.flip_deltas(&state.coupling, &state.weights, &state.hyper);
        let Some(flip) = choose_flip(deltas, &state.weights, options) else {
            break;
        };
        state.weights = apply_flip(&state.weights, &state.coupling, &state.hyper, &flip);
        flips += 1;
    }
    flips
}

pub fn update_support(state: &mut EngineState, options: &Options) -> usize {
    update_support_with(state, options, &BatchKernel)
}

fn relative_change(previous: &CMatrix, current: &CMatrix) -> f64 {
    let base = previous.norm();
    let diff = (previous - current).norm();
    if base == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / base
    }
}

/// Runs the estimator with the given kernel from a freshly initialized state.
pub fn run_with<K: UpdateKernel + ?Sized>(
    y: &MeasurementSet,
    priors: &PriorConfig,
    options: &Options,
    kernel: &K,
) -> Result<Estimate> {
    options.validate()?;
    let state = initialize(y, priors, options)?;
    iterate(y, state, options, kernel)
}

/// Iterates an already initialized state to convergence.
pub fn iterate<K: UpdateKernel + ?Sized>(
    y: &MeasurementSet,
    mut state: EngineState,
    options: &Options,
    kernel: &K,
) -> Result<Estimate> {
    let m = y.samples();
    let mut x_prev = CMatrix::zeros(m, y.snapshots());
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=options.max_iterations {
        iterations = t;
        let singular = |e: Error| match e {
            Error::Singular { .. } => Error::Singular { iteration: t },
            other => other,
        };
        state.weights = kernel
            .weights(&state.coupling, &state.weights.active, &state.hyper)
            .map_err(singular)?;
        update_support_with(&mut state, options, kernel);
        history.push(state.weights.active.clone());

        let mut hyper = kernel.hyperparams(y, &state, options.lambda_min);
        hyper.nu = hyper.nu.max(state.nu_floor);
        hyper.tau = hyper.tau.max(state.nu_floor);
        state.hyper = hyper;

        for p in 0..state.weights.len() {
            let i = state.weights.active[p];
            let eta = kernel.message(i, y, &state);
            state.components[i] = fit_frequency_posterior(&eta, &state.priors[i]);
        }
        state.coupling = compute_coupling(&state.components, y)?;

        let x = state.x_hat(m);
        let change = relative_change(&x_prev, &x);
        x_prev = x;
        if change < options.tolerance {
            converged = true;
            break;
        }
    }
    Ok(finish(&state, x_prev, iterations, converged, history))
}

fn finish(state: &EngineState, x_hat: CMatrix, iterations: usize, converged: bool, history: Vec<Vec<usize>>) -> Estimate {
    let active = state.weights.active.clone();
    let posteriors = (0..state.components.len())
        .map(|i| {
            if state.weights.is_active(i) {
                state.components[i].fitted
            } else {
                state.priors[i]
            }
        })
        .collect();
    Estimate {
        k_hat: active.len(),
        thetas: active.iter().map(|&i| state.components[i].fitted.mean_direction()).collect(),
        concentrations: active.iter().map(|&i| state.components[i].fitted.concentration()).collect(),
        active,
        weights: state.weights.w_hat.clone(),
        x_hat,
        posteriors,
        hyper: state.hyper,
        iterations,
        converged,
        support_history: history,
    }
}

/// Batch estimator on all of `y`.
pub fn run(y: &MeasurementSet, priors: &PriorConfig, options: &Options) -> Result<Estimate> {
    run_with(y, priors, options, &BatchKernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{steering_vector, wrap_distance};
    use num_complex::Complex64;

    fn tone_data(thetas: &[f64], m: usize, l: usize, noise: f64) -> MeasurementSet {
        let mut s = 12345u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let y = CMatrix::from_fn(m, l, |r, c| {
            let tone: Complex64 = thetas
                .iter()
                .enumerate()
                .map(|(k, &t)| Complex64::from_polar(1.0 + 0.2 * k as f64, r as f64 * t + 0.7 * c as f64 * (k + 1) as f64))
                .sum();
            tone + Complex64::new(next(), next()) * noise
        });
        MeasurementSet::new(y).unwrap()
    }

    fn state_with_support(y: &MeasurementSet, n: usize, active: &[usize]) -> EngineState {
        let mut state = initialize(y, &PriorConfig::uninformative(n).unwrap(), &Options::default()).unwrap();
        state.weights = update_weights(&state.coupling, active, &state.hyper).unwrap();
        state
    }

    #[test]
    fn zero_data_gives_empty_support() {
        let y = MeasurementSet::new(CMatrix::zeros(8, 3)).unwrap();
        let est = run(&y, &PriorConfig::uninformative(5).unwrap(), &Options::default()).unwrap();
        assert_eq!(est.k_hat, 0);
        assert_eq!(est.x_hat.norm(), 0.0);
        assert!(est.converged);
    }

    #[test]
    fn single_tone_high_snr() {
        let theta = 0.66;
        // amplitude 1 with noise standard deviation 0.01 per component: 40 dB
        let y = tone_data(&[theta], 20, 4, 0.01 * 12f64.sqrt() / 2f64.sqrt());
        let est = run(&y, &PriorConfig::uninformative(19).unwrap(), &Options::default()).unwrap();
        assert_eq!(est.k_hat, 1);
        assert!(wrap_distance(est.thetas[0], theta) < 1e-3);
    }

    #[test]
    fn message_matches_definition() {
        let y = tone_data(&[0.4, -1.3, 2.2], 10, 3, 0.1);
        let state = state_with_support(&y, 5, &[0, 2, 3]);
        let w = &state.weights;
        let nu = state.hyper.nu;
        let i = 2;
        let p = w.position(i).unwrap();
        // residual with component i left in, second moment correction from Ĉ
        let wi: CVector = w.w_hat.row(p).adjoint();
        let mut oracle = y.y() * &wi;
        for (q, &j) in w.active.iter().enumerate() {
            if j == i {
                continue;
            }
            let wq: CVector = w.w_hat.row(q).transpose();
            let second = wq.dot(&wi) + w.c_hat[(q, p)] * 3.0;
            oracle -= &state.components[j].a_hat * second;
        }
        oracle *= Complex64::new(2.0 / nu, 0.0);
        let eta = frequency_message(i, &y, &state.components, w, nu);
        assert!((eta - oracle).norm() < 1e-12 * (1.0 + eta_norm(&y, nu)));
    }

    fn eta_norm(y: &MeasurementSet, nu: f64) -> f64 {
        y.y().norm() / nu
    }

    #[test]
    fn support_search_is_a_local_optimum() {
        let y = tone_data(&[0.4, -1.3, 2.2], 16, 4, 0.05);
        let mut state = state_with_support(&y, 8, &[]);
        update_support(&mut state, &Options::default());
        assert!(!state.weights.is_empty());
        let deltas = BatchKernel.flip_deltas(&state.coupling, &state.weights, &state.hyper);
        assert!(deltas.iter().all(|d| d.delta <= 0.0));
        let z = state.ln_evidence().unwrap();
        assert!(z > 0.0);
    }

    #[test]
    fn deactivation_can_be_disabled() {
        let y = tone_data(&[0.4], 12, 2, 0.05);
        let mut state = state_with_support(&y, 6, &[0, 1, 2, 3, 4, 5]);
        let options = Options {
            allow_deactivation: false,
            ..Options::default()
        };
        assert_eq!(update_support(&mut state, &options), 0);
        assert_eq!(state.weights.len(), 6);
    }

    #[test]
    fn fixed_support_hook_reaches_target() {
        let y = tone_data(&[0.4, 1.9], 12, 2, 0.05);
        let mut state = state_with_support(&y, 6, &[]);
        let options = Options {
            fixed_support_size: Some(4),
            ..Options::default()
        };
        update_support(&mut state, &options);
        assert_eq!(state.weights.len(), 4);
    }

    fn field(h: &mut HyperParams, which: usize) -> &mut f64 {
        match which {
            0 => &mut h.nu,
            1 => &mut h.lambda,
            _ => &mut h.tau,
        }
    }

    #[test]
    fn hyperparameter_update_is_stationary() {
        let y = tone_data(&[0.4, -1.3, 2.2], 14, 3, 0.2);
        let mut state = state_with_support(&y, 6, &[]);
        update_support(&mut state, &Options::default());
        let n = state.components.len();
        let hp = update_hyperparams(&y, &state.components, &state.coupling, &state.weights, &state.hyper, 1e-3);
        let f = |h: &HyperParams| lower_bound(&y, &state.coupling, &state.weights, h, n);
        for which in 0..3 {
            let mut up = hp;
            let mut down = hp;
            let x = *field(&mut up, which);
            let step = 1e-5 * x;
            *field(&mut up, which) = x + step;
            *field(&mut down, which) = x - step;
            let slope = (f(&up) - f(&down)) / (2.0 * step);
            let scale = f(&hp).abs() / x;
            assert!(slope.abs() < 1e-6 * scale, "parameter {which}: slope {slope}");
            assert!(f(&hp) >= f(&up) && f(&hp) >= f(&down));
        }
        assert_eq!(hp.lambda, clamp_lambda(state.weights.len() as f64 / n as f64, 1e-3));
    }

    #[test]
    fn empty_support_keeps_tau() {
        let y = tone_data(&[0.4], 8, 2, 0.1);
        let state = state_with_support(&y, 4, &[]);
        let hp = update_hyperparams(&y, &state.components, &state.coupling, &state.weights, &state.hyper, 1e-3);
        assert_eq!(hp.tau, state.hyper.tau);
        assert_eq!(hp.lambda, 1e-3);
        assert!((hp.nu - y.y().norm_squared() / 16.0).abs() < 1e-14);
    }

    #[test]
    fn x_hat_is_sum_of_outer_products() {
        let y = tone_data(&[0.4, 2.0], 8, 3, 0.1);
        let state = state_with_support(&y, 4, &[1, 3]);
        let mut oracle = CMatrix::zeros(8, 3);
        for (p, &i) in state.weights.active.iter().enumerate() {
            oracle += &state.components[i].a_hat * state.weights.w_hat.row(p);
        }
        assert!((state.x_hat(8) - oracle).norm() < 1e-13);
    }

    #[test]
    fn options_are_validated() {
        let y = tone_data(&[0.4], 8, 1, 0.1);
        let priors = PriorConfig::uninformative(3).unwrap();
        let bad = Options {
            max_iterations: 0,
            ..Options::default()
        };
        assert!(matches!(run(&y, &priors, &bad), Err(Error::Config(_))));
        let bad = Options {
            lambda_min: 0.7,
            ..Options::default()
        };
        assert!(run(&y, &priors, &bad).is_err());
    }

    #[test]
    fn estimates_lie_on_the_circle() {
        let y = tone_data(&[3.1, -3.1], 16, 2, 0.02);
        let est = run(&y, &PriorConfig::uninformative(8).unwrap(), &Options::default()).unwrap();
        assert!(est.thetas.iter().all(|t| (-std::f64::consts::PI..std::f64::consts::PI).contains(t)));
        assert_eq!(est.posteriors.len(), 8);
        let a = steering_vector(est.thetas[0], 16);
        assert!((a.norm_squared() - 16.0).abs() < 1e-12);
    }
}
