use nalgebra::DMatrix;
use num_complex::Complex64;

use super::coupling::compute_coupling;
use super::fit::fit_frequency_posterior;
use super::{EngineState, Options};
use crate::circular::VonMises;
use crate::error::Result;
use crate::model::{
    wrap_distance, CMatrix, CVector, HyperParams, MeasurementSet, PriorConfig, PriorMatching,
    WeightPosterior,
};

/// Relative floor on the noise variance, scaled by the mean sample power.
const NU_RELATIVE_FLOOR: f64 = 1e-8;
const NU_ABSOLUTE_FLOOR: f64 = 1e-200;

/// `γ_t = (1/M) Σ_{k-l=t} Y_{k,:} Y_{l,:}^H` for `t = 0..M`.
pub fn lag_moments(y: &CMatrix) -> Vec<Complex64> {
    let m = y.nrows();
    (0..m)
        .map(|t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in t..m {
                for c in 0..y.ncols() {
                    acc += y[(k, c)] * y[(k - t, c)].conj();
                }
            }
            acc / m as f64
        })
        .collect()
}

/// Hermitian Toeplitz matrix with first column `gamma`.
pub fn toeplitz(gamma: &[Complex64]) -> CMatrix {
    let m = gamma.len();
    DMatrix::from_fn(m, m, |k, l| if k >= l { gamma[k - l] } else { gamma[l - k].conj() })
}

/// Mean of the smallest `⌈M/4⌉` eigenvalues of the Toeplitz moment estimate.
pub fn lower_quarter_eigen_mean(gamma: &[Complex64]) -> f64 {
    let mut eig: Vec<f64> = toeplitz(gamma).symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    let q = eig.len().div_ceil(4);
    eig[..q].iter().sum::<f64>() / q as f64
}

pub(crate) fn nu_floor(y: &MeasurementSet) -> f64 {
    let mean_power = y.y().norm_squared() / (y.samples() * y.snapshots()) as f64;
    (NU_RELATIVE_FLOOR * mean_power).max(NU_ABSOLUTE_FLOOR)
}

/// Starting model parameters from the Toeplitz estimate of `E[Y Y^H]`.
pub fn initial_hyperparams(y: &MeasurementSet, priors: &PriorConfig) -> HyperParams {
    let m = y.samples() as f64;
    let l = y.snapshots() as f64;
    let floor = nu_floor(y);
    let gamma = lag_moments(y.y());
    let nu = (lower_quarter_eigen_mean(&gamma) / l).max(floor);
    let lambda = priors.initial_lambda();
    let tau = ((y.y().norm_squared() / m - l * nu) / (lambda * priors.components() as f64)).max(floor);
    HyperParams { nu, lambda, tau }
}

/// Initialization message: `(2/ν)[0, γ_1, …, γ_{M-1}]` of the residual.
fn residual_message(residual: &CMatrix, nu: f64) -> CVector {
    let mut gamma = lag_moments(residual);
    gamma[0] = Complex64::new(0.0, 0.0);
    CVector::from_vec(gamma) * Complex64::new(2.0 / nu, 0.0)
}

/// Builds the starting state: model parameters, then every component in
/// turn from the deflated residual, each consuming one prior.
pub fn initialize(y: &MeasurementSet, priors: &PriorConfig, options: &Options) -> Result<EngineState> {
    let m = y.samples();
    let n = priors.components();
    let hyper = options.initial_hyper.unwrap_or_else(|| initial_hyperparams(y, priors));
    let nu = hyper.nu;
    let single_c = 1.0 / (m as f64 / nu + 1.0 / hyper.tau);

    let mut residual = y.y().clone();
    let mut unused: Vec<usize> = (0..n).collect();
    let mut assigned = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    for i in 0..n {
        let eta = residual_message(&residual, nu);
        let (prior, component) = match priors.matching() {
            PriorMatching::InOrder => {
                let prior = priors.priors()[i];
                (prior, fit_frequency_posterior(&eta, &prior))
            }
            PriorMatching::Nearest => {
                let free = fit_frequency_posterior(&eta, &VonMises::uniform());
                let mu = free.fitted.mean_direction();
                let slot = unused
                    .iter()
                    .enumerate()
                    .min_by(|(_, &a), (_, &b)| {
                        let da = wrap_distance(priors.priors()[a].mean_direction(), mu);
                        let db = wrap_distance(priors.priors()[b].mean_direction(), mu);
                        da.total_cmp(&db)
                    })
                    .map(|(slot, _)| slot)
                    .expect("one prior per component");
                let prior = priors.priors()[unused.remove(slot)];
                let component = if prior.is_uniform() {
                    free
                } else {
                    fit_frequency_posterior(&eta, &prior)
                };
                (prior, component)
            }
        };
        let h = residual.ad_mul(&component.a_hat);
        // ŵ^T = (Ĉ/ν) â^H R for the singleton support
        let w_row: CVector = h.map(|z| z.conj() * (single_c / nu));
        residual -= &component.a_hat * w_row.transpose();
        assigned.push(prior);
        components.push(component);
    }
    let coupling = compute_coupling(&components, y)?;
    Ok(EngineState {
        priors: assigned,
        components,
        coupling,
        weights: WeightPosterior::empty(y.snapshots()),
        hyper,
        nu_floor: nu_floor(y),
    })
}
