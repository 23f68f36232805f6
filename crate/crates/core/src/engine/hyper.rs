use num_complex::Complex64;

use super::coupling::{moment_matrix, CouplingState};
use super::support::logit;
use crate::model::{ComponentPosterior, HyperParams, MeasurementSet, WeightPosterior};

pub fn clamp_lambda(lambda: f64, lambda_min: f64) -> f64 {
    lambda.clamp(lambda_min, 1.0 - lambda_min)
}

/// `tr(J_S Ĉ)` over the active set.
pub(crate) fn trace_coupled_covariance(coupling: &CouplingState, weights: &WeightPosterior) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, &i) in weights.active.iter().enumerate() {
        for (b, &j) in weights.active.iter().enumerate() {
            acc += coupling.j[(i, j)] * weights.c_hat[(b, a)];
        }
    }
    acc.re
}

/// Closed-form maximizers of the lower bound in `ν`, `λ`, `τ` for fixed posteriors.
///
/// `τ` keeps its previous value when the support is empty.
pub fn update_hyperparams(
    y: &MeasurementSet,
    components: &[ComponentPosterior],
    coupling: &CouplingState,
    weights: &WeightPosterior,
    previous: &HyperParams,
    lambda_min: f64,
) -> HyperParams {
    let m = y.samples() as f64;
    let l = y.snapshots() as f64;
    let n = components.len() as f64;
    let active = weights.len() as f64;
    if weights.is_empty() {
        return HyperParams {
            nu: y.y().norm_squared() / (m * l),
            lambda: clamp_lambda(0.0, lambda_min),
            tau: previous.tau,
        };
    }
    let a = moment_matrix(components, &weights.active, y.samples());
    let residual = y.y() - &a * &weights.w_hat;
    let spread: f64 = weights
        .active
        .iter()
        .enumerate()
        .map(|(p, &i)| {
            let row = weights.w_hat.row(p).norm_squared();
            row * (1.0 - components[i].a_hat.norm_squared() / m)
        })
        .sum();
    let nu = residual.norm_squared() / (m * l) + trace_coupled_covariance(coupling, weights) / m + spread / l;
    let trace_c: f64 = (0..weights.len()).map(|d| weights.c_hat[(d, d)].re).sum();
    let tau = (weights.w_hat.norm_squared() + l * trace_c) / (l * active);
    HyperParams {
        nu,
        lambda: clamp_lambda(active / n, lambda_min),
        tau,
    }
}

/// Variational lower bound as a function of the model parameters, with the
/// posteriors held fixed (terms independent of `ν, λ, τ` dropped).
///
/// The data term is written through `J`, whose diagonal carries `E[a^H a] = M`.
pub fn lower_bound(
    y: &MeasurementSet,
    coupling: &CouplingState,
    weights: &WeightPosterior,
    hyper: &HyperParams,
    components: usize,
) -> f64 {
    let m = y.samples() as f64;
    let l = y.snapshots() as f64;
    let n = components as f64;
    let active = weights.len() as f64;
    let mut data = y.y().norm_squared();
    let mut prior_energy = 0.0;
    if !weights.is_empty() {
        let w = &weights.w_hat;
        let mut cross = Complex64::new(0.0, 0.0);
        for (p, &i) in weights.active.iter().enumerate() {
            for c in 0..w.ncols() {
                cross += w[(p, c)].conj() * coupling.h[(i, c)];
            }
        }
        let second = w * w.adjoint() + weights.c_hat.scale(l);
        let mut quad = Complex64::new(0.0, 0.0);
        for (a, &i) in weights.active.iter().enumerate() {
            for (b, &j) in weights.active.iter().enumerate() {
                quad += coupling.j[(i, j)] * second[(b, a)];
            }
        }
        data += -2.0 * cross.re + quad.re;
        let trace_c: f64 = (0..weights.len()).map(|d| weights.c_hat[(d, d)].re).sum();
        prior_energy = w.norm_squared() + l * trace_c;
    }
    -data / hyper.nu - prior_energy / hyper.tau + active * (logit(hyper.lambda) - l * hyper.tau.ln())
        + n * (1.0 - hyper.lambda).ln()
        - m * l * hyper.nu.ln()
}
