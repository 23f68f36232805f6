//! Snapshot-parallel evaluation of the per-iteration updates.
//!
//! Weight means, flip evidence, model parameters and frequency messages all
//! decompose into sums of per-snapshot terms once the shared covariance `Ĉ`
//! is known. [`SnapshotKernel`] computes those terms on an [`Executor`] and
//! reduces them in snapshot order, so the result does not depend on how many
//! workers ran.

use num_complex::Complex64;

use crate::engine::{
    activation_variance, clamp_lambda, initialize, iterate, logit, moment_matrix, trace_coupled_covariance, CouplingState, Direction, EngineState, FlipDelta, Options, UpdateKernel,
};
use crate::error::Result;
use crate::exec::Executor;
use crate::model::{CMatrix, CVector, Estimate, HyperParams, MeasurementSet, PriorConfig, WeightPosterior};

/// Flip quantities that do not depend on the snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedFlip {
    pub direction: Direction,
    /// Posterior variance of the flipped component; nonpositive marks an
    /// activation that would break positive definiteness.
    pub v: f64,
}

/// Per-snapshot pieces of one component's message and flip and of the
/// model-parameter update, each indexed by snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotIntermediates {
    /// `η_{i,l}` of the message component.
    pub eta_per_snapshot: Vec<CVector>,
    /// `Δ_{k,l}` of the flip component.
    pub delta_per_snapshot: Vec<f64>,
    pub nu_per_snapshot: Vec<f64>,
    pub tau_per_snapshot: Vec<f64>,
}

/// One snapshot's contribution to the flip of every component.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFlipTerms {
    /// `Δ_{k,l}`: the single-snapshot evidence change.
    pub deltas: Vec<f64>,
    /// `u_{k,l}`: the flipped component's weight mean in this snapshot.
    pub means: Vec<Complex64>,
}

pub fn shared_flips(coupling: &CouplingState, weights: &WeightPosterior, hyper: &HyperParams) -> Vec<SharedFlip> {
    (0..coupling.j.nrows())
        .map(|k| match weights.position(k) {
            Some(p) => SharedFlip {
                direction: Direction::Deactivate,
                v: weights.c_hat[(p, p)].re,
            },
            None => SharedFlip {
                direction: Direction::Activate,
                v: activation_variance(k, coupling, weights, hyper),
            },
        })
        .collect()
}

/// Single-snapshot flip terms for snapshot `l`.
pub fn snapshot_flip_terms(
    l: usize,
    coupling: &CouplingState,
    weights: &WeightPosterior,
    hyper: &HyperParams,
    shared: &[SharedFlip],
) -> SnapshotFlipTerms {
    let nu = hyper.nu;
    let prior_odds = logit(hyper.lambda);
    let mut deltas = Vec::with_capacity(shared.len());
    let mut means = Vec::with_capacity(shared.len());
    for (k, s) in shared.iter().enumerate() {
        match s.direction {
            Direction::Deactivate => {
                let p = weights.position(k).expect("deactivation of an active component");
                let u = weights.w_hat[(p, l)].conj();
                deltas.push(-(s.v / hyper.tau).ln() - u.norm_sqr() / s.v - prior_odds);
                means.push(u);
            }
            Direction::Activate => {
                if !(s.v > 0.0 && s.v.is_finite()) {
                    deltas.push(f64::NEG_INFINITY);
                    means.push(Complex64::new(0.0, 0.0));
                    continue;
                }
                // w_l^H j_k, with j_k the active part of column k
                let mut proj = Complex64::new(0.0, 0.0);
                for (a, &i) in weights.active.iter().enumerate() {
                    proj += weights.w_hat[(a, l)].conj() * coupling.j[(i, k)];
                }
                let u = (coupling.h[(k, l)].conj() - proj) * (s.v / nu);
                deltas.push((s.v / hyper.tau).ln() + u.norm_sqr() / s.v + prior_odds);
                means.push(u);
            }
        }
    }
    SnapshotFlipTerms { deltas, means }
}

/// `Δ_k = Σ_l Δ_{k,l} ∓ (L - 1) logit(λ)`: each single-snapshot term carries
/// the prior odds once, the multi-snapshot change carries it once in total.
pub fn combine_delta(deltas: &[f64], lambda: f64, direction: Direction) -> f64 {
    let mut delta = 0.0;
    for d in deltas {
        delta += d;
    }
    if !delta.is_finite() {
        return delta;
    }
    let extra = (deltas.len() as f64 - 1.0) * logit(lambda);
    match direction {
        Direction::Activate => delta - extra,
        Direction::Deactivate => delta + extra,
    }
}

pub fn combine_deltas(per_snapshot: &[SnapshotFlipTerms], shared: &[SharedFlip], hyper: &HyperParams) -> Vec<FlipDelta> {
    shared
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let column: Vec<f64> = per_snapshot.iter().map(|snap| snap.deltas[k]).collect();
            let u = CVector::from_iterator(per_snapshot.len(), per_snapshot.iter().map(|snap| snap.means[k]));
            FlipDelta {
                k,
                delta: combine_delta(&column, hyper.lambda, s.direction),
                v: s.v,
                u,
                direction: s.direction,
            }
        })
        .collect()
}

/// `(ν_l, τ_l)` of snapshot `l`; their means over snapshots are the batch values.
pub fn snapshot_hyper_terms(
    l: usize,
    y: &MeasurementSet,
    state: &EngineState,
    a: &CMatrix,
    trace_jc: f64,
    trace_c: f64,
) -> (f64, f64) {
    let m = y.samples() as f64;
    let w = &state.weights;
    let w_l = w.w_hat.column(l);
    let residual = y.y().column(l) - a * w_l;
    let mut spread = 0.0;
    for (p, &i) in w.active.iter().enumerate() {
        spread += w_l[p].norm_sqr() * (1.0 - state.components[i].a_hat.norm_squared() / m);
    }
    let nu_l = residual.norm_squared() / m + trace_jc / m + spread;
    let tau_l = (w_l.norm_squared() + trace_c) / w.len() as f64;
    (nu_l, tau_l)
}

/// Mean of the per-snapshot terms, reduced in snapshot order.
pub fn combine_hyperparams(terms: &[(f64, f64)], active: usize, components: usize, previous: &HyperParams, lambda_min: f64) -> HyperParams {
    let count = terms.len() as f64;
    let mut nu = 0.0;
    let mut tau = 0.0;
    for &(n, t) in terms {
        nu += n;
        tau += t;
    }
    HyperParams {
        nu: nu / count,
        lambda: clamp_lambda(active as f64 / components as f64, lambda_min),
        tau: if active == 0 { previous.tau } else { tau / count },
    }
}

/// `η_{i,l}`: snapshot `l`'s share of component `i`'s frequency message.
pub fn snapshot_message(i: usize, l: usize, y: &MeasurementSet, state: &EngineState) -> CVector {
    let w = &state.weights;
    let p = w
        .position(i)
        .unwrap_or_else(|| panic!("frequency message requested for inactive component {i}"));
    let wi = w.w_hat[(p, l)].conj();
    let mut r: CVector = y.y().column(l) * wi;
    for (q, &j) in w.active.iter().enumerate() {
        if q == p {
            continue;
        }
        let coeff = w.w_hat[(q, l)] * wi + w.c_hat[(q, p)];
        r.axpy(-coeff, &state.components[j].a_hat, Complex64::new(1.0, 0.0));
    }
    r * Complex64::new(2.0 / state.hyper.nu, 0.0)
}

/// Gathers every per-snapshot quantity for message component `i` (active)
/// and flip component `k`, computed serially.
pub fn snapshot_intermediates(i: usize, k: usize, y: &MeasurementSet, state: &EngineState) -> SnapshotIntermediates {
    let w = &state.weights;
    let shared = shared_flips(&state.coupling, w, &state.hyper);
    let snapshots = y.snapshots();
    let eta_per_snapshot = (0..snapshots).map(|l| snapshot_message(i, l, y, state)).collect();
    let delta_per_snapshot = (0..snapshots)
        .map(|l| snapshot_flip_terms(l, &state.coupling, w, &state.hyper, &shared).deltas[k])
        .collect();
    let (nu_per_snapshot, tau_per_snapshot) = hyper_terms(y, state, &Executor::sequential()).into_iter().unzip();
    SnapshotIntermediates {
        eta_per_snapshot,
        delta_per_snapshot,
        nu_per_snapshot,
        tau_per_snapshot,
    }
}

fn hyper_terms(y: &MeasurementSet, state: &EngineState, executor: &Executor) -> Vec<(f64, f64)> {
    let w = &state.weights;
    if w.is_empty() {
        let m = y.samples() as f64;
        return executor.map(y.snapshots(), |l| (y.y().column(l).norm_squared() / m, 0.0));
    }
    let a = moment_matrix(&state.components, &w.active, y.samples());
    let trace_jc = trace_coupled_covariance(&state.coupling, w);
    let trace_c: f64 = (0..w.len()).map(|d| w.c_hat[(d, d)].re).sum();
    executor.map(y.snapshots(), |l| snapshot_hyper_terms(l, y, state, &a, trace_jc, trace_c))
}

/// Update kernel that fans each step out over snapshots.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotKernel<'a> {
    executor: &'a Executor,
}

impl<'a> SnapshotKernel<'a> {
    pub fn new(executor: &'a Executor) -> Self {
        Self { executor }
    }
}

impl UpdateKernel for SnapshotKernel<'_> {
    fn weights(&self, coupling: &CouplingState, active: &[usize], hyper: &HyperParams) -> Result<WeightPosterior> {
        let snapshots = coupling.h.ncols();
        if active.is_empty() {
            return Ok(WeightPosterior::empty(snapshots));
        }
        let c = crate::engine::weight_covariance(coupling, active, hyper)?;
        let columns = self.executor.map(snapshots, |l| {
            let h_l = CVector::from_iterator(active.len(), active.iter().map(|&i| coupling.h[(i, l)]));
            (&c * h_l).unscale(hyper.nu)
        });
        let w_hat = CMatrix::from_columns(&columns);
        Ok(WeightPosterior {
            active: active.to_vec(),
            w_hat,
            c_hat: c,
        })
    }

    fn flip_deltas(&self, coupling: &CouplingState, weights: &WeightPosterior, hyper: &HyperParams) -> Vec<FlipDelta> {
        let shared = shared_flips(coupling, weights, hyper);
        let per = self
            .executor
            .map(coupling.h.ncols(), |l| snapshot_flip_terms(l, coupling, weights, hyper, &shared));
        combine_deltas(&per, &shared, hyper)
    }

    fn hyperparams(&self, y: &MeasurementSet, state: &EngineState, lambda_min: f64) -> HyperParams {
        let terms = hyper_terms(y, state, self.executor);
        combine_hyperparams(&terms, state.weights.len(), state.components.len(), &state.hyper, lambda_min)
    }

    fn message(&self, i: usize, y: &MeasurementSet, state: &EngineState) -> CVector {
        let parts = self.executor.map(y.snapshots(), |l| snapshot_message(i, l, y, state));
        let mut total = CVector::zeros(y.samples());
        for part in &parts {
            total += part;
        }
        total
    }
}

/// The estimator with snapshot-parallel updates on `executor`.
pub fn run_parallel(y: &MeasurementSet, priors: &PriorConfig, options: &Options, executor: &Executor) -> Result<Estimate> {
    options.validate()?;
    let state = initialize(y, priors, options)?;
    iterate(y, state, options, &SnapshotKernel::new(executor))
}
