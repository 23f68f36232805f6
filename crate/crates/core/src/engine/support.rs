//! Weight posterior, evidence surrogate and single-component flips.

use nalgebra::Cholesky;
use num_complex::Complex64;

use super::coupling::{hermitize, CouplingState};
use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, HyperParams, WeightPosterior};

pub(crate) fn logit(lambda: f64) -> f64 {
    (lambda / (1.0 - lambda)).ln()
}

fn submatrix(a: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])])
}

fn rows_of(a: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), a.ncols(), |r, c| a[(rows[r], c)])
}

/// `Ĉ = (J_S/ν + I/τ)^{-1}`, `Ŵ = Ĉ H_S / ν`.
pub fn update_weights(coupling: &CouplingState, active: &[usize], hyper: &HyperParams) -> Result<WeightPosterior> {
    debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
    let snapshots = coupling.h.ncols();
    if active.is_empty() {
        return Ok(WeightPosterior::empty(snapshots));
    }
    let c = weight_covariance(coupling, active, hyper)?;
    let w_hat = (&c * rows_of(&coupling.h, active)).unscale(hyper.nu);
    Ok(WeightPosterior {
        active: active.to_vec(),
        w_hat,
        c_hat: c,
    })
}

pub(crate) fn weight_covariance(coupling: &CouplingState, active: &[usize], hyper: &HyperParams) -> Result<CMatrix> {
    let mut precision = submatrix(&coupling.j, active, active).unscale(hyper.nu);
    for d in 0..active.len() {
        precision[(d, d)] += Complex64::new(1.0 / hyper.tau, 0.0);
    }
    let chol = Cholesky::new(precision).ok_or(Error::Singular { iteration: 0 })?;
    let mut c = chol.inverse();
    hermitize(&mut c);
    Ok(c)
}

/// `ln Z` of the support `active`, up to the support-independent constant.
pub fn ln_evidence(active: &[usize], coupling: &CouplingState, hyper: &HyperParams) -> Result<f64> {
    if active.is_empty() {
        return Ok(0.0);
    }
    let n = active.len() as f64;
    let snapshots = coupling.h.ncols() as f64;
    let ratio = hyper.nu / hyper.tau;
    let mut b = submatrix(&coupling.j, active, active);
    for d in 0..active.len() {
        b[(d, d)] += Complex64::new(ratio, 0.0);
    }
    let chol = Cholesky::new(b).ok_or(Error::Singular { iteration: 0 })?;
    let l = chol.l_dirty();
    let log_det: f64 = (0..active.len()).map(|d| 2.0 * l[(d, d)].re.ln()).sum();
    let mut h = rows_of(&coupling.h, active);
    if !l.solve_lower_triangular_mut(&mut h) {
        return Err(Error::Singular { iteration: 0 });
    }
    let quad = h.norm_squared();
    Ok(-snapshots * log_det + n * logit(hyper.lambda) + quad / hyper.nu + n * snapshots * ratio.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Activate,
    Deactivate,
}

/// Change of `ln Z` when component `k` is flipped, plus the quantities the
/// rank-one update needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipDelta {
    pub k: usize,
    pub delta: f64,
    /// Posterior variance of the flipped component's weights.
    pub v: f64,
    /// Posterior mean of the flipped component's weights (conjugated row).
    pub u: CVector,
    pub direction: Direction,
}

/// Evidence change for flipping component `k` in the current support.
pub fn flip_delta(k: usize, coupling: &CouplingState, weights: &WeightPosterior, hyper: &HyperParams) -> FlipDelta {
    let snapshots = coupling.h.ncols() as f64;
    match weights.position(k) {
        None => {
            let v = activation_variance(k, coupling, weights, hyper);
            let u = activation_mean(k, v, coupling, weights, hyper);
            let delta = if v > 0.0 && v.is_finite() {
                snapshots * (v / hyper.tau).ln() + u.norm_squared() / v + logit(hyper.lambda)
            } else {
                f64::NEG_INFINITY
            };
            FlipDelta {
                k,
                delta,
                v,
                u,
                direction: Direction::Activate,
            }
        }
        Some(p) => {
            let v = weights.c_hat[(p, p)].re;
            let u: CVector = weights.w_hat.row(p).adjoint();
            let delta = -snapshots * (v / hyper.tau).ln() - u.norm_squared() / v - logit(hyper.lambda);
            FlipDelta {
                k,
                delta,
                v,
                u,
                direction: Direction::Deactivate,
            }
        }
    }
}

/// Column of `J` for component `k`, restricted to the active rows.
pub(crate) fn coupling_column(k: usize, coupling: &CouplingState, weights: &WeightPosterior) -> CVector {
    CVector::from_iterator(weights.len(), weights.active.iter().map(|&s| coupling.j[(s, k)]))
}

/// `v_k = ν / (M + ν/τ - j_k^H Ĉ j_k / ν)`; nonpositive when the Schur
/// complement has lost definiteness numerically.
pub(crate) fn activation_variance(k: usize, coupling: &CouplingState, weights: &WeightPosterior, hyper: &HyperParams) -> f64 {
    let m = coupling.j[(k, k)].re;
    let quad = if weights.is_empty() {
        0.0
    } else {
        let j = coupling_column(k, coupling, weights);
        j.dotc(&(&weights.c_hat * &j)).re
    };
    let schur = m + hyper.nu / hyper.tau - quad / hyper.nu;
    if schur > 0.0 {
        hyper.nu / schur
    } else {
        -1.0
    }
}

/// `u_k = (v_k/ν)(h_k^* - Ŵ^H j_k)`.
fn activation_mean(k: usize, v: f64, coupling: &CouplingState, weights: &WeightPosterior, hyper: &HyperParams) -> CVector {
    let mut u: CVector = coupling.h.row(k).adjoint();
    if !weights.is_empty() {
        let j = coupling_column(k, coupling, weights);
        u -= weights.w_hat.ad_mul(&j);
    }
    u.scale(v / hyper.nu)
}

/// Block-inverse update of `(Ĉ, Ŵ)` for an accepted flip.
pub fn apply_flip(weights: &WeightPosterior, coupling: &CouplingState, hyper: &HyperParams, flip: &FlipDelta) -> WeightPosterior {
    match flip.direction {
        Direction::Activate => activate(weights, coupling, hyper, flip),
        Direction::Deactivate => deactivate(weights, flip.k),
    }
}

fn activate(weights: &WeightPosterior, coupling: &CouplingState, hyper: &HyperParams, flip: &FlipDelta) -> WeightPosterior {
    let k = flip.k;
    let n = weights.len();
    let snapshots = weights.w_hat.ncols();
    let nu = hyper.nu;
    let v = flip.v;
    let insert_at = weights.active.partition_point(|&s| s < k);
    let old = |a: usize| if a < insert_at { a } else { a + 1 };

    let cj = if n == 0 {
        CVector::zeros(0)
    } else {
        &weights.c_hat * coupling_column(k, coupling, weights)
    };
    let mut c = CMatrix::zeros(n + 1, n + 1);
    for a in 0..n {
        for b in 0..n {
            c[(old(a), old(b))] = weights.c_hat[(a, b)] + cj[a] * cj[b].conj() * (v / (nu * nu));
        }
        let cross = cj[a] * (-v / nu);
        c[(old(a), insert_at)] = cross;
        c[(insert_at, old(a))] = cross.conj();
    }
    c[(insert_at, insert_at)] = Complex64::new(v, 0.0);

    let mut w = CMatrix::zeros(n + 1, snapshots);
    for a in 0..n {
        for l in 0..snapshots {
            w[(old(a), l)] = weights.w_hat[(a, l)] - cj[a] * flip.u[l].conj() / nu;
        }
    }
    for l in 0..snapshots {
        w[(insert_at, l)] = flip.u[l].conj();
    }

    let mut active = weights.active.clone();
    active.insert(insert_at, k);
    WeightPosterior {
        active,
        w_hat: w,
        c_hat: c,
    }
}

fn deactivate(weights: &WeightPosterior, k: usize) -> WeightPosterior {
    let p = weights
        .position(k)
        .unwrap_or_else(|| panic!("cannot deactivate inactive component {k}"));
    let n = weights.len();
    let snapshots = weights.w_hat.ncols();
    let keep: Vec<usize> = (0..n).filter(|&a| a != p).collect();
    let pivot = weights.c_hat[(p, p)].re;
    let mut c = CMatrix::zeros(n - 1, n - 1);
    for (a, &ra) in keep.iter().enumerate() {
        for (b, &rb) in keep.iter().enumerate() {
            c[(a, b)] = weights.c_hat[(ra, rb)] - weights.c_hat[(ra, p)] * weights.c_hat[(rb, p)].conj() / pivot;
        }
    }
    let mut w = CMatrix::zeros(n - 1, snapshots);
    for (a, &ra) in keep.iter().enumerate() {
        let gain = weights.c_hat[(ra, p)] / pivot;
        for l in 0..snapshots {
            w[(a, l)] = weights.w_hat[(ra, l)] - gain * weights.w_hat[(p, l)];
        }
    }
    let active = keep.iter().map(|&a| weights.active[a]).collect();
    WeightPosterior {
        active,
        w_hat: w,
        c_hat: c,
    }
}
