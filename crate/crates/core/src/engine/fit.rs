//! Von Mises approximation of the tilted frequency posterior
//! `p(θ) exp(Re{η^H a(θ)})`.
//!
//! The log-density is evaluated on a uniform grid through one inverse FFT,
//! the best grid point is polished with Newton steps on the analytic
//! derivative, and the concentration is matched to the curvature at the
//! mode. For a single harmonic this recovers the exact von Mises.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::circular::{wrap_angle, VonMises};
use crate::model::{CVector, ComponentPosterior};

pub const GRID_POINTS: usize = 1 << 12;
const NEWTON_STEPS: usize = 20;

thread_local! {
    static GRID_FFT: (Arc<dyn Fft<f64>>, RefCell<Vec<Complex64>>) = {
        let fft = FftPlanner::new().plan_fft_inverse(GRID_POINTS);
        (fft, RefCell::new(vec![Complex64::new(0.0, 0.0); GRID_POINTS]))
    };
}

/// `f(θ)`, `f'(θ)` and `f''(θ)` of the unnormalized log posterior.
pub fn log_posterior_derivatives(eta: &CVector, prior: &VonMises, theta: f64) -> (f64, f64, f64) {
    let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (m, e) in eta.iter().enumerate() {
        let t = e.conj() * Complex64::from_polar(1.0, m as f64 * theta);
        let mf = m as f64;
        f += t.re;
        d1 -= mf * t.im;
        d2 -= mf * mf * t.re;
    }
    let kappa0 = prior.concentration();
    let offset = theta - prior.mean_direction();
    f += kappa0 * offset.cos();
    d1 -= kappa0 * offset.sin();
    d2 -= kappa0 * offset.cos();
    (f, d1, d2)
}

/// Index of the best grid point of `f` over `θ_g = -π + 2πg/G`.
fn grid_mode(eta: &CVector, prior: &VonMises) -> usize {
    GRID_FFT.with(|(fft, buffer)| {
        let mut buf = buffer.borrow_mut();
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (m, e) in eta.iter().enumerate() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            buf[m % GRID_POINTS] += e.conj() * sign;
        }
        fft.process(&mut buf);
        let h = 2.0 * PI / GRID_POINTS as f64;
        let kappa0 = prior.concentration();
        let mu0 = prior.mean_direction();
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (g, z) in buf.iter().enumerate() {
            let theta = -PI + g as f64 * h;
            let value = z.re + kappa0 * (theta - mu0).cos();
            if value > best_value {
                best_value = value;
                best = g;
            }
        }
        best
    })
}

/// Fits `(μ̂, κ̂)` to `η` under `prior` and returns the resulting component.
///
/// A zero message leaves the prior untouched; a zero message with a flat
/// prior yields the uniform distribution with `μ̂ = 0`.
pub fn fit_frequency_posterior(eta: &CVector, prior: &VonMises) -> ComponentPosterior {
    if eta.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        let fitted = if prior.is_uniform() { VonMises::uniform() } else { *prior };
        return ComponentPosterior::new(eta.clone(), fitted);
    }
    let h = 2.0 * PI / GRID_POINTS as f64;
    let start = -PI + grid_mode(eta, prior) as f64 * h;
    let mut theta = start;
    for _ in 0..NEWTON_STEPS {
        let (_, d1, d2) = log_posterior_derivatives(eta, prior, theta);
        if !(d2 < 0.0) {
            break;
        }
        let step = -d1 / d2;
        let next = (theta + step).clamp(start - h, start + h);
        let moved = (next - theta).abs();
        theta = next;
        if moved <= 1e-15 * (1.0 + theta.abs()) {
            break;
        }
    }
    let (_, _, d2) = log_posterior_derivatives(eta, prior, theta);
    let kappa = (-d2).max(0.0);
    let fitted = VonMises::new(wrap_angle(theta), kappa).expect("finite fit");
    ComponentPosterior::new(eta.clone(), fitted)
}
