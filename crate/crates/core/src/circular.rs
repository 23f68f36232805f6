//! Von Mises density and modified Bessel function ratios.
//!
//! Everything here works with ratios `I_m(κ)/I_0(κ)` or the exponentially
//! scaled `ln I_0`, so concentrations up to `1e8` (and beyond) never
//! overflow.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Above this concentration `ln I_0` uses the Hankel expansion.
const LN_I0_SERIES_LIMIT: f64 = 20.0;

/// Largest double strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

/// A von Mises distribution on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMises {
    mean_direction: f64,
    concentration: f64,
}

impl VonMises {
    pub fn new(mean_direction: f64, concentration: f64) -> Result<Self> {
        if !mean_direction.is_finite() {
            return Err(Error::Domain(format!(
                "von Mises mean direction must be finite, got {mean_direction}"
            )));
        }
        if !(concentration >= 0.0) || concentration.is_infinite() {
            return Err(Error::Domain(format!(
                "von Mises concentration must be finite and nonnegative, got {concentration}"
            )));
        }
        Ok(Self {
            mean_direction: wrap_angle(mean_direction),
            concentration,
        })
    }

    /// The uniform distribution on the circle (κ = 0).
    pub fn uniform() -> Self {
        Self {
            mean_direction: 0.0,
            concentration: 0.0,
        }
    }

    pub fn mean_direction(&self) -> f64 {
        self.mean_direction
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn is_uniform(&self) -> bool {
        self.concentration == 0.0
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Bessel ratio needs a nonnegative concentration, got {kappa}"
        )))
    }
}

/// Successive ratios `I_k(κ)/I_{k-1}(κ)` for `k = 1..=max_order`.
///
/// Small and moderate κ run the Perron continued fraction as a backward
/// recurrence `r_k = 1 / (2k/κ + r_{k+1})`, started far enough above both
/// `max_order` and κ that the seed error is annihilated. Very large κ uses
/// the Hankel expansion of the scaled functions directly.
fn successive_ratios(max_order: usize, kappa: f64) -> Vec<f64> {
    if max_order == 0 {
        return Vec::new();
    }
    if kappa == 0.0 {
        return vec![0.0; max_order];
    }
    if kappa.is_infinite() {
        return vec![1.0; max_order];
    }
    let n = max_order as f64;
    if kappa >= 1000.0 + 30.0 * n * n {
        let s0 = hankel_series(0.0, kappa);
        let mut previous = s0;
        return (1..=max_order)
            .map(|k| {
                let s = hankel_series(k as f64, kappa);
                let ratio = s / previous;
                previous = s;
                ratio
            })
            .collect();
    }

    let start = max_order + kappa.ceil() as usize + 48;
    // Amos-type seed for I_{start+1}/I_start.
    let nu = start as f64 + 1.0;
    let mut r = kappa / (nu + 0.5 + ((nu + 0.5).powi(2) + kappa * kappa).sqrt());
    let mut ratios = vec![0.0; max_order];
    for k in (1..=start).rev() {
        r = 1.0 / (2.0 * k as f64 / kappa + r);
        if k <= max_order {
            ratios[k - 1] = r;
        }
    }
    ratios
}

/// `sqrt(2πx) e^{-x} I_ν(x)` by its asymptotic series; callers keep `x ≫ ν²`.
fn hankel_series(nu: f64, x: f64) -> f64 {
    let four_nu2 = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (four_nu2 - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `I_m(κ)/I_0(κ)` for every `m = 0..=max_order` (index = order).
pub fn bessel_ratios(max_order: usize, kappa: f64) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    let mut out = Vec::with_capacity(max_order + 1);
    out.push(1.0);
    let mut acc = 1.0;
    for r in successive_ratios(max_order, kappa) {
        acc *= r;
        out.push(if kappa.is_finite() { acc.min(BELOW_ONE) } else { acc });
    }
    Ok(out)
}

/// `I_m(κ)/I_0(κ)`.
pub fn bessel_ratio(order: usize, kappa: f64) -> Result<f64> {
    Ok(bessel_ratios(order, kappa)?[order])
}

/// `ln I_0(κ)` without forming `I_0` for large κ.
pub fn ln_bessel_i0(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if kappa <= LN_I0_SERIES_LIMIT {
        let q = 0.25 * kappa * kappa;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        Ok(sum.ln())
    } else {
        Ok(kappa - 0.5 * (2.0 * PI * kappa).ln() + hankel_series(0.0, kappa).ln())
    }
}

/// `E[e^{jmθ}]` under `vm`, i.e. `e^{jmμ} I_m(κ)/I_0(κ)`.
pub fn circular_moment(vm: &VonMises, order: usize) -> Result<Complex64> {
    if order == 0 {
        return Err(Error::Domain("circular moment order must be at least 1".into()));
    }
    let ratio = bessel_ratio(order, vm.concentration)?;
    Ok(Complex64::from_polar(ratio, order as f64 * vm.mean_direction))
}

/// Moments `E[e^{jmθ}]` for `m = 0..count`; entry 0 is exactly one.
pub fn circular_moments(vm: &VonMises, count: usize) -> Vec<Complex64> {
    if count == 0 {
        return Vec::new();
    }
    // concentration is validated on construction
    let ratios = bessel_ratios(count - 1, vm.concentration).expect("valid concentration");
    ratios
        .iter()
        .enumerate()
        .map(|(m, &r)| {
            if m == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(r, m as f64 * vm.mean_direction)
            }
        })
        .collect()
}

/// Log density of `vm` at `theta`.
pub fn vm_log_pdf(theta: f64, vm: &VonMises) -> f64 {
    let ln_i0 = ln_bessel_i0(vm.concentration).expect("valid concentration");
    vm.concentration * (theta - vm.mean_direction).cos() - LN_2PI - ln_i0
}
