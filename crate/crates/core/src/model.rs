//! Observations, priors, posteriors and the estimator output.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circular::{circular_moments, wrap_angle, VonMises};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `a(θ) = [1, e^{jθ}, …, e^{j(M-1)θ}]ᵀ`.
pub fn steering_vector(theta: f64, m: usize) -> CVector {
    let theta = wrap_angle(theta);
    CVector::from_fn(m, |k, _| Complex64::from_polar(1.0, k as f64 * theta))
}

/// Shortest distance between two angles on the circle, in `[0, π]`.
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Signed shortest difference `a - b` on the circle, in `[-π, π)`.
pub fn wrap_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// The `M × L` observation matrix: rows are samples/sensors, columns snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    y: CMatrix,
}

impl MeasurementSet {
    pub fn new(y: CMatrix) -> Result<Self> {
        if y.nrows() < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 samples per snapshot, got {}",
                y.nrows()
            )));
        }
        if y.ncols() < 1 {
            return Err(Error::Dimension("need at least one snapshot".into()));
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("observations must be finite".into()));
        }
        Ok(Self { y })
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn into_inner(self) -> CMatrix {
        self.y
    }

    /// Number of samples per snapshot (M).
    pub fn samples(&self) -> usize {
        self.y.nrows()
    }

    /// Number of snapshots (L).
    pub fn snapshots(&self) -> usize {
        self.y.ncols()
    }

    /// Snapshots `start..start + count` as a new set.
    pub fn columns(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.snapshots() {
            return Err(Error::Dimension(format!(
                "snapshot range {start}..{} out of 0..{}",
                start + count,
                self.snapshots()
            )));
        }
        Ok(Self {
            y: self.y.columns(start, count).into_owned(),
        })
    }
}

/// How informative priors are handed to components during initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMatching {
    /// Each component takes the unused prior whose mean is closest to its fit.
    #[default]
    Nearest,
    /// Component `i` takes prior `i`.
    InOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    priors: Vec<VonMises>,
    initial_lambda: f64,
    matching: PriorMatching,
}

impl PriorConfig {
    pub fn new(priors: Vec<VonMises>, initial_lambda: f64, matching: PriorMatching) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::Config("at least one component is required".into()));
        }
        if !(initial_lambda > 0.0 && initial_lambda < 1.0) {
            return Err(Error::Config(format!(
                "initial activation probability must lie in (0, 1), got {initial_lambda}"
            )));
        }
        Ok(Self {
            priors,
            initial_lambda,
            matching,
        })
    }

    /// `n` components with flat priors.
    pub fn uninformative(n: usize) -> Result<Self> {
        Self::new(vec![VonMises::uniform(); n], 0.5, PriorMatching::Nearest)
    }

    /// `n` priors centred on `(2i - 1 - n)/(n + 1)·π`, `i = 1..=n`, all with
    /// concentration `kappa0`.
    pub fn grid(n: usize, kappa0: f64) -> Result<Self> {
        let priors = grid_means(n)
            .into_iter()
            .map(|mu| VonMises::new(mu, kappa0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(priors, 0.5, PriorMatching::Nearest)
    }

    pub fn with_matching(mut self, matching: PriorMatching) -> Self {
        self.matching = matching;
        self
    }

    pub fn with_priors(&self, priors: Vec<VonMises>) -> Result<Self> {
        Self::new(priors, self.initial_lambda, self.matching)
    }

    pub fn priors(&self) -> &[VonMises] {
        &self.priors
    }

    pub fn components(&self) -> usize {
        self.priors.len()
    }

    pub fn initial_lambda(&self) -> f64 {
        self.initial_lambda
    }

    pub fn matching(&self) -> PriorMatching {
        self.matching
    }
}

/// Means of the evenly spaced prior grid.
pub fn grid_means(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| (2.0 * i as f64 - 1.0 - n as f64) / (n as f64 + 1.0) * PI)
        .collect()
}

/// Noise variance ν, activation probability λ and weight variance τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub nu: f64,
    pub lambda: f64,
    pub tau: f64,
}

/// Frequency belief of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentPosterior {
    /// Message `η_i` parameterizing the tilted posterior.
    pub eta: CVector,
    pub fitted: VonMises,
    /// `E[a(θ_i)]`.
    pub a_hat: CVector,
}

impl ComponentPosterior {
    pub fn new(eta: CVector, fitted: VonMises) -> Self {
        let a_hat = CVector::from_vec(circular_moments(&fitted, eta.len()));
        Self { eta, fitted, a_hat }
    }

    /// A component whose posterior is its prior (no data message).
    pub fn from_prior(prior: VonMises, m: usize) -> Self {
        Self::new(CVector::zeros(m), prior)
    }
}

/// Weight posterior restricted to the active set.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPosterior {
    /// Active component indices, ascending.
    pub active: Vec<usize>,
    /// Posterior means, one row per active component (`|Ŝ| × L`).
    pub w_hat: CMatrix,
    /// Covariance shared by every snapshot (`|Ŝ| × |Ŝ|`).
    pub c_hat: CMatrix,
}

impl WeightPosterior {
    pub fn empty(snapshots: usize) -> Self {
        Self {
            active: Vec::new(),
            w_hat: CMatrix::zeros(0, snapshots),
            c_hat: CMatrix::zeros(0, 0),
        }
    }

    pub fn position(&self, component: usize) -> Option<usize> {
        self.active.binary_search(&component).ok()
    }

    pub fn is_active(&self, component: usize) -> bool {
        self.position(component).is_some()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

/// Output of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub k_hat: usize,
    /// Active component indices, ascending; all per-component fields follow this order.
    pub active: Vec<usize>,
    pub thetas: Vec<f64>,
    pub concentrations: Vec<f64>,
    /// `K̂ × L` weight means.
    pub weights: CMatrix,
    /// Reconstructed noise-free signal, `M × L`.
    pub x_hat: CMatrix,
    /// Final frequency belief of every component (prior for inactive ones).
    pub posteriors: Vec<VonMises>,
    pub hyper: HyperParams,
    pub iterations: usize,
    pub converged: bool,
    /// Active set after each support update.
    pub support_history: Vec<Vec<usize>>,
}
