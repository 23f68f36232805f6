use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, ComponentPosterior, MeasurementSet, WeightPosterior};

/// Gram-type coupling `J` between component moments and their projection `H = Â^H Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingState {
    /// `N × N`, Hermitian, diagonal fixed at `M`.
    pub j: CMatrix,
    /// `N × L`.
    pub h: CMatrix,
}

pub(crate) fn hermitize(a: &mut CMatrix) {
    let n = a.nrows();
    for r in 0..n {
        a[(r, r)].im = 0.0;
        for c in (r + 1)..n {
            let mean = (a[(r, c)] + a[(c, r)].conj()) * 0.5;
            a[(r, c)] = mean;
            a[(c, r)] = mean.conj();
        }
    }
}

/// Stacks the moment vectors `â_i` as columns of an `M × N` matrix.
pub fn moment_matrix(components: &[ComponentPosterior], indices: &[usize], m: usize) -> CMatrix {
    CMatrix::from_fn(m, indices.len(), |r, c| components[indices[c]].a_hat[r])
}

pub fn compute_coupling(components: &[ComponentPosterior], y: &MeasurementSet) -> Result<CouplingState> {
    let m = y.samples();
    if let Some(bad) = components.iter().position(|c| c.a_hat.len() != m) {
        return Err(Error::Dimension(format!(
            "component {bad} has {} moments, observations have {m} samples",
            components[bad].a_hat.len()
        )));
    }
    let all: Vec<usize> = (0..components.len()).collect();
    let a = moment_matrix(components, &all, m);
    let mut j = a.ad_mul(&a);
    hermitize(&mut j);
    for i in 0..components.len() {
        j[(i, i)] = Complex64::new(m as f64, 0.0);
    }
    let h = a.ad_mul(y.y());
    Ok(CouplingState { j, h })
}

/// Message `η_i` of an active component given everyone else's current beliefs.
///
/// # Panics
/// If `i` is not in the active set.
pub fn frequency_message(
    i: usize,
    y: &MeasurementSet,
    components: &[ComponentPosterior],
    weights: &WeightPosterior,
    nu: f64,
) -> CVector {
    let p = weights
        .position(i)
        .unwrap_or_else(|| panic!("frequency message requested for inactive component {i}"));
    let snapshots = y.snapshots() as f64;
    let wi_conj: CVector = weights.w_hat.row(p).adjoint();
    let mut r = y.y() * &wi_conj;
    for (q, &j) in weights.active.iter().enumerate() {
        if q == p {
            continue;
        }
        let cross = weights
            .w_hat
            .row(q)
            .iter()
            .zip(wi_conj.iter())
            .map(|(a, b)| a * b)
            .sum::<Complex64>();
        let coeff = cross + weights.c_hat[(q, p)] * snapshots;
        r.axpy(-coeff, &components[j].a_hat, Complex64::new(1.0, 0.0));
    }
    r * Complex64::new(2.0 / nu, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::VonMises;
    use crate::model::steering_vector;

    fn exact(theta: f64, m: usize) -> ComponentPosterior {
        let mut c = ComponentPosterior::from_prior(VonMises::uniform(), m);
        c.a_hat = steering_vector(theta, m);
        c
    }

    #[test]
    fn single_component_coupling_is_m() {
        let y = MeasurementSet::new(CMatrix::from_element(5, 2, Complex64::new(0.3, -1.0))).unwrap();
        let c = ComponentPosterior::from_prior(VonMises::new(0.2, 3.0).unwrap(), 5);
        let cs = compute_coupling(&[c], &y).unwrap();
        assert_eq!(cs.j.shape(), (1, 1));
        assert_eq!(cs.j[(0, 0)], Complex64::new(5.0, 0.0));
    }

    #[test]
    fn coupling_matches_geometric_sum() {
        let m = 9;
        let thetas = [0.4, -1.2, 2.9];
        let comps: Vec<_> = thetas.iter().map(|&t| exact(t, m)).collect();
        let y = MeasurementSet::new(CMatrix::zeros(m, 1)).unwrap();
        let cs = compute_coupling(&comps, &y).unwrap();
        for (i, &ti) in thetas.iter().enumerate() {
            for (j, &tj) in thetas.iter().enumerate() {
                let oracle: Complex64 = (0..m)
                    .map(|k| Complex64::from_polar(1.0, k as f64 * (tj - ti)))
                    .sum();
                assert!((cs.j[(i, j)] - oracle).norm() < 1e-12);
                assert!(cs.j[(i, j)].norm() <= m as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn coupling_projects_rank_one_data() {
        let m = 6;
        let a = steering_vector(1.1, m);
        let w = CVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)]);
        let y = MeasurementSet::new(&a * w.transpose()).unwrap();
        let cs = compute_coupling(&[exact(1.1, m)], &y).unwrap();
        for l in 0..2 {
            assert!((cs.h[(0, l)] - w[l] * m as f64).norm() < 1e-12);
        }
    }

    #[test]
    fn coupling_checks_dimensions() {
        let y = MeasurementSet::new(CMatrix::zeros(4, 1)).unwrap();
        let c = ComponentPosterior::from_prior(VonMises::uniform(), 3);
        assert!(matches!(compute_coupling(&[c], &y), Err(Error::Dimension(_))));
    }
}
