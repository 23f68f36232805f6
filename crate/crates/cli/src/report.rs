//! Output files.
//!
//! Estimate report (JSON): `k_hat`, `theta_rad`, `doa_deg` (only with
//! `--doa`), `kappa`, `weights` as `k_hat × L` `[re, im]` pairs, `nu`,
//! `tau`, `lambda`, `iterations`, `converged`, plus the problem size and a
//! `units` table.
//!
//! Ground-truth sidecar (JSON): `theta_rad`, `weights` (`K × L` pairs),
//! `noise_variance`, `snr_db`, `seed`, `rng`, `trial`, `samples`,
//! `snapshots`.
//!
//! Aggregate table (CSV and JSON): one row per sweep point with the sweep
//! variables, `trials`, `nmse_x_db`, `nmse_theta_db`,
//! `median_nmse_theta_db`, `p_correct`, `p_over`, `mean_k_hat`,
//! `runtime_seconds`, `seed`, `rng`. NMSE columns are `10·log10` of the
//! mean linear ratio over trials; empty when undefined. Per-trial tables
//! use the same sweep columns followed by trial outcomes; angle lists are
//! space-separated radians.

use std::path::Path;

use anyhow::{Context, Result};
use mvalse::bench::{GroundTruth, PointResult, ScenarioConfig, SweepVariable, RNG_NAME};
use mvalse::model::CMatrix;
use mvalse::Estimate;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::data::float;

/// `φ = asin(θ/π)` in degrees: the arrival angle on a half-wavelength array.
pub fn doa_degrees(theta: f64) -> f64 {
    (theta / std::f64::consts::PI).clamp(-1.0, 1.0).asin().to_degrees()
}

fn pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Units {
    pub theta_rad: &'static str,
    pub kappa: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doa_deg: Option<&'static str>,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub samples: usize,
    pub snapshots: usize,
    pub candidates: usize,
    pub groups: usize,
    pub k_hat: usize,
    pub theta_rad: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doa_deg: Option<Vec<f64>>,
    pub kappa: Vec<f64>,
    pub weights: Vec<Vec<[f64; 2]>>,
    pub nu: f64,
    pub tau: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub units: Units,
}

impl EstimateReport {
    pub fn new(est: &Estimate, samples: usize, candidates: usize, groups: usize, doa: bool) -> Self {
        Self {
            samples,
            snapshots: est.x_hat.ncols(),
            candidates,
            groups,
            k_hat: est.k_hat,
            theta_rad: est.thetas.clone(),
            doa_deg: doa.then(|| est.thetas.iter().map(|&t| doa_degrees(t)).collect()),
            kappa: est.concentrations.clone(),
            weights: pairs(&est.weights),
            nu: est.hyper.nu,
            tau: est.hyper.tau,
            lambda: est.hyper.lambda,
            iterations: est.iterations,
            converged: est.converged,
            units: Units {
                theta_rad: "radians per sample, in (-pi, pi]",
                kappa: "von Mises concentration, dimensionless",
                doa_deg: doa.then_some("degrees from broadside, asin(theta/pi)"),
            },
        }
    }
}

pub fn truth_json(truth: &GroundTruth, cfg: &ScenarioConfig, trial: usize) -> Value {
    let finite = |x: f64| if x.is_finite() { json!(x) } else { json!(x.to_string()) };
    json!({
        "theta_rad": truth.thetas,
        "weights": pairs(&truth.weights),
        "noise_variance": truth.noise_variance,
        "snr_db": finite(truth.snr_db),
        "seed": cfg.rng_seed,
        "rng": RNG_NAME,
        "trial": trial,
        "samples": cfg.samples,
        "snapshots": cfg.snapshots,
        "components": cfg.components,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn angles(xs: &[f64]) -> String {
    xs.iter().map(|&x| float(x)).collect::<Vec<_>>().join(" ")
}

pub const AGGREGATE_COLUMNS: [&str; 10] = [
    "trials",
    "nmse_x_db",
    "nmse_theta_db",
    "median_nmse_theta_db",
    "p_correct",
    "p_over",
    "mean_k_hat",
    "runtime_seconds",
    "seed",
    "rng",
];

pub const TRIAL_COLUMNS: [&str; 12] = [
    "trial",
    "k",
    "k_hat",
    "nmse_x_db",
    "nmse_theta_db",
    "order_correct",
    "order_over",
    "iterations",
    "converged",
    "runtime_seconds",
    "true_theta_rad",
    "est_theta_rad",
];

pub fn aggregate_csv(vars: &[SweepVariable], points: &[PointResult], seed: u64) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = vars.iter().map(|v| v.name()).chain(AGGREGATE_COLUMNS).collect();
    w.write_record(&header)?;
    for p in points {
        let r = &p.row;
        let mut rec: Vec<String> = r.point.iter().map(|&(_, x)| float(x)).collect();
        rec.extend([
            r.trials.to_string(),
            opt(r.nmse_x_db),
            opt(r.nmse_theta_db),
            opt(r.median_nmse_theta_db),
            float(r.p_correct),
            float(r.p_over),
            float(r.mean_k_hat),
            float(r.runtime_seconds),
            seed.to_string(),
            RNG_NAME.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn trials_csv(vars: &[SweepVariable], points: &[PointResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = vars.iter().map(|v| v.name()).chain(TRIAL_COLUMNS).collect();
    w.write_record(&header)?;
    for p in points {
        for t in &p.trials {
            let mut rec: Vec<String> = p.row.point.iter().map(|&(_, x)| float(x)).collect();
            rec.extend([
                t.trial.to_string(),
                t.k.to_string(),
                t.k_hat.to_string(),
                opt(t.nmse_x_db),
                opt(t.nmse_theta_db),
                t.order_correct.to_string(),
                t.order_over.to_string(),
                t.iterations.to_string(),
                t.converged.to_string(),
                float(t.runtime_seconds),
                angles(&t.true_thetas),
                angles(&t.est_thetas),
            ]);
            w.write_record(&rec)?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn aggregate_json(base: &ScenarioConfig, vars: &[SweepVariable], points: &[PointResult]) -> Value {
    let rows: Vec<Value> = points
        .iter()
        .map(|p| {
            let r = &p.row;
            let mut row = Map::new();
            for &(v, x) in &r.point {
                row.insert(v.name().into(), json!(x));
            }
            row.insert("trials".into(), json!(r.trials));
            row.insert("nmse_x_db".into(), json!(r.nmse_x_db));
            row.insert("nmse_theta_db".into(), json!(r.nmse_theta_db));
            row.insert("median_nmse_theta_db".into(), json!(r.median_nmse_theta_db));
            row.insert("p_correct".into(), json!(r.p_correct));
            row.insert("p_over".into(), json!(r.p_over));
            row.insert("mean_k_hat".into(), json!(r.mean_k_hat));
            row.insert("runtime_seconds".into(), json!(r.runtime_seconds));
            Value::Object(row)
        })
        .collect();
    let snr = if base.snr_db.is_finite() { json!(base.snr_db) } else { json!(base.snr_db.to_string()) };
    let mut scenario = serde_json::to_value(base).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut scenario {
        map.insert("snr_db".into(), snr);
    }
    json!({
        "seed": base.rng_seed,
        "rng": RNG_NAME,
        "nmse_aggregation": "10*log10 of the mean linear ratio over trials",
        "units": { "nmse": "dB", "runtime_seconds": "seconds per trial, 0 unless timed" },
        "sweep": vars.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "scenario": scenario,
        "rows": rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doa_inverts_the_array_mapping() {
        for deg in [-60.0f64, -5.0, 0.0, 5.0, 30.0, 89.0] {
            let theta = std::f64::consts::PI * deg.to_radians().sin();
            assert!((doa_degrees(theta) - deg).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_sweep_gives_a_header_only_table() {
        let text = aggregate_csv(&[SweepVariable::SnrDb], &[], 7).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("snr_db,trials,nmse_x_db"));
    }
}
