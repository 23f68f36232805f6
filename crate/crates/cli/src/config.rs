//! Scenario files: flat TOML, every key optional.
//!
//! ```toml
//! preset = "snr-sweep"        # start from a named preset
//! components = 3              # K
//! samples = 20                # M
//! snapshots = 8               # L
//! candidates = 20             # N
//! snr_db = 0.0                # `inf` for noiseless data
//! min_separation = 0.3        # rad, default 2π/N
//! weight_mean_re = 1.0
//! weight_mean_im = 0.0
//! weight_var = 0.1
//! frequency_source = "grid"   # or "uniform"
//! source_kappa0 = 1e4
//! prior = "none"              # or "grid"
//! prior_kappa0 = 1e4
//! groups = 1
//! carry_hyperparams = false
//! max_iterations = 200
//! tolerance = 1e-5
//! no_deactivate = false
//! lambda_min = 1e-3
//! trials = 200
//! seed = 0
//! sweep_snr_db = [-5.0, 0.0, 5.0]
//! sweep_order = ["snr_db"]    # axis order, first varies slowest
//! ```
//!
//! Sweep axes are `sweep_<variable>` for `snr_db`, `snapshots`, `samples`,
//! `candidates`, `components`, `groups` and `prior_kappa0`. Any sweep key
//! replaces the preset's sweep.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mvalse::bench::{EstimatorPrior, FrequencySource, Preset, ScenarioConfig, Sweep, SweepVariable};
use num_complex::Complex64;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub components: Option<usize>,
    pub samples: Option<usize>,
    pub snapshots: Option<usize>,
    pub candidates: Option<usize>,
    pub snr_db: Option<f64>,
    pub min_separation: Option<f64>,
    pub weight_mean_re: Option<f64>,
    pub weight_mean_im: Option<f64>,
    pub weight_var: Option<f64>,
    pub frequency_source: Option<String>,
    pub source_kappa0: Option<f64>,
    pub prior: Option<String>,
    pub prior_kappa0: Option<f64>,
    pub groups: Option<usize>,
    pub carry_hyperparams: Option<bool>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub no_deactivate: Option<bool>,
    pub lambda_min: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub sweep_snr_db: Option<Vec<f64>>,
    pub sweep_snapshots: Option<Vec<f64>>,
    pub sweep_samples: Option<Vec<f64>>,
    pub sweep_candidates: Option<Vec<f64>>,
    pub sweep_components: Option<Vec<f64>>,
    pub sweep_groups: Option<Vec<f64>>,
    pub sweep_prior_kappa0: Option<Vec<f64>>,
    pub sweep_order: Option<Vec<String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    fn axes(&self) -> Vec<(SweepVariable, &Vec<f64>)> {
        [
            (SweepVariable::SnrDb, &self.sweep_snr_db),
            (SweepVariable::Snapshots, &self.sweep_snapshots),
            (SweepVariable::Samples, &self.sweep_samples),
            (SweepVariable::Candidates, &self.sweep_candidates),
            (SweepVariable::Components, &self.sweep_components),
            (SweepVariable::Groups, &self.sweep_groups),
            (SweepVariable::PriorKappa0, &self.sweep_prior_kappa0),
        ]
        .into_iter()
        .filter_map(|(v, values)| values.as_ref().map(|values| (v, values)))
        .collect()
    }

    fn preset(&self) -> Result<Option<Preset>> {
        self.preset.as_deref().map(Preset::parse).transpose().map_err(Into::into)
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = self.preset()?.map_or_else(ScenarioConfig::default, |p| p.scenario());
        macro_rules! set {
            ($($key:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$key { $field = v; })*
            };
        }
        set! {
            components => cfg.components,
            samples => cfg.samples,
            snapshots => cfg.snapshots,
            candidates => cfg.candidates,
            snr_db => cfg.snr_db,
            weight_var => cfg.weight_var,
            groups => cfg.groups,
            carry_hyperparams => cfg.carry_hyperparams,
            max_iterations => cfg.options.max_iterations,
            tolerance => cfg.options.tolerance,
            lambda_min => cfg.options.lambda_min,
            trials => cfg.trials,
            seed => cfg.rng_seed,
        }
        if self.min_separation.is_some() {
            cfg.min_separation = self.min_separation;
        }
        if let Some(flag) = self.no_deactivate {
            cfg.options.allow_deactivation = !flag;
        }
        if self.weight_mean_re.is_some() || self.weight_mean_im.is_some() {
            cfg.weight_mean = Complex64::new(
                self.weight_mean_re.unwrap_or(cfg.weight_mean.re),
                self.weight_mean_im.unwrap_or(cfg.weight_mean.im),
            );
        }
        let source_kappa0 = match cfg.frequency_source {
            FrequencySource::VonMisesGrid { kappa0 } => kappa0,
            FrequencySource::Uniform => 1e4,
        };
        match self.frequency_source.as_deref() {
            None => {
                if let (Some(k), FrequencySource::VonMisesGrid { .. }) = (self.source_kappa0, cfg.frequency_source) {
                    cfg.frequency_source = FrequencySource::VonMisesGrid { kappa0: k };
                }
            }
            Some("uniform") => cfg.frequency_source = FrequencySource::Uniform,
            Some("grid") => {
                cfg.frequency_source = FrequencySource::VonMisesGrid {
                    kappa0: self.source_kappa0.unwrap_or(source_kappa0),
                }
            }
            Some(other) => bail!("frequency_source: expected \"grid\" or \"uniform\", got \"{other}\""),
        }
        let prior_kappa0 = match cfg.prior {
            EstimatorPrior::Grid { kappa0 } => kappa0,
            EstimatorPrior::Uninformative => 1e4,
        };
        match self.prior.as_deref() {
            None => {
                if let (Some(k), EstimatorPrior::Grid { .. }) = (self.prior_kappa0, cfg.prior) {
                    cfg.prior = EstimatorPrior::Grid { kappa0: k };
                }
            }
            Some("none") => cfg.prior = EstimatorPrior::Uninformative,
            Some("grid") => {
                cfg.prior = EstimatorPrior::Grid {
                    kappa0: self.prior_kappa0.unwrap_or(prior_kappa0),
                }
            }
            Some(other) => bail!("prior: expected \"none\" or \"grid\", got \"{other}\""),
        }
        Ok(cfg)
    }

    pub fn sweep(&self) -> Result<Sweep> {
        let axes = self.axes();
        if axes.is_empty() {
            if self.sweep_order.is_some() {
                bail!("sweep_order: no sweep_<variable> keys given");
            }
            return Ok(self.preset()?.map_or_else(Sweep::default, |p| p.sweep()));
        }
        let order: Vec<SweepVariable> = match &self.sweep_order {
            None => axes.iter().map(|(v, _)| *v).collect(),
            Some(names) => {
                let order = names.iter().map(|n| SweepVariable::parse(n)).collect::<mvalse::Result<Vec<_>>>()?;
                let mut given: Vec<_> = axes.iter().map(|(v, _)| v.name()).collect();
                let mut listed: Vec<_> = order.iter().map(|v| v.name()).collect();
                given.sort_unstable();
                listed.sort_unstable();
                if given != listed {
                    bail!("sweep_order: lists {listed:?} but the sweep keys are {given:?}");
                }
                order
            }
        };
        let mut sweep = Sweep::default();
        for v in order {
            let values = axes.iter().find(|(a, _)| *a == v).map(|(_, values)| (*values).clone()).unwrap_or_default();
            sweep = sweep.then(v, values);
        }
        Ok(sweep)
    }
}
