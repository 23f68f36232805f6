//! Group-wise processing: snapshots are split into consecutive groups, each
//! group is estimated on its own, and the frequency beliefs it ends with
//! become the priors of the next group.

use serde::{Deserialize, Serialize};

use crate::engine::{run_with, BatchKernel, Options, UpdateKernel};
use crate::error::{Error, Result};
use crate::model::{Estimate, MeasurementSet, PriorConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPlan {
    group_sizes: Vec<usize>,
}

impl GroupPlan {
    pub fn new(group_sizes: Vec<usize>) -> Result<Self> {
        if group_sizes.is_empty() || group_sizes.contains(&0) {
            return Err(Error::Domain(format!("every group needs at least one snapshot, got {group_sizes:?}")));
        }
        Ok(Self { group_sizes })
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn total(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// `(start, count)` column range of every group.
    pub fn ranges(&self) -> Vec<(usize, usize)> {
        let mut start = 0;
        self.group_sizes
            .iter()
            .map(|&g| {
                let r = (start, g);
                start += g;
                r
            })
            .collect()
    }
}

/// Splits `snapshots` into `groups` near-equal consecutive groups; the
/// first `snapshots % groups` groups are one larger.
pub fn partition(snapshots: usize, groups: usize) -> Result<GroupPlan> {
    if groups == 0 || groups > snapshots {
        return Err(Error::Domain(format!("cannot split {snapshots} snapshots into {groups} groups")));
    }
    let base = snapshots / groups;
    let extra = snapshots % groups;
    GroupPlan::new((0..groups).map(|g| base + usize::from(g < extra)).collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequentialOptions {
    pub engine: Options,
    /// Start each group from the previous group's `ν, λ, τ` instead of
    /// re-estimating them from the group's data.
    pub carry_hyperparams: bool,
}

/// Every group's estimate, in group order.
pub fn run_sequential_traced_with<K: UpdateKernel + ?Sized>(
    y: &MeasurementSet,
    priors: &PriorConfig,
    plan: &GroupPlan,
    options: &SequentialOptions,
    kernel: &K,
) -> Result<Vec<Estimate>> {
    if plan.total() != y.snapshots() {
        return Err(Error::Dimension(format!(
            "group plan covers {} snapshots, data has {}",
            plan.total(),
            y.snapshots()
        )));
    }
    let mut current = priors.clone();
    let mut engine = options.engine.clone();
    let mut trace = Vec::with_capacity(plan.groups());
    for (start, count) in plan.ranges() {
        let group = y.columns(start, count)?;
        let estimate = run_with(&group, &current, &engine, kernel)?;
        current = current.with_priors(estimate.posteriors.clone())?;
        if options.carry_hyperparams {
            engine.initial_hyper = Some(estimate.hyper);
        }
        trace.push(estimate);
    }
    Ok(trace)
}

pub fn run_sequential_traced(
    y: &MeasurementSet,
    priors: &PriorConfig,
    plan: &GroupPlan,
    options: &SequentialOptions,
) -> Result<Vec<Estimate>> {
    run_sequential_traced_with(y, priors, plan, options, &BatchKernel)
}

/// The last group's estimate.
pub fn run_sequential(
    y: &MeasurementSet,
    priors: &PriorConfig,
    plan: &GroupPlan,
    options: &SequentialOptions,
) -> Result<Estimate> {
    let mut trace = run_sequential_traced(y, priors, plan, options)?;
    Ok(trace.pop().expect("a plan has at least one group"))
}
