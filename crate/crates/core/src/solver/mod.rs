//! Joint variant selection and placement over the compacted model.
//!
//! The allocator minimises the (weighted) sum of the chosen variants'
//! execution times subject to, for every node, summed memory, summed CPU
//! load and summed GPU threads not exceeding the node's capacity. Threads
//! sum across distinct units here; within a unit they were already reduced
//! by maximum during compaction.
//!
//! [`solve`] is a depth-first branch-and-bound; [`brute_force`] enumerates
//! every assignment and serves as the oracle for it. [`export_lp`] writes
//! the same problem as a 0/1 program for external solvers.

mod lp;
mod oracle;
mod search;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::compaction::{CompactionError, HighLayerModel};
use crate::model::{NodeId, NodeLoad, Platform, UnitId, Violation};
use crate::quantity::Quantity;

pub use lp::{export_lp, export_lp_string, LpError};
pub use oracle::{brute_force, brute_force_counted, enumeration_size, BRUTE_FORCE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    /// The time limit expired before optimality was proven.
    Timeout,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub variant: usize,
    pub node: NodeId,
}

/// Chosen variant and node per unit, with the objective value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationScheme {
    pub status: Status,
    pub objective_ms: Option<Quantity>,
    pub placements: BTreeMap<UnitId, Placement>,
}

impl AllocationScheme {
    pub fn infeasible() -> Self {
        AllocationScheme { status: Status::Infeasible, objective_ms: None, placements: BTreeMap::new() }
    }

    pub fn timeout() -> Self {
        AllocationScheme { status: Status::Timeout, objective_ms: None, placements: BTreeMap::new() }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Pretty JSON with a trailing newline; byte-identical for equal schemes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scheme serialization is infallible");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitOrder {
    /// Largest normalized demand first; declaration order breaks ties.
    #[default]
    DescendingDemand,
    Declared,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SolverConfig {
    /// Objective weight per unit; units not listed weigh 1.
    pub unit_weights: BTreeMap<UnitId, Quantity>,
    pub time_limit: Option<Duration>,
    pub unit_order: UnitOrder,
    /// On timeout, return the best scheme found so far (status stays `timeout`).
    pub report_incumbent: bool,
}

impl SolverConfig {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }

    pub fn with_weight(mut self, unit: impl Into<UnitId>, weight: Quantity) -> Self {
        self.unit_weights.insert(unit.into(), weight);
        self
    }

    pub fn weight(&self, unit: &UnitId) -> Quantity {
        self.unit_weights.get(unit).copied().unwrap_or(Quantity::ONE)
    }

    fn validate(&self, model: &HighLayerModel) -> Result<(), SolveError> {
        for (unit, w) in &self.unit_weights {
            if !w.is_positive() {
                return Err(SolveError::NonPositiveWeight(unit.to_string(), *w));
            }
            if model.unit(unit.as_str()).is_none() {
                return Err(SolveError::UnknownWeightUnit(unit.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid compacted model: {0}")]
    Model(#[from] CompactionError),
    #[error("invalid platform: {0}")]
    Platform(String),
    #[error("weight of unit {0:?} must be positive, got {1}")]
    NonPositiveWeight(String, Quantity),
    #[error("weight given for unknown unit {0:?}")]
    UnknownWeightUnit(String),
    #[error("brute force would enumerate {size} assignments, limit is {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("numeric overflow while scaling {0} to integers")]
    Overflow(&'static str),
}

fn check_inputs(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig) -> Result<(), SolveError> {
    model.validate()?;
    if let Some(d) = platform.validate().first() {
        return Err(SolveError::Platform(d.to_string()));
    }
    cfg.validate(model)
}

/// Optimal allocation by branch-and-bound.
pub fn solve(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig) -> Result<AllocationScheme, SolveError> {
    check_inputs(model, platform, cfg)?;
    search::solve(model, platform, cfg)
}

/// Builds a scheme from per-unit (variant, node index) choices in declared
/// unit order.
pub(crate) fn scheme_from_choices(
    model: &HighLayerModel,
    platform: &Platform,
    cfg: &SolverConfig,
    status: Status,
    choices: &[(usize, usize)],
) -> AllocationScheme {
    let mut placements = BTreeMap::new();
    let mut objective = Quantity::ZERO;
    for (unit, &(variant, node)) in model.units.iter().zip(choices) {
        objective += cfg.weight(&unit.id) * unit.variants[variant].props.exec_ms;
        placements.insert(unit.id.clone(), Placement { variant, node: platform.nodes[node].id.clone() });
    }
    AllocationScheme { status, objective_ms: Some(objective), placements }
}

/// Per-node totals of a compacted scheme; GPU threads sum across units.
pub fn compacted_loads(
    scheme: &AllocationScheme,
    model: &HighLayerModel,
    platform: &Platform,
) -> Result<BTreeMap<NodeId, NodeLoad>, CompactionError> {
    let mut loads: BTreeMap<NodeId, NodeLoad> = BTreeMap::new();
    for unit in &model.units {
        let p = scheme.placements.get(&unit.id).ok_or_else(|| CompactionError::MissingUnit(unit.id.to_string()))?;
        let v = unit.variants.get(p.variant).ok_or_else(|| CompactionError::InvalidVariant {
            unit: unit.id.to_string(),
            variant: p.variant,
            count: unit.variants.len(),
        })?;
        if platform.node(p.node.as_str()).is_none() {
            return Err(CompactionError::Model(crate::model::ModelError::UnknownNode(p.node.to_string())));
        }
        let load = loads.entry(p.node.clone()).or_default();
        load.mem += v.props.mem;
        load.cpu += v.props.cpu;
        load.exec_ms += v.props.exec_ms;
        load.gpu_threads += v.props.gpu_threads;
    }
    Ok(loads)
}

/// Compacted-layer constraint check of a scheme.
pub fn check_scheme(scheme: &AllocationScheme, model: &HighLayerModel, platform: &Platform) -> Result<Vec<Violation>, CompactionError> {
    let loads = compacted_loads(scheme, model, platform)?;
    Ok(platform.nodes.iter().filter_map(|n| loads.get(&n.id).map(|l| l.violations(n))).flatten().collect())
}
