//! Depth-first branch-and-bound.
//!
//! All quantities are rescaled to integers up front (one common denominator
//! per resource and one for the objective) so the inner loop is exact
//! integer arithmetic. Units are visited in [`UnitOrder`] order; within a
//! unit, options are tried by (variant index, node order), and an incumbent
//! is replaced only on strict improvement, which makes the reported optimum
//! the lexicographically first one in visiting order.

use std::cmp::Ordering;
use std::time::Instant;

use num_integer::Integer;

use super::{scheme_from_choices, AllocationScheme, SolveError, SolverConfig, Status, UnitOrder};
use crate::compaction::HighLayerModel;
use crate::model::Platform;
use crate::quantity::Quantity;

const DEADLINE_STRIDE: u64 = 1024;

#[derive(Debug, Clone, Copy)]
struct Choice {
    variant: usize,
    node: usize,
    demand: [i128; 3],
    cost: i128,
}

#[derive(Debug)]
struct Entry {
    /// Index into `model.units`.
    unit: usize,
    options: Vec<Choice>,
}

struct Search<'a> {
    entries: &'a [Entry],
    /// Remaining capacity per node and resource.
    free: Vec<[i128; 3]>,
    free_total: [i128; 3],
    /// Suffix sums of the cheapest option cost and of the smallest demand.
    cost_floor: Vec<i128>,
    demand_floor: Vec<[i128; 3]>,
    path: Vec<usize>,
    best_cost: Option<i128>,
    best_path: Vec<usize>,
    deadline: Option<Instant>,
    expanded: u64,
    timed_out: bool,
}

impl Search<'_> {
    fn dfs(&mut self, depth: usize, cost: i128) {
        if self.timed_out {
            return;
        }
        if self.expanded.is_multiple_of(DEADLINE_STRIDE) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                    return;
                }
            }
        }
        self.expanded += 1;

        if depth == self.entries.len() {
            if self.best_cost.is_none_or(|b| cost < b) {
                self.best_cost = Some(cost);
                self.best_path.clone_from(&self.path);
            }
            return;
        }
        if self.best_cost.is_some_and(|b| cost + self.cost_floor[depth] >= b) {
            return;
        }
        let floor = self.demand_floor[depth];
        if (0..3).any(|r| floor[r] > self.free_total[r]) {
            return;
        }

        let entry = &self.entries[depth];
        let mut tried: Vec<[i128; 3]> = Vec::new();
        let mut current_variant = usize::MAX;
        for (i, choice) in entry.options.iter().enumerate() {
            if choice.variant != current_variant {
                current_variant = choice.variant;
                tried.clear();
            }
            let next_cost = cost + choice.cost;
            if self.best_cost.is_some_and(|b| next_cost + self.cost_floor[depth + 1] >= b) {
                continue;
            }
            let free = self.free[choice.node];
            if (0..3).any(|r| choice.demand[r] > free[r]) {
                continue;
            }
            // A node with the same remaining capacity as one already tried for
            // this variant leads to a mirror-image subtree.
            if tried.contains(&free) {
                continue;
            }
            tried.push(free);

            for r in 0..3 {
                self.free[choice.node][r] -= choice.demand[r];
                self.free_total[r] -= choice.demand[r];
            }
            self.path.push(i);
            self.dfs(depth + 1, next_cost);
            self.path.pop();
            for r in 0..3 {
                self.free[choice.node][r] += choice.demand[r];
                self.free_total[r] += choice.demand[r];
            }
            if self.timed_out {
                return;
            }
        }
    }
}

/// Least common multiple of all denominators, so every value scales to an
/// integer.
fn common_scale(values: impl IntoIterator<Item = Quantity>, what: &'static str) -> Result<i128, SolveError> {
    let mut scale: i128 = 1;
    for v in values {
        let d = v.denom();
        let g = scale.gcd(&d);
        scale = (scale / g).checked_mul(d).ok_or(SolveError::Overflow(what))?;
    }
    Ok(scale)
}

fn scaled(v: Quantity, scale: i128, what: &'static str) -> Result<i128, SolveError> {
    v.scaled_integer(scale).ok_or(SolveError::Overflow(what))
}

/// Largest variant demand relative to total platform capacity, maximised over
/// resources; `None` stands for "greater than any finite ratio".
fn normalized_demand(model: &HighLayerModel, totals: [Quantity; 3], unit: usize) -> Option<Quantity> {
    let [total_mem, total_cpu, total_gpu] = totals;
    let ratio = |d: Quantity, cap: Quantity| {
        if d.is_zero() {
            Some(Quantity::ZERO)
        } else if cap.is_zero() {
            None
        } else {
            Some(d / cap)
        }
    };
    let mut best = Some(Quantity::ZERO);
    for v in &model.units[unit].variants {
        for r in [ratio(v.props.mem, total_mem), ratio(v.props.cpu, total_cpu), ratio(Quantity::from(v.props.gpu_threads), total_gpu)] {
            best = match (best, r) {
                (None, _) | (_, None) => None,
                (Some(a), Some(b)) => Some(a.max(b)),
            };
        }
    }
    best
}

fn cmp_demand(a: &Option<Quantity>, b: &Option<Quantity>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => x.cmp(y),
    }
}

pub(super) fn solve(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig) -> Result<AllocationScheme, SolveError> {
    let started = Instant::now();
    let deadline = cfg.time_limit.map(|limit| started + limit);

    let variants = || model.units.iter().flat_map(|u| u.variants.iter());
    let mem_scale = common_scale(variants().map(|v| v.props.mem).chain(platform.nodes.iter().map(|n| n.use_mem)), "mem")?;
    let cpu_scale = common_scale(variants().map(|v| v.props.cpu).chain(platform.nodes.iter().map(|n| n.use_cpu)), "cpu")?;
    let costs: Vec<Vec<Quantity>> = model
        .units
        .iter()
        .map(|u| {
            let w = cfg.weight(&u.id);
            u.variants.iter().map(|v| w * v.props.exec_ms).collect()
        })
        .collect();
    let cost_scale = common_scale(costs.iter().flatten().copied(), "objective")?;

    let capacity: Vec<[i128; 3]> = platform
        .nodes
        .iter()
        .map(|n| Ok([scaled(n.use_mem, mem_scale, "mem")?, scaled(n.use_cpu, cpu_scale, "cpu")?, n.use_gpu as i128]))
        .collect::<Result<_, SolveError>>()?;

    let mut order: Vec<usize> = (0..model.units.len()).collect();
    if cfg.unit_order == UnitOrder::DescendingDemand {
        let totals = [
            platform.nodes.iter().map(|n| n.use_mem).sum(),
            platform.nodes.iter().map(|n| n.use_cpu).sum(),
            Quantity::from(platform.nodes.iter().map(|n| n.use_gpu).sum::<u64>()),
        ];
        let keys: Vec<Option<Quantity>> = order.iter().map(|&u| normalized_demand(model, totals, u)).collect();
        // Stable sort keeps declaration order among equal demands.
        order.sort_by(|&a, &b| cmp_demand(&keys[b], &keys[a]));
    }

    let mut entries = Vec::with_capacity(order.len());
    for &u in &order {
        let unit = &model.units[u];
        let mut options = Vec::new();
        for (vi, v) in unit.variants.iter().enumerate() {
            let demand = [scaled(v.props.mem, mem_scale, "mem")?, scaled(v.props.cpu, cpu_scale, "cpu")?, v.props.gpu_threads as i128];
            let cost = scaled(costs[u][vi], cost_scale, "objective")?;
            for (ni, cap) in capacity.iter().enumerate() {
                if (0..3).all(|r| demand[r] <= cap[r]) {
                    options.push(Choice { variant: vi, node: ni, demand, cost });
                }
            }
        }
        if options.is_empty() {
            log::debug!("unit {} fits on no node", unit.id);
            return Ok(AllocationScheme::infeasible());
        }
        entries.push(Entry { unit: u, options });
    }

    let n = entries.len();
    let mut cost_floor = vec![0i128; n + 1];
    let mut demand_floor = vec![[0i128; 3]; n + 1];
    for d in (0..n).rev() {
        let opts = &entries[d].options;
        cost_floor[d] = cost_floor[d + 1] + opts.iter().map(|c| c.cost).min().unwrap_or(0);
        demand_floor[d] = std::array::from_fn(|r| demand_floor[d + 1][r] + opts.iter().map(|c| c.demand[r]).min().unwrap_or(0));
    }
    let mut free_total = [0i128; 3];
    for cap in &capacity {
        for r in 0..3 {
            free_total[r] += cap[r];
        }
    }

    let mut search = Search {
        entries: &entries,
        free: capacity.clone(),
        free_total,
        cost_floor,
        demand_floor,
        path: Vec::with_capacity(n),
        best_cost: None,
        best_path: Vec::new(),
        deadline,
        expanded: 0,
        timed_out: false,
    };
    search.dfs(0, 0);
    log::debug!("branch-and-bound: {} nodes expanded in {:?}, timed out: {}", search.expanded, started.elapsed(), search.timed_out);

    let status = match (search.timed_out, search.best_cost) {
        (true, _) => Status::Timeout,
        (false, Some(_)) => Status::Optimal,
        (false, None) => return Ok(AllocationScheme::infeasible()),
    };
    if status == Status::Timeout && !(cfg.report_incumbent && search.best_cost.is_some()) {
        return Ok(AllocationScheme::timeout());
    }

    let mut choices = vec![(0usize, 0usize); model.units.len()];
    for (entry, &i) in entries.iter().zip(&search.best_path) {
        let c = entry.options[i];
        choices[entry.unit] = (c.variant, c.node);
    }
    Ok(scheme_from_choices(model, platform, cfg, status, &choices))
}
