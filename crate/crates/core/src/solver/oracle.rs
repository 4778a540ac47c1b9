//! Exhaustive enumeration, kept deliberately naive: exact rational
//! arithmetic, declared unit order, every (variant, node) combination
//! visited, constraints checked only at the leaves.

use super::{check_inputs, scheme_from_choices, AllocationScheme, SolveError, SolverConfig, Status};
use crate::compaction::HighLayerModel;
use crate::model::Platform;
use crate::quantity::Quantity;

/// Largest enumeration `brute_force` accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Number of complete assignments: the product of variants times nodes.
pub fn enumeration_size(model: &HighLayerModel, platform: &Platform) -> u128 {
    let k = platform.nodes.len() as u128;
    model.units.iter().fold(1u128, |acc, u| acc.saturating_mul(u.variants.len() as u128 * k))
}

/// Optimal allocation by enumerating every assignment.
pub fn brute_force(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig) -> Result<AllocationScheme, SolveError> {
    brute_force_counted(model, platform, cfg).map(|(scheme, _)| scheme)
}

/// [`brute_force`], also returning how many assignments were evaluated.
pub fn brute_force_counted(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig) -> Result<(AllocationScheme, u64), SolveError> {
    check_inputs(model, platform, cfg)?;
    let size = enumeration_size(model, platform);
    if size > BRUTE_FORCE_LIMIT {
        return Err(SolveError::TooLarge { size, limit: BRUTE_FORCE_LIMIT });
    }
    let weights: Vec<Quantity> = model.units.iter().map(|u| cfg.weight(&u.id)).collect();
    let mut state = Exhaust {
        model,
        platform,
        weights: &weights,
        mem: vec![Quantity::ZERO; platform.nodes.len()],
        cpu: vec![Quantity::ZERO; platform.nodes.len()],
        gpu: vec![0; platform.nodes.len()],
        current: Vec::with_capacity(model.units.len()),
        best: None,
        visited: 0,
    };
    state.visit(0, Quantity::ZERO);
    let visited = state.visited;
    let scheme = match state.best {
        Some((_, choices)) => scheme_from_choices(model, platform, cfg, Status::Optimal, &choices),
        None => AllocationScheme::infeasible(),
    };
    Ok((scheme, visited))
}

struct Exhaust<'a> {
    model: &'a HighLayerModel,
    platform: &'a Platform,
    weights: &'a [Quantity],
    mem: Vec<Quantity>,
    cpu: Vec<Quantity>,
    gpu: Vec<u64>,
    current: Vec<(usize, usize)>,
    best: Option<(Quantity, Vec<(usize, usize)>)>,
    visited: u64,
}

impl Exhaust<'_> {
    fn visit(&mut self, depth: usize, cost: Quantity) {
        let Some(unit) = self.model.units.get(depth) else {
            self.visited += 1;
            let fits = self
                .platform
                .nodes
                .iter()
                .enumerate()
                .all(|(h, node)| self.mem[h] <= node.use_mem && self.cpu[h] <= node.use_cpu && self.gpu[h] <= node.use_gpu);
            if fits && self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.current.clone()));
            }
            return;
        };
        for (v, variant) in unit.variants.iter().enumerate() {
            let p = variant.props;
            let step = self.weights[depth] * p.exec_ms;
            for h in 0..self.platform.nodes.len() {
                self.mem[h] += p.mem;
                self.cpu[h] += p.cpu;
                self.gpu[h] += p.gpu_threads;
                self.current.push((v, h));
                self.visit(depth + 1, cost + step);
                self.current.pop();
                self.mem[h] = self.mem[h] - p.mem;
                self.cpu[h] = self.cpu[h] - p.cpu;
                self.gpu[h] -= p.gpu_threads;
            }
        }
    }
}
