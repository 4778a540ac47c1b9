//! Seeded random instances and independent reference computations shared by
//! the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hetalloc::bench::SplitMix64;
use hetalloc::compaction::{compact, HighLayerModel};
use hetalloc::model::{
    Assembly, Component, ComponentId, ComponentKind, DetailedAssignment, HardwareNode, Platform, Repository, ResourceDemand,
};
use hetalloc::solver::{enumeration_size, AllocationScheme, SolverConfig};
use hetalloc::Quantity;

/// A compacted instance together with the detailed layer it came from.
#[derive(Debug, Clone)]
pub struct Instance {
    pub repo: Repository,
    pub model: HighLayerModel,
    pub platform: Platform,
}

/// Size limits for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_units: u64,
    pub max_variants: u64,
    pub max_nodes: u64,
    /// Cap on the brute-force enumeration size; larger draws are redrawn.
    pub max_enumeration: u128,
}

pub const SMALL: Limits = Limits { max_units: 8, max_variants: 3, max_nodes: 4, max_enumeration: 200_000 };

fn quantity(rng: &mut SplitMix64, lo: u64, hi: u64) -> Quantity {
    // Mix integers, tenths and thirds so both decimal and non-decimal
    // rationals appear.
    let den = [1u64, 10, 3][rng.uniform(0, 2) as usize];
    Quantity::new(rng.uniform(lo * den, hi * den) as i128, den as i128)
}

fn round_tenths(q: Quantity) -> Quantity {
    Quantity::new((q.numer() * 10) / q.denom(), 10)
}

/// The instance drawn for `seed`.
pub fn random_instance(seed: u64, limits: Limits) -> Instance {
    for attempt in 0.. {
        let mut rng = SplitMix64::derive(seed, &[attempt]);
        let units = rng.uniform(1, limits.max_units) as usize;
        let nodes = rng.uniform(1, limits.max_nodes) as usize;
        let variant_counts: Vec<usize> = (0..units).map(|_| rng.uniform(1, limits.max_variants) as usize).collect();
        let size = variant_counts.iter().fold(1u128, |acc, &v| acc * (v * nodes) as u128);
        if size > limits.max_enumeration {
            continue;
        }
        return build(&mut rng, &variant_counts, nodes);
    }
    unreachable!()
}

fn build(rng: &mut SplitMix64, variant_counts: &[usize], nodes: usize) -> Instance {
    let mut components = Vec::new();
    let mut groups = BTreeMap::new();
    let mut unit_versions: Vec<Vec<Vec<ComponentId>>> = Vec::new();
    for (u, _) in variant_counts.iter().enumerate() {
        let functions = rng.uniform(1, 3) as usize;
        let mut per_function = Vec::new();
        for f in 0..functions {
            let function = format!("u{u}f{f}");
            let mut versions = Vec::new();
            let cpu_id = format!("{function}_cpu");
            components.push(Component::new(
                cpu_id.as_str(),
                ComponentKind::Cpu,
                function.as_str(),
                ResourceDemand {
                    mem: quantity(rng, 1, 8),
                    cpu: quantity(rng, 0, 1) + Quantity::new(1, 10),
                    gpu_threads: 0,
                    exec_ms: quantity(rng, 2, 12),
                },
            ));
            versions.push(ComponentId::from(cpu_id));
            if rng.uniform(0, 2) > 0 {
                let gpu_id = format!("{function}_gpu");
                components.push(Component::new(
                    gpu_id.as_str(),
                    ComponentKind::Gpu,
                    function.as_str(),
                    ResourceDemand {
                        mem: quantity(rng, 1, 10),
                        cpu: quantity(rng, 0, 1) / Quantity::from(2u64) + Quantity::new(1, 20),
                        gpu_threads: rng.uniform(16, 256),
                        exec_ms: quantity(rng, 1, 6),
                    },
                ));
                versions.push(ComponentId::from(gpu_id));
            }
            groups.insert(function, versions.clone());
            per_function.push(versions);
        }
        unit_versions.push(per_function);
    }
    let repo = Repository::new(components, groups);

    let mut units = Vec::new();
    for (u, &count) in variant_counts.iter().enumerate() {
        let alternatives: Vec<Assembly> = (0..count)
            .map(|_| {
                let members: Vec<ComponentId> =
                    unit_versions[u].iter().map(|versions| versions[rng.uniform(0, versions.len() as u64 - 1) as usize].clone()).collect();
                let links = members.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
                Assembly::new(members, links)
            })
            .collect();
        units.push(compact(&alternatives, &repo, &format!("u{u}")).expect("generated alternatives compact"));
    }
    let connections = units.windows(2).filter(|_| rng.uniform(0, 1) == 1).map(|w| (w[0].id.clone(), w[1].id.clone())).collect();
    let model = HighLayerModel::new(units, connections);

    // Capacities are drawn around an even share of the average total demand,
    // so constraints bind often without making most draws infeasible.
    let average = |f: fn(&hetalloc::compaction::VariantProperties) -> Quantity| -> Quantity {
        model.units.iter().map(|u| u.variants.iter().map(|v| f(&v.props)).sum::<Quantity>() / Quantity::from(u.variants.len() as u64)).sum()
    };
    let share_mem = average(|p| p.mem) / Quantity::from(nodes as u64);
    let share_cpu = average(|p| p.cpu) / Quantity::from(nodes as u64);
    let platform = Platform::new(
        (0..nodes)
            .map(|h| {
                // The first node always has a GPU, later ones with odds 1/2.
                let gpu = if h == 0 || rng.uniform(0, 1) == 1 { rng.uniform(128, 640) } else { 0 };
                let mem = (share_mem * Quantity::new(rng.uniform(10, 25) as i128, 10)).max(Quantity::ONE);
                let cpu = share_cpu * Quantity::new(rng.uniform(10, 25) as i128, 10);
                HardwareNode::new(format!("h{h}"), round_tenths(mem), round_tenths(cpu), gpu)
            })
            .collect(),
    );
    debug_assert!(enumeration_size(&model, &platform) > 0);
    Instance { repo, model, platform }
}

/// Optimal objective and every assignment attaining it.
pub type Optima = (Option<Quantity>, BTreeSet<Vec<(usize, usize)>>);

/// Every optimal assignment as a map unit index -> (variant, node index),
/// found by exhaustive enumeration written independently of the library.
pub fn all_optima(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig) -> Optima {
    fn go(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig, choice: &mut Vec<(usize, usize)>, best: &mut Optima) {
        let depth = choice.len();
        if depth == model.units.len() {
            for (h, node) in platform.nodes.iter().enumerate() {
                let mut mem = Quantity::ZERO;
                let mut cpu = Quantity::ZERO;
                let mut gpu = 0u64;
                for (u, &(v, at)) in choice.iter().enumerate() {
                    if at == h {
                        let p = model.units[u].variants[v].props;
                        mem += p.mem;
                        cpu += p.cpu;
                        gpu += p.gpu_threads;
                    }
                }
                if mem > node.use_mem || cpu > node.use_cpu || gpu > node.use_gpu {
                    return;
                }
            }
            let cost = choice
                .iter()
                .enumerate()
                .fold(Quantity::ZERO, |acc, (u, &(v, _))| acc + cfg.weight(&model.units[u].id) * model.units[u].variants[v].props.exec_ms);
            match best.0 {
                Some(b) if cost > b => {}
                Some(b) if cost == b => {
                    best.1.insert(choice.clone());
                }
                _ => {
                    best.0 = Some(cost);
                    best.1 = BTreeSet::from([choice.clone()]);
                }
            }
            return;
        }
        for v in 0..model.units[depth].variants.len() {
            for h in 0..platform.nodes.len() {
                choice.push((v, h));
                go(model, platform, cfg, choice, best);
                choice.pop();
            }
        }
    }
    let mut best = (None, BTreeSet::new());
    go(model, platform, cfg, &mut Vec::new(), &mut best);
    best
}

/// A scheme's placements as (variant, node index) in declared unit order.
pub fn choices(scheme: &AllocationScheme, model: &HighLayerModel, platform: &Platform) -> Vec<(usize, usize)> {
    model
        .units
        .iter()
        .map(|u| {
            let p = &scheme.placements[&u.id];
            let h = platform.nodes.iter().position(|n| n.id == p.node).expect("scheme names a platform node");
            (p.variant, h)
        })
        .collect()
}

/// Per-node (mem, cpu, exec) sums taken directly from member components.
pub fn detailed_sums(assignment: &DetailedAssignment, repo: &Repository) -> BTreeMap<String, (Quantity, Quantity, Quantity, u64)> {
    let mut out: BTreeMap<String, (Quantity, Quantity, Quantity, u64)> = BTreeMap::new();
    for (instance, node) in &assignment.placements {
        let c = repo.get(instance.component.as_str()).expect("member exists");
        let e = out.entry(node.to_string()).or_insert((Quantity::ZERO, Quantity::ZERO, Quantity::ZERO, 0));
        e.0 += c.demand.mem;
        e.1 += c.demand.cpu;
        e.2 += c.demand.exec_ms;
        e.3 = e.3.max(c.demand.gpu_threads);
    }
    out
}

/// Per-node (mem, cpu, exec) sums of the chosen variants' stored props.
pub fn compacted_sums(scheme: &AllocationScheme, model: &HighLayerModel) -> BTreeMap<String, (Quantity, Quantity, Quantity, u64)> {
    let mut out: BTreeMap<String, (Quantity, Quantity, Quantity, u64)> = BTreeMap::new();
    for unit in &model.units {
        let p = &scheme.placements[&unit.id];
        let props = unit.variants[p.variant].props;
        let e = out.entry(p.node.to_string()).or_insert((Quantity::ZERO, Quantity::ZERO, Quantity::ZERO, 0));
        e.0 += props.mem;
        e.1 += props.cpu;
        e.2 += props.exec_ms;
        e.3 += props.gpu_threads;
    }
    out
}
