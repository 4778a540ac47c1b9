//! Scalability benchmark: a chain of `n + 1` components, the first `n` in a
//! CPU and a GPU version, allocated three ways.
//!
//! * naive CPU: every component (CPU versions) is its own allocation unit;
//! * naive GPU: the same with the GPU versions;
//! * two-variant: the `n` dual components compacted into one unit whose
//!   variants are the all-CPU and the all-GPU assembly, plus the tail.
//!
//! Instances are drawn from [`SplitMix64`] streams derived from the seed, so
//! they are reproducible bit for bit. Sampled instances that are not
//! solvable under all three formulations are rejected and redrawn under the
//! next attempt number.

pub mod rng;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use rng::SplitMix64;

use crate::compaction::{compact, CompactionError, HighLayerModel, MultiVariantUnit};
use crate::model::{Assembly, Component, ComponentId, ComponentKind, HardwareNode, Platform, Repository, ResourceDemand, UnitId};
use crate::quantity::Quantity;
use crate::solver::{solve, AllocationScheme, SolveError, SolverConfig, Status};

/// Stream label for component draws.
pub const LABEL_COMPONENT: u64 = 0;
/// Stream label for node draws.
pub const LABEL_NODE: u64 = 1;

pub const NODE_COUNT: usize = 6;
pub const GPU_NODE_COUNT: usize = 3;
pub const MAX_ATTEMPTS: u64 = 10_000;
/// Per-solve limit when checking a draw for acceptance.
pub const GENERATION_TIME_LIMIT: Duration = Duration::from_secs(2);

/// Inclusive integer sampling range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub lo: u64,
    pub hi: u64,
}

impl Range {
    pub const fn new(lo: u64, hi: u64) -> Self {
        Range { lo, hi }
    }

    fn draw(self, rng: &mut SplitMix64) -> u64 {
        rng.uniform(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRanges {
    /// Component memory, MB.
    pub component_mem: Range,
    /// Component CPU load in tenths of a load unit.
    pub component_cpu_tenths: Range,
    /// Execution time of CPU versions, ms. GPU versions take half, rounded up.
    pub cpu_exec_ms: Range,
    pub gpu_threads: Range,
    /// Node memory, MB.
    pub node_mem: Range,
    /// Node CPU capacity, load units.
    pub node_cpu: Range,
    /// GPU threads of the GPU-equipped nodes.
    pub node_gpu: Range,
}

impl Default for BenchRanges {
    fn default() -> Self {
        BenchRanges {
            component_mem: Range::new(1, 100),
            component_cpu_tenths: Range::new(1, 10),
            cpu_exec_ms: Range::new(5, 50),
            gpu_threads: Range::new(50, 500),
            node_mem: Range::new(100, 2500),
            node_cpu: Range::new(10, 60),
            node_gpu: Range::new(4096, 16384),
        }
    }
}

impl BenchRanges {
    fn validate(&self) -> Result<(), BenchError> {
        let all = [
            ("component_mem", self.component_mem),
            ("component_cpu_tenths", self.component_cpu_tenths),
            ("cpu_exec_ms", self.cpu_exec_ms),
            ("gpu_threads", self.gpu_threads),
            ("node_mem", self.node_mem),
            ("node_cpu", self.node_cpu),
            ("node_gpu", self.node_gpu),
        ];
        for (name, r) in all {
            if r.lo > r.hi {
                return Err(BenchError::Spec(format!("range {name} has lo > hi")));
            }
        }
        if self.cpu_exec_ms.lo == 0 {
            return Err(BenchError::Spec("cpu_exec_ms must start above 0".into()));
        }
        if self.gpu_threads.lo == 0 || self.node_gpu.lo == 0 {
            return Err(BenchError::Spec("GPU thread ranges must start above 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSpec {
    /// Number of dual-version components; the chain has one more.
    pub n: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub ranges: BenchRanges,
    /// Untimed solves before measurement starts.
    pub warmup: usize,
    /// Per-solve limit while measuring.
    pub time_limit: Duration,
}

impl BenchSpec {
    pub fn new(n: usize, repetitions: usize, seed: u64) -> Self {
        BenchSpec { n, repetitions, seed, ranges: BenchRanges::default(), warmup: 5, time_limit: Duration::from_secs(10) }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n == 0 {
            return Err(BenchError::Spec("n must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(BenchError::Spec("repetitions must be at least 1".into()));
        }
        self.ranges.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark spec: {0}")]
    Spec(String),
    #[error("no instance solvable by all three models within {0} attempts")]
    NoFeasibleInstance(u64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Compaction(#[from] CompactionError),
    #[error("objective consistency violated: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchModel {
    NaiveCpu,
    NaiveGpu,
    TwoVariant,
}

impl BenchModel {
    pub const ALL: [BenchModel; 3] = [BenchModel::NaiveCpu, BenchModel::NaiveGpu, BenchModel::TwoVariant];

    pub fn name(self) -> &'static str {
        match self {
            BenchModel::NaiveCpu => "naive-CPU",
            BenchModel::NaiveGpu => "naive-GPU",
            BenchModel::TwoVariant => "two-variant",
        }
    }
}

/// One generated instance under its three formulations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSystem {
    pub repository: Repository,
    pub naive_cpu: HighLayerModel,
    pub naive_gpu: HighLayerModel,
    pub two_variant: HighLayerModel,
    pub platform: Platform,
    /// Attempt number of the accepted draw; earlier attempts were rejected.
    pub attempt: u64,
}

impl BenchSystem {
    pub fn model(&self, which: BenchModel) -> &HighLayerModel {
        match which {
            BenchModel::NaiveCpu => &self.naive_cpu,
            BenchModel::NaiveGpu => &self.naive_gpu,
            BenchModel::TwoVariant => &self.two_variant,
        }
    }

    pub fn rejections(&self) -> u64 {
        self.attempt
    }
}

fn tenths(v: u64) -> Quantity {
    Quantity::new(v as i128, 10)
}

fn draw_component(spec: &BenchSpec, attempt: u64, index: usize, dual: bool) -> (Component, Option<Component>) {
    let r = &spec.ranges;
    let mut rng = SplitMix64::derive(spec.seed, &[attempt, LABEL_COMPONENT, index as u64]);
    let function = format!("f{index}");
    let cpu_mem = r.component_mem.draw(&mut rng);
    let cpu_load = r.component_cpu_tenths.draw(&mut rng);
    let cpu_exec = r.cpu_exec_ms.draw(&mut rng);
    let cpu_demand =
        ResourceDemand { mem: Quantity::from(cpu_mem), cpu: tenths(cpu_load), gpu_threads: 0, exec_ms: Quantity::from(cpu_exec) };
    if !dual {
        return (Component::new(format!("c{index}"), ComponentKind::Cpu, function, cpu_demand), None);
    }
    let gpu_mem = r.component_mem.draw(&mut rng);
    let gpu_load = r.component_cpu_tenths.draw(&mut rng);
    let threads = r.gpu_threads.draw(&mut rng);
    let gpu_demand = ResourceDemand {
        mem: Quantity::from(gpu_mem),
        cpu: tenths(gpu_load),
        gpu_threads: threads,
        exec_ms: Quantity::from(cpu_exec.div_ceil(2)),
    };
    (
        Component::new(format!("c{index}_cpu"), ComponentKind::Cpu, function.clone(), cpu_demand),
        Some(Component::new(format!("c{index}_gpu"), ComponentKind::Gpu, function, gpu_demand)),
    )
}

fn draw_platform(spec: &BenchSpec, attempt: u64) -> Platform {
    let r = &spec.ranges;
    let nodes = (0..NODE_COUNT)
        .map(|i| {
            let mut rng = SplitMix64::derive(spec.seed, &[attempt, LABEL_NODE, i as u64]);
            let mem = r.node_mem.draw(&mut rng);
            let cpu = r.node_cpu.draw(&mut rng);
            let gpu = if i < GPU_NODE_COUNT { r.node_gpu.draw(&mut rng) } else { 0 };
            HardwareNode::new(format!("b{i}"), Quantity::from(mem), Quantity::from(cpu), gpu)
        })
        .collect();
    Platform::new(nodes)
}

fn chain_connections(units: &[MultiVariantUnit]) -> Vec<(UnitId, UnitId)> {
    units.windows(2).map(|w| (w[0].id.clone(), w[1].id.clone())).collect()
}

/// Draws attempt `attempt` of the instance without checking solvability.
pub fn draw_system(spec: &BenchSpec, attempt: u64) -> Result<BenchSystem, BenchError> {
    spec.validate()?;
    let mut cpu_versions = Vec::with_capacity(spec.n);
    let mut gpu_versions = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let (c, g) = draw_component(spec, attempt, i, true);
        cpu_versions.push(c);
        gpu_versions.push(g.expect("dual component has a GPU version"));
    }
    let (tail, _) = draw_component(spec, attempt, spec.n, false);

    let mut groups = BTreeMap::new();
    for (c, g) in cpu_versions.iter().zip(&gpu_versions) {
        groups.insert(c.function.clone(), vec![c.id.clone(), g.id.clone()]);
    }
    let mut components: Vec<Component> = Vec::with_capacity(2 * spec.n + 1);
    for (c, g) in cpu_versions.iter().zip(&gpu_versions) {
        components.push(c.clone());
        components.push(g.clone());
    }
    components.push(tail.clone());
    let repository = Repository::new(components, groups);

    let naive = |versions: &[Component]| {
        let mut units: Vec<MultiVariantUnit> = versions.iter().map(MultiVariantUnit::singleton).collect();
        units.push(MultiVariantUnit::singleton(&tail));
        let connections = chain_connections(&units);
        HighLayerModel::new(units, connections)
    };
    let naive_cpu = naive(&cpu_versions);
    let naive_gpu = naive(&gpu_versions);

    let assembly = |versions: &[Component]| {
        let ids: Vec<ComponentId> = versions.iter().map(|c| c.id.clone()).collect();
        let links = ids.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        Assembly::new(ids, links)
    };
    let chain = compact(&[assembly(&cpu_versions), assembly(&gpu_versions)], &repository, "chain")?;
    let units = vec![chain, MultiVariantUnit::singleton(&tail)];
    let connections = chain_connections(&units);
    let two_variant = HighLayerModel::new(units, connections);

    Ok(BenchSystem { repository, naive_cpu, naive_gpu, two_variant, platform: draw_platform(spec, attempt), attempt })
}

/// Draws instances until one is solvable under all three formulations.
pub fn generate_system(spec: &BenchSpec) -> Result<BenchSystem, BenchError> {
    spec.validate()?;
    let cfg = SolverConfig::default().with_time_limit(GENERATION_TIME_LIMIT);
    for attempt in 0..MAX_ATTEMPTS {
        let system = draw_system(spec, attempt)?;
        let mut accepted = true;
        for which in BenchModel::ALL {
            if solve(system.model(which), &system.platform, &cfg)?.status != Status::Optimal {
                accepted = false;
                break;
            }
        }
        if accepted {
            log::info!("n={} seed={}: accepted attempt {attempt}", spec.n, spec.seed);
            return Ok(system);
        }
    }
    Err(BenchError::NoFeasibleInstance(MAX_ATTEMPTS))
}

/// Timing statistics and objectives of one formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: BenchModel,
    pub units: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stddev_ms: f64,
    pub objective_ms: Option<Quantity>,
    /// Objective of every timed run (`None` when the run timed out).
    pub objectives: Vec<Option<Quantity>>,
    pub timeouts: usize,
    /// Set when some run did not finish optimally.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub warmup: usize,
    pub rejections: u64,
    pub rows: Vec<ModelRow>,
}

impl BenchReport {
    pub fn row(&self, which: BenchModel) -> &ModelRow {
        self.rows.iter().find(|r| r.model == which).expect("report has a row per model")
    }
}

/// Mean, median and population standard deviation.
pub fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) { (sorted[mid - 1] + sorted[mid]) / 2.0 } else { sorted[mid] };
    (mean, median, var.sqrt())
}

#[derive(Default)]
struct Samples {
    times: Vec<f64>,
    objectives: Vec<Option<Quantity>>,
    timeouts: usize,
    flagged: bool,
}

impl Samples {
    fn into_row(self, model: &HighLayerModel, which: BenchModel) -> ModelRow {
        let (mean_ms, median_ms, stddev_ms) = summarize(&self.times);
        let objective_ms = self.objectives.iter().flatten().next().copied();
        ModelRow {
            model: which,
            units: model.units.len(),
            mean_ms,
            median_ms,
            stddev_ms,
            objective_ms,
            objectives: self.objectives,
            timeouts: self.timeouts,
            flagged: self.flagged,
        }
    }
}

/// Times the three formulations round-robin, one solve each per
/// repetition, so slow drift of the machine hits all of them alike.
fn measure(system: &BenchSystem, spec: &BenchSpec) -> Result<Vec<ModelRow>, BenchError> {
    let cfg = SolverConfig::default().with_time_limit(spec.time_limit);
    for which in BenchModel::ALL {
        for _ in 0..spec.warmup {
            solve(system.model(which), &system.platform, &cfg)?;
        }
    }
    let mut samples: Vec<Samples> = BenchModel::ALL.iter().map(|_| Samples::default()).collect();
    for _ in 0..spec.repetitions {
        for (which, s) in BenchModel::ALL.into_iter().zip(&mut samples) {
            let model = system.model(which);
            let started = Instant::now();
            let scheme = solve(model, &system.platform, &cfg)?;
            s.times.push(started.elapsed().as_secs_f64() * 1e3);
            if scheme.status == Status::Timeout {
                s.timeouts += 1;
            }
            s.flagged |= scheme.status != Status::Optimal;
            s.objectives.push(scheme.objective_ms);
        }
    }
    Ok(BenchModel::ALL.into_iter().zip(samples).map(|(which, s)| s.into_row(system.model(which), which)).collect())
}

/// Restricts the two-variant unit to a single variant.
fn restricted(model: &HighLayerModel, variant: usize) -> HighLayerModel {
    let mut m = model.clone();
    let unit = &mut m.units[0];
    let mut v = unit.variants[variant].clone();
    v.index = 0;
    unit.variants = vec![v];
    m
}

/// The two-variant optimum is the better of its two one-variant
/// restrictions, and each restriction costs exactly what the matching naive
/// formulation costs.
pub fn check_objective_consistency(system: &BenchSystem) -> Result<(), BenchError> {
    let cfg = SolverConfig::default();
    let objective = |m: &HighLayerModel| -> Result<AllocationScheme, BenchError> { Ok(solve(m, &system.platform, &cfg)?) };
    let two = objective(&system.two_variant)?;
    let mut feasible = Vec::new();
    for (variant, naive) in [(0, &system.naive_cpu), (1, &system.naive_gpu)] {
        let only = objective(&restricted(&system.two_variant, variant))?;
        if let Some(value) = only.objective_ms {
            let naive_value = objective(naive)?.objective_ms;
            if naive_value != Some(value) {
                return Err(BenchError::Inconsistent(format!(
                    "variant {variant} costs {value} but the naive formulation costs {naive_value:?}"
                )));
            }
            feasible.push(value);
        }
    }
    let expected = feasible.into_iter().min();
    if two.objective_ms != expected {
        return Err(BenchError::Inconsistent(format!(
            "two-variant optimum {:?} differs from the best restriction {expected:?}",
            two.objective_ms
        )));
    }
    Ok(())
}

/// Generates the instance and times each formulation.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport, BenchError> {
    let system = generate_system(spec)?;
    let rows = measure(&system, spec)?;
    if rows.iter().all(|r| !r.flagged) {
        check_objective_consistency(&system)?;
    }
    Ok(BenchReport {
        n: spec.n,
        seed: spec.seed,
        repetitions: spec.repetitions,
        warmup: spec.warmup,
        rejections: system.rejections(),
        rows,
    })
}

/// Aligned table, one line per report: `n | naive-CPU | naive-GPU | two-variant`
/// mean solve times in milliseconds. Flagged cells carry a `*`.
pub fn format_table(reports: &[BenchReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4} | {:>14} | {:>14} | {:>14}", "n", "naive-CPU (ms)", "naive-GPU (ms)", "two-variant (ms)");
    let _ = writeln!(out, "{:-<4}-+-{:-<14}-+-{:-<14}-+-{:-<16}", "", "", "", "");
    for r in reports {
        let cell = |m: BenchModel| {
            let row = r.row(m);
            format!("{:.4}{}", row.mean_ms, if row.flagged { "*" } else { "" })
        };
        let _ = writeln!(
            out,
            "{:>4} | {:>14} | {:>14} | {:>16}",
            r.n,
            cell(BenchModel::NaiveCpu),
            cell(BenchModel::NaiveGpu),
            cell(BenchModel::TwoVariant)
        );
    }
    out
}

pub fn format_csv(reports: &[BenchReport]) -> String {
    let mut out = String::from("n,seed,model,units,repetitions,mean_ms,median_ms,stddev_ms,objective_ms,timeouts,rejections\n");
    for r in reports {
        for row in &r.rows {
            let objective = row.objective_ms.map(|q| q.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{}",
                r.n,
                r.seed,
                row.model.name(),
                row.units,
                r.repetitions,
                row.mean_ms,
                row.median_ms,
                row.stddev_ms,
                objective,
                row.timeouts,
                r.rejections
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(BenchSpec::new(0, 1, 0).validate().is_err());
        assert!(BenchSpec::new(1, 0, 0).validate().is_err());
        let mut bad = BenchSpec::new(1, 1, 0);
        bad.ranges.node_mem = Range::new(10, 1);
        assert!(bad.validate().is_err());
        assert!(BenchSpec::new(3, 1, 0).validate().is_ok());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = BenchSpec::new(3, 1, 0);
        let a = generate_system(&spec).unwrap();
        let b = generate_system(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a.two_variant).unwrap(), serde_json::to_string(&b.two_variant).unwrap());
        assert_ne!(draw_system(&BenchSpec::new(3, 1, 1), 0).unwrap(), draw_system(&spec, 0).unwrap());
    }

    #[test]
    fn sampled_values_respect_ranges() {
        for seed in 0..20 {
            let spec = BenchSpec::new(8, 1, seed);
            let system = draw_system(&spec, 0).unwrap();
            assert_eq!(system.repository.components().len(), 17);
            for c in system.repository.components() {
                let mem = c.demand.mem;
                assert!(mem >= Quantity::from(1u64) && mem <= Quantity::from(100u64));
                assert!(c.demand.cpu >= Quantity::new(1, 10) && c.demand.cpu <= Quantity::ONE);
                if c.kind == ComponentKind::Gpu {
                    assert!((50..=500).contains(&c.demand.gpu_threads));
                }
            }
            let gpu_nodes = system.platform.nodes.iter().filter(|n| n.has_gpu()).count();
            assert_eq!(gpu_nodes, GPU_NODE_COUNT);
            for node in &system.platform.nodes {
                assert!(node.use_mem >= Quantity::from(100u64) && node.use_mem <= Quantity::from(2500u64));
            }
        }
    }

    #[test]
    fn gpu_versions_are_faster() {
        let system = draw_system(&BenchSpec::new(10, 1, 3), 0).unwrap();
        for (c, g) in system.naive_cpu.units.iter().zip(&system.naive_gpu.units).take(10) {
            let (ce, ge) = (c.variants[0].props.exec_ms, g.variants[0].props.exec_ms);
            assert!(ge < ce);
            assert_eq!(ge.numer(), (ce.numer() + 1) / 2);
        }
    }

    #[test]
    fn two_variant_props_are_chain_sums() {
        let system = draw_system(&BenchSpec::new(5, 1, 9), 0).unwrap();
        let chain = &system.two_variant.units[0];
        for (variant, naive) in chain.variants.iter().zip([&system.naive_cpu, &system.naive_gpu]) {
            let mem: Quantity = naive.units[..5].iter().map(|u| u.variants[0].props.mem).sum();
            let threads = naive.units[..5].iter().map(|u| u.variants[0].props.gpu_threads).max().unwrap();
            assert_eq!(variant.props.mem, mem);
            assert_eq!(variant.props.gpu_threads, threads);
        }
    }

    #[test]
    fn single_repetition_has_zero_spread() {
        let report = run_bench(&BenchSpec { warmup: 0, ..BenchSpec::new(3, 1, 0) }).unwrap();
        for row in &report.rows {
            assert_eq!(row.stddev_ms, 0.0);
            assert_eq!(row.objectives.len(), 1);
        }
        let table = format_table(std::slice::from_ref(&report));
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("two-variant"));
        assert_eq!(format_csv(&[report]).lines().count(), 4);
    }

    #[test]
    fn summary_statistics() {
        let (mean, median, sd) = summarize(&[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(mean, 3.0);
        assert_eq!(median, 2.5);
        assert!((sd - 3.5f64.sqrt()).abs() < 1e-12);
    }
}
