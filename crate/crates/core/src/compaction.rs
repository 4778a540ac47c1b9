//! The two-layer machinery.
//!
//! Alternatives of a sub-system are enumerated from the repository, folded
//! into a [`MultiVariantUnit`] whose variants carry aggregated properties
//! (memory, CPU load and execution time summed; GPU threads maximised), and
//! solved schemes are unfolded back onto the member components. Internal
//! connections of an alternative do not survive compaction: a unit is always
//! placed on a single node, so they impose no constraint.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{
    has_cycle, Assembly, Component, ComponentId, ComponentKind, DetailedAssignment, Diagnostic, Instance, ModelError, Repository, Rule,
    SystemModel, UnitId,
};
use crate::quantity::Quantity;
use crate::solver::AllocationScheme;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompactionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("function {0:?} has no implementation version in the repository")]
    NoVersions(String),
    #[error("alternative {index} of {unit}: {detail}")]
    BadAlternative { unit: String, index: usize, detail: String },
    #[error("unit {0}: no alternatives to compact")]
    NoAlternatives(String),
    #[error("unit {unit}: alternative {index} realizes a different function multiset than alternative 0")]
    FunctionMismatch { unit: String, index: usize },
    #[error("duplicate unit id {0:?}")]
    DuplicateUnit(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("unit {unit}: {detail}")]
    InvalidUnit { unit: String, detail: String },
    #[error("model file has no architecture section")]
    NoArchitecture,
    #[error("scheme does not place unit {0:?}")]
    MissingUnit(String),
    #[error("scheme picks variant {variant} of unit {unit:?}, which has {count} variants")]
    InvalidVariant { unit: String, variant: usize, count: usize },
    #[error("scheme status is {0}; only optimal schemes can be unfolded")]
    NotSolved(String),
    #[error("unit connections contain a cycle")]
    CyclicUnits,
}

/// Aggregated properties of one variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VariantProperties {
    pub mem: Quantity,
    pub cpu: Quantity,
    /// Maximum over members.
    pub gpu_threads: u64,
    pub exec_ms: Quantity,
    pub gpu_member_count: usize,
}

/// Sums memory, CPU load and execution time over the members and takes the
/// maximum of their GPU threads.
pub fn aggregate_variant(assembly: &Assembly, repo: &Repository) -> Result<VariantProperties, ModelError> {
    let mut props = VariantProperties::default();
    for id in &assembly.components {
        let c = repo.component(id.as_str())?;
        props.mem += c.demand.mem;
        props.cpu += c.demand.cpu;
        props.exec_ms += c.demand.exec_ms;
        props.gpu_threads = props.gpu_threads.max(c.demand.gpu_threads);
        if c.kind == ComponentKind::Gpu {
            props.gpu_member_count += 1;
        }
    }
    Ok(props)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VariantRecord", into = "VariantRecord")]
pub struct Variant {
    pub index: usize,
    pub members: Vec<ComponentId>,
    pub props: VariantProperties,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantRecord {
    index: usize,
    mem: Quantity,
    cpu: Quantity,
    gpu_threads: u64,
    exec_ms: Quantity,
    gpu_members: usize,
    members: Vec<ComponentId>,
}

impl From<VariantRecord> for Variant {
    fn from(r: VariantRecord) -> Self {
        Variant {
            index: r.index,
            members: r.members,
            props: VariantProperties {
                mem: r.mem,
                cpu: r.cpu,
                gpu_threads: r.gpu_threads,
                exec_ms: r.exec_ms,
                gpu_member_count: r.gpu_members,
            },
        }
    }
}

impl From<Variant> for VariantRecord {
    fn from(v: Variant) -> Self {
        VariantRecord {
            index: v.index,
            mem: v.props.mem,
            cpu: v.props.cpu,
            gpu_threads: v.props.gpu_threads,
            exec_ms: v.props.exec_ms,
            gpu_members: v.props.gpu_member_count,
            members: v.members,
        }
    }
}

/// A compacted unit that behaves as a regular component with one property
/// tuple per variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiVariantUnit {
    pub id: UnitId,
    pub variants: Vec<Variant>,
}

impl MultiVariantUnit {
    /// A component with a single version, modeled as a one-variant unit
    /// named after the component.
    pub fn singleton(component: &Component) -> Self {
        let d = component.demand;
        MultiVariantUnit {
            id: UnitId(component.id.0.clone()),
            variants: vec![Variant {
                index: 0,
                members: vec![component.id.clone()],
                props: VariantProperties {
                    mem: d.mem,
                    cpu: d.cpu,
                    gpu_threads: d.gpu_threads,
                    exec_ms: d.exec_ms,
                    gpu_member_count: usize::from(component.kind == ComponentKind::Gpu),
                },
            }],
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.variants.len() == 1 && self.variants[0].members.len() == 1
    }
}

/// The compacted (top-layer) model handed to the allocator.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighLayerModel {
    pub units: Vec<MultiVariantUnit>,
    #[serde(default)]
    pub connections: Vec<(UnitId, UnitId)>,
}

impl HighLayerModel {
    pub fn new(units: Vec<MultiVariantUnit>, connections: Vec<(UnitId, UnitId)>) -> Self {
        HighLayerModel { units, connections }
    }

    pub fn unit(&self, id: &str) -> Option<&MultiVariantUnit> {
        self.units.iter().find(|u| u.id.as_str() == id)
    }

    /// Units built from a single one-version component.
    pub fn singletons(&self) -> impl Iterator<Item = &MultiVariantUnit> {
        self.units.iter().filter(|u| u.is_singleton())
    }

    /// Structural checks for a model loaded from a file.
    pub fn validate(&self) -> Result<(), CompactionError> {
        let mut ids = BTreeSet::new();
        for unit in &self.units {
            let name = unit.id.to_string();
            if !ids.insert(&unit.id) {
                return Err(CompactionError::DuplicateUnit(name));
            }
            let invalid = |detail: String| CompactionError::InvalidUnit { unit: name.clone(), detail };
            if unit.variants.is_empty() {
                return Err(invalid("no variants".into()));
            }
            for (i, v) in unit.variants.iter().enumerate() {
                if v.index != i {
                    return Err(invalid(format!("variant at position {i} has index {}", v.index)));
                }
                let p = &v.props;
                if p.mem.is_negative() || p.cpu.is_negative() || p.exec_ms.is_negative() {
                    return Err(invalid(format!("variant {i} has a negative property")));
                }
                if (p.gpu_threads > 0) != (p.gpu_member_count > 0) {
                    return Err(invalid(format!("variant {i}: gpu_threads and gpu_members disagree")));
                }
            }
        }
        for (from, to) in &self.connections {
            for end in [from, to] {
                if !ids.contains(end) {
                    return Err(CompactionError::UnknownUnit(end.to_string()));
                }
            }
        }
        Ok(())
    }
}

/// Functions of a sub-system in chain order plus the producer-consumer links
/// between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub functions: Vec<String>,
    pub links: Vec<(String, String)>,
}

impl Topology {
    /// A linear pipe-and-filter chain.
    pub fn chain<S: Into<String>>(functions: impl IntoIterator<Item = S>) -> Self {
        let functions: Vec<String> = functions.into_iter().map(Into::into).collect();
        let links = functions.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        Topology { functions, links }
    }
}

/// How the alternatives of a sub-system are obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlternativePolicy {
    /// Explicit list; each alternative names one component per function in
    /// chain order.
    Declared(Vec<Vec<ComponentId>>),
    /// Every combination of versions.
    AllCombinations,
    /// Combinations whose GPU-kind members form a single contiguous run of
    /// the chain (the all-CPU assembly included).
    ContiguousGpuSegment,
}

/// Lists assemblies realizing `topology` under `policy`. Generated lists are
/// ordered lexicographically by version choice, first function most
/// significant; declared lists keep their order.
pub fn enumerate_alternatives(
    topology: &Topology,
    repo: &Repository,
    policy: &AlternativePolicy,
) -> Result<Vec<Assembly>, CompactionError> {
    let versions: Vec<Vec<&Component>> = topology
        .functions
        .iter()
        .map(|f| {
            let v = repo.versions(f);
            if v.is_empty() {
                Err(CompactionError::NoVersions(f.clone()))
            } else {
                Ok(v)
            }
        })
        .collect::<Result<_, _>>()?;

    let build = |chosen: Vec<ComponentId>| {
        let by_function: BTreeMap<&str, &ComponentId> = topology.functions.iter().map(String::as_str).zip(chosen.iter()).collect();
        let connections = topology
            .links
            .iter()
            .filter_map(|(a, b)| Some(((*by_function.get(a.as_str())?).clone(), (*by_function.get(b.as_str())?).clone())))
            .collect();
        Assembly::new(chosen, connections)
    };

    match policy {
        AlternativePolicy::Declared(list) => list
            .iter()
            .enumerate()
            .map(|(index, ids)| {
                let bad = |detail: String| CompactionError::BadAlternative { unit: "<declared>".into(), index, detail };
                if ids.len() != topology.functions.len() {
                    return Err(bad(format!("names {} components for {} functions", ids.len(), topology.functions.len())));
                }
                for ((id, function), options) in ids.iter().zip(&topology.functions).zip(&versions) {
                    if !options.iter().any(|c| &c.id == id) {
                        return Err(bad(format!("{id} is not a version of {function}")));
                    }
                }
                Ok(build(ids.clone()))
            })
            .collect(),
        AlternativePolicy::AllCombinations | AlternativePolicy::ContiguousGpuSegment => {
            let contiguous_only = matches!(policy, AlternativePolicy::ContiguousGpuSegment);
            let mut out = Vec::new();
            let mut choice = vec![0usize; versions.len()];
            loop {
                let picked: Vec<&Component> = choice.iter().zip(&versions).map(|(&i, v)| v[i]).collect();
                if !contiguous_only || gpu_run_is_contiguous(&picked) {
                    out.push(build(picked.iter().map(|c| c.id.clone()).collect()));
                }
                // Odometer increment, last function fastest.
                let mut pos = versions.len();
                loop {
                    if pos == 0 {
                        return Ok(out);
                    }
                    pos -= 1;
                    choice[pos] += 1;
                    if choice[pos] < versions[pos].len() {
                        break;
                    }
                    choice[pos] = 0;
                }
            }
        }
    }
}

fn gpu_run_is_contiguous(chain: &[&Component]) -> bool {
    let gpu: Vec<usize> = chain.iter().enumerate().filter(|(_, c)| c.kind == ComponentKind::Gpu).map(|(i, _)| i).collect();
    match (gpu.first(), gpu.last()) {
        (Some(first), Some(last)) => last - first + 1 == gpu.len(),
        _ => true,
    }
}

fn function_multiset(assembly: &Assembly, repo: &Repository) -> Result<BTreeMap<String, usize>, ModelError> {
    let mut out = BTreeMap::new();
    for id in &assembly.components {
        *out.entry(repo.component(id.as_str())?.function.clone()).or_insert(0) += 1;
    }
    Ok(out)
}

/// Folds alternatives that realize the same functions into one unit, one
/// variant per alternative in input order.
pub fn compact(alternatives: &[Assembly], repo: &Repository, unit_id: &str) -> Result<MultiVariantUnit, CompactionError> {
    let first = alternatives.first().ok_or_else(|| CompactionError::NoAlternatives(unit_id.to_string()))?;
    let signature = function_multiset(first, repo)?;
    let mut variants = Vec::with_capacity(alternatives.len());
    for (index, assembly) in alternatives.iter().enumerate() {
        assembly.validate(repo).map_err(|e| CompactionError::BadAlternative { unit: unit_id.to_string(), index, detail: e.to_string() })?;
        if function_multiset(assembly, repo)? != signature {
            return Err(CompactionError::FunctionMismatch { unit: unit_id.to_string(), index });
        }
        variants.push(Variant { index, members: assembly.components.clone(), props: aggregate_variant(assembly, repo)? });
    }
    Ok(MultiVariantUnit { id: UnitId(unit_id.to_string()), variants })
}

/// Expands every unit's chosen variant onto the unit's node.
pub fn unfold(scheme: &AllocationScheme, model: &HighLayerModel, repo: &Repository) -> Result<DetailedAssignment, CompactionError> {
    if !scheme.is_optimal() {
        return Err(CompactionError::NotSolved(scheme.status.to_string()));
    }
    let mut out = DetailedAssignment::default();
    for unit in &model.units {
        let placement = scheme.placements.get(&unit.id).ok_or_else(|| CompactionError::MissingUnit(unit.id.to_string()))?;
        let variant = unit.variants.get(placement.variant).ok_or_else(|| CompactionError::InvalidVariant {
            unit: unit.id.to_string(),
            variant: placement.variant,
            count: unit.variants.len(),
        })?;
        for member in &variant.members {
            repo.component(member.as_str())?;
            out.placements.insert(Instance { unit: unit.id.clone(), component: member.clone() }, placement.node.clone());
        }
    }
    Ok(out)
}

/// One sub-system to be compacted into a multi-variant unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subsystem {
    pub id: UnitId,
    /// Function names in chain order.
    pub functions: Vec<String>,
    /// Producer-consumer links between functions; a linear chain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<(String, String)>>,
    pub policy: AlternativePolicy,
}

impl Subsystem {
    pub fn topology(&self) -> Topology {
        match &self.links {
            Some(links) => Topology { functions: self.functions.clone(), links: links.clone() },
            None => Topology::chain(self.functions.iter().cloned()),
        }
    }
}

/// Which parts of a repository make up the deployed system.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    #[serde(default)]
    pub subsystems: Vec<Subsystem>,
    /// Components deployed on their own; each becomes a one-variant unit.
    #[serde(default)]
    pub singletons: Vec<ComponentId>,
    /// Unit-level producer-consumer links (subsystem or singleton ids).
    #[serde(default)]
    pub connections: Vec<(UnitId, UnitId)>,
}

impl Architecture {
    pub fn validate(&self, repo: &Repository) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for s in &self.subsystems {
            let unique: BTreeSet<&String> = s.functions.iter().collect();
            if unique.len() != s.functions.len() {
                out.push(Diagnostic::new(s.id.as_str(), Rule::Architecture, "a function appears twice in the chain"));
            }
            let topology = s.topology();
            for (a, b) in &topology.links {
                if !unique.contains(a) || !unique.contains(b) {
                    out.push(Diagnostic::new(s.id.as_str(), Rule::Architecture, format!("link {a} -> {b} leaves the chain")));
                }
            }
            if has_cycle(&topology.functions, &topology.links) {
                out.push(Diagnostic::new(s.id.as_str(), Rule::Architecture, "function links contain a cycle"));
            }
        }
        if let Err(e) = compact_architecture(self, repo) {
            out.push(Diagnostic::new("architecture", Rule::Architecture, e.to_string()));
        }
        out
    }
}

/// Builds the high-layer model: every sub-system becomes a multi-variant
/// unit, every singleton a one-variant unit.
pub fn compact_architecture(arch: &Architecture, repo: &Repository) -> Result<HighLayerModel, CompactionError> {
    let mut units = Vec::with_capacity(arch.subsystems.len() + arch.singletons.len());
    for s in &arch.subsystems {
        let alternatives = enumerate_alternatives(&s.topology(), repo, &s.policy).map_err(|e| match e {
            CompactionError::BadAlternative { index, detail, .. } => {
                CompactionError::BadAlternative { unit: s.id.to_string(), index, detail }
            }
            other => other,
        })?;
        units.push(compact(&alternatives, repo, s.id.as_str())?);
    }
    for id in &arch.singletons {
        units.push(MultiVariantUnit::singleton(repo.component(id.as_str())?));
    }
    let model = HighLayerModel::new(units, arch.connections.clone());
    model.validate()?;
    let ids: Vec<UnitId> = model.units.iter().map(|u| u.id.clone()).collect();
    if has_cycle(&ids, &model.connections) {
        return Err(CompactionError::CyclicUnits);
    }
    Ok(model)
}

/// [`compact_architecture`] for a model file.
pub fn compact_model(model: &SystemModel) -> Result<HighLayerModel, CompactionError> {
    let arch = model.architecture.as_ref().ok_or(CompactionError::NoArchitecture)?;
    compact_architecture(arch, &model.repository)
}
