//! Detailed-layer domain model: components, the repository they live in,
//! assemblies, and the hardware platform.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compaction::Architecture;
use crate::quantity::Quantity;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Identifier of a component in the repository.
    ComponentId
);
string_id!(
    /// Identifier of a processing node.
    NodeId
);
string_id!(
    /// Identifier of an allocation unit at the compacted layer.
    UnitId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    #[serde(rename = "CPU")]
    Cpu,
    #[serde(rename = "GPU")]
    Gpu,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Cpu => "CPU",
            ComponentKind::Gpu => "GPU",
        })
    }
}

/// Resources a single component needs, plus its execution time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ResourceDemand {
    /// Megabytes.
    pub mem: Quantity,
    /// CPU load units.
    pub cpu: Quantity,
    pub gpu_threads: u64,
    pub exec_ms: Quantity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ComponentRecord", into = "ComponentRecord")]
pub struct Component {
    pub id: ComponentId,
    pub kind: ComponentKind,
    pub demand: ResourceDemand,
    /// The abstract function this version implements, e.g. `EdgeDetection`.
    pub function: String,
    /// Pure source/sink stubs may declare zero execution time.
    pub stub: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentRecord {
    id: ComponentId,
    kind: ComponentKind,
    mem: Quantity,
    cpu: Quantity,
    gpu_threads: u64,
    exec_ms: Quantity,
    function: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    stub: bool,
}

impl From<ComponentRecord> for Component {
    fn from(r: ComponentRecord) -> Self {
        Component {
            id: r.id,
            kind: r.kind,
            demand: ResourceDemand { mem: r.mem, cpu: r.cpu, gpu_threads: r.gpu_threads, exec_ms: r.exec_ms },
            function: r.function,
            stub: r.stub,
        }
    }
}

impl From<Component> for ComponentRecord {
    fn from(c: Component) -> Self {
        ComponentRecord {
            id: c.id,
            kind: c.kind,
            mem: c.demand.mem,
            cpu: c.demand.cpu,
            gpu_threads: c.demand.gpu_threads,
            exec_ms: c.demand.exec_ms,
            function: c.function,
            stub: c.stub,
        }
    }
}

impl Component {
    pub fn new(id: impl Into<ComponentId>, kind: ComponentKind, function: impl Into<String>, demand: ResourceDemand) -> Self {
        Component { id: id.into(), kind, demand, function: function.into(), stub: false }
    }
}

/// The component pool, grouped into implementation versions per function.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "RepositoryRecord", into = "RepositoryRecord")]
pub struct Repository {
    components: Vec<Component>,
    version_groups: BTreeMap<String, Vec<ComponentId>>,
    index: HashMap<ComponentId, usize>,
}

impl PartialEq for Repository {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components && self.version_groups == other.version_groups
    }
}

impl Eq for Repository {}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepositoryRecord {
    components: Vec<Component>,
    #[serde(default)]
    version_groups: BTreeMap<String, Vec<ComponentId>>,
}

impl From<RepositoryRecord> for Repository {
    fn from(r: RepositoryRecord) -> Self {
        Repository::new(r.components, r.version_groups)
    }
}

impl From<Repository> for RepositoryRecord {
    fn from(r: Repository) -> Self {
        RepositoryRecord { components: r.components, version_groups: r.version_groups }
    }
}

impl Repository {
    pub fn new(components: Vec<Component>, version_groups: BTreeMap<String, Vec<ComponentId>>) -> Self {
        let mut index = HashMap::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            index.entry(c.id.clone()).or_insert(i);
        }
        Repository { components, version_groups, index }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn version_groups(&self) -> &BTreeMap<String, Vec<ComponentId>> {
        &self.version_groups
    }

    pub fn get(&self, id: &str) -> Option<&Component> {
        self.index.get(id).map(|&i| &self.components[i])
    }

    pub fn component(&self, id: &str) -> Result<&Component, ModelError> {
        self.get(id).ok_or_else(|| ModelError::UnknownComponent(id.to_string()))
    }

    /// Implementation versions available for `function`, in declaration order.
    ///
    /// An explicit version group wins; otherwise every component that is not
    /// listed in any group and names this function forms an implicit group.
    pub fn versions(&self, function: &str) -> Vec<&Component> {
        if let Some(ids) = self.version_groups.get(function) {
            return ids.iter().filter_map(|id| self.get(id.as_str())).collect();
        }
        let grouped = self.grouped_ids();
        self.components.iter().filter(|c| c.function == function && !grouped.contains(&c.id)).collect()
    }

    fn grouped_ids(&self) -> BTreeSet<&ComponentId> {
        self.version_groups.values().flatten().collect()
    }
}

/// A connected assembly of components.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assembly {
    pub components: Vec<ComponentId>,
    #[serde(default)]
    pub connections: Vec<(ComponentId, ComponentId)>,
}

impl Assembly {
    pub fn new(components: Vec<ComponentId>, connections: Vec<(ComponentId, ComponentId)>) -> Self {
        Assembly { components, connections }
    }

    /// Checks that every member exists and the connection graph is a DAG
    /// over members.
    pub fn validate(&self, repo: &Repository) -> Result<(), ModelError> {
        let members: BTreeSet<&ComponentId> = self.components.iter().collect();
        for id in &self.components {
            repo.component(id.as_str())?;
        }
        for (from, to) in &self.connections {
            for end in [from, to] {
                if !members.contains(end) {
                    return Err(ModelError::DanglingConnection(end.to_string()));
                }
            }
        }
        if has_cycle(&self.components, &self.connections) {
            return Err(ModelError::CyclicAssembly);
        }
        Ok(())
    }
}

pub(crate) fn has_cycle<T: Ord>(nodes: &[T], edges: &[(T, T)]) -> bool {
    let position: BTreeMap<&T, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut indegree = vec![0usize; nodes.len()];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (a, b) in edges {
        if let (Some(&a), Some(&b)) = (position.get(a), position.get(b)) {
            out[a].push(b);
            indegree[b] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = ready.pop() {
        seen += 1;
        for &j in &out[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(j);
            }
        }
    }
    seen != nodes.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareNode {
    pub id: NodeId,
    pub use_mem: Quantity,
    pub use_cpu: Quantity,
    pub use_gpu: u64,
}

impl HardwareNode {
    pub fn new(id: impl Into<NodeId>, use_mem: Quantity, use_cpu: Quantity, use_gpu: u64) -> Self {
        HardwareNode { id: id.into(), use_mem, use_cpu, use_gpu }
    }

    pub fn has_gpu(&self) -> bool {
        self.use_gpu > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Platform {
    pub nodes: Vec<HardwareNode>,
}

impl Platform {
    pub fn new(nodes: Vec<HardwareNode>) -> Self {
        Platform { nodes }
    }

    pub fn node(&self, id: &str) -> Option<(usize, &HardwareNode)> {
        self.nodes.iter().enumerate().find(|(_, n)| n.id.as_str() == id)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            out.push(Diagnostic::new("platform", Rule::EmptyPlatform, "at least one node is required"));
        }
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(&n.id) {
                out.push(Diagnostic::new(n.id.as_str(), Rule::DuplicateId, "node id declared twice"));
            }
            for (field, value) in [("use_mem", n.use_mem), ("use_cpu", n.use_cpu)] {
                if value.is_negative() {
                    out.push(Diagnostic::new(n.id.as_str(), Rule::NegativeValue, format!("{field} = {value}")));
                }
            }
        }
        out
    }
}

/// A complete detailed-layer model file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemModel {
    pub repository: Repository,
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<Architecture>,
}

impl SystemModel {
    /// Diagnostics for the repository, the platform and, when present, the
    /// architecture section.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = validate_repository(&self.repository);
        out.extend(self.platform.validate());
        if let Some(arch) = &self.architecture {
            out.extend(arch.validate(&self.repository));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    NegativeValue,
    KindThreadsMismatch,
    ZeroExecution,
    DuplicateId,
    UnknownGroupMember,
    MultipleGroups,
    GroupFunctionMismatch,
    MissingFromGroup,
    EmptyPlatform,
    Architecture,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::NegativeValue => "negative value",
            Rule::KindThreadsMismatch => "kind/threads mismatch",
            Rule::ZeroExecution => "zero execution time",
            Rule::DuplicateId => "duplicate id",
            Rule::UnknownGroupMember => "unknown group member",
            Rule::MultipleGroups => "multiple version groups",
            Rule::GroupFunctionMismatch => "group function mismatch",
            Rule::MissingFromGroup => "missing from version group",
            Rule::EmptyPlatform => "empty platform",
            Rule::Architecture => "architecture",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Component, node or unit id the diagnostic is about.
    pub subject: String,
    pub rule: Rule,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(subject: impl Into<String>, rule: Rule, detail: impl Into<String>) -> Self {
        Diagnostic { subject: subject.into(), rule, detail: detail.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.subject, self.rule, self.detail)
    }
}

/// Reports every Repository and Component invariant violation. Never fails.
pub fn validate_repository(repo: &Repository) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for c in repo.components() {
        let id = c.id.as_str();
        if !seen.insert(&c.id) {
            out.push(Diagnostic::new(id, Rule::DuplicateId, "component id declared twice"));
        }
        for (field, value) in [("mem", c.demand.mem), ("cpu", c.demand.cpu), ("exec_ms", c.demand.exec_ms)] {
            if value.is_negative() {
                out.push(Diagnostic::new(id, Rule::NegativeValue, format!("{field} = {value}")));
            }
        }
        match (c.kind, c.demand.gpu_threads) {
            (ComponentKind::Cpu, t) if t > 0 => {
                out.push(Diagnostic::new(id, Rule::KindThreadsMismatch, format!("CPU component declares {t} GPU threads")))
            }
            (ComponentKind::Gpu, 0) => out.push(Diagnostic::new(id, Rule::KindThreadsMismatch, "GPU component declares 0 GPU threads")),
            _ => {}
        }
        if c.demand.exec_ms.is_zero() && !c.stub {
            out.push(Diagnostic::new(id, Rule::ZeroExecution, "exec_ms = 0 on a component that is not a stub"));
        }
    }

    let mut membership: BTreeMap<&ComponentId, usize> = BTreeMap::new();
    for (function, ids) in repo.version_groups() {
        for member in ids {
            match repo.get(member.as_str()) {
                None => out.push(Diagnostic::new(
                    member.as_str(),
                    Rule::UnknownGroupMember,
                    format!("listed in version group {function:?} but not in the repository"),
                )),
                Some(c) if &c.function != function => out.push(Diagnostic::new(
                    member.as_str(),
                    Rule::GroupFunctionMismatch,
                    format!("implements {:?} but is listed under {function:?}", c.function),
                )),
                Some(_) => {}
            }
            *membership.entry(member).or_default() += 1;
        }
    }
    for (id, count) in &membership {
        if *count > 1 {
            out.push(Diagnostic::new(id.as_str(), Rule::MultipleGroups, format!("listed {count} times")));
        }
    }
    for c in repo.components() {
        if !membership.contains_key(&c.id) && repo.version_groups().contains_key(&c.function) {
            out.push(Diagnostic::new(
                c.id.as_str(),
                Rule::MissingFromGroup,
                format!("function {:?} has an explicit version group that omits this component", c.function),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("connection endpoint {0:?} is not a member of the assembly")]
    DanglingConnection(String),
    #[error("assembly connections contain a cycle")]
    CyclicAssembly,
}

/// One placed component instance. The same repository component can be
/// instantiated by several units (the bottom and front vision systems share
/// versions), so placements are keyed by the owning unit as well.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub unit: UnitId,
    pub component: ComponentId,
}

/// Detailed-layer mapping of component instances to nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetailedAssignment {
    pub placements: BTreeMap<Instance, NodeId>,
}

impl DetailedAssignment {
    /// Assignment where every component is its own instance.
    pub fn from_components<I, C, N>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (C, N)>,
        C: Into<ComponentId>,
        N: Into<NodeId>,
    {
        let placements = pairs
            .into_iter()
            .map(|(c, n)| {
                let component = c.into();
                (Instance { unit: UnitId(component.0.clone()), component }, n.into())
            })
            .collect();
        DetailedAssignment { placements }
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn node_of(&self, unit: &str, component: &str) -> Option<&NodeId> {
        self.placements.iter().find(|(k, _)| k.unit.as_str() == unit && k.component.as_str() == component).map(|(_, n)| n)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementRecord {
    unit: UnitId,
    component: ComponentId,
    node: NodeId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentRecord {
    placements: Vec<PlacementRecord>,
}

impl Serialize for DetailedAssignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let placements = self
            .placements
            .iter()
            .map(|(k, n)| PlacementRecord { unit: k.unit.clone(), component: k.component.clone(), node: n.clone() })
            .collect();
        AssignmentRecord { placements }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DetailedAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let record = AssignmentRecord::deserialize(deserializer)?;
        let mut placements = BTreeMap::new();
        for p in record.placements {
            let key = Instance { unit: p.unit, component: p.component };
            if placements.insert(key.clone(), p.node).is_some() {
                return Err(serde::de::Error::custom(format!("instance {}/{} placed twice", key.unit, key.component)));
            }
        }
        Ok(DetailedAssignment { placements })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Mem,
    Cpu,
    GpuThreads,
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resource::Mem => "mem",
            Resource::Cpu => "cpu",
            Resource::GpuThreads => "gpu_threads",
        })
    }
}

/// A node whose capacity for one resource is exceeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub resource: Resource,
    pub used: Quantity,
    pub capacity: Quantity,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}: {} {} exceeds capacity {}", self.node, self.resource, self.used, self.capacity)
    }
}

/// Per-node totals of a placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeLoad {
    pub mem: Quantity,
    pub cpu: Quantity,
    pub gpu_threads: u64,
    pub exec_ms: Quantity,
}

impl NodeLoad {
    pub(crate) fn violations(&self, node: &HardwareNode) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |resource, used: Quantity, capacity: Quantity| {
            if used > capacity {
                out.push(Violation { node: node.id.clone(), resource, used, capacity });
            }
        };
        check(Resource::Mem, self.mem, node.use_mem);
        check(Resource::Cpu, self.cpu, node.use_cpu);
        check(Resource::GpuThreads, Quantity::from(self.gpu_threads), Quantity::from(node.use_gpu));
        out
    }
}

/// Sums memory, CPU and execution time per node; GPU threads take the
/// maximum over co-located components since threads are reused between them.
pub fn detailed_loads(
    assignment: &DetailedAssignment,
    repo: &Repository,
    platform: &Platform,
) -> Result<BTreeMap<NodeId, NodeLoad>, ModelError> {
    let mut loads: BTreeMap<NodeId, NodeLoad> = BTreeMap::new();
    for (instance, node_id) in &assignment.placements {
        let demand = repo.component(instance.component.as_str())?.demand;
        if platform.node(node_id.as_str()).is_none() {
            return Err(ModelError::UnknownNode(node_id.to_string()));
        }
        let load = loads.entry(node_id.clone()).or_default();
        load.mem += demand.mem;
        load.cpu += demand.cpu;
        load.exec_ms += demand.exec_ms;
        load.gpu_threads = load.gpu_threads.max(demand.gpu_threads);
    }
    Ok(loads)
}

/// Outcome of a detailed-layer feasibility check.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the memory, CPU and GPU-thread constraints of every node for a
/// detailed assignment and returns all violated (node, resource) pairs.
pub fn check_feasibility(assignment: &DetailedAssignment, repo: &Repository, platform: &Platform) -> Result<Feasibility, ModelError> {
    let loads = detailed_loads(assignment, repo, platform)?;
    let mut violations = Vec::new();
    for node in &platform.nodes {
        if let Some(load) = loads.get(&node.id) {
            violations.extend(load.violations(node));
        }
    }
    Ok(Feasibility { violations })
}
