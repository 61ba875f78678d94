//! Domain types for chains and probabilistic infrastructures, plus their
//! validation and the optimistic envelope used for candidate generation.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used for every capacity and latency comparison.
pub const EPSILON: f64 = 1e-9;

/// Default cap on the number of scenarios a single node or link may declare.
pub const DEFAULT_MAX_SCENARIOS: usize = 16;

/// `required <= available` with [`EPSILON`] slack.
///
/// Infinite requirements never fit a finite capacity.
#[inline]
pub fn fits(required: f64, available: f64) -> bool {
    required <= available + EPSILON
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

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
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Identifier of a service function.
    ServiceId
);
id_type!(
    /// Identifier of an infrastructure node.
    NodeId
);
id_type!(
    /// Identifier of a VNF chain.
    ChainId
);

/// Directed link key `(src, dst)`.
pub type LinkKey = (NodeId, NodeId);

/// A security requirement: atoms combined with conjunction and disjunction.
///
/// A plain list is a conjunction of atoms; the empty list always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SecurityPolicy {
    Atom(String),
    All(Vec<String>),
    And(Box<SecurityPolicy>, Box<SecurityPolicy>),
    Or(Box<SecurityPolicy>, Box<SecurityPolicy>),
}

impl SecurityPolicy {
    pub fn and(a: SecurityPolicy, b: SecurityPolicy) -> Self {
        SecurityPolicy::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: SecurityPolicy, b: SecurityPolicy) -> Self {
        SecurityPolicy::Or(Box::new(a), Box::new(b))
    }

    pub fn atom(a: impl Into<String>) -> Self {
        SecurityPolicy::Atom(a.into())
    }

    pub fn all<I, S>(atoms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SecurityPolicy::All(atoms.into_iter().map(Into::into).collect())
    }
}

impl Default for SecurityPolicy {
    fn default() -> Self {
        SecurityPolicy::All(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceFunction {
    pub id: ServiceId,
    /// Average processing time in milliseconds.
    pub tproc: f64,
    /// Hardware units; fractional values are allowed.
    pub hw_reqs: f64,
    pub iot_reqs: Vec<String>,
    pub sec_policy: SecurityPolicy,
}

/// Directed traffic flow between two services, in Mbps.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub src: ServiceId,
    pub dst: ServiceId,
    pub bandwidth: f64,
}

impl Flow {
    pub fn pair(&self) -> (ServiceId, ServiceId) {
        (self.src.clone(), self.dst.clone())
    }
}

/// End-to-end latency bound over a directed service path.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyConstraint {
    pub path: Vec<ServiceId>,
    pub max_latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub id: ChainId,
    /// Services to place, in chain order.
    pub services: Vec<ServiceFunction>,
    pub flows: Vec<Flow>,
    pub latency_constraints: Vec<LatencyConstraint>,
    /// Services referenced by flows or latency constraints that belong to an
    /// already deployed chain. They are never placed by this chain; their
    /// location comes from a [`PreAllocation`].
    pub external_services: Vec<ServiceFunction>,
}

impl ChainSpec {
    /// Looks up a chain or external service by id.
    pub fn service(&self, id: &str) -> Option<&ServiceFunction> {
        self.services
            .iter()
            .chain(self.external_services.iter())
            .find(|s| s.id.as_str() == id)
    }

    pub fn is_external(&self, id: &str) -> bool {
        self.external_services.iter().any(|s| s.id.as_str() == id)
    }

    pub fn flow(&self, src: &str, dst: &str) -> Option<&Flow> {
        self.flows
            .iter()
            .find(|f| f.src.as_str() == src && f.dst.as_str() == dst)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeScenario {
    pub hw_caps: f64,
    pub iot_caps: BTreeSet<String>,
    pub sec_caps: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    /// Milliseconds; `f64::INFINITY` marks an unusable link state.
    pub latency: f64,
    /// Mbps.
    pub bandwidth: f64,
}

/// Probability of "absent" left over by a scenario list.
fn residual_mass(probs: impl Iterator<Item = f64>) -> f64 {
    let total: f64 = probs.sum();
    let rest = 1.0 - total;
    if rest <= EPSILON {
        0.0
    } else {
        rest
    }
}

/// A node's annotated disjunction. Missing mass is the null choice.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProfile {
    pub id: NodeId,
    pub scenarios: Vec<(f64, NodeScenario)>,
}

impl NodeProfile {
    pub fn deterministic(id: impl Into<NodeId>, scenario: NodeScenario) -> Self {
        NodeProfile {
            id: id.into(),
            scenarios: vec![(1.0, scenario)],
        }
    }

    pub fn null_mass(&self) -> f64 {
        residual_mass(self.scenarios.iter().map(|(p, _)| *p))
    }
}

/// A directed link's annotated disjunction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkProfile {
    pub src: NodeId,
    pub dst: NodeId,
    pub scenarios: Vec<(f64, LinkScenario)>,
}

impl LinkProfile {
    pub fn key(&self) -> LinkKey {
        (self.src.clone(), self.dst.clone())
    }

    pub fn null_mass(&self) -> f64 {
        residual_mass(self.scenarios.iter().map(|(p, _)| *p))
    }
}

/// Nodes and directed links, in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Infrastructure {
    pub nodes: IndexMap<NodeId, NodeProfile>,
    pub links: IndexMap<LinkKey, LinkProfile>,
}

impl Infrastructure {
    pub fn link(&self, src: &NodeId, dst: &NodeId) -> Option<&LinkProfile> {
        self.links.get(&(src.clone(), dst.clone()))
    }

    /// Number of joint worlds: product over variables of scenarios (+1 for a
    /// null choice when present). Saturates at `u128::MAX`.
    pub fn world_count(&self) -> u128 {
        let node_counts = self
            .nodes
            .values()
            .map(|n| n.scenarios.len() + usize::from(n.null_mass() > 0.0));
        let link_counts = self
            .links
            .values()
            .map(|l| l.scenarios.len() + usize::from(l.null_mass() > 0.0));
        node_counts
            .chain(link_counts)
            .fold(1u128, |acc, c| acc.saturating_mul(c as u128))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementAssignment(pub Vec<(ServiceId, NodeId)>);

impl PlacementAssignment {
    pub fn node_of(&self, service: &str) -> Option<&NodeId> {
        self.0
            .iter()
            .find(|(s, _)| s.as_str() == service)
            .map(|(_, n)| n)
    }
}

/// Per-link bandwidth consumption of one answer.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub src: NodeId,
    pub dst: NodeId,
    pub used_bw: f64,
    pub flows: Vec<(ServiceId, ServiceId)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RouteAllocation(pub Vec<RouteEntry>);

/// The node path chosen for one flow; empty when both ends are colocated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowPath {
    pub src: ServiceId,
    pub dst: ServiceId,
    pub path: Vec<NodeId>,
}

/// One placement-plus-routing answer with its success probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub chain: ChainId,
    pub placement: PlacementAssignment,
    pub routes: RouteAllocation,
    /// One entry per chain flow, in flow declaration order.
    pub flow_paths: Vec<FlowPath>,
    pub probability: f64,
}

/// Resources consumed by chains that are already deployed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreAllocation {
    pub hw_used: IndexMap<NodeId, f64>,
    pub bw_used: IndexMap<LinkKey, f64>,
    pub placed: Vec<(ServiceId, NodeId)>,
}

impl PreAllocation {
    pub fn hw(&self, node: &NodeId) -> f64 {
        self.hw_used.get(node).copied().unwrap_or(0.0)
    }

    pub fn bw(&self, src: &NodeId, dst: &NodeId) -> f64 {
        self.bw_used
            .get(&(src.clone(), dst.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn node_of(&self, service: &str) -> Option<&NodeId> {
        self.placed
            .iter()
            .find(|(s, _)| s.as_str() == service)
            .map(|(_, n)| n)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate service {0}")]
    DuplicateService(ServiceId),
    #[error("unknown service {0}")]
    UnknownService(ServiceId),
    #[error("service {service}: {reason}")]
    InvalidService { service: ServiceId, reason: String },
    #[error("flow ({src}, {dst}): {reason}")]
    InvalidFlow {
        src: ServiceId,
        dst: ServiceId,
        reason: String,
    },
    #[error("missing flow for latency chain: no flow ({src}, {dst})")]
    MissingLatencyFlow { src: ServiceId, dst: ServiceId },
    #[error("latency constraint {path:?}: {reason}")]
    InvalidLatencyConstraint { path: Vec<ServiceId>, reason: String },
    #[error("node {node}: {reason}")]
    InvalidNode { node: NodeId, reason: String },
    #[error("link ({src}, {dst}): {reason}")]
    InvalidLink {
        src: NodeId,
        dst: NodeId,
        reason: String,
    },
    #[error("duplicate link profile ({0}, {1})")]
    DuplicateLink(NodeId, NodeId),
    #[error("link ({src}, {dst}) references undeclared node {missing}")]
    UnknownLinkEndpoint {
        src: NodeId,
        dst: NodeId,
        missing: NodeId,
    },
}

fn check_service(s: &ServiceFunction) -> Result<(), ModelError> {
    let bad = |reason: &str| ModelError::InvalidService {
        service: s.id.clone(),
        reason: reason.to_owned(),
    };
    if !(s.tproc >= 0.0 && s.tproc.is_finite()) {
        return Err(bad("processing time must be finite and non-negative"));
    }
    if !(s.hw_reqs >= 0.0 && s.hw_reqs.is_finite()) {
        return Err(bad("hardware requirement must be finite and non-negative"));
    }
    let mut seen = HashSet::new();
    for t in &s.iot_reqs {
        if !seen.insert(t) {
            return Err(bad(&format!("duplicate IoT requirement {t}")));
        }
    }
    Ok(())
}

/// Checks every chain invariant and returns the chain unchanged on success.
pub fn validate_chain(spec: ChainSpec) -> Result<ChainSpec, ModelError> {
    let mut declared: HashSet<&str> = HashSet::new();
    for s in spec.services.iter().chain(spec.external_services.iter()) {
        if !declared.insert(s.id.as_str()) {
            return Err(ModelError::DuplicateService(s.id.clone()));
        }
        check_service(s)?;
    }

    let mut pairs: HashSet<(&str, &str)> = HashSet::new();
    for f in &spec.flows {
        for end in [&f.src, &f.dst] {
            if !declared.contains(end.as_str()) {
                return Err(ModelError::UnknownService(end.clone()));
            }
        }
        let bad = |reason: &str| ModelError::InvalidFlow {
            src: f.src.clone(),
            dst: f.dst.clone(),
            reason: reason.to_owned(),
        };
        if f.src == f.dst {
            return Err(bad("source and destination coincide"));
        }
        if !(f.bandwidth > 0.0 && f.bandwidth.is_finite()) {
            return Err(bad("bandwidth must be positive and finite"));
        }
        if spec.is_external(f.src.as_str()) && spec.is_external(f.dst.as_str()) {
            return Err(bad("flow has no endpoint in the chain"));
        }
        if !pairs.insert((f.src.as_str(), f.dst.as_str())) {
            return Err(bad("declared twice"));
        }
    }

    for lc in &spec.latency_constraints {
        let bad = |reason: &str| ModelError::InvalidLatencyConstraint {
            path: lc.path.clone(),
            reason: reason.to_owned(),
        };
        if lc.path.len() < 2 {
            return Err(bad("path needs at least two services"));
        }
        if lc.max_latency.is_nan() || lc.max_latency <= 0.0 {
            return Err(bad("bound must be positive"));
        }
        let mut seen = HashSet::new();
        for s in &lc.path {
            if !declared.contains(s.as_str()) {
                return Err(ModelError::UnknownService(s.clone()));
            }
            if !seen.insert(s) {
                return Err(bad(&format!("service {s} repeated")));
            }
        }
        for w in lc.path.windows(2) {
            if !pairs.contains(&(w[0].as_str(), w[1].as_str())) {
                return Err(ModelError::MissingLatencyFlow {
                    src: w[0].clone(),
                    dst: w[1].clone(),
                });
            }
        }
    }
    Ok(spec)
}

fn check_distribution<T>(
    scenarios: &[(f64, T)],
    max_scenarios: usize,
) -> Result<(), String> {
    if scenarios.is_empty() {
        return Err("no scenarios".into());
    }
    if scenarios.len() > max_scenarios {
        return Err(format!(
            "{} scenarios exceed the cap of {max_scenarios}",
            scenarios.len()
        ));
    }
    for (p, _) in scenarios {
        if !(*p > 0.0 && *p <= 1.0) {
            return Err(format!("probability {p} outside (0, 1]"));
        }
    }
    let total: f64 = scenarios.iter().map(|(p, _)| p).sum();
    if total > 1.0 + EPSILON {
        return Err(format!("probabilities sum to {total} > 1"));
    }
    Ok(())
}

/// Rescales a distribution whose sum is within [`EPSILON`] of one so that no
/// spurious null mass remains.
fn normalize<T>(scenarios: &mut [(f64, T)]) {
    let total: f64 = scenarios.iter().map(|(p, _)| p).sum();
    if total != 1.0 && (total - 1.0).abs() <= EPSILON {
        for (p, _) in scenarios.iter_mut() {
            *p /= total;
        }
    }
}

/// Validates with the default scenario cap.
pub fn validate_infrastructure(infra: Infrastructure) -> Result<Infrastructure, ModelError> {
    validate_infrastructure_with(infra, DEFAULT_MAX_SCENARIOS)
}

pub fn validate_infrastructure_with(
    mut infra: Infrastructure,
    max_scenarios: usize,
) -> Result<Infrastructure, ModelError> {
    for (id, node) in infra.nodes.iter_mut() {
        let bad = |reason: String| ModelError::InvalidNode {
            node: id.clone(),
            reason,
        };
        if &node.id != id {
            return Err(bad(format!("profile is keyed as {id} but names {}", node.id)));
        }
        check_distribution(&node.scenarios, max_scenarios).map_err(bad)?;
        for (_, sc) in &node.scenarios {
            if sc.hw_caps.is_nan() || sc.hw_caps < 0.0 {
                return Err(bad("hardware capacity must be non-negative".into()));
            }
        }
        normalize(&mut node.scenarios);
    }
    for ((src, dst), link) in infra.links.iter_mut() {
        let bad = |reason: String| ModelError::InvalidLink {
            src: src.clone(),
            dst: dst.clone(),
            reason,
        };
        if &link.src != src || &link.dst != dst {
            return Err(bad("profile key does not match its endpoints".into()));
        }
        for end in [src, dst] {
            if !infra.nodes.contains_key(end) {
                return Err(ModelError::UnknownLinkEndpoint {
                    src: src.clone(),
                    dst: dst.clone(),
                    missing: end.clone(),
                });
            }
        }
        if src == dst {
            return Err(bad("self loop".into()));
        }
        check_distribution(&link.scenarios, max_scenarios).map_err(bad)?;
        for (_, sc) in &link.scenarios {
            if sc.bandwidth.is_nan() || sc.bandwidth < 0.0 || sc.latency.is_nan() || sc.latency < 0.0 {
                return Err(bad("bandwidth and latency must be non-negative".into()));
            }
        }
        normalize(&mut link.scenarios);
    }
    Ok(infra)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeNode {
    pub id: NodeId,
    pub hw: f64,
    pub iot: BTreeSet<String>,
    pub sec: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeLink {
    /// Index into [`EnvelopeInfrastructure::nodes`].
    pub src: usize,
    pub dst: usize,
    pub bandwidth: f64,
    pub latency: f64,
}

/// Optimistic bound of every variable: max hardware and bandwidth, min
/// latency, union of IoT and security capabilities.
///
/// Nodes and links keep declaration order and are addressed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeInfrastructure {
    pub nodes: Vec<EnvelopeNode>,
    pub links: Vec<EnvelopeLink>,
    node_index: HashMap<NodeId, usize>,
    link_index: HashMap<(usize, usize), usize>,
    out_links: Vec<Vec<usize>>,
}

impl EnvelopeInfrastructure {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&EnvelopeNode> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    pub fn link_index(&self, src: usize, dst: usize) -> Option<usize> {
        self.link_index.get(&(src, dst)).copied()
    }

    pub fn link(&self, src: &str, dst: &str) -> Option<&EnvelopeLink> {
        let (s, d) = (self.node_index(src)?, self.node_index(dst)?);
        self.link_index(s, d).map(|i| &self.links[i])
    }

    /// Outgoing link indices of `node`, in declaration order.
    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }
}

/// Builds the optimistic envelope of a validated infrastructure.
pub fn envelope(infra: &Infrastructure) -> EnvelopeInfrastructure {
    let mut nodes = Vec::new();
    let mut node_index = HashMap::new();
    for node in infra.nodes.values() {
        if node.scenarios.is_empty() {
            continue;
        }
        let mut env = EnvelopeNode {
            id: node.id.clone(),
            hw: f64::NEG_INFINITY,
            iot: BTreeSet::new(),
            sec: BTreeSet::new(),
        };
        for (_, sc) in &node.scenarios {
            env.hw = env.hw.max(sc.hw_caps);
            env.iot.extend(sc.iot_caps.iter().cloned());
            env.sec.extend(sc.sec_caps.iter().cloned());
        }
        node_index.insert(node.id.clone(), nodes.len());
        nodes.push(env);
    }

    let mut links = Vec::new();
    let mut link_index = HashMap::new();
    let mut out_links = vec![Vec::new(); nodes.len()];
    for link in infra.links.values() {
        let (Some(&src), Some(&dst)) = (node_index.get(&link.src), node_index.get(&link.dst))
        else {
            continue;
        };
        if link.scenarios.is_empty() {
            continue;
        }
        let bandwidth = link
            .scenarios
            .iter()
            .map(|(_, s)| s.bandwidth)
            .fold(f64::NEG_INFINITY, f64::max);
        let latency = link
            .scenarios
            .iter()
            .map(|(_, s)| s.latency)
            .fold(f64::INFINITY, f64::min);
        let idx = links.len();
        link_index.insert((src, dst), idx);
        out_links[src].push(idx);
        links.push(EnvelopeLink {
            src,
            dst,
            bandwidth,
            latency,
        });
    }

    EnvelopeInfrastructure {
        nodes,
        links,
        node_index,
        link_index,
        out_links,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn caps(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    pub fn service(id: &str, tproc: f64, hw: f64) -> ServiceFunction {
        ServiceFunction {
            id: id.into(),
            tproc,
            hw_reqs: hw,
            iot_reqs: vec![],
            sec_policy: SecurityPolicy::default(),
        }
    }

    pub fn flow(src: &str, dst: &str, bw: f64) -> Flow {
        Flow {
            src: src.into(),
            dst: dst.into(),
            bandwidth: bw,
        }
    }

    pub fn hw_node(id: &str, scenarios: &[(f64, f64)]) -> NodeProfile {
        NodeProfile {
            id: id.into(),
            scenarios: scenarios
                .iter()
                .map(|&(p, hw)| {
                    (
                        p,
                        NodeScenario {
                            hw_caps: hw,
                            ..Default::default()
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn link(src: &str, dst: &str, scenarios: &[(f64, f64, f64)]) -> LinkProfile {
        LinkProfile {
            src: src.into(),
            dst: dst.into(),
            scenarios: scenarios
                .iter()
                .map(|&(p, latency, bandwidth)| (p, LinkScenario { latency, bandwidth }))
                .collect(),
        }
    }

    pub fn infra(nodes: Vec<NodeProfile>, links: Vec<LinkProfile>) -> Infrastructure {
        Infrastructure {
            nodes: nodes.into_iter().map(|n| (n.id.clone(), n)).collect(),
            links: links.into_iter().map(|l| (l.key(), l)).collect(),
        }
    }

    fn chain(services: Vec<ServiceFunction>, flows: Vec<Flow>, lcs: Vec<LatencyConstraint>) -> ChainSpec {
        ChainSpec {
            id: "c".into(),
            services,
            flows,
            latency_constraints: lcs,
            external_services: vec![],
        }
    }

    #[test]
    fn unknown_flow_endpoint_is_rejected() {
        let c = chain(
            vec![service("a", 1.0, 1.0)],
            vec![flow("a", "x", 5.0)],
            vec![],
        );
        let err = validate_chain(c).unwrap_err();
        assert_eq!(err.to_string(), "unknown service x");
    }

    #[test]
    fn latency_pair_without_flow_is_rejected() {
        let c = chain(
            vec![service("a", 1.0, 1.0), service("b", 1.0, 1.0)],
            vec![flow("b", "a", 5.0)],
            vec![LatencyConstraint {
                path: vec!["a".into(), "b".into()],
                max_latency: 10.0,
            }],
        );
        let err = validate_chain(c).unwrap_err();
        assert!(err.to_string().starts_with("missing flow for latency chain"));
    }

    #[test]
    fn repeated_latency_member_is_rejected() {
        let c = chain(
            vec![service("a", 1.0, 1.0), service("b", 1.0, 1.0)],
            vec![flow("a", "b", 5.0), flow("b", "a", 5.0)],
            vec![LatencyConstraint {
                path: vec!["a".into(), "b".into(), "a".into()],
                max_latency: 10.0,
            }],
        );
        assert!(matches!(
            validate_chain(c),
            Err(ModelError::InvalidLatencyConstraint { .. })
        ));
    }

    #[test]
    fn duplicate_services_and_flows_are_rejected() {
        let c = chain(vec![service("a", 1.0, 1.0), service("a", 1.0, 1.0)], vec![], vec![]);
        assert_eq!(validate_chain(c), Err(ModelError::DuplicateService("a".into())));
        let c = chain(
            vec![service("a", 1.0, 1.0), service("b", 1.0, 1.0)],
            vec![flow("a", "b", 5.0), flow("a", "b", 3.0)],
            vec![],
        );
        assert!(matches!(validate_chain(c), Err(ModelError::InvalidFlow { .. })));
        let c = chain(vec![service("a", 1.0, 1.0)], vec![flow("a", "a", 5.0)], vec![]);
        assert!(matches!(validate_chain(c), Err(ModelError::InvalidFlow { .. })));
    }

    #[test]
    fn table_one_profiles_validate() {
        let i = infra(vec![hw_node("n", &[(0.2, 2.0), (0.8, 1.0)])], vec![]);
        let i = validate_infrastructure(i).unwrap();
        assert_eq!(i.nodes["n"].null_mass(), 0.0);

        let i = infra(vec![hw_node("cloud", &[(0.999, f64::INFINITY)])], vec![]);
        let i = validate_infrastructure(i).unwrap();
        assert!((i.nodes["cloud"].null_mass() - 0.001).abs() < 1e-12);
    }

    #[test]
    fn overfull_distribution_is_rejected() {
        let i = infra(vec![hw_node("n", &[(0.6, 2.0), (0.6, 1.0)])], vec![]);
        assert!(matches!(
            validate_infrastructure(i),
            Err(ModelError::InvalidNode { .. })
        ));
    }

    #[test]
    fn near_one_sums_are_normalized() {
        let i = infra(vec![hw_node("n", &[(0.1, 2.0), (0.2, 1.0), (0.7, 0.5)])], vec![]);
        let i = validate_infrastructure(i).unwrap();
        assert_eq!(i.nodes["n"].null_mass(), 0.0);
        let again = validate_infrastructure(i.clone()).unwrap();
        assert_eq!(again, i);
    }

    #[test]
    fn link_with_unknown_endpoint_is_rejected() {
        let i = infra(
            vec![hw_node("a", &[(1.0, 1.0)])],
            vec![link("a", "b", &[(1.0, 5.0, 10.0)])],
        );
        assert!(matches!(
            validate_infrastructure(i),
            Err(ModelError::UnknownLinkEndpoint { .. })
        ));
    }

    #[test]
    fn scenario_cap_is_enforced() {
        let i = infra(vec![hw_node("n", &[(0.25, 1.0), (0.25, 2.0), (0.25, 3.0)])], vec![]);
        assert!(validate_infrastructure_with(i, 2).is_err());
    }

    #[test]
    fn envelope_takes_optimistic_bounds() {
        let i = infra(
            vec![
                hw_node("a", &[(0.2, 4.0), (0.8, 2.0)]),
                hw_node("b", &[(1.0, 8.0)]),
            ],
            vec![link("a", "b", &[(0.98, 15.0, 70.0), (0.02, f64::INFINITY, 0.0)])],
        );
        let env = envelope(&i);
        assert_eq!(env.node("a").unwrap().hw, 4.0);
        assert_eq!(env.node("b").unwrap().hw, 8.0);
        let l = env.link("a", "b").unwrap();
        assert_eq!((l.bandwidth, l.latency), (70.0, 15.0));
        assert!(env.link("b", "a").is_none());
        assert_eq!(env.out_links(0), &[0]);
    }

    #[test]
    fn envelope_unions_capabilities() {
        let mut n = hw_node("a", &[(0.5, 1.0), (0.5, 2.0)]);
        n.scenarios[0].1.sec_caps = caps(&["x"]);
        n.scenarios[1].1.sec_caps = caps(&["y"]);
        n.scenarios[1].1.iot_caps = caps(&["cam"]);
        let env = envelope(&infra(vec![n], vec![]));
        assert_eq!(env.nodes[0].sec, caps(&["x", "y"]));
        assert_eq!(env.nodes[0].iot, caps(&["cam"]));
    }
}
