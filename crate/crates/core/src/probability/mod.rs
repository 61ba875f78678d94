//! Exact success probability of candidate answers.
//!
//! Every node and link is an independent discrete random variable whose
//! values are its scenarios plus, when the declared probabilities sum below
//! one, a null choice (the element is absent). A candidate holds in a world
//! iff every requirement it induces holds there, so its probability is the
//! total mass of those worlds. Requirements only couple variables through
//! latency sums, which lets the computation factor into small independent
//! components that are enumerated exhaustively.

mod oracle;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{
    fits, Answer, ChainSpec, Infrastructure, LinkScenario, NodeScenario, PlacementAssignment,
    PreAllocation, SecurityPolicy,
};
use crate::policy::eval_policy;
use crate::search::{AllocationState, PathPruner, PlacementPruner, SearchProblem};

pub use oracle::{brute_force_probability, DEFAULT_WORLD_CAP};

/// Default cap on joint scenarios enumerated for one component.
pub const DEFAULT_COMPONENT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("component too large: {joint} joint scenarios over [{}] exceed the cap of {cap}", variables.join(", "))]
    ComponentTooLarge {
        variables: Vec<String>,
        joint: u128,
        cap: u64,
    },
    #[error("world count {worlds} exceeds the oracle cap of {cap}")]
    TooManyWorlds { worlds: u128, cap: u128 },
    #[error("candidate does not fit the infrastructure: {0}")]
    Malformed(String),
}

/// A random variable: a node or a directed link, by index in the
/// infrastructure's declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Node(usize),
    Link(usize),
}

impl Variable {
    pub fn name(self, infra: &Infrastructure) -> String {
        match self {
            Variable::Node(i) => infra.nodes[i].id.to_string(),
            Variable::Link(i) => {
                let l = &infra.links[i];
                format!("{}->{}", l.src, l.dst)
            }
        }
    }

    /// Number of values, counting the null choice when it has mass.
    pub fn arity(self, infra: &Infrastructure) -> usize {
        match self {
            Variable::Node(i) => {
                let n = &infra.nodes[i];
                n.scenarios.len() + usize::from(n.null_mass() > 0.0)
            }
            Variable::Link(i) => {
                let l = &infra.links[i];
                l.scenarios.len() + usize::from(l.null_mass() > 0.0)
            }
        }
    }

    /// Probability of value `k`; the last value is the null choice if any.
    pub fn weight(self, infra: &Infrastructure, k: usize) -> f64 {
        match self {
            Variable::Node(i) => {
                let n = &infra.nodes[i];
                n.scenarios.get(k).map_or_else(|| n.null_mass(), |s| s.0)
            }
            Variable::Link(i) => {
                let l = &infra.links[i];
                l.scenarios.get(k).map_or_else(|| l.null_mass(), |s| s.0)
            }
        }
    }
}

fn node_value(infra: &Infrastructure, i: usize, k: usize) -> Option<&NodeScenario> {
    infra.nodes[i].scenarios.get(k).map(|s| &s.1)
}

fn link_value(infra: &Infrastructure, i: usize, k: usize) -> Option<&LinkScenario> {
    infra.links[i].scenarios.get(k).map(|s| &s.1)
}

/// Everything the services placed on one node need from it.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRequirement<'c> {
    pub node: usize,
    /// Including hardware already used by previous deployments.
    pub hw: f64,
    pub iot: BTreeSet<&'c str>,
    pub policies: Vec<&'c SecurityPolicy>,
}

impl NodeRequirement<'_> {
    pub fn holds(&self, scenario: &NodeScenario) -> bool {
        fits(self.hw, scenario.hw_caps)
            && self.iot.iter().all(|t| scenario.iot_caps.contains(*t))
            && self.policies.iter().all(|p| eval_policy(p, &scenario.sec_caps))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRequirement {
    pub link: usize,
    /// Including bandwidth already used by previous deployments.
    pub bandwidth: f64,
}

impl LinkRequirement {
    pub fn holds(&self, scenario: &LinkScenario) -> bool {
        fits(self.bandwidth, scenario.bandwidth)
    }
}

/// `processing + sum of link latencies <= bound`. A link may appear more than
/// once when several flows of the path share it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyRequirement {
    pub links: Vec<usize>,
    pub processing: f64,
    pub bound: f64,
}

/// The random-variable constraints induced by one candidate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet<'c> {
    pub nodes: Vec<NodeRequirement<'c>>,
    pub links: Vec<LinkRequirement>,
    pub latencies: Vec<LatencyRequirement>,
}

/// Index form of a candidate: the infrastructure node of each chain service
/// and the links of each flow's path (`None` when colocated).
pub struct CandidateRef<'a> {
    pub placement: &'a [usize],
    pub flow_links: &'a [Option<&'a [usize]>],
}

/// Builds the requirements of an index-form candidate.
pub fn constraints_of_indexed<'c>(
    cand: &CandidateRef<'_>,
    chain: &'c ChainSpec,
    infra: &Infrastructure,
    pre: &PreAllocation,
) -> ConstraintSet<'c> {
    let mut nodes: Vec<NodeRequirement<'c>> = Vec::new();
    for (sf, &n) in chain.services.iter().zip(cand.placement) {
        let req = match nodes.iter_mut().find(|r| r.node == n) {
            Some(r) => r,
            None => {
                nodes.push(NodeRequirement {
                    node: n,
                    hw: pre.hw(&infra.nodes[n].id),
                    iot: BTreeSet::new(),
                    policies: Vec::new(),
                });
                nodes.last_mut().expect("just pushed")
            }
        };
        req.hw += sf.hw_reqs;
        req.iot.extend(sf.iot_reqs.iter().map(String::as_str));
        req.policies.push(&sf.sec_policy);
    }

    let mut links: Vec<LinkRequirement> = Vec::new();
    for (f, path) in chain.flows.iter().zip(cand.flow_links) {
        for &l in path.unwrap_or(&[]) {
            match links.iter_mut().find(|r| r.link == l) {
                Some(r) => r.bandwidth += f.bandwidth,
                None => {
                    let link = &infra.links[l];
                    links.push(LinkRequirement {
                        link: l,
                        bandwidth: pre.bw(&link.src, &link.dst) + f.bandwidth,
                    });
                }
            }
        }
    }

    let mut latencies = Vec::new();
    for lc in &chain.latency_constraints {
        let processing = lc
            .path
            .iter()
            .filter_map(|s| chain.service(s.as_str()))
            .map(|s| s.tproc)
            .sum();
        let mut ls = Vec::new();
        for w in lc.path.windows(2) {
            if let Some(k) = chain.flows.iter().position(|f| f.src == w[0] && f.dst == w[1]) {
                ls.extend_from_slice(cand.flow_links[k].unwrap_or(&[]));
            }
        }
        latencies.push(LatencyRequirement {
            links: ls,
            processing,
            bound: lc.max_latency,
        });
    }

    ConstraintSet {
        nodes,
        links,
        latencies,
    }
}

/// Resolves an answer's ids against the infrastructure.
fn index_answer(
    answer: &Answer,
    chain: &ChainSpec,
    infra: &Infrastructure,
) -> Result<(Vec<usize>, Vec<Option<Vec<usize>>>), InferenceError> {
    let node_idx = |id: &str| {
        infra
            .nodes
            .get_index_of(id)
            .ok_or_else(|| InferenceError::Malformed(format!("unknown node {id}")))
    };
    let mut placement = Vec::with_capacity(chain.services.len());
    for sf in &chain.services {
        let n = answer
            .placement
            .node_of(sf.id.as_str())
            .ok_or_else(|| InferenceError::Malformed(format!("service {} unplaced", sf.id)))?;
        placement.push(node_idx(n.as_str())?);
    }
    let mut flow_links = Vec::with_capacity(chain.flows.len());
    for f in &chain.flows {
        let fp = answer
            .flow_paths
            .iter()
            .find(|p| p.src == f.src && p.dst == f.dst)
            .ok_or_else(|| InferenceError::Malformed(format!("no path for flow ({}, {})", f.src, f.dst)))?;
        if fp.path.is_empty() {
            flow_links.push(None);
            continue;
        }
        let mut ls = Vec::new();
        for w in fp.path.windows(2) {
            let l = infra
                .links
                .get_index_of(&(w[0].clone(), w[1].clone()))
                .ok_or_else(|| InferenceError::Malformed(format!("no link {}->{}", w[0], w[1])))?;
            ls.push(l);
        }
        flow_links.push(Some(ls));
    }
    Ok((placement, flow_links))
}

/// Requirements induced by an answer, with the ids resolved against `infra`.
pub fn constraints_of<'c>(
    answer: &Answer,
    chain: &'c ChainSpec,
    infra: &Infrastructure,
    pre: &PreAllocation,
) -> Result<ConstraintSet<'c>, InferenceError> {
    let (placement, flow_links) = index_answer(answer, chain, infra)?;
    let refs: Vec<Option<&[usize]>> = flow_links.iter().map(|p| p.as_deref()).collect();
    let cand = CandidateRef {
        placement: &placement,
        flow_links: &refs,
    };
    Ok(constraints_of_indexed(&cand, chain, infra, pre))
}

/// Variables connected by shared requirements, with those requirements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Component<'c> {
    pub variables: Vec<Variable>,
    pub nodes: Vec<NodeRequirement<'c>>,
    pub links: Vec<LinkRequirement>,
    pub latencies: Vec<LatencyRequirement>,
}

/// Splits a constraint set into independent components. Each node is its
/// own component; links are joined when a latency requirement spans them.
/// A latency requirement over no link at all forms a variable-free component.
pub fn factor_components<'c>(cs: &ConstraintSet<'c>) -> Vec<Component<'c>> {
    let mut out: Vec<Component<'c>> = cs
        .nodes
        .iter()
        .map(|r| Component {
            variables: vec![Variable::Node(r.node)],
            nodes: vec![r.clone()],
            ..Default::default()
        })
        .collect();

    // Union-find over the link variables mentioned anywhere.
    let mut vars: Vec<usize> = cs.links.iter().map(|r| r.link).collect();
    for lr in &cs.latencies {
        vars.extend(&lr.links);
    }
    vars.sort_unstable();
    vars.dedup();
    let pos = |l: usize| vars.binary_search(&l).expect("collected above");
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for lr in &cs.latencies {
        if let Some((&first, rest)) = lr.links.split_first() {
            let a = find(&mut parent, pos(first));
            for &l in rest {
                let b = find(&mut parent, pos(l));
                parent[b] = a;
            }
        }
    }

    let mut groups: Vec<(usize, Component<'c>)> = Vec::new();
    let group_of = |root: usize, groups: &mut Vec<(usize, Component<'c>)>| -> usize {
        match groups.iter().position(|(r, _)| *r == root) {
            Some(g) => g,
            None => {
                groups.push((root, Component::default()));
                groups.len() - 1
            }
        }
    };
    for (k, &l) in vars.iter().enumerate() {
        let g = group_of(find(&mut parent, k), &mut groups);
        groups[g].1.variables.push(Variable::Link(l));
    }
    for r in &cs.links {
        let g = group_of(find(&mut parent, pos(r.link)), &mut groups);
        groups[g].1.links.push(r.clone());
    }
    for lr in &cs.latencies {
        match lr.links.first() {
            Some(&l) => {
                let g = group_of(find(&mut parent, pos(l)), &mut groups);
                groups[g].1.latencies.push(lr.clone());
            }
            None => out.push(Component {
                latencies: vec![lr.clone()],
                ..Default::default()
            }),
        }
    }
    out.extend(groups.into_iter().map(|(_, c)| c));
    out
}

/// Exact probability that every requirement of the component holds.
pub fn component_probability(
    component: &Component<'_>,
    infra: &Infrastructure,
    cap: u64,
) -> Result<f64, InferenceError> {
    // Values that already fail a single-variable requirement contribute
    // nothing; drop them before enumerating the product.
    let mut choices: Vec<Vec<(usize, f64)>> = Vec::with_capacity(component.variables.len());
    let mut joint: u128 = 1;
    for &v in &component.variables {
        let arity = v.arity(infra);
        joint = joint.saturating_mul(arity as u128);
        let mut ok = Vec::with_capacity(arity);
        for k in 0..arity {
            let holds = match v {
                Variable::Node(i) => match node_value(infra, i, k) {
                    None => false,
                    Some(s) => component.nodes.iter().filter(|r| r.node == i).all(|r| r.holds(s)),
                },
                Variable::Link(i) => match link_value(infra, i, k) {
                    None => false,
                    Some(s) => component.links.iter().filter(|r| r.link == i).all(|r| r.holds(s)),
                },
            };
            if holds {
                ok.push((k, v.weight(infra, k)));
            }
        }
        choices.push(ok);
    }
    if joint > u128::from(cap) {
        return Err(InferenceError::ComponentTooLarge {
            variables: component.variables.iter().map(|v| v.name(infra)).collect(),
            joint,
            cap,
        });
    }
    if choices.iter().any(Vec::is_empty) {
        return Ok(0.0);
    }

    // Latency requirements refer to variables by position in the component.
    let position = |l: usize| {
        component
            .variables
            .iter()
            .position(|v| *v == Variable::Link(l))
            .expect("latency links belong to their component")
    };
    let latency_terms: Vec<(Vec<usize>, f64, f64)> = component
        .latencies
        .iter()
        .map(|lr| (lr.links.iter().map(|&l| position(l)).collect(), lr.processing, lr.bound))
        .collect();

    let mut digits = vec![0usize; choices.len()];
    let mut total = 0.0;
    loop {
        let ok = latency_terms.iter().all(|(pos, processing, bound)| {
            let mut lat = *processing;
            for &p in pos {
                let Variable::Link(l) = component.variables[p] else {
                    unreachable!("latency terms only reference links")
                };
                let k = choices[p][digits[p]].0;
                lat += link_value(infra, l, k).map_or(f64::INFINITY, |s| s.latency);
            }
            fits(lat, *bound)
        });
        if ok {
            total += digits
                .iter()
                .zip(&choices)
                .map(|(&d, c)| c[d].1)
                .product::<f64>();
        }
        // Mixed-radix increment.
        let mut i = 0;
        loop {
            if i == digits.len() {
                // Scenario masses summing to 1 within rounding can overshoot.
                return Ok(total.min(1.0));
            }
            digits[i] += 1;
            if digits[i] < choices[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Product of the component probabilities of a constraint set.
pub fn constraint_set_probability(
    cs: &ConstraintSet<'_>,
    infra: &Infrastructure,
    cap: u64,
) -> Result<f64, InferenceError> {
    let mut p = 1.0;
    for c in factor_components(cs) {
        p *= component_probability(&c, infra, cap)?;
        if p == 0.0 {
            break;
        }
    }
    Ok(p)
}

/// Exact success probability of an answer (its own `probability` field is
/// ignored).
pub fn answer_probability(
    answer: &Answer,
    chain: &ChainSpec,
    infra: &Infrastructure,
    pre: &PreAllocation,
) -> Result<f64, InferenceError> {
    let cs = constraints_of(answer, chain, infra, pre)?;
    constraint_set_probability(&cs, infra, DEFAULT_COMPONENT_CAP)
}

fn link_marginal(link: usize, bandwidth: f64, infra: &Infrastructure) -> f64 {
    infra.links[link]
        .scenarios
        .iter()
        .filter(|(_, s)| fits(bandwidth, s.bandwidth))
        .map(|(p, _)| p)
        .sum()
}

/// Product over the nodes touched by a placement prefix of the probability
/// that the node meets its accumulated requirements. `prefix[i]` is the
/// node of chain service `i`; `hw` holds the accumulated hardware per node.
pub fn partial_placement_probability_indexed(
    chain: &ChainSpec,
    prefix: &[usize],
    hw: &[f64],
    infra: &Infrastructure,
) -> f64 {
    let mut p = 1.0;
    for (i, &n) in prefix.iter().enumerate() {
        if prefix[..i].contains(&n) {
            continue;
        }
        let hosted = || {
            chain
                .services
                .iter()
                .zip(prefix)
                .filter(move |(_, &m)| m == n)
                .map(|(sf, _)| sf)
        };
        p *= infra.nodes[n]
            .scenarios
            .iter()
            .filter(|(_, sc)| {
                fits(hw[n], sc.hw_caps)
                    && hosted().all(|sf| {
                        sf.iot_reqs.iter().all(|t| sc.iot_caps.contains(t))
                            && eval_policy(&sf.sec_policy, &sc.sec_caps)
                    })
            })
            .map(|(q, _)| q)
            .sum::<f64>();
        if p == 0.0 {
            break;
        }
    }
    p
}

/// Id-based form of [`partial_placement_probability_indexed`]. The allocation
/// state must be indexed like `infra` (as the envelope of a validated
/// infrastructure is).
pub fn partial_placement_probability(
    partial: &PlacementAssignment,
    chain: &ChainSpec,
    allocations: &AllocationState,
    infra: &Infrastructure,
) -> f64 {
    let mut prefix = Vec::with_capacity(partial.0.len());
    for (sf, (sid, nid)) in chain.services.iter().zip(&partial.0) {
        debug_assert_eq!(sf.id, *sid, "prefix follows chain order");
        match infra.nodes.get_index_of(nid) {
            Some(i) => prefix.push(i),
            None => return 0.0,
        }
    }
    partial_placement_probability_indexed(chain, &prefix, &allocations.hw, infra)
}

/// Product over the path's links of the probability that the link carries
/// what is already allocated on it plus `bandwidth`.
pub fn path_probability_indexed(
    links: &[usize],
    bandwidth: f64,
    state: &AllocationState,
    infra: &Infrastructure,
) -> f64 {
    links
        .iter()
        .map(|&l| link_marginal(l, state.links[l].allocated + bandwidth, infra))
        .product()
}

/// Id-based form of [`path_probability_indexed`]; `path` is a node sequence.
pub fn path_probability(
    path: &[crate::model::NodeId],
    bandwidth: f64,
    allocations: &AllocationState,
    infra: &Infrastructure,
) -> f64 {
    let mut links = Vec::with_capacity(path.len().saturating_sub(1));
    for w in path.windows(2) {
        match infra.links.get_index_of(&(w[0].clone(), w[1].clone())) {
            Some(l) => links.push(l),
            None => return 0.0,
        }
    }
    path_probability_indexed(&links, bandwidth, allocations, infra)
}

/// Prunes placement prefixes whose node marginals fall below a threshold.
pub struct HardwarePruner<'a> {
    pub infra: &'a Infrastructure,
    pub threshold: f64,
}

impl PlacementPruner for HardwarePruner<'_> {
    fn keep(&self, problem: &SearchProblem<'_>, prefix: &[usize], state: &AllocationState) -> bool {
        partial_placement_probability_indexed(problem.chain, prefix, &state.hw, self.infra)
            >= self.threshold
    }
}

/// How the QoS threshold is compared against a candidate path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QosMode {
    /// Product of link marginals along the whole path.
    #[default]
    Path,
    /// Every link marginal on its own.
    PerLink,
}

/// Prunes candidate paths whose bandwidth marginals fall below a threshold.
pub struct QosPruner<'a> {
    pub infra: &'a Infrastructure,
    pub threshold: f64,
    pub mode: QosMode,
}

impl PathPruner for QosPruner<'_> {
    fn keep(&self, links: &[usize], bandwidth: f64, state: &AllocationState) -> bool {
        match self.mode {
            QosMode::Path => path_probability_indexed(links, bandwidth, state, self.infra) >= self.threshold,
            QosMode::PerLink => links.iter().all(|&l| {
                link_marginal(l, state.links[l].allocated + bandwidth, self.infra) >= self.threshold
            }),
        }
    }
}
