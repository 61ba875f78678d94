//! Backtracking enumeration of service placements and flow routings over the
//! envelope infrastructure.
//!
//! Everything here is optimistic: a candidate is yielded when it is feasible
//! in the envelope, which dominates every world. Exact probabilities are the
//! job of [`crate::probability`].

use std::collections::HashMap;
use std::ops::ControlFlow;

use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{
    fits, ChainSpec, EnvelopeInfrastructure, Flow, LatencyConstraint, NodeId,
    PlacementAssignment, PreAllocation, ServiceId,
};
use crate::policy::eval_policy;

pub const DEFAULT_RADIUS: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("query constraint references unknown service {0}")]
    UnknownService(ServiceId),
    #[error("query constraint references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("inconsistent query constraints: {0}")]
    Inconsistent(String),
    #[error("service {0} is neither part of the chain nor already deployed")]
    UnplacedExternal(ServiceId),
    #[error("no latency recorded for flow ({0}, {1})")]
    MissingLatency(ServiceId, ServiceId),
}

/// Affinity, anti-affinity and pinning requirements of a query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryConstraints {
    pub pins: IndexMap<ServiceId, NodeId>,
    pub same_node: Vec<Vec<ServiceId>>,
    pub different_node: Vec<(ServiceId, ServiceId)>,
}

impl QueryConstraints {
    pub fn is_empty(&self) -> bool {
        self.pins.is_empty() && self.same_node.is_empty() && self.different_node.is_empty()
    }

    /// Checks references and rejects contradictory requirements.
    pub fn validate(&self, chain: &ChainSpec, env: &EnvelopeInfrastructure) -> Result<(), SearchError> {
        let known = |s: &ServiceId| {
            if chain.services.iter().any(|f| f.id == *s) {
                Ok(())
            } else {
                Err(SearchError::UnknownService(s.clone()))
            }
        };
        for (s, n) in &self.pins {
            known(s)?;
            if env.node_index(n.as_str()).is_none() {
                return Err(SearchError::UnknownNode(n.clone()));
            }
        }
        for group in &self.same_node {
            let mut pinned: Option<&NodeId> = None;
            for s in group {
                known(s)?;
                if let Some(n) = self.pins.get(s) {
                    match pinned {
                        Some(p) if p != n => {
                            return Err(SearchError::Inconsistent(format!(
                                "same-node group {group:?} is pinned to both {p} and {n}"
                            )))
                        }
                        _ => pinned = Some(n),
                    }
                }
            }
        }
        for (a, b) in &self.different_node {
            known(a)?;
            known(b)?;
            if a == b {
                return Err(SearchError::Inconsistent(format!(
                    "{a} cannot be on a different node from itself"
                )));
            }
            if self.same_node.iter().any(|g| g.contains(a) && g.contains(b)) {
                return Err(SearchError::Inconsistent(format!(
                    "{a} and {b} are required both together and apart"
                )));
            }
            if let (Some(x), Some(y)) = (self.pins.get(a), self.pins.get(b)) {
                if x == y {
                    return Err(SearchError::Inconsistent(format!(
                        "{a} and {b} are both pinned to {x} but must differ"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether a complete placement satisfies every requirement.
    pub fn admits(&self, placement: &PlacementAssignment) -> bool {
        let at = |s: &ServiceId| placement.node_of(s.as_str());
        self.pins.iter().all(|(s, n)| at(s) == Some(n))
            && self.same_node.iter().all(|g| {
                g.windows(2).all(|w| at(&w[0]) == at(&w[1]))
            })
            && self.different_node.iter().all(|(a, b)| at(a) != at(b))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkLoad {
    /// Mbps, including pre-allocated traffic.
    pub allocated: f64,
    /// Flows of the current search routed over the link, in routing order.
    pub flows: Vec<(ServiceId, ServiceId)>,
}

/// Cumulative hardware and bandwidth bookkeeping, indexed like the envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    pub hw: Vec<f64>,
    pub links: Vec<LinkLoad>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("link capacity exceeded")]
pub struct CapacityExceeded;

impl AllocationState {
    pub fn empty(env: &EnvelopeInfrastructure) -> Self {
        AllocationState {
            hw: vec![0.0; env.nodes.len()],
            links: vec![LinkLoad::default(); env.links.len()],
        }
    }

    /// Charges pre-existing deployments. Entries naming nodes or links
    /// missing from the envelope are ignored.
    pub fn seeded(env: &EnvelopeInfrastructure, pre: &PreAllocation) -> Self {
        let mut state = Self::empty(env);
        for (n, hw) in &pre.hw_used {
            if let Some(i) = env.node_index(n.as_str()) {
                state.hw[i] += hw;
            }
        }
        for ((a, b), bw) in &pre.bw_used {
            if let (Some(s), Some(d)) = (env.node_index(a.as_str()), env.node_index(b.as_str())) {
                if let Some(l) = env.link_index(s, d) {
                    state.links[l].allocated += bw;
                }
            }
        }
        state
    }

    pub fn hw_of(&self, env: &EnvelopeInfrastructure, node: &str) -> Option<f64> {
        env.node_index(node).map(|i| self.hw[i])
    }

    pub fn load_of(&self, env: &EnvelopeInfrastructure, src: &str, dst: &str) -> Option<&LinkLoad> {
        let (s, d) = (env.node_index(src)?, env.node_index(dst)?);
        env.link_index(s, d).map(|l| &self.links[l])
    }

    /// All-or-nothing allocation of `flow` on every link of `links`.
    fn try_allocate(
        &mut self,
        env: &EnvelopeInfrastructure,
        links: &[usize],
        flow: &Flow,
    ) -> Result<(), CapacityExceeded> {
        // A simple path never repeats a link, so checking each link once is exact.
        for &l in links {
            if !fits(self.links[l].allocated + flow.bandwidth, env.links[l].bandwidth) {
                return Err(CapacityExceeded);
            }
        }
        for &l in links {
            let load = &mut self.links[l];
            load.allocated += flow.bandwidth;
            load.flows.push(flow.pair());
        }
        Ok(())
    }

    fn release(&mut self, links: &[usize], flow: &Flow) {
        for &l in links {
            let load = &mut self.links[l];
            load.allocated -= flow.bandwidth;
            load.flows.pop();
        }
    }
}

/// Adds `flow` along `path` (a node sequence). Returns the new state, or
/// `CapacityExceeded` leaving the input untouched.
pub fn allocate_bandwidth(
    state: &AllocationState,
    env: &EnvelopeInfrastructure,
    path: &[NodeId],
    flow: &Flow,
) -> Result<AllocationState, CapacityExceeded> {
    let mut links = Vec::with_capacity(path.len().saturating_sub(1));
    for w in path.windows(2) {
        let l = env
            .node_index(w[0].as_str())
            .zip(env.node_index(w[1].as_str()))
            .and_then(|(s, d)| env.link_index(s, d))
            .ok_or(CapacityExceeded)?;
        links.push(l);
    }
    let mut next = state.clone();
    next.try_allocate(env, &links, flow)?;
    Ok(next)
}

/// A simple path through the envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPath {
    pub nodes: Vec<usize>,
    pub links: Vec<usize>,
    /// Sum of envelope (minimum) link latencies.
    pub latency: f64,
}

/// Simple paths from `from` to `to` using at most `radius` links.
///
/// Order: the direct link first, then detours through each outgoing link in
/// declaration order, recursively.
pub fn find_env_paths(
    env: &EnvelopeInfrastructure,
    from: usize,
    to: usize,
    radius: usize,
) -> Vec<EnvPath> {
    fn walk(
        env: &EnvelopeInfrastructure,
        at: usize,
        to: usize,
        radius: usize,
        nodes: &mut Vec<usize>,
        links: &mut Vec<usize>,
        latency: f64,
        out: &mut Vec<EnvPath>,
    ) {
        if radius == 0 {
            return;
        }
        if let Some(l) = env.link_index(at, to) {
            let mut n = nodes.clone();
            n.push(to);
            let mut ls = links.clone();
            ls.push(l);
            out.push(EnvPath {
                nodes: n,
                links: ls,
                latency: latency + env.links[l].latency,
            });
        }
        for &l in env.out_links(at) {
            let next = env.links[l].dst;
            if next == to || nodes.contains(&next) {
                continue;
            }
            nodes.push(next);
            links.push(l);
            walk(env, next, to, radius - 1, nodes, links, latency + env.links[l].latency, out);
            nodes.pop();
            links.pop();
        }
    }

    let mut out = Vec::new();
    if from == to {
        return out;
    }
    walk(env, from, to, radius, &mut vec![from], &mut Vec::new(), 0.0, &mut out);
    out
}

/// Id-based wrapper over [`find_env_paths`]: `(node path, optimistic latency)`.
pub fn find_paths(
    n1: &NodeId,
    n2: &NodeId,
    radius: usize,
    env: &EnvelopeInfrastructure,
) -> Vec<(Vec<NodeId>, f64)> {
    let (Some(a), Some(b)) = (env.node_index(n1.as_str()), env.node_index(n2.as_str())) else {
        return Vec::new();
    };
    find_env_paths(env, a, b, radius)
        .into_iter()
        .map(|p| {
            let ids = p.nodes.iter().map(|&i| env.nodes[i].id.clone()).collect();
            (ids, p.latency)
        })
        .collect()
}

/// Sum of processing times over every service of the path plus the
/// service-to-service latencies between consecutive members.
pub fn chain_latency(
    lc: &LatencyConstraint,
    s2s: &HashMap<(ServiceId, ServiceId), f64>,
    chain: &ChainSpec,
) -> Result<f64, SearchError> {
    let mut total = 0.0;
    for (i, s) in lc.path.iter().enumerate() {
        let sf = chain
            .service(s.as_str())
            .ok_or_else(|| SearchError::UnplacedExternal(s.clone()))?;
        total += sf.tproc;
        if let Some(next) = lc.path.get(i + 1) {
            let lat = s2s
                .get(&(s.clone(), next.clone()))
                .ok_or_else(|| SearchError::MissingLatency(s.clone(), next.clone()))?;
            total += lat;
        }
    }
    Ok(total)
}

/// True iff every constraint's chain latency is within its bound. Missing
/// latencies count as violations.
pub fn check_latency_constraints(
    constraints: &[LatencyConstraint],
    s2s: &HashMap<(ServiceId, ServiceId), f64>,
    chain: &ChainSpec,
) -> bool {
    constraints.iter().all(|lc| match chain_latency(lc, s2s, chain) {
        Ok(lat) => fits(lat, lc.max_latency),
        Err(_) => false,
    })
}

/// Hook deciding whether a partial service placement is worth extending.
pub trait PlacementPruner: Sync {
    /// `prefix[i]` is the envelope node of chain service `i`; `state` already
    /// includes the hardware of every service in the prefix.
    fn keep(&self, problem: &SearchProblem<'_>, prefix: &[usize], state: &AllocationState) -> bool;
}

/// Hook deciding whether a candidate path for a flow is worth trying.
pub trait PathPruner: Sync {
    /// Called before `bandwidth` is allocated on `links`.
    fn keep(&self, links: &[usize], bandwidth: f64, state: &AllocationState) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// Index into the chain's services.
    Service(usize),
    /// Envelope node of an already deployed service.
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct FlowPlan {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub bandwidth: f64,
}

#[derive(Debug, Clone)]
pub struct LatencyPlan {
    pub processing: f64,
    /// Flow indices of consecutive pairs.
    pub flows: Vec<usize>,
    pub bound: f64,
}

/// A chain compiled against one envelope and one query.
pub struct SearchProblem<'a> {
    pub chain: &'a ChainSpec,
    pub env: &'a EnvelopeInfrastructure,
    pub radius: usize,
    /// Per chain service, the envelope nodes that statically admit it.
    pub candidates: Vec<Vec<usize>>,
    pub flows: Vec<FlowPlan>,
    pub latencies: Vec<LatencyPlan>,
    same_as: Vec<Vec<usize>>,
    differ_from: Vec<Vec<usize>>,
}

impl<'a> SearchProblem<'a> {
    pub fn new(
        chain: &'a ChainSpec,
        env: &'a EnvelopeInfrastructure,
        query: &QueryConstraints,
        pre: &PreAllocation,
        radius: usize,
    ) -> Result<Self, SearchError> {
        query.validate(chain, env)?;
        let index_of = |id: &ServiceId| chain.services.iter().position(|s| s.id == *id);

        let mut candidates = Vec::with_capacity(chain.services.len());
        for sf in &chain.services {
            let pin = query.pins.get(&sf.id).and_then(|n| env.node_index(n.as_str()));
            let nodes = env
                .nodes
                .iter()
                .enumerate()
                .filter(|(i, n)| {
                    pin.is_none_or(|p| p == *i)
                        && fits(sf.hw_reqs, n.hw)
                        && sf.iot_reqs.iter().all(|t| n.iot.contains(t))
                        && eval_policy(&sf.sec_policy, &n.sec)
                })
                .map(|(i, _)| i)
                .collect();
            candidates.push(nodes);
        }

        let endpoint = |s: &ServiceId| -> Result<Endpoint, SearchError> {
            if let Some(i) = index_of(s) {
                return Ok(Endpoint::Service(i));
            }
            pre.node_of(s.as_str())
                .and_then(|n| env.node_index(n.as_str()))
                .map(Endpoint::Fixed)
                .ok_or_else(|| SearchError::UnplacedExternal(s.clone()))
        };
        let flows = chain
            .flows
            .iter()
            .map(|f| {
                Ok(FlowPlan {
                    src: endpoint(&f.src)?,
                    dst: endpoint(&f.dst)?,
                    bandwidth: f.bandwidth,
                })
            })
            .collect::<Result<Vec<_>, SearchError>>()?;

        let mut latencies = Vec::new();
        for lc in &chain.latency_constraints {
            let mut processing = 0.0;
            for s in &lc.path {
                processing += chain
                    .service(s.as_str())
                    .ok_or_else(|| SearchError::UnplacedExternal(s.clone()))?
                    .tproc;
            }
            let flows = lc
                .path
                .windows(2)
                .map(|w| {
                    chain
                        .flows
                        .iter()
                        .position(|f| f.src == w[0] && f.dst == w[1])
                        .ok_or_else(|| SearchError::MissingLatency(w[0].clone(), w[1].clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            latencies.push(LatencyPlan {
                processing,
                flows,
                bound: lc.max_latency,
            });
        }

        let n = chain.services.len();
        let mut same_as = vec![Vec::new(); n];
        let mut differ_from = vec![Vec::new(); n];
        for group in &query.same_node {
            let idx: Vec<usize> = group.iter().filter_map(index_of).collect();
            for &i in &idx {
                for &j in &idx {
                    if j < i && !same_as[i].contains(&j) {
                        same_as[i].push(j);
                    }
                }
            }
        }
        for (a, b) in &query.different_node {
            if let (Some(i), Some(j)) = (index_of(a), index_of(b)) {
                let (lo, hi) = (i.min(j), i.max(j));
                differ_from[hi].push(lo);
            }
        }

        Ok(SearchProblem {
            chain,
            env,
            radius,
            candidates,
            flows,
            latencies,
            same_as,
            differ_from,
        })
    }

    fn node_of(&self, ep: Endpoint, placement: &[usize]) -> usize {
        match ep {
            Endpoint::Service(i) => placement[i],
            Endpoint::Fixed(n) => n,
        }
    }

    /// Enumerates placements in chain order, candidates in declaration order.
    /// `first` optionally restricts the first service's candidates (used to
    /// split the tree across workers).
    pub fn for_each_placement(
        &self,
        state: &mut AllocationState,
        first: Option<&[usize]>,
        pruner: Option<&dyn PlacementPruner>,
        sink: &mut dyn FnMut(&[usize], &mut AllocationState) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let mut prefix = Vec::with_capacity(self.chain.services.len());
        self.place(0, &mut prefix, state, first, pruner, sink)
    }

    fn place(
        &self,
        depth: usize,
        prefix: &mut Vec<usize>,
        state: &mut AllocationState,
        first: Option<&[usize]>,
        pruner: Option<&dyn PlacementPruner>,
        sink: &mut dyn FnMut(&[usize], &mut AllocationState) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if depth == self.chain.services.len() {
            return sink(prefix, state);
        }
        let hw = self.chain.services[depth].hw_reqs;
        let nodes = match (depth, first) {
            (0, Some(f)) => f,
            _ => &self.candidates[depth][..],
        };
        for &n in nodes {
            if self.same_as[depth].iter().any(|&j| prefix[j] != n)
                || self.differ_from[depth].iter().any(|&j| prefix[j] == n)
            {
                continue;
            }
            if !fits(state.hw[n] + hw, self.env.nodes[n].hw) {
                continue;
            }
            state.hw[n] += hw;
            prefix.push(n);
            let keep = pruner.is_none_or(|p| p.keep(self, prefix, state));
            let flow = if keep {
                self.place(depth + 1, prefix, state, first, pruner, sink)
            } else {
                ControlFlow::Continue(())
            };
            prefix.pop();
            state.hw[n] -= hw;
            flow?;
        }
        ControlFlow::Continue(())
    }

    /// Enumerates routings of every flow for a fixed placement. The sink gets
    /// the chosen path per flow (`None` when colocated) and the optimistic
    /// latency per flow; only routings passing every latency bound reach it.
    pub fn for_each_routing(
        &self,
        placement: &[usize],
        state: &mut AllocationState,
        paths: &mut PathCache,
        pruner: Option<&dyn PathPruner>,
        sink: &mut dyn FnMut(&[Option<&EnvPath>], &[f64], &AllocationState) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        // Resolve the path lists up front so the recursion can borrow them.
        let options: Vec<Option<&[EnvPath]>> = {
            for f in &self.flows {
                let (a, b) = (self.node_of(f.src, placement), self.node_of(f.dst, placement));
                if a != b {
                    paths.ensure(self.env, a, b, self.radius);
                }
            }
            self.flows
                .iter()
                .map(|f| {
                    let (a, b) = (self.node_of(f.src, placement), self.node_of(f.dst, placement));
                    (a != b).then(|| paths.get(a, b))
                })
                .collect()
        };
        let mut chosen: Vec<Option<&EnvPath>> = Vec::with_capacity(self.flows.len());
        let mut lats = Vec::with_capacity(self.flows.len());
        self.route(0, &options, state, pruner, &mut chosen, &mut lats, sink)
    }

    #[allow(clippy::too_many_arguments)]
    fn route<'p>(
        &self,
        i: usize,
        options: &[Option<&'p [EnvPath]>],
        state: &mut AllocationState,
        pruner: Option<&dyn PathPruner>,
        chosen: &mut Vec<Option<&'p EnvPath>>,
        lats: &mut Vec<f64>,
        sink: &mut dyn FnMut(&[Option<&EnvPath>], &[f64], &AllocationState) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if i == self.flows.len() {
            let ok = self.latencies.iter().all(|lp| {
                let total = lp.processing + lp.flows.iter().map(|&f| lats[f]).sum::<f64>();
                fits(total, lp.bound)
            });
            return if ok { sink(chosen, lats, state) } else { ControlFlow::Continue(()) };
        }
        let Some(candidates) = options[i] else {
            chosen.push(None);
            lats.push(0.0);
            let flow = self.route(i + 1, options, state, pruner, chosen, lats, sink);
            chosen.pop();
            lats.pop();
            return flow;
        };
        let flow = &self.chain.flows[i];
        for p in candidates {
            if let Some(pr) = pruner {
                if !pr.keep(&p.links, flow.bandwidth, state) {
                    continue;
                }
            }
            if state.try_allocate(self.env, &p.links, flow).is_err() {
                continue;
            }
            chosen.push(Some(p));
            lats.push(p.latency);
            let cf = self.route(i + 1, options, state, pruner, chosen, lats, sink);
            chosen.pop();
            lats.pop();
            state.release(&p.links, flow);
            cf?;
        }
        ControlFlow::Continue(())
    }

    pub fn assignment(&self, placement: &[usize]) -> PlacementAssignment {
        PlacementAssignment(
            self.chain
                .services
                .iter()
                .zip(placement)
                .map(|(s, &n)| (s.id.clone(), self.env.nodes[n].id.clone()))
                .collect(),
        )
    }
}

/// Memoized envelope paths per ordered node pair.
#[derive(Debug, Default)]
pub struct PathCache {
    radius: usize,
    paths: HashMap<(usize, usize), Vec<EnvPath>>,
}

impl PathCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, env: &EnvelopeInfrastructure, a: usize, b: usize, radius: usize) {
        if self.radius != radius {
            self.paths.clear();
            self.radius = radius;
        }
        self.paths
            .entry((a, b))
            .or_insert_with(|| find_env_paths(env, a, b, radius));
    }

    fn get(&self, a: usize, b: usize) -> &[EnvPath] {
        &self.paths[&(a, b)]
    }
}

/// Collects every envelope-feasible service placement.
pub fn enumerate_service_placements(
    chain: &ChainSpec,
    env: &EnvelopeInfrastructure,
    query: &QueryConstraints,
    pre: &PreAllocation,
    pruner: Option<&dyn PlacementPruner>,
) -> Result<Vec<(PlacementAssignment, AllocationState)>, SearchError> {
    let problem = SearchProblem::new(chain, env, query, pre, DEFAULT_RADIUS)?;
    let mut state = AllocationState::seeded(env, pre);
    let mut out = Vec::new();
    let _ = problem.for_each_placement(&mut state, None, pruner, &mut |p, st| {
        out.push((problem.assignment(p), st.clone()));
        ControlFlow::Continue(())
    });
    Ok(out)
}

/// One routing of a placement: node path per flow (empty when colocated) and
/// the optimistic latency of each flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRouting {
    pub paths: Vec<Vec<NodeId>>,
    pub latencies: HashMap<(ServiceId, ServiceId), f64>,
    pub state: AllocationState,
}

/// Collects every envelope-feasible routing of `placement`.
pub fn enumerate_flow_routings(
    placement: &PlacementAssignment,
    chain: &ChainSpec,
    env: &EnvelopeInfrastructure,
    pre: &PreAllocation,
    radius: usize,
    state: &AllocationState,
    pruner: Option<&dyn PathPruner>,
) -> Result<Vec<FlowRouting>, SearchError> {
    let problem = SearchProblem::new(chain, env, &QueryConstraints::default(), pre, radius)?;
    let mut nodes = Vec::with_capacity(chain.services.len());
    for s in &chain.services {
        let n = placement
            .node_of(s.id.as_str())
            .and_then(|n| env.node_index(n.as_str()))
            .ok_or_else(|| SearchError::UnknownService(s.id.clone()))?;
        nodes.push(n);
    }
    let mut state = state.clone();
    let mut cache = PathCache::new();
    let mut out = Vec::new();
    let _ = problem.for_each_routing(&nodes, &mut state, &mut cache, pruner, &mut |chosen, lats, st| {
        let paths = chosen
            .iter()
            .map(|p| {
                p.map(|p| p.nodes.iter().map(|&i| env.nodes[i].id.clone()).collect())
                    .unwrap_or_default()
            })
            .collect();
        let latencies = chain.flows.iter().map(|f| f.pair()).zip(lats.iter().copied()).collect();
        out.push(FlowRouting {
            paths,
            latencies,
            state: st.clone(),
        });
        ControlFlow::Continue(())
    });
    Ok(out)
}
