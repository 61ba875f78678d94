//! Parse, search, infer and rank; plus output formats and deployment files.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    envelope, validate_chain, validate_infrastructure, Answer, ChainId, ChainSpec, FlowPath,
    Infrastructure, ModelError, NodeId, PlacementAssignment, PreAllocation, RouteAllocation,
    RouteEntry, ServiceId,
};
use crate::parser::{parse_chain_file_named, parse_infrastructure_file_named, ParseError};
use crate::probability::{
    constraint_set_probability, constraints_of_indexed, CandidateRef, HardwarePruner,
    InferenceError, QosMode, QosPruner, DEFAULT_COMPONENT_CAP,
};
use crate::search::{
    AllocationState, PathCache, PathPruner, PlacementPruner, QueryConstraints, SearchError,
    SearchProblem, DEFAULT_RADIUS,
};

/// Version written into and expected from deployment files.
pub const DEPLOYMENT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("{0}")]
    Request(String),
    #[error("deployment: {0}")]
    Deployment(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl SolveError {
    /// Process exit code: 3 for resource caps, 2 for every input problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            SolveError::Inference(
                InferenceError::ComponentTooLarge { .. } | InferenceError::TooManyWorlds { .. },
            ) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Exhaustive,
    Heuristic { thr_hw: f64, thr_qos: f64 },
}

/// Infrastructure simplifications applied before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collapse {
    /// Most probable scenario of each variable, with probability 1.
    Modal,
    /// Most probable scenario of each variable, original probability kept.
    Truncate,
}

#[derive(Debug, Clone)]
pub struct SolveRequest {
    /// Required when more than one chain is loaded.
    pub chain_id: Option<ChainId>,
    pub mode: Mode,
    pub radius: usize,
    pub query: QueryConstraints,
    pub pre: PreAllocation,
    pub top_k: Option<usize>,
    pub qos_mode: QosMode,
    pub collapse: Option<Collapse>,
    pub workers: usize,
    pub component_cap: u64,
    /// Check every emitted answer with [`audit_answer`]; on by default in
    /// debug builds. Turn it off when timing.
    pub audit: bool,
}

impl Default for SolveRequest {
    fn default() -> Self {
        SolveRequest {
            chain_id: None,
            mode: Mode::Exhaustive,
            radius: DEFAULT_RADIUS,
            query: QueryConstraints::default(),
            pre: PreAllocation::default(),
            top_k: None,
            qos_mode: QosMode::Path,
            collapse: None,
            workers: 1,
            component_cap: DEFAULT_COMPONENT_CAP,
            audit: cfg!(debug_assertions),
        }
    }
}

impl SolveRequest {
    fn check(&self) -> Result<(), SolveError> {
        if let Mode::Heuristic { thr_hw, thr_qos } = self.mode {
            for (name, t) in [("hardware", thr_hw), ("QoS", thr_qos)] {
                if !(0.0..=1.0).contains(&t) {
                    return Err(SolveError::Request(format!(
                        "{name} threshold {t} is outside [0, 1]"
                    )));
                }
            }
        }
        if self.top_k == Some(0) {
            return Err(SolveError::Request("top-k must be positive".into()));
        }
        if self.radius == 0 {
            return Err(SolveError::Request("radius must be positive".into()));
        }
        Ok(())
    }
}

/// Parses and validates chain files and one infrastructure file.
pub fn load_problem(
    chain_files: &[(String, String)],
    infra_file: (&str, &str),
) -> Result<(Vec<ChainSpec>, Infrastructure), SolveError> {
    let mut chains: Vec<ChainSpec> = Vec::new();
    for (name, text) in chain_files {
        for c in parse_chain_file_named(name, text)? {
            if chains.iter().any(|o| o.id == c.id) {
                return Err(SolveError::Request(format!("chain {} declared in two files", c.id)));
            }
            chains.push(validate_chain(c)?);
        }
    }
    let infra = parse_infrastructure_file_named(infra_file.0, infra_file.1)?;
    Ok((chains, validate_infrastructure(infra)?))
}

/// Keeps the most probable scenario of every node and link (first declared on
/// ties). The null choice is never selected.
pub fn collapse(infra: &Infrastructure, how: Collapse) -> Infrastructure {
    fn pick<T: Clone>(scenarios: &[(f64, T)], how: Collapse) -> Vec<(f64, T)> {
        let mut best = &scenarios[0];
        for s in &scenarios[1..] {
            if s.0 > best.0 {
                best = s;
            }
        }
        let p = match how {
            Collapse::Modal => 1.0,
            Collapse::Truncate => best.0,
        };
        vec![(p, best.1.clone())]
    }
    let mut out = infra.clone();
    for n in out.nodes.values_mut() {
        n.scenarios = pick(&n.scenarios, how);
    }
    for l in out.links.values_mut() {
        l.scenarios = pick(&l.scenarios, how);
    }
    out
}

fn select_chain<'c>(chains: &'c [ChainSpec], id: Option<&ChainId>) -> Result<&'c ChainSpec, SolveError> {
    match id {
        Some(id) => chains
            .iter()
            .find(|c| c.id == *id)
            .ok_or_else(|| SolveError::Request(format!("no chain {id}"))),
        None => match chains {
            [c] => Ok(c),
            [] => Err(SolveError::Request("no chain loaded".into())),
            _ => Err(SolveError::Request(format!(
                "{} chains loaded; choose one with a chain id",
                chains.len()
            ))),
        },
    }
}

fn check_preallocation(pre: &PreAllocation, infra: &Infrastructure) -> Result<(), SolveError> {
    for (n, hw) in &pre.hw_used {
        if !infra.nodes.contains_key(n) {
            return Err(SolveError::Deployment(format!("unknown node {n}")));
        }
        if !(hw.is_finite() && *hw >= 0.0) {
            return Err(SolveError::Deployment(format!("bad hardware usage on {n}")));
        }
    }
    for ((a, b), bw) in &pre.bw_used {
        if infra.link(a, b).is_none() {
            return Err(SolveError::Deployment(format!("unknown link {a}->{b}")));
        }
        if !(bw.is_finite() && *bw >= 0.0) {
            return Err(SolveError::Deployment(format!("bad bandwidth usage on {a}->{b}")));
        }
    }
    for (s, n) in &pre.placed {
        if !infra.nodes.contains_key(n) {
            return Err(SolveError::Deployment(format!("service {s} placed on unknown node {n}")));
        }
    }
    Ok(())
}

fn build_answer(
    problem: &SearchProblem<'_>,
    placement: &[usize],
    paths: &[Option<&crate::search::EnvPath>],
    probability: f64,
) -> Answer {
    let env = problem.env;
    let chain = problem.chain;
    let mut routes: Vec<(usize, RouteEntry)> = Vec::new();
    let mut flow_paths = Vec::with_capacity(chain.flows.len());
    for (f, p) in chain.flows.iter().zip(paths) {
        let nodes = match p {
            Some(p) => p.nodes.iter().map(|&n| env.nodes[n].id.clone()).collect(),
            None => Vec::new(),
        };
        flow_paths.push(FlowPath {
            src: f.src.clone(),
            dst: f.dst.clone(),
            path: nodes,
        });
        for &l in p.map_or(&[][..], |p| &p.links[..]) {
            let entry = match routes.iter_mut().find(|(k, _)| *k == l) {
                Some((_, e)) => e,
                None => {
                    let link = &env.links[l];
                    routes.push((
                        l,
                        RouteEntry {
                            src: env.nodes[link.src].id.clone(),
                            dst: env.nodes[link.dst].id.clone(),
                            used_bw: 0.0,
                            flows: Vec::new(),
                        },
                    ));
                    &mut routes.last_mut().expect("just pushed").1
                }
            };
            entry.used_bw += f.bandwidth;
            entry.flows.push(f.pair());
        }
    }
    Answer {
        chain: chain.id.clone(),
        placement: problem.assignment(placement),
        routes: RouteAllocation(routes.into_iter().map(|(_, e)| e).collect()),
        flow_paths,
        probability,
    }
}

struct Worker<'a> {
    problem: &'a SearchProblem<'a>,
    infra: &'a Infrastructure,
    pre: &'a PreAllocation,
    hw_pruner: Option<HardwarePruner<'a>>,
    qos_pruner: Option<QosPruner<'a>>,
    cap: u64,
}

impl Worker<'_> {
    fn run(&self, first: Option<&[usize]>) -> Result<Vec<Answer>, SolveError> {
        let problem = self.problem;
        let mut state = AllocationState::seeded(problem.env, self.pre);
        let mut cache = PathCache::new();
        let mut out = Vec::new();
        let mut failure = None;
        let placement_pruner = self.hw_pruner.as_ref().map(|p| p as &dyn PlacementPruner);
        let path_pruner = self.qos_pruner.as_ref().map(|p| p as &dyn PathPruner);
        let _ = problem.for_each_placement(&mut state, first, placement_pruner, &mut |placement, st| {
            problem.for_each_routing(placement, st, &mut cache, path_pruner, &mut |paths, _, _| {
                let links: Vec<Option<&[usize]>> = paths.iter().map(|p| p.map(|p| &p.links[..])).collect();
                let cand = CandidateRef {
                    placement,
                    flow_links: &links,
                };
                let cs = constraints_of_indexed(&cand, problem.chain, self.infra, self.pre);
                match constraint_set_probability(&cs, self.infra, self.cap) {
                    Ok(p) if p > 0.0 => {
                        out.push(build_answer(problem, placement, paths, p));
                        ControlFlow::Continue(())
                    }
                    Ok(_) => ControlFlow::Continue(()),
                    Err(e) => {
                        failure = Some(e);
                        ControlFlow::Break(())
                    }
                }
            })
        });
        match failure {
            Some(e) => Err(e.into()),
            None => Ok(out),
        }
    }
}

/// The part of `chain` that can be placed on top of `pre`: flows and latency
/// constraints touching an external service that is not deployed yet are
/// left to whichever chain is placed after it.
pub fn attachable(chain: &ChainSpec, pre: &PreAllocation) -> ChainSpec {
    let missing = |s: &ServiceId| chain.is_external(s.as_str()) && pre.node_of(s.as_str()).is_none();
    let mut out = chain.clone();
    out.flows.retain(|f| !missing(&f.src) && !missing(&f.dst));
    out.latency_constraints.retain(|lc| !lc.path.iter().any(missing));
    out.external_services.retain(|sf| !missing(&sf.id));
    out
}

/// Every answer with positive probability (exhaustive mode) or the subset
/// surviving the pruning thresholds (heuristic mode), ranked.
pub fn solve(req: &SolveRequest, chains: &[ChainSpec], infra: &Infrastructure) -> Result<Vec<Answer>, SolveError> {
    req.check()?;
    let chain = select_chain(chains, req.chain_id.as_ref())?;
    let chain = attachable(&validate_chain(chain.clone())?, &req.pre);
    let mut infra = validate_infrastructure(infra.clone())?;
    if let Some(how) = req.collapse {
        infra = collapse(&infra, how);
    }
    check_preallocation(&req.pre, &infra)?;

    let env = envelope(&infra);
    let problem = SearchProblem::new(&chain, &env, &req.query, &req.pre, req.radius)?;
    let (hw_pruner, qos_pruner) = match req.mode {
        Mode::Exhaustive => (None, None),
        Mode::Heuristic { thr_hw, thr_qos } => (
            Some(HardwarePruner {
                infra: &infra,
                threshold: thr_hw,
            }),
            Some(QosPruner {
                infra: &infra,
                threshold: thr_qos,
                mode: req.qos_mode,
            }),
        ),
    };
    let worker = Worker {
        problem: &problem,
        infra: &infra,
        pre: &req.pre,
        hw_pruner,
        qos_pruner,
        cap: req.component_cap,
    };

    let workers = req.workers.max(1);
    let mut answers = if workers == 1 || problem.candidates.is_empty() {
        worker.run(None)?
    } else {
        // Deal the first service's candidates round-robin.
        let mut shares: Vec<Vec<usize>> = vec![Vec::new(); workers];
        for (i, &n) in problem.candidates[0].iter().enumerate() {
            shares[i % workers].push(n);
        }
        shares.retain(|s| !s.is_empty());
        let results: Vec<_> = thread::scope(|scope| {
            let handles: Vec<_> = shares
                .iter()
                .map(|share| {
                    let worker = &worker;
                    scope.spawn(move || worker.run(Some(share)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver worker panicked"))
                .collect()
        });
        let mut all = Vec::new();
        for r in results {
            all.extend(r?);
        }
        all
    };

    if req.audit {
        for a in &answers {
            if let Err(e) = audit_answer(a, &chain, &infra, &req.pre, req.radius) {
                panic!("solver emitted an inconsistent answer: {e}");
            }
        }
    }
    rank(&mut answers);
    if let Some(k) = req.top_k {
        answers.truncate(k);
    }
    Ok(answers)
}

/// Checks an answer's internal consistency against its chain and
/// infrastructure: one node per service, one path per flow joining its
/// endpoints within `radius` links without revisits, route entries that add
/// up and fit the optimistic capacity, and a probability in (0, 1].
pub fn audit_answer(
    a: &Answer,
    chain: &ChainSpec,
    infra: &Infrastructure,
    pre: &PreAllocation,
    radius: usize,
) -> Result<(), String> {
    if !(a.probability > 0.0 && a.probability <= 1.0) {
        return Err(format!("probability {}", a.probability));
    }
    if a.chain != chain.id {
        return Err(format!("chain {} instead of {}", a.chain, chain.id));
    }
    if a.placement.0.len() != chain.services.len() {
        return Err("placement size differs from the chain".into());
    }
    for (sf, (s, n)) in chain.services.iter().zip(&a.placement.0) {
        if sf.id != *s || !infra.nodes.contains_key(n) {
            return Err(format!("bad placement pair ({s}, {n})"));
        }
    }
    if a.flow_paths.len() != chain.flows.len() {
        return Err("one path per flow expected".into());
    }
    let env = envelope(infra);
    let mut carried: Vec<(&NodeId, &NodeId, f64, Vec<(ServiceId, ServiceId)>)> = Vec::new();
    for (f, fp) in chain.flows.iter().zip(&a.flow_paths) {
        if fp.src != f.src || fp.dst != f.dst {
            return Err(format!("path listed for ({}, {}) out of order", fp.src, fp.dst));
        }
        let at = |s: &ServiceId| a.placement.node_of(s.as_str()).or_else(|| pre.node_of(s.as_str()));
        let (Some(x), Some(y)) = (at(&f.src), at(&f.dst)) else {
            return Err(format!("flow ({}, {}) has an unplaced end", f.src, f.dst));
        };
        if x == y {
            if !fp.path.is_empty() {
                return Err(format!("colocated flow ({}, {}) has a path", f.src, f.dst));
            }
            continue;
        }
        if fp.path.first() != Some(x) || fp.path.last() != Some(y) {
            return Err(format!("path of ({}, {}) does not join {x} and {y}", f.src, f.dst));
        }
        if fp.path.len() - 1 > radius {
            return Err(format!("path of ({}, {}) exceeds the radius", f.src, f.dst));
        }
        if fp.path.iter().collect::<HashSet<_>>().len() != fp.path.len() {
            return Err(format!("path of ({}, {}) revisits a node", f.src, f.dst));
        }
        for w in fp.path.windows(2) {
            if infra.link(&w[0], &w[1]).is_none() {
                return Err(format!("no link {}->{}", w[0], w[1]));
            }
            match carried.iter_mut().find(|c| *c.0 == w[0] && *c.1 == w[1]) {
                Some(c) => {
                    c.2 += f.bandwidth;
                    c.3.push(f.pair());
                }
                None => carried.push((&w[0], &w[1], f.bandwidth, vec![f.pair()])),
            }
        }
    }
    if carried.len() != a.routes.0.len() {
        return Err("route entries do not match the flow paths".into());
    }
    for r in &a.routes.0 {
        let Some(c) = carried.iter().find(|c| *c.0 == r.src && *c.1 == r.dst) else {
            return Err(format!("route entry {}->{} carries no flow", r.src, r.dst));
        };
        if (c.2 - r.used_bw).abs() > 1e-9 || c.3 != r.flows {
            return Err(format!("route entry {}->{} does not add up", r.src, r.dst));
        }
        let cap = env.link(r.src.as_str(), r.dst.as_str()).map_or(0.0, |l| l.bandwidth);
        if !crate::model::fits(r.used_bw + pre.bw(&r.src, &r.dst), cap) {
            return Err(format!("route entry {}->{} exceeds capacity", r.src, r.dst));
        }
    }
    Ok(())
}

/// Stable textual identity of an answer's placement and routing.
pub fn canonical_key(answer: &Answer) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}|", answer.chain);
    for (svc, node) in &answer.placement.0 {
        let _ = write!(s, "{svc}={node};");
    }
    s.push('|');
    for fp in &answer.flow_paths {
        let _ = write!(s, "{}>{}:", fp.src, fp.dst);
        for (i, n) in fp.path.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(n.as_str());
        }
        s.push(';');
    }
    s
}

/// Probability descending, then canonical key ascending.
pub fn rank(answers: &mut [Answer]) {
    answers.sort_by_cached_key(|a| (std::cmp::Reverse(OrdF64(a.probability)), canonical_key(a)));
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Best answer per distinct placement, ranked like answers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSummary {
    pub placement: PlacementAssignment,
    pub probability: f64,
    pub routings: usize,
}

pub fn group_by_placement(answers: &[Answer]) -> Vec<PlacementSummary> {
    let mut out: Vec<PlacementSummary> = Vec::new();
    for a in answers {
        match out.iter_mut().find(|s| s.placement == a.placement) {
            Some(s) => {
                s.probability = s.probability.max(a.probability);
                s.routings += 1;
            }
            None => out.push(PlacementSummary {
                placement: a.placement.clone(),
                probability: a.probability,
                routings: 1,
            }),
        }
    }
    out.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then_with(|| a.placement.0.cmp(&b.placement.0))
    });
    out
}

pub fn distinct_placements(answers: &[Answer]) -> usize {
    answers
        .iter()
        .map(|a| &a.placement.0)
        .collect::<HashSet<_>>()
        .len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

#[derive(Serialize, Deserialize)]
struct PlacementJson {
    service: ServiceId,
    node: NodeId,
}

#[derive(Serialize)]
struct RouteJson<'a> {
    src: &'a NodeId,
    dst: &'a NodeId,
    used_bw: f64,
    flows: &'a [(ServiceId, ServiceId)],
    path: [&'a NodeId; 2],
}

#[derive(Serialize)]
struct AnswerJson<'a> {
    chain: &'a ChainId,
    probability: f64,
    placement: Vec<PlacementJson>,
    routes: Vec<RouteJson<'a>>,
}

fn answer_json(a: &Answer) -> AnswerJson<'_> {
    AnswerJson {
        chain: &a.chain,
        probability: a.probability,
        placement: a
            .placement
            .0
            .iter()
            .map(|(s, n)| PlacementJson {
                service: s.clone(),
                node: n.clone(),
            })
            .collect(),
        routes: a
            .routes
            .0
            .iter()
            .map(|r| RouteJson {
                src: &r.src,
                dst: &r.dst,
                used_bw: r.used_bw,
                flows: &r.flows,
                path: [&r.src, &r.dst],
            })
            .collect(),
    }
}

/// Formats a probability with six significant digits.
pub fn sig6(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let magnitude = p.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{p:.decimals$}")
}

pub fn render(answers: &[Answer], format: Format) -> String {
    match format {
        Format::Json => {
            let view: Vec<_> = answers.iter().map(answer_json).collect();
            let mut s = serde_json::to_string_pretty(&view).expect("answers serialize");
            s.push('\n');
            s
        }
        Format::Table => render_table(answers),
    }
}

fn render_table(answers: &[Answer]) -> String {
    if answers.is_empty() {
        return "no eligible placements\n".into();
    }
    let rows: Vec<[String; 4]> = answers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let placement = a
                .placement
                .0
                .iter()
                .map(|(s, n)| format!("{s}@{n}"))
                .collect::<Vec<_>>()
                .join(" ");
            let routes = a
                .routes
                .0
                .iter()
                .map(|r| format!("{}->{}:{}", r.src, r.dst, r.used_bw))
                .collect::<Vec<_>>()
                .join(" ");
            [(i + 1).to_string(), sig6(a.probability), placement, routes]
        })
        .collect();
    let header = ["rank", "probability", "placement", "routes"];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: [&str; 4]| {
        let text = format!(
            "{:>w0$}  {:>w1$}  {:<w2$}  {}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2]
        );
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(header);
    for r in &rows {
        line([&r[0], &r[1], &r[2], &r[3]]);
    }
    out
}

#[derive(Serialize)]
struct SummaryJson {
    probability: f64,
    routings: usize,
    placement: Vec<PlacementJson>,
}

/// Renders the output of [`group_by_placement`].
pub fn render_groups(groups: &[PlacementSummary], format: Format) -> String {
    match format {
        Format::Json => {
            let view: Vec<_> = groups
                .iter()
                .map(|g| SummaryJson {
                    probability: g.probability,
                    routings: g.routings,
                    placement: g
                        .placement
                        .0
                        .iter()
                        .map(|(s, n)| PlacementJson {
                            service: s.clone(),
                            node: n.clone(),
                        })
                        .collect(),
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&view).expect("summaries serialize");
            s.push('\n');
            s
        }
        Format::Table => {
            if groups.is_empty() {
                return "no eligible placements\n".into();
            }
            let mut out = String::from("rank  probability  routings  placement\n");
            for (i, g) in groups.iter().enumerate() {
                let placement = g
                    .placement
                    .0
                    .iter()
                    .map(|(s, n)| format!("{s}@{n}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                let _ = writeln!(
                    out,
                    "{:>4}  {:>11}  {:>8}  {placement}",
                    i + 1,
                    sig6(g.probability),
                    g.routings
                );
            }
            out
        }
    }
}

/// Resources held by deployed chains, as written to and read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub version: u32,
    pub placements: Vec<DeployedService>,
    pub link_usage: Vec<LinkUsage>,
    pub node_usage: Vec<NodeUsage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployedService {
    pub service: ServiceId,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkUsage {
    pub src: NodeId,
    pub dst: NodeId,
    pub used_bw: f64,
    pub flows: Vec<(ServiceId, ServiceId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeUsage {
    pub node: NodeId,
    pub hw: f64,
}

/// Deployment state after `answer` is added on top of `pre`.
pub fn export_deployment(answer: &Answer, chain: &ChainSpec, pre: &PreAllocation) -> Deployment {
    let mut hw = pre.hw_used.clone();
    for (s, n) in &answer.placement.0 {
        if let Some(sf) = chain.service(s.as_str()) {
            *hw.entry(n.clone()).or_insert(0.0) += sf.hw_reqs;
        }
    }
    let mut links: Vec<LinkUsage> = pre
        .bw_used
        .iter()
        .map(|((a, b), bw)| LinkUsage {
            src: a.clone(),
            dst: b.clone(),
            used_bw: *bw,
            flows: Vec::new(),
        })
        .collect();
    for r in &answer.routes.0 {
        match links.iter_mut().find(|l| l.src == r.src && l.dst == r.dst) {
            Some(l) => {
                l.used_bw += r.used_bw;
                l.flows.extend(r.flows.iter().cloned());
            }
            None => links.push(LinkUsage {
                src: r.src.clone(),
                dst: r.dst.clone(),
                used_bw: r.used_bw,
                flows: r.flows.clone(),
            }),
        }
    }
    Deployment {
        version: DEPLOYMENT_VERSION,
        placements: pre
            .placed
            .iter()
            .chain(&answer.placement.0)
            .map(|(s, n)| DeployedService {
                service: s.clone(),
                node: n.clone(),
            })
            .collect(),
        link_usage: links,
        node_usage: hw
            .into_iter()
            .map(|(node, hw)| NodeUsage { node, hw })
            .collect(),
    }
}

pub fn deployment_to_json(d: &Deployment) -> String {
    let mut s = serde_json::to_string_pretty(d).expect("deployment serializes");
    s.push('\n');
    s
}

pub fn deployment_from_json(text: &str) -> Result<Deployment, SolveError> {
    serde_json::from_str(text).map_err(|e| SolveError::Deployment(e.to_string()))
}

/// Turns a deployment into resources to charge before the next solve,
/// checking it against the current infrastructure.
pub fn import_preallocation(d: &Deployment, infra: &Infrastructure) -> Result<PreAllocation, SolveError> {
    if d.version != DEPLOYMENT_VERSION {
        return Err(SolveError::Deployment(format!(
            "unsupported version {} (expected {DEPLOYMENT_VERSION})",
            d.version
        )));
    }
    let mut pre = PreAllocation::default();
    for u in &d.node_usage {
        *pre.hw_used.entry(u.node.clone()).or_insert(0.0) += u.hw;
    }
    for u in &d.link_usage {
        *pre.bw_used.entry((u.src.clone(), u.dst.clone())).or_insert(0.0) += u.used_bw;
    }
    for p in &d.placements {
        if pre.node_of(p.service.as_str()).is_some() {
            return Err(SolveError::Deployment(format!("service {} placed twice", p.service)));
        }
        pre.placed.push((p.service.clone(), p.node.clone()));
    }
    check_preallocation(&pre, infra)?;
    Ok(pre)
}
