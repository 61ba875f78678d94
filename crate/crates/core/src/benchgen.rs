//! Seeded random instances and exhaustive-versus-heuristic comparisons.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{canonical_key, distinct_placements, solve, Mode, SolveRequest};
use crate::model::{
    validate_chain, validate_infrastructure, ChainSpec, Flow, Infrastructure, LatencyConstraint,
    LinkProfile, LinkScenario, NodeId, NodeProfile, NodeScenario, SecurityPolicy, ServiceFunction,
};

const IOT: &[&str] = &["video1", "alarm1", "temp1"];
const SEC: &[&str] = &[
    "pki",
    "firewall",
    "encrypted_storage",
    "obfuscated_storage",
    "access_control",
    "host_IDS",
    "backup",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowTopology {
    Line,
    Tree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub nodes: usize,
    /// Undirected edges added beyond the spanning tree, as a fraction of the
    /// node count.
    pub density: f64,
    /// Inclusive range of scenarios per node.
    pub node_scenarios: (usize, usize),
    /// Inclusive range of scenarios per link direction.
    pub link_scenarios: (usize, usize),
    /// Chance that a variable leaves some mass to the null choice.
    pub null_chance: f64,
    pub hw: (u32, u32),
    pub bandwidth: (u32, u32),
    pub latency: (u32, u32),
    pub service_hw: (u32, u32),
    pub flow_bandwidth: (u32, u32),
    pub tproc: (u32, u32),
    /// Chance that a service needs one IoT device.
    pub iot_chance: f64,
    pub chain_len: usize,
    pub topology: FlowTopology,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            nodes: 5,
            density: 0.3,
            node_scenarios: (1, 2),
            link_scenarios: (1, 2),
            null_chance: 0.2,
            hw: (2, 16),
            bandwidth: (10, 100),
            latency: (2, 30),
            service_hw: (1, 6),
            flow_bandwidth: (5, 40),
            tproc: (1, 10),
            iot_chance: 0.15,
            chain_len: 3,
            topology: FlowTopology::Line,
            seed: 0,
        }
    }
}

impl GenParams {
    fn check(&self) {
        assert!(self.nodes > 0 && self.chain_len > 0, "counts must be positive");
        assert!(self.node_scenarios.0 >= 1 && self.node_scenarios.0 <= self.node_scenarios.1);
        assert!(self.link_scenarios.0 >= 1 && self.link_scenarios.0 <= self.link_scenarios.1);
        for (lo, hi) in [self.hw, self.bandwidth, self.latency, self.service_hw, self.flow_bandwidth, self.tproc] {
            assert!(lo <= hi, "empty value range");
        }
    }
}

fn between(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> f64 {
    f64::from(rng.gen_range(lo..=hi))
}

/// Splits a total of `units` hundredths into `k` positive parts.
fn probabilities(rng: &mut ChaCha8Rng, k: usize, null_chance: f64) -> Vec<f64> {
    let units: u32 = if rng.gen_bool(null_chance) {
        rng.gen_range(80..100)
    } else {
        100
    };
    let mut cuts: Vec<u32> = (1..units).collect::<Vec<_>>().choose_multiple(rng, k - 1).copied().collect();
    cuts.sort_unstable();
    cuts.push(units);
    let mut prev = 0;
    cuts.into_iter()
        .map(|c| {
            let p = f64::from(c - prev) / 100.0;
            prev = c;
            p
        })
        .collect()
}

fn subset(rng: &mut ChaCha8Rng, from: &BTreeSet<String>, keep: f64) -> BTreeSet<String> {
    from.iter().filter(|_| rng.gen_bool(keep)).cloned().collect()
}

fn node(rng: &mut ChaCha8Rng, p: &GenParams, id: NodeId) -> NodeProfile {
    let iot: BTreeSet<String> = IOT.iter().filter(|_| rng.gen_bool(0.4)).map(|s| s.to_string()).collect();
    let sec: BTreeSet<String> = SEC.iter().filter(|_| rng.gen_bool(0.7)).map(|s| s.to_string()).collect();
    let k = rng.gen_range(p.node_scenarios.0..=p.node_scenarios.1);
    let probs = probabilities(rng, k, p.null_chance);
    let scenarios = probs
        .into_iter()
        .enumerate()
        .map(|(i, prob)| {
            // The first scenario is the full node; later ones are degraded.
            let (iot_caps, sec_caps) = if i == 0 {
                (iot.clone(), sec.clone())
            } else {
                (subset(rng, &iot, 0.7), subset(rng, &sec, 0.7))
            };
            let sc = NodeScenario {
                hw_caps: between(rng, p.hw),
                iot_caps,
                sec_caps,
            };
            (prob, sc)
        })
        .collect();
    NodeProfile { id, scenarios }
}

fn link(rng: &mut ChaCha8Rng, p: &GenParams, src: NodeId, dst: NodeId) -> LinkProfile {
    let k = rng.gen_range(p.link_scenarios.0..=p.link_scenarios.1);
    let probs = probabilities(rng, k, p.null_chance);
    let scenarios = probs
        .into_iter()
        .map(|prob| {
            let sc = LinkScenario {
                latency: between(rng, p.latency),
                bandwidth: between(rng, p.bandwidth),
            };
            (prob, sc)
        })
        .collect();
    LinkProfile { src, dst, scenarios }
}

fn policy(rng: &mut ChaCha8Rng) -> SecurityPolicy {
    let shape = rng.gen_range(0..5);
    let mut pick = || SEC[rng.gen_range(0..SEC.len())];
    match shape {
        0 | 1 => SecurityPolicy::All(vec![]),
        2 => SecurityPolicy::all([pick()]),
        3 => SecurityPolicy::or(SecurityPolicy::atom(pick()), SecurityPolicy::atom(pick())),
        _ => SecurityPolicy::and(
            SecurityPolicy::atom(pick()),
            SecurityPolicy::or(SecurityPolicy::atom(pick()), SecurityPolicy::atom(pick())),
        ),
    }
}

/// A validated random chain and infrastructure; the seed fixes everything.
///
/// Panics on parameters with empty ranges or zero counts.
pub fn generate_instance(p: &GenParams) -> (ChainSpec, Infrastructure) {
    p.check();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let ids: Vec<NodeId> = (0..p.nodes).map(|i| NodeId::new(format!("n{i}"))).collect();
    let mut nodes = IndexMap::new();
    for id in &ids {
        nodes.insert(id.clone(), node(&mut rng, p, id.clone()));
    }

    // Random spanning tree, then extra edges; each direction gets its own profile.
    let mut order: Vec<usize> = (0..p.nodes).collect();
    order.shuffle(&mut rng);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 1..order.len() {
        let j = order[rng.gen_range(0..i)];
        edges.push((j, order[i]));
    }
    let max_edges = p.nodes * (p.nodes - 1) / 2;
    let wanted = (edges.len() + (p.density * p.nodes as f64).round() as usize).min(max_edges);
    while edges.len() < wanted {
        let a = rng.gen_range(0..p.nodes);
        let b = rng.gen_range(0..p.nodes);
        if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            edges.push((a, b));
        }
    }
    let mut links = IndexMap::new();
    for (a, b) in edges {
        for (s, d) in [(a, b), (b, a)] {
            let l = link(&mut rng, p, ids[s].clone(), ids[d].clone());
            links.insert(l.key(), l);
        }
    }

    let services: Vec<ServiceFunction> = (0..p.chain_len)
        .map(|i| {
            let iot_reqs = if rng.gen_bool(p.iot_chance) {
                vec![IOT[rng.gen_range(0..IOT.len())].to_string()]
            } else {
                vec![]
            };
            ServiceFunction {
                id: format!("f{i}").into(),
                tproc: between(&mut rng, p.tproc),
                hw_reqs: between(&mut rng, p.service_hw),
                iot_reqs,
                sec_policy: policy(&mut rng),
            }
        })
        .collect();
    let parent: Vec<usize> = (1..p.chain_len)
        .map(|i| match p.topology {
            FlowTopology::Line => i - 1,
            FlowTopology::Tree => rng.gen_range(0..i),
        })
        .collect();
    let flows: Vec<Flow> = parent
        .iter()
        .enumerate()
        .map(|(k, &from)| Flow {
            src: services[from].id.clone(),
            dst: services[k + 1].id.clone(),
            bandwidth: between(&mut rng, p.flow_bandwidth),
        })
        .collect();

    // One latency bound along the path from the root to the last service.
    let mut latency_constraints = Vec::new();
    if p.chain_len > 1 {
        let mut path = vec![p.chain_len - 1];
        while let Some(&last) = path.last() {
            if last == 0 {
                break;
            }
            path.push(parent[last - 1]);
        }
        path.reverse();
        let processing: f64 = path.iter().map(|&i| services[i].tproc).sum();
        let hops = (path.len() - 1) as f64;
        let budget = hops * between(&mut rng, (p.latency.0 * 2, p.latency.1 * 2));
        latency_constraints.push(LatencyConstraint {
            path: path.iter().map(|&i| services[i].id.clone()).collect(),
            max_latency: processing + budget,
        });
    }

    let chain = ChainSpec {
        id: format!("chain{}", p.seed).into(),
        services,
        flows,
        latency_constraints,
        external_services: vec![],
    };
    let chain = validate_chain(chain).expect("generated chain is valid");
    let infra = validate_infrastructure(Infrastructure { nodes, links }).expect("generated infrastructure is valid");
    (chain, infra)
}

/// One line of a comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub mode: &'static str,
    /// `None` for the exhaustive row.
    pub threshold: Option<f64>,
    pub answers: usize,
    pub distinct_placements: usize,
    /// Median wall time of three solves.
    pub millis: f64,
    /// Heuristic rows only: answers are a subset of the exhaustive ones, with
    /// identical probabilities.
    pub subset_ok: Option<bool>,
    /// Heuristic rows only: answers are a subset of every row with a lower
    /// threshold.
    pub monotone_ok: Option<bool>,
    pub error: Option<String>,
}

/// Solves `chain` exhaustively and at every threshold (applied to both
/// pruners), timing each mode and checking subset and monotonicity.
pub fn run_comparison(
    chain: &ChainSpec,
    infra: &Infrastructure,
    thresholds: &[f64],
    base: &SolveRequest,
) -> Vec<ReportRow> {
    let chains = std::slice::from_ref(chain);
    let run = |mode: Mode| {
        let req = SolveRequest {
            mode,
            workers: 1,
            chain_id: Some(chain.id.clone()),
            audit: false,
            ..base.clone()
        };
        let mut times = Vec::with_capacity(3);
        let mut result = None;
        for _ in 0..3 {
            let start = Instant::now();
            let r = solve(&req, chains, infra);
            times.push(start.elapsed().as_secs_f64() * 1e3);
            result = Some(r);
        }
        times.sort_by(f64::total_cmp);
        (result.expect("ran three times"), times[1])
    };
    let key_map = |answers: &[crate::model::Answer]| -> HashMap<String, f64> {
        answers.iter().map(|a| (canonical_key(a), a.probability)).collect()
    };

    let mut rows = Vec::new();
    let (ex, millis) = run(Mode::Exhaustive);
    let exhaustive = ex.as_ref().ok().map(|a| key_map(a));
    rows.push(row("exhaustive", None, ex, millis));

    let mut heuristic: Vec<(f64, HashMap<String, f64>)> = Vec::new();
    for &t in thresholds {
        let (res, millis) = run(Mode::Heuristic { thr_hw: t, thr_qos: t });
        let keys = res.as_ref().ok().map(|a| key_map(a));
        let mut r = row("heuristic", Some(t), res, millis);
        if let Some(keys) = keys {
            r.subset_ok = exhaustive.as_ref().map(|ex| {
                keys.iter().all(|(k, p)| ex.get(k) == Some(p))
            });
            r.monotone_ok = Some(true);
            heuristic.push((t, keys));
        }
        rows.push(r);
    }
    for (i, (t, keys)) in heuristic.iter().enumerate() {
        let ok = heuristic
            .iter()
            .filter(|(u, _)| u < t)
            .all(|(_, lower)| keys.keys().all(|k| lower.contains_key(k)));
        if let Some(r) = rows
            .iter_mut()
            .filter(|r| r.threshold == Some(*t) && r.error.is_none())
            .nth(heuristic[..i].iter().filter(|(u, _)| u == t).count())
        {
            r.monotone_ok = Some(ok);
        }
    }
    rows
}

fn row(
    mode: &'static str,
    threshold: Option<f64>,
    res: Result<Vec<crate::model::Answer>, crate::engine::SolveError>,
    millis: f64,
) -> ReportRow {
    let (answers, distinct, error) = match &res {
        Ok(a) => (a.len(), distinct_placements(a), None),
        Err(e) => (0, 0, Some(e.to_string())),
    };
    ReportRow {
        mode,
        threshold,
        answers,
        distinct_placements: distinct,
        millis,
        subset_ok: None,
        monotone_ok: None,
        error,
    }
}
