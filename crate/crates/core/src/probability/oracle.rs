//! Reference probability by enumerating every world of the infrastructure.
//!
//! Deliberately naive: it shares nothing with the constraint extraction and
//! factorization above, and re-checks the fixed candidate from scratch in
//! each world.

use std::collections::HashMap;

use super::InferenceError;
use crate::model::{
    fits, Answer, ChainSpec, Infrastructure, LinkScenario, NodeId, NodeScenario, PreAllocation,
};
use crate::policy::eval_policy;

pub const DEFAULT_WORLD_CAP: u128 = 100_000;

struct World<'i> {
    nodes: HashMap<&'i NodeId, &'i NodeScenario>,
    links: HashMap<(&'i NodeId, &'i NodeId), &'i LinkScenario>,
}

fn feasible(answer: &Answer, chain: &ChainSpec, pre: &PreAllocation, world: &World<'_>) -> bool {
    // Hardware, IoT and security, node by node.
    let mut hosted: Vec<(&NodeId, Vec<&crate::model::ServiceFunction>)> = Vec::new();
    for (sid, nid) in &answer.placement.0 {
        let Some(sf) = chain.services.iter().find(|s| s.id == *sid) else {
            return false;
        };
        match hosted.iter_mut().find(|(n, _)| *n == nid) {
            Some((_, v)) => v.push(sf),
            None => hosted.push((nid, vec![sf])),
        }
    }
    for (nid, services) in &hosted {
        let Some(scenario) = world.nodes.get(nid) else {
            return false;
        };
        let mut used = pre.hw(nid);
        for sf in services {
            used += sf.hw_reqs;
            if !sf.iot_reqs.iter().all(|t| scenario.iot_caps.contains(t)) {
                return false;
            }
            if !eval_policy(&sf.sec_policy, &scenario.sec_caps) {
                return false;
            }
        }
        if !fits(used, scenario.hw_caps) {
            return false;
        }
    }

    // Bandwidth, link by link, and the latency of each flow.
    let mut carried: HashMap<(&NodeId, &NodeId), f64> = HashMap::new();
    let mut flow_latency: HashMap<(&str, &str), f64> = HashMap::new();
    for fp in &answer.flow_paths {
        let Some(flow) = chain.flow(fp.src.as_str(), fp.dst.as_str()) else {
            return false;
        };
        let mut lat = 0.0;
        for hop in fp.path.windows(2) {
            let Some(sc) = world.links.get(&(&hop[0], &hop[1])) else {
                return false;
            };
            *carried.entry((&hop[0], &hop[1])).or_insert(0.0) += flow.bandwidth;
            lat += sc.latency;
        }
        flow_latency.insert((fp.src.as_str(), fp.dst.as_str()), lat);
    }
    for ((a, b), bw) in &carried {
        let sc = world.links[&(*a, *b)];
        if !fits(pre.bw(a, b) + bw, sc.bandwidth) {
            return false;
        }
    }

    for lc in &chain.latency_constraints {
        let mut total = 0.0;
        for (i, s) in lc.path.iter().enumerate() {
            let Some(sf) = chain.service(s.as_str()) else {
                return false;
            };
            total += sf.tproc;
            if let Some(next) = lc.path.get(i + 1) {
                match flow_latency.get(&(s.as_str(), next.as_str())) {
                    Some(l) => total += l,
                    None => return false,
                }
            }
        }
        if !fits(total, lc.max_latency) {
            return false;
        }
    }
    true
}

fn check_shape(answer: &Answer, chain: &ChainSpec, infra: &Infrastructure, pre: &PreAllocation) -> Result<(), InferenceError> {
    let bad = |m: String| Err(InferenceError::Malformed(m));
    for sf in &chain.services {
        match answer.placement.node_of(sf.id.as_str()) {
            Some(n) if infra.nodes.contains_key(n) => {}
            Some(n) => return bad(format!("unknown node {n}")),
            None => return bad(format!("service {} unplaced", sf.id)),
        }
    }
    for f in &chain.flows {
        let Some(fp) = answer.flow_paths.iter().find(|p| p.src == f.src && p.dst == f.dst) else {
            return bad(format!("no path for flow ({}, {})", f.src, f.dst));
        };
        let at = |s: &str| answer.placement.node_of(s).or_else(|| pre.node_of(s));
        let (Some(a), Some(b)) = (at(f.src.as_str()), at(f.dst.as_str())) else {
            return bad(format!("flow ({}, {}) has an unplaced endpoint", f.src, f.dst));
        };
        let ok = if a == b {
            fp.path.is_empty()
        } else {
            fp.path.first() == Some(a) && fp.path.last() == Some(b)
        };
        if !ok {
            return bad(format!("path of flow ({}, {}) does not join its endpoints", f.src, f.dst));
        }
    }
    Ok(())
}

/// Sums the probability of every world in which the answer is feasible.
pub fn brute_force_probability(
    answer: &Answer,
    chain: &ChainSpec,
    infra: &Infrastructure,
    pre: &PreAllocation,
) -> Result<f64, InferenceError> {
    let worlds = infra.world_count();
    if worlds > DEFAULT_WORLD_CAP {
        return Err(InferenceError::TooManyWorlds {
            worlds,
            cap: DEFAULT_WORLD_CAP,
        });
    }
    check_shape(answer, chain, infra, pre)?;

    // Every variable as a list of (weight, value or absent).
    let node_opts: Vec<Vec<(f64, Option<&NodeScenario>)>> = infra
        .nodes
        .values()
        .map(|n| {
            let mut v: Vec<_> = n.scenarios.iter().map(|(p, s)| (*p, Some(s))).collect();
            if n.null_mass() > 0.0 {
                v.push((n.null_mass(), None));
            }
            v
        })
        .collect();
    let link_opts: Vec<Vec<(f64, Option<&LinkScenario>)>> = infra
        .links
        .values()
        .map(|l| {
            let mut v: Vec<_> = l.scenarios.iter().map(|(p, s)| (*p, Some(s))).collect();
            if l.null_mass() > 0.0 {
                v.push((l.null_mass(), None));
            }
            v
        })
        .collect();
    let radix: Vec<usize> = node_opts
        .iter()
        .map(Vec::len)
        .chain(link_opts.iter().map(Vec::len))
        .collect();

    let node_ids: Vec<&NodeId> = infra.nodes.keys().collect();
    let link_ids: Vec<(&NodeId, &NodeId)> = infra.links.keys().map(|(a, b)| (a, b)).collect();
    let mut digits = vec![0usize; radix.len()];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        let mut world = World {
            nodes: HashMap::new(),
            links: HashMap::new(),
        };
        for (i, opts) in node_opts.iter().enumerate() {
            let (p, s) = opts[digits[i]];
            weight *= p;
            if let Some(s) = s {
                world.nodes.insert(node_ids[i], s);
            }
        }
        let off = node_opts.len();
        for (j, opts) in link_opts.iter().enumerate() {
            let (p, s) = opts[digits[off + j]];
            weight *= p;
            if let Some(s) = s {
                world.links.insert(link_ids[j], s);
            }
        }
        if feasible(answer, chain, pre, &world) {
            total += weight;
        }

        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(total.min(1.0));
            }
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
