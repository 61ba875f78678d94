//! Reference answers computed world by world, sharing nothing with the solver.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use vnfplace::model::{Answer, ChainSpec, Infrastructure, SecurityPolicy};

/// Node of each service in chain order, then the node path of each flow.
pub type Key = (Vec<String>, Vec<Vec<String>>);

pub fn key_of(a: &Answer) -> Key {
    (
        a.placement.0.iter().map(|(_, n)| n.to_string()).collect(),
        a.flow_paths
            .iter()
            .map(|fp| fp.path.iter().map(|n| n.to_string()).collect())
            .collect(),
    )
}

pub fn answer_map(answers: &[Answer]) -> HashMap<Key, f64> {
    answers.iter().map(|a| (key_of(a), a.probability)).collect()
}

fn holds(p: &SecurityPolicy, caps: &BTreeSet<String>) -> bool {
    match p {
        SecurityPolicy::Atom(a) => caps.contains(a),
        SecurityPolicy::All(v) => v.iter().all(|a| caps.contains(a)),
        SecurityPolicy::And(a, b) => holds(a, caps) && holds(b, caps),
        SecurityPolicy::Or(a, b) => holds(a, caps) || holds(b, caps),
    }
}

struct Candidate {
    nodes: Vec<usize>,
    /// Link indices per flow; empty when colocated.
    links: Vec<Vec<usize>>,
    paths: Vec<Vec<usize>>,
}

fn paths_between(infra: &Infrastructure, from: usize, to: usize, radius: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    fn walk(
        infra: &Infrastructure,
        to: usize,
        radius: usize,
        nodes: &mut Vec<usize>,
        links: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, Vec<usize>)>,
    ) {
        let here = *nodes.last().unwrap();
        if here == to {
            out.push((nodes.clone(), links.clone()));
            return;
        }
        if links.len() == radius {
            return;
        }
        for (li, l) in infra.links.values().enumerate() {
            let a = infra.nodes.get_index_of(&l.src).unwrap();
            let b = infra.nodes.get_index_of(&l.dst).unwrap();
            if a == here && !nodes.contains(&b) {
                nodes.push(b);
                links.push(li);
                walk(infra, to, radius, nodes, links, out);
                nodes.pop();
                links.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(infra, to, radius, &mut vec![from], &mut Vec::new(), &mut out);
    out
}

fn candidates(chain: &ChainSpec, infra: &Infrastructure, radius: usize) -> Vec<Candidate> {
    let n = infra.nodes.len();
    let s = chain.services.len();
    let idx = |id: &str| chain.services.iter().position(|f| f.id.as_str() == id).unwrap();
    let mut out = Vec::new();
    let mut nodes = vec![0usize; s];
    loop {
        let mut options: Vec<Vec<(Vec<usize>, Vec<usize>)>> = Vec::new();
        for f in &chain.flows {
            let (a, b) = (nodes[idx(f.src.as_str())], nodes[idx(f.dst.as_str())]);
            options.push(if a == b {
                vec![(Vec::new(), Vec::new())]
            } else {
                paths_between(infra, a, b, radius)
            });
        }
        if options.iter().all(|o| !o.is_empty()) {
            let mut pick = vec![0usize; options.len()];
            loop {
                out.push(Candidate {
                    nodes: nodes.clone(),
                    links: pick.iter().zip(&options).map(|(&k, o)| o[k].1.clone()).collect(),
                    paths: pick.iter().zip(&options).map(|(&k, o)| o[k].0.clone()).collect(),
                });
                if !odometer(&mut pick, |i| options[i].len()) {
                    break;
                }
            }
        }
        if !odometer(&mut nodes, |_| n) {
            break;
        }
    }
    out
}

fn odometer(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for i in 0..digits.len() {
        digits[i] += 1;
        if digits[i] < radix(i) {
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// Sums, for every placement and routing, the probability of the worlds in
/// which it works. Only answers with positive probability are returned.
pub fn world_oracle(chain: &ChainSpec, infra: &Infrastructure, radius: usize) -> HashMap<Key, f64> {
    const SLACK: f64 = 1e-9;
    let cands = candidates(chain, infra, radius);
    let node_opts: Vec<Vec<(f64, Option<usize>)>> = infra
        .nodes
        .values()
        .map(|n| {
            let mut v: Vec<_> = n.scenarios.iter().enumerate().map(|(k, (p, _))| (*p, Some(k))).collect();
            let rest = 1.0 - n.scenarios.iter().map(|(p, _)| p).sum::<f64>();
            if rest > SLACK {
                v.push((rest, None));
            }
            v
        })
        .collect();
    let link_opts: Vec<Vec<(f64, Option<usize>)>> = infra
        .links
        .values()
        .map(|l| {
            let mut v: Vec<_> = l.scenarios.iter().enumerate().map(|(k, (p, _))| (*p, Some(k))).collect();
            let rest = 1.0 - l.scenarios.iter().map(|(p, _)| p).sum::<f64>();
            if rest > SLACK {
                v.push((rest, None));
            }
            v
        })
        .collect();
    let nodes: Vec<_> = infra.nodes.values().collect();
    let links: Vec<_> = infra.links.values().collect();
    let flow_of = |a: &str, b: &str| {
        chain
            .flows
            .iter()
            .position(|f| f.src.as_str() == a && f.dst.as_str() == b)
            .unwrap()
    };

    let mut totals = vec![0.0f64; cands.len()];
    let nv = node_opts.len();
    let mut digits = vec![0usize; nv + link_opts.len()];
    let radix = |i: usize| if i < nv { node_opts[i].len() } else { link_opts[i - nv].len() };
    let mut hw = vec![0.0f64; nodes.len()];
    let mut bw = vec![0.0f64; links.len()];
    loop {
        let mut weight = 1.0;
        for (i, d) in digits.iter().enumerate() {
            weight *= if i < nv { node_opts[i][*d].0 } else { link_opts[i - nv][*d].0 };
        }
        let node_sc = |n: usize| node_opts[n][digits[n]].1.map(|k| &nodes[n].scenarios[k].1);
        let link_sc = |l: usize| link_opts[l][digits[nv + l]].1.map(|k| &links[l].scenarios[k].1);

        'cand: for (ci, c) in cands.iter().enumerate() {
            hw.iter_mut().for_each(|x| *x = 0.0);
            for (sf, &n) in chain.services.iter().zip(&c.nodes) {
                let Some(sc) = node_sc(n) else { continue 'cand };
                if !sf.iot_reqs.iter().all(|t| sc.iot_caps.contains(t)) || !holds(&sf.sec_policy, &sc.sec_caps) {
                    continue 'cand;
                }
                hw[n] += sf.hw_reqs;
                if hw[n] > sc.hw_caps + SLACK {
                    continue 'cand;
                }
            }
            bw.iter_mut().for_each(|x| *x = 0.0);
            for (f, ls) in chain.flows.iter().zip(&c.links) {
                for &l in ls {
                    let Some(sc) = link_sc(l) else { continue 'cand };
                    bw[l] += f.bandwidth;
                    if bw[l] > sc.bandwidth + SLACK {
                        continue 'cand;
                    }
                }
            }
            for lc in &chain.latency_constraints {
                let mut total = 0.0;
                for s in &lc.path {
                    total += chain.service(s.as_str()).unwrap().tproc;
                }
                for w in lc.path.windows(2) {
                    for &l in &c.links[flow_of(w[0].as_str(), w[1].as_str())] {
                        total += link_sc(l).unwrap().latency;
                    }
                }
                if total > lc.max_latency + SLACK {
                    continue 'cand;
                }
            }
            totals[ci] += weight;
        }

        if !odometer(&mut digits, radix) {
            break;
        }
    }

    let name = |n: usize| infra.nodes.get_index(n).unwrap().0.to_string();
    cands
        .iter()
        .zip(totals)
        .filter(|(_, p)| *p > 0.0)
        .map(|(c, p)| {
            let key = (
                c.nodes.iter().map(|&n| name(n)).collect(),
                c.paths.iter().map(|p| p.iter().map(|&n| name(n)).collect()).collect(),
            );
            (key, p)
        })
        .collect()
}
