//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line.

mod common;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{answer_map, key_of, world_oracle, Key};
use vnfplace::benchgen::{generate_instance, FlowTopology, GenParams};
use vnfplace::engine::{collapse, load_problem, solve, Collapse, Mode, SolveRequest};
use vnfplace::model::{
    ChainSpec, Infrastructure, LatencyConstraint, PlacementAssignment, SecurityPolicy, ServiceId,
};
use vnfplace::parser::{
    parse_chain_file, parse_infrastructure_file, render_chains, render_infrastructure,
};
use vnfplace::search::{chain_latency, check_latency_constraints, QueryConstraints, DEFAULT_RADIUS};

type Outcome = Result<String, String>;

fn data(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn heuristic(t: f64) -> SolveRequest {
    SolveRequest {
        mode: Mode::Heuristic { thr_hw: t, thr_qos: t },
        ..SolveRequest::default()
    }
}

fn compare(got: &HashMap<Key, f64>, want: &HashMap<Key, f64>, tol: f64) -> Result<(), String> {
    for (k, p) in want {
        match got.get(k) {
            None => return Err(format!("missing answer {k:?} (p = {p})")),
            Some(q) if (p - q).abs() > tol => return Err(format!("{k:?}: got {q}, want {p}")),
            _ => {}
        }
    }
    if let Some(k) = got.keys().find(|k| !want.contains_key(*k)) {
        return Err(format!("unexpected answer {k:?}"));
    }
    Ok(())
}

/// Seeded instances small enough to enumerate every world.
fn oracle_instances() -> Vec<(u64, ChainSpec, Infrastructure)> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 200 {
        let p = GenParams {
            nodes: 3 + (seed % 3) as usize,
            chain_len: 2 + (seed % 4) as usize,
            density: if seed.is_multiple_of(4) { 0.5 } else { 0.0 },
            topology: if seed.is_multiple_of(5) { FlowTopology::Tree } else { FlowTopology::Line },
            seed,
            ..GenParams::default()
        };
        let (c, i) = generate_instance(&p);
        if i.world_count() <= 10_000 {
            out.push((seed, c, i));
        }
        seed += 1;
    }
    out
}

fn oracle_equivalence(instances: &[(u64, ChainSpec, Infrastructure)]) -> Outcome {
    let start = Instant::now();
    let mut answers = 0;
    for (seed, chain, infra) in instances {
        let got = solve(&SolveRequest::default(), std::slice::from_ref(chain), infra)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let want = world_oracle(chain, infra, DEFAULT_RADIUS);
        compare(&answer_map(&got), &want, 1e-9).map_err(|e| format!("seed {seed}: {e}"))?;
        answers += got.len();
    }
    let took = start.elapsed();
    ensure(took <= Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("{} instances, {answers} answers, {took:.2?}", instances.len()))
}

fn micro_instance() -> Result<(Vec<ChainSpec>, Infrastructure), String> {
    load_problem(
        &[("micro_chain.pl".into(), data("data/micro_chain.pl"))],
        ("micro_infra.pl", &data("data/micro_infra.pl")),
    )
    .map_err(|e| e.to_string())
}

fn micro_golden() -> HashMap<Key, f64> {
    let v: serde_json::Value = serde_json::from_str(&data("golden/micro_answers.json")).unwrap();
    let strs = |v: &serde_json::Value| -> Vec<String> {
        v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_owned()).collect()
    };
    v["answers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            let key = (
                strs(&a["placement"]),
                a["paths"].as_array().unwrap().iter().map(strs).collect(),
            );
            (key, a["probability"].as_f64().unwrap())
        })
        .collect()
}

fn micro_golden_values() -> Outcome {
    let start = Instant::now();
    let (chains, infra) = micro_instance()?;
    let got = solve(&SolveRequest::default(), &chains, &infra).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let want = micro_golden();
    compare(&answer_map(&got), &want, 1e-9)?;
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("{} answers match, {took:.2?}", got.len()))
}

fn heuristic_subset(instances: &[(u64, ChainSpec, Infrastructure)]) -> Outcome {
    let thresholds = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    let mut pruned = 0usize;
    for (seed, chain, infra) in instances {
        let chains = std::slice::from_ref(chain);
        let exhaustive = answer_map(&solve(&SolveRequest::default(), chains, infra).map_err(|e| e.to_string())?);
        let mut previous: Option<HashMap<Key, f64>> = None;
        for t in thresholds {
            let got = answer_map(&solve(&heuristic(t), chains, infra).map_err(|e| e.to_string())?);
            for (k, p) in &got {
                ensure(exhaustive.get(k) == Some(p), || {
                    format!("seed {seed}, T={t}: {k:?} not in the exhaustive set with p = {p}")
                })?;
            }
            if let Some(prev) = &previous {
                ensure(got.keys().all(|k| prev.contains_key(k)), || {
                    format!("seed {seed}, T={t}: answer appeared as the threshold rose")
                })?;
            }
            pruned += exhaustive.len() - got.len();
            previous = Some(got);
        }
    }
    Ok(format!("{} instances x 8 thresholds, {pruned} answers pruned in total", instances.len()))
}

/// Builds the most probable world by hand and round-trips it through the
/// fact format.
fn modal_world(infra: &Infrastructure) -> Infrastructure {
    let mut out = infra.clone();
    for n in out.nodes.values_mut() {
        let best = n.scenarios.iter().fold(&n.scenarios[0], |b, s| if s.0 > b.0 { s } else { b }).1.clone();
        n.scenarios = vec![(1.0, best)];
    }
    for l in out.links.values_mut() {
        let best = l.scenarios.iter().fold(&l.scenarios[0], |b, s| if s.0 > b.0 { s } else { b }).1.clone();
        l.scenarios = vec![(1.0, best)];
    }
    parse_infrastructure_file(&render_infrastructure(&out)).unwrap()
}

fn deterministic_degeneration() -> Outcome {
    let mut total = 0;
    for seed in 0..50u64 {
        let p = GenParams {
            nodes: 4 + (seed % 3) as usize,
            chain_len: 3,
            density: 0.4,
            node_scenarios: (1, 3),
            link_scenarios: (1, 3),
            seed: 1000 + seed,
            ..GenParams::default()
        };
        let (chain, infra) = generate_instance(&p);
        let chains = std::slice::from_ref(&chain);
        let req = SolveRequest {
            collapse: Some(Collapse::Modal),
            ..SolveRequest::default()
        };
        let collapsed = solve(&req, chains, &infra).map_err(|e| e.to_string())?;
        ensure(collapsed.iter().all(|a| a.probability == 1.0), || {
            format!("seed {}: probability below 1 after collapse", p.seed)
        })?;
        let plain = solve(&SolveRequest::default(), chains, &modal_world(&infra)).map_err(|e| e.to_string())?;
        let a: HashSet<Key> = collapsed.iter().map(key_of).collect();
        let b: HashSet<Key> = plain.iter().map(key_of).collect();
        ensure(a == b, || format!("seed {}: {} vs {} answers", p.seed, a.len(), b.len()))?;
        ensure(collapse(&infra, Collapse::Modal) == modal_world(&infra), || {
            format!("seed {}: collapsed infrastructure differs", p.seed)
        })?;
        total += collapsed.len();
    }
    Ok(format!("50 instances, {total} answers, all probability 1"))
}

fn cctv_sub_chain(bound: f64) -> ChainSpec {
    let chain = parse_chain_file(&data("data/micro_chain.pl")).unwrap().remove(0);
    ChainSpec {
        latency_constraints: vec![LatencyConstraint {
            max_latency: bound,
            ..chain.latency_constraints[0].clone()
        }],
        ..chain
    }
}

fn latency_arithmetic() -> Outcome {
    let chain = cctv_sub_chain(150.0);
    let lc = &chain.latency_constraints[0];
    let pair = |a: &str, b: &str| (ServiceId::from(a), ServiceId::from(b));
    let zero: HashMap<_, _> = chain.flows.iter().map(|f| (f.pair(), 0.0)).collect();
    let colocated = chain_latency(lc, &zero, &chain).map_err(|e| e.to_string())?;
    ensure(colocated == 19.0, || format!("colocated latency {colocated}"))?;
    let links: HashMap<_, _> = [
        (pair("cctv_driver", "feature_extr"), 15.0),
        (pair("feature_extr", "lw_analytics"), 5.0),
        (pair("lw_analytics", "alarm_driver"), 5.0),
    ]
    .into_iter()
    .collect();
    let spread = chain_latency(lc, &links, &chain).map_err(|e| e.to_string())?;
    ensure(spread == 44.0, || format!("spread latency {spread}"))?;
    ensure(check_latency_constraints(&chain.latency_constraints, &links, &chain), || "44 ms rejected".into())?;

    // Same numbers through the solver, one service per node on a line.
    let infra = parse_infrastructure_file(
        "node(a, 10, [video1], [access_control, anti_tampering]).\n\
         node(b, 10, [], [access_control, encrypted_storage]).\n\
         node(c, 5, [], [access_control, host_IDS, encrypted_storage]).\n\
         node(d, 10, [alarm1], [access_control, host_IDS]).\n\
         link(a, b, 15, 100).\nlink(b, c, 5, 100).\nlink(c, d, 5, 100).\n",
    )
    .unwrap();
    let at_bound = |bound: f64| {
        solve(&SolveRequest::default(), &[cctv_sub_chain(bound)], &infra).map(|a| a.len())
    };
    let (ok, tight) = (at_bound(150.0).map_err(|e| e.to_string())?, at_bound(43.0).map_err(|e| e.to_string())?);
    ensure(ok == 1 && tight == 0, || format!("solver: {ok} answers at 150 ms, {tight} at 43 ms"))?;
    Ok("19 ms colocated, 44 ms spread, 150 ms bound met".into())
}

fn speedup() -> Outcome {
    let p = GenParams {
        nodes: 10,
        density: 0.2,
        node_scenarios: (2, 2),
        link_scenarios: (2, 2),
        null_chance: 0.0,
        hw: (6, 16),
        service_hw: (3, 7),
        chain_len: 7,
        topology: FlowTopology::Line,
        iot_chance: 0.5,
        seed: 14,
        ..GenParams::default()
    };
    let (chain, infra) = generate_instance(&p);
    let chains = std::slice::from_ref(&chain);
    let time = |req: &SolveRequest| -> Result<(Duration, usize), String> {
        let req = SolveRequest { audit: false, ..req.clone() };
        let start = Instant::now();
        let n = solve(&req, chains, &infra).map_err(|e| e.to_string())?.len();
        Ok((start.elapsed(), n))
    };
    // Heuristic first: freeing the large exhaustive result leaves the
    // allocator a one-off consolidation bill that would land on the next run.
    let mut runs = (0..3).map(|_| time(&heuristic(0.8))).collect::<Result<Vec<_>, _>>()?;
    runs.sort();
    let (h, h_n) = runs[1];
    let (ex, ex_n) = time(&SolveRequest::default())?;
    ensure(h * 5 <= ex, || format!("exhaustive {ex:.2?} ({ex_n}), heuristic {h:.2?} ({h_n})"))?;
    Ok(format!(
        "exhaustive {ex:.2?} ({ex_n} answers), heuristic {h:.2?} ({h_n}), {:.0}x",
        ex.as_secs_f64() / h.as_secs_f64().max(1e-9)
    ))
}

fn parser_fidelity() -> Outcome {
    let chains = parse_chain_file(&data("data/cctv_chain.pl")).map_err(|e| e.to_string())?;
    ensure(chains.len() == 1, || format!("{} chains", chains.len()))?;
    let c = &chains[0];
    ensure(c.id.as_str() == "ucdavis_cctv", || format!("chain id {}", c.id))?;
    ensure(c.services.len() == 7 && c.flows.len() == 6, || {
        format!("{} services, {} flows", c.services.len(), c.flows.len())
    })?;
    ensure(
        c.latency_constraints.len() == 1 && c.latency_constraints[0].max_latency == 150.0,
        || "latency constraint".into(),
    )?;
    let alarm = c.service("alarm_driver").unwrap();
    ensure(
        alarm.hw_reqs == 0.5
            && alarm.iot_reqs == ["alarm1"]
            && alarm.sec_policy == SecurityPolicy::all(["access_control", "host_IDS"]),
        || format!("{alarm:?}"),
    )?;

    let infra = parse_infrastructure_file(&data("data/parking_node.pl")).map_err(|e| e.to_string())?;
    let node = &infra.nodes["parkingServices"];
    let summary: Vec<(f64, f64)> = node.scenarios.iter().map(|(p, s)| (*p, s.hw_caps)).collect();
    ensure(summary == [(0.2, 2.0), (0.8, 1.0)], || format!("{summary:?}"))?;
    ensure(node.scenarios.iter().all(|(_, s)| s.iot_caps.contains("video1") && s.sec_caps.len() == 4), || {
        "capabilities".into()
    })?;
    Ok("7 services, 6 flows, 150 ms bound; 2-scenario node".into())
}

fn affinity() -> Outcome {
    let (chains, infra) = micro_instance()?;
    let all = solve(&SolveRequest::default(), &chains, &infra).map_err(|e| e.to_string())?;
    let pair = (ServiceId::from("feature_extr"), ServiceId::from("lw_analytics"));
    let together = |p: &PlacementAssignment| p.node_of(pair.0.as_str()) == p.node_of(pair.1.as_str());
    let run = |query: QueryConstraints| {
        solve(&SolveRequest { query, ..SolveRequest::default() }, &chains, &infra)
            .map(|a| a.iter().map(key_of).collect::<HashSet<_>>())
            .map_err(|e| e.to_string())
    };
    let same = run(QueryConstraints {
        same_node: vec![vec![pair.0.clone(), pair.1.clone()]],
        ..Default::default()
    })?;
    let apart = run(QueryConstraints {
        different_node: vec![pair.clone()],
        ..Default::default()
    })?;
    let filtered = |want: bool| -> HashSet<Key> {
        all.iter().filter(|a| together(&a.placement) == want).map(key_of).collect()
    };
    ensure(same == filtered(true), || format!("same-node: {} vs {}", same.len(), filtered(true).len()))?;
    ensure(apart == filtered(false), || format!("different-node: {} vs {}", apart.len(), filtered(false).len()))?;
    ensure(!same.is_empty() && !apart.is_empty(), || "a side is empty".into())?;
    Ok(format!("{} together, {} apart, of {}", same.len(), apart.len(), all.len()))
}

fn main() {
    // Generated instances must survive the fact format unchanged.
    let instances = oracle_instances();
    for (seed, c, i) in &instances {
        let c2 = parse_chain_file(&render_chains(std::slice::from_ref(c))).unwrap();
        let i2 = parse_infrastructure_file(&render_infrastructure(i)).unwrap();
        assert_eq!(c2[0].services, c.services, "seed {seed}");
        assert_eq!(i2.nodes.len(), i.nodes.len(), "seed {seed}");
    }

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("oracle equivalence", Box::new(|| oracle_equivalence(&instances))),
        ("micro-instance golden values", Box::new(micro_golden_values)),
        ("heuristic subset and monotonicity", Box::new(|| heuristic_subset(&instances))),
        ("deterministic degeneration", Box::new(deterministic_degeneration)),
        ("latency arithmetic", Box::new(latency_arithmetic)),
        ("heuristic speedup", Box::new(speedup)),
        ("parser fidelity", Box::new(parser_fidelity)),
        ("affinity and anti-affinity", Box::new(affinity)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)) {
            Ok(Ok(detail)) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: panicked", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
