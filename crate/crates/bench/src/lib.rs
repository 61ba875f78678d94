//! Shared fixtures for the solver benchmarks.

use vnfplace::benchgen::{generate_instance, GenParams};
use vnfplace::engine::{Mode, SolveRequest};
use vnfplace::model::{ChainSpec, Infrastructure};

/// Generated instance with the default value ranges.
pub fn instance(nodes: usize, chain_len: usize, seed: u64) -> (ChainSpec, Infrastructure) {
    generate_instance(&GenParams {
        nodes,
        chain_len,
        seed,
        ..GenParams::default()
    })
}

/// Ten nodes with two scenarios everywhere and a seven-service chain: large
/// enough that pruning pays off.
pub fn wide_instance() -> (ChainSpec, Infrastructure) {
    generate_instance(&GenParams {
        nodes: 10,
        density: 0.2,
        node_scenarios: (2, 2),
        link_scenarios: (2, 2),
        null_chance: 0.0,
        hw: (6, 16),
        service_hw: (3, 7),
        chain_len: 7,
        iot_chance: 0.5,
        seed: 14,
        ..GenParams::default()
    })
}

pub fn heuristic(t: f64) -> SolveRequest {
    SolveRequest {
        mode: Mode::Heuristic { thr_hw: t, thr_qos: t },
        ..SolveRequest::default()
    }
}
