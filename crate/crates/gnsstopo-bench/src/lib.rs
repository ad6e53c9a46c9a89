//! Shared fixtures for the criterion benches.

use std::path::Path;

use gnsstopo::synth::{synth_scenario, SynthConfig};
use gnsstopo::{load_scenario, Scenario, SystemParams};

pub fn test_scenario() -> Scenario {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/test-8node.json");
    load_scenario(p).expect("test scenario loads")
}

/// A few states of the synthetic constellation with `nodes` nodes.
pub fn synthetic(nodes: usize, states: usize, slots: usize) -> Scenario {
    let cfg = SynthConfig {
        states,
        slots,
        ..SynthConfig::with_nodes(nodes, 1).expect("valid size")
    };
    synth_scenario(&cfg, SystemParams::practical()).expect("synthetic scenario builds")
}
