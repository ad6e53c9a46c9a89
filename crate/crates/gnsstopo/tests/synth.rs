use gnsstopo::synth::{synth_nodes, synth_scenario, synth_scenario_file, SynthConfig};
use gnsstopo::SystemParams;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        states: 12,
        ..SynthConfig::with_nodes(20, seed).unwrap()
    }
}

#[test]
fn generation_is_deterministic() {
    let a = serde_json::to_string(&synth_scenario_file(&small(7), SystemParams::practical()).unwrap()).unwrap();
    let b = serde_json::to_string(&synth_scenario_file(&small(7), SystemParams::practical()).unwrap()).unwrap();
    let c = serde_json::to_string(&synth_scenario_file(&small(8), SystemParams::practical()).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn node_counts_and_names() {
    for n in [3, 4, 8, 9, 20, 36] {
        let cfg = SynthConfig::with_nodes(n, 1).unwrap();
        let nodes = synth_nodes(&cfg);
        assert_eq!(nodes.len(), n);
        assert_eq!(nodes.iter().filter(|v| v.gs_group.is_some()).count(), cfg.gs_antennas.iter().sum::<u32>() as usize);
    }
    assert!(SynthConfig::with_nodes(2, 1).is_err());
    let names: Vec<String> = synth_nodes(&SynthConfig::default()).into_iter().map(|v| v.name).collect();
    assert_eq!(&names[..2], ["s1", "s2"]);
    assert_eq!(&names[30..], ["g1a1", "g1a2", "g2a1", "g2a2", "g3a1", "g3a2"]);
}

#[test]
fn states_are_valid_and_move() {
    let sc = synth_scenario(&small(3), SystemParams::practical()).unwrap();
    assert_eq!(sc.states.len(), 12);
    assert!(sc.states.iter().enumerate().all(|(k, s)| s.index == k + 1 && s.slots == 20));
    assert!(sc.states.iter().any(|s| !s.anchors().is_empty()));
    assert!(sc.states.iter().all(|s| s.satellite_edges().count() > 0));
    let first = sc.states[0].visibility_matrix();
    assert!(sc.states.iter().any(|s| s.visibility_matrix() != first));
    assert_eq!(sc.params.gs_antennas, [2, 2, 2]);
    assert_eq!(sc.params.l_min, 6);
}

#[test]
fn bad_config_is_rejected() {
    let cfg = SynthConfig {
        gs_sites: Vec::new(),
        ..SynthConfig::default()
    };
    assert!(synth_scenario_file(&cfg, SystemParams::practical()).is_err());
}
