mod common;

use std::sync::Arc;

use common::{all_matchings, test_scenario};
use gnsstopo::scenario::{
    check_visibility, classify_nodes, EdgeClass, Node, NodeKind, ScenarioFile, ScenarioState, SystemParams, TrafficProfile,
};
use gnsstopo::topology::{ranging_audit, validate_topology, Violation};
use gnsstopo::{load_scenario, Scenario, TopologySchedule};
use proptest::prelude::*;

fn raw_test_file() -> serde_json::Value {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/test-8node.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn test_scenario_anchors_follow_the_visibility_rows() {
    let raw = raw_test_file();
    let nodes = raw["nodes"].as_array().unwrap();
    let vis = &raw["states"][0]["visibility"];
    let gs: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i]["kind"] == "gs_antenna").collect();
    let mut want = Vec::new();
    for i in (0..nodes.len()).filter(|i| !gs.contains(i)) {
        if gs.iter().any(|&g| vis[i][g] == 1) {
            want.push(i);
        }
    }
    let sc = test_scenario();
    let s = &sc.states[0];
    assert_eq!(s.anchors(), &want[..]);
    let names: Vec<&str> = s.anchors().iter().map(|&i| s.nodes()[i].name.as_str()).collect();
    assert_eq!(names, ["v5", "v6", "v7"]);
    assert_eq!(s.non_anchors(), &[0, 1, 2, 3]);
    assert_eq!((s.node_count(), s.slots, s.edges().len()), (8, 6, 17));
    assert_eq!(s.satellite_edges().count(), 14);
}

#[test]
fn test_scenario_traffic() {
    let sc = test_scenario();
    let f = sc.traffic_for(&sc.states[0]);
    let per_node: Vec<u64> = (0..8).map(|i| f.rate(i, 0)).collect();
    assert_eq!(per_node, [10, 6, 10, 6, 10, 6, 10, 0]);
    assert!(f.is_slot_uniform());
    assert_eq!(f.total(), 58 * 6);
    assert_eq!(sc.params, SystemParams::test_scenario());
}

#[test]
fn edge_classes() {
    let sc = test_scenario();
    let s = &sc.states[0];
    assert_eq!(s.edge_class(0, 1), Some(EdgeClass::Nn));
    assert_eq!(s.edge_class(1, 4), Some(EdgeClass::Na));
    assert_eq!(s.edge_class(4, 1), Some(EdgeClass::Na));
    assert_eq!(s.edge_class(4, 5), Some(EdgeClass::Aa));
    assert_eq!(s.edge_class(7, 6), Some(EdgeClass::Ag));
    assert_eq!(s.edge_class(0, 7), None);
}

#[test]
fn trivial_partitions() {
    let zero = vec![vec![0u8; 4]; 4];
    let p = classify_nodes(&zero, &[3]).unwrap();
    assert!(p.anchors.is_empty());
    assert_eq!(p.non_anchors, [0, 1, 2]);
    let mut star = zero.clone();
    for i in 0..3 {
        star[i][3] = 1;
        star[3][i] = 1;
    }
    let p = classify_nodes(&star, &[3]).unwrap();
    assert_eq!(p.anchors, [0, 1, 2]);
    assert!(p.non_anchors.is_empty());
    assert!(classify_nodes(&zero, &[4]).is_err());
}

#[test]
fn malformed_visibility_is_rejected() {
    assert!(check_visibility(&[vec![0, 1], vec![0, 0]]).is_err());
    assert!(check_visibility(&[vec![1, 0], vec![0, 0]]).is_err());
    assert!(check_visibility(&[vec![0, 2], vec![2, 0]]).is_err());
    assert!(check_visibility(&[vec![0, 1], vec![1]]).is_err());
    assert!(check_visibility(&[]).is_ok());
    let nodes: Arc<[Node]> = Arc::from(vec![Node::antenna("g1", "a"), Node::antenna("g2", "b")]);
    assert!(ScenarioState::new(1, 2, Arc::clone(&nodes), &[vec![0, 1], vec![1, 0]]).is_err());
    assert!(ScenarioState::new(1, 2, nodes, &[vec![0]]).is_err());
}

fn mutate(f: impl FnOnce(&mut serde_json::Value)) -> gnsstopo::Result<Scenario> {
    let mut raw = raw_test_file();
    f(&mut raw);
    let file: ScenarioFile = serde_json::from_value(raw).unwrap();
    Scenario::from_file(file)
}

#[test]
fn malformed_scenarios_are_rejected() {
    assert!(mutate(|_| {}).is_ok());
    assert!(mutate(|r| r["nodes"][1]["name"] = "v1".into()).is_err());
    assert!(mutate(|r| r["traffic"]["service_nodes"][0] = "v9".into()).is_err());
    assert!(mutate(|r| r["traffic"]["service_nodes"][0] = "v8".into()).is_err());
    assert!(mutate(|r| r["params"]["m_big"] = 50.into()).is_err());
    assert!(mutate(|r| r["states"][0]["visibility"][0][1] = 0.into()).is_err());
    assert!(serde_json::from_value::<ScenarioFile>({
        let mut r = raw_test_file();
        r["params"]["unknown"] = 1.into();
        r
    })
    .is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert!(matches!(load_scenario(&path), Err(gnsstopo::Error::Parse { .. })));
    assert!(matches!(load_scenario(dir.path().join("missing.json")), Err(gnsstopo::Error::Io { .. })));
}

#[test]
fn scenario_file_round_trips() {
    let sc = test_scenario();
    let back = Scenario::from_file(sc.to_file()).unwrap();
    assert_eq!(back.states[0].visibility_matrix(), sc.states[0].visibility_matrix());
    assert_eq!(back.service_flags(), sc.service_flags());
    assert_eq!(back.params, sc.params);
    assert_eq!(sc.state(1).map(|s| s.index), Some(1));
    assert!(sc.state(2).is_none());
}

#[test]
fn parameter_overrides() {
    let mut p = SystemParams::test_scenario();
    p.set("l_min", "3").unwrap();
    p.set("gamma", "0.25").unwrap();
    p.set("m_bar", "9").unwrap();
    assert_eq!((p.l_min, p.gamma, p.m_bar), (3, 0.25, Some(9)));
    assert!(p.set("nope", "1").is_err());
    assert!(p.set("l_min", "x").is_err());
    assert!(p.clone().set("gamma", "2").is_err());
    assert!(p.clone().set("c_ss", "0").is_err());
    assert!(p.validate_for(6).is_ok());
    assert!(p.validate_for(9).is_err());
    assert!(SystemParams { m_dot: 6, ..p.clone() }.validate_for(6).is_err());
    let q = SystemParams::practical();
    assert_eq!((q.l_min, q.gamma, q.eta, q.beta), (6, 0.1, 0.7, 500.0));
}

#[test]
fn traffic_from_rates() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(2);
    let mut rates = vec![vec![0, 0]; 8];
    rates[0] = vec![1, 3];
    let f = TrafficProfile::from_rates(&s, rates.clone()).unwrap();
    assert_eq!(f.flows().len(), 2);
    assert!(!f.is_slot_uniform());
    rates[7] = vec![1, 0];
    assert!(TrafficProfile::from_rates(&s, rates).is_err());
    assert!(TrafficProfile::from_rates(&s, vec![vec![0, 0]; 7]).is_err());
    assert_eq!(TrafficProfile::zero(&s).total(), 0);
}

#[test]
fn schedule_violations_are_listed() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(2);
    let mut x = TopologySchedule::empty(8, 2);
    assert!(validate_topology(&x, &s).unwrap().is_empty());
    x.set(0, 1, 0, true);
    assert_eq!(validate_topology(&x, &s).unwrap(), [Violation::Asymmetric { i: 0, j: 1, slot: 0 }]);
    x.link(0, 1, 0);
    x.link(0, 2, 0);
    assert_eq!(validate_topology(&x, &s).unwrap(), [Violation::Degree { node: 0, slot: 0, links: 2 }]);
    let mut y = TopologySchedule::empty(8, 2);
    y.link(0, 7, 1);
    assert_eq!(validate_topology(&y, &s).unwrap(), [Violation::NotVisible { i: 0, j: 7, slot: 1 }]);
    assert!(validate_topology(&TopologySchedule::empty(8, 3), &s).is_err());
}

#[test]
fn ranging_ignores_antenna_links() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(3);
    let x = TopologySchedule::from_matchings(8, &[vec![(4, 7), (0, 1)], vec![(6, 7), (0, 2)], vec![(5, 7), (0, 1)]]);
    let a = ranging_audit(&x, &s, 2);
    assert_eq!(a.partners, [Some(2), Some(1), Some(1), Some(0), Some(0), Some(0), Some(0), None]);
    assert_eq!(a.failing(), [1, 2, 3, 4, 5, 6]);
    assert!(!a.all_pass());
    assert!(ranging_audit(&x, &s, 0).all_pass());
}

#[test]
fn schedule_file_round_trip_and_errors() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(2);
    let x = TopologySchedule::from_matchings(8, &[vec![(0, 1), (6, 7)], vec![(2, 3)]]);
    let file = x.to_file(&s, "hmwm");
    assert_eq!(file.links[0], [["v1".to_string(), "v2".to_string()], ["v7".to_string(), "v8".to_string()]]);
    let text = serde_json::to_string(&file).unwrap();
    let back = TopologySchedule::from_file(&serde_json::from_str(&text).unwrap(), &s).unwrap();
    assert_eq!(back, x);
    let mut bad = file.clone();
    bad.links[0][0][0] = "v0".into();
    assert!(TopologySchedule::from_file(&bad, &s).is_err());
    assert!(TopologySchedule::from_file(&file, &sc.states[0]).is_err());
}

fn random_state(bits: &[bool], n: usize, gs: usize) -> ScenarioState {
    let nodes: Vec<Node> = (0..n)
        .map(|i| if i >= n - gs { Node::antenna(format!("g{i}"), "gs") } else { Node::satellite(format!("s{i}")) })
        .collect();
    let mut k = 0;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let both_gs = i >= n - gs;
            if bits[k] && !both_gs {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    ScenarioState::from_edges(1, 2, Arc::from(nodes), &edges).unwrap()
}

proptest! {
    #[test]
    fn partition_covers_the_satellites(n in 2usize..=9, gs in 0usize..=2, bits in prop::collection::vec(any::<bool>(), 36)) {
        let gs = gs.min(n - 1);
        let s = random_state(&bits, n, gs);
        let mut all: Vec<usize> = s.anchors().iter().chain(s.non_anchors()).copied().collect();
        all.sort();
        prop_assert_eq!(all, s.satellites().collect::<Vec<_>>());
        for i in s.satellites() {
            let sees = s.antennas().any(|g| s.visible(i, g));
            prop_assert_eq!(s.is_anchor(i), sees);
            prop_assert_eq!(s.kind(i), NodeKind::Satellite);
        }
    }

    #[test]
    fn matchings_are_valid_schedules(n in 2usize..=7, bits in prop::collection::vec(any::<bool>(), 21), pick in any::<u64>()) {
        let s = random_state(&bits, n, 1);
        let ms = all_matchings(n, s.edges());
        let m = &ms[(pick % ms.len() as u64) as usize];
        let x = TopologySchedule::from_matchings(n, &[m.clone(), Vec::new()]);
        prop_assert!(validate_topology(&x, &s).unwrap().is_empty());
        let a = ranging_audit(&x, &s, 1);
        for i in s.satellites() {
            let ranged = m.iter().any(|&(u, v)| (u == i && s.is_satellite(v)) || (v == i && s.is_satellite(u)));
            prop_assert_eq!(a.pass[i], Some(ranged));
        }
    }
}
