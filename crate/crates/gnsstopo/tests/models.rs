mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use common::{agnostic_value, all_matchings, ranging_ok, read_lp, run_penalty, test_scenario, tiny_instance};
use gnsstopo::lp::{format_number, import_solution, lp_string, parse_solution};
use gnsstopo::model::VarKind;
use gnsstopo::railp::{count_probe_zeros, objective_ceiling, probe_matrix, row_zero_counts, zero_run_delay, AccessPattern};
use gnsstopo::scenario::{Node, ScenarioState, SystemParams, TrafficProfile};
use gnsstopo::search::{railp_assignment, routing_assignment};
use gnsstopo::sim::{run, SimOptions};
use gnsstopo::{build_ilp, build_railp, schedule_state_hmwm, solve_branch_and_bound, IlpModel, TopologySchedule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn access_row_delays() {
    assert_eq!(zero_run_delay(&[0, 1, 0, 0, 0, 1]), vec![1, 0, 3, 2, 1, 0]);
    assert_eq!(zero_run_delay(&[1, 1, 1]), vec![0, 0, 0]);
    // Trailing zeros wait for a virtual access after the last slot.
    assert_eq!(zero_run_delay(&[1, 0, 0]), vec![0, 2, 1]);
}

#[test]
fn three_slot_probe_for_six_slots() {
    let p = probe_matrix(3, 6).unwrap();
    let want: Vec<Vec<u8>> = vec![
        vec![1, 0, 0, 0],
        vec![1, 1, 0, 0],
        vec![1, 1, 1, 0],
        vec![0, 1, 1, 1],
        vec![0, 0, 1, 1],
        vec![0, 0, 0, 1],
    ];
    assert_eq!(p.p, want);
    let d = p.apply(&[0, 1, 0, 0, 0, 1]);
    assert_eq!(d, vec![1, 1, 0, 1]);
    // A row with four trailing zeros after an access shows two windows.
    let zeros: Vec<usize> = p.apply(&[0, 1, 0, 0, 0, 0]).iter().enumerate().filter(|(_, &v)| v == 0).map(|(c, _)| c).collect();
    assert_eq!(zeros, vec![2, 3]);
    assert_eq!(probe_matrix(6, 6).unwrap().p, vec![vec![1]; 6]);
    assert!(probe_matrix(0, 6).is_err());
    assert!(probe_matrix(7, 6).is_err());
}

proptest! {
    #[test]
    fn probe_zeros_equal_run_penalty(row in prop::collection::vec(0u8..=1, 1..=12)) {
        let want = run_penalty(&row.iter().map(|&b| b == 1).collect::<Vec<_>>());
        let pat = AccessPattern::single_row(row.clone());
        prop_assert_eq!(count_probe_zeros(&pat), want);
        prop_assert_eq!(row_zero_counts(&pat), vec![want]);
        let total: u32 = zero_run_delay(&row).iter().sum();
        prop_assert_eq!(u64::from(total), want);
    }
}

fn counts(m: &IlpModel) -> (usize, usize, usize) {
    (m.count(VarKind::Binary), m.count(VarKind::Integer), m.constraints.len())
}

#[test]
fn routing_agnostic_model_size() {
    let sc = test_scenario();
    let s = &sc.states[0];
    let traffic = sc.traffic_for(s);
    let t = s.slots;
    let m = build_railp(s, &traffic, &sc.params).unwrap();
    let e = s.edges().len();
    let sat_edges = s.satellite_edges().count();
    let windows = t * (t + 1) / 2;
    let sats = s.satellite_count();
    let deg_rows = (0..s.node_count()).filter(|&i| s.neighbors(i).next().is_some()).count() * t;
    assert_eq!(counts(&m), (e * t + sat_edges + sats * windows, 0, deg_rows + 2 * sat_edges + sats + 2 * sats * windows));
}

#[test]
fn routing_aware_model_size() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(4);
    let traffic = sc.traffic_for(&s);
    let t = s.slots;
    let m = build_ilp(&s, &traffic, &sc.params).unwrap();
    // Outgoing arcs that carry variables: every neighbor, except that an
    // anchor never sends back to a non-anchor.
    let arcs = |i: usize| s.neighbors(i).filter(|&j| !(s.is_anchor(i) && s.is_satellite(j) && !s.is_anchor(j))).count();
    let mut r = 0;
    let mut b = 0;
    for i in s.satellites() {
        let holders: Vec<usize> = if s.is_anchor(i) {
            vec![i]
        } else {
            std::iter::once(i).chain(s.anchors().iter().copied()).collect()
        };
        for st in 0..t {
            if traffic.rate(i, st) == 0 {
                continue;
            }
            for &h in &holders {
                r += (t - st) * arcs(h);
                b += t - st;
            }
        }
    }
    let (bin, int, _) = counts(&m);
    assert_eq!(bin, s.edges().len() * t + s.satellite_edges().count());
    assert_eq!(int, r + b);
}

#[test]
fn routing_agnostic_objective_matches_oracle() {
    for seed in 0..40 {
        let t = tiny_instance(seed);
        let model = build_railp(&t.state, &t.traffic, &t.params).unwrap();
        let ms = all_matchings(t.state.node_count(), t.state.edges());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let s: Vec<Vec<(usize, usize)>> = (0..t.state.slots).map(|_| ms[rng.gen_range(0..ms.len())].clone()).collect();
            let x = TopologySchedule::from_matchings(t.state.node_count(), &s);
            let (a, v) = railp_assignment(&t.state, &t.traffic, &t.params, &x);
            let want = agnostic_value(&t.state, &t.traffic, &t.params, &s);
            assert!((v - want).abs() < 1e-9, "seed {seed}");
            assert!((model.objective_value(&a).unwrap() - want).abs() < 1e-9);
            let bad = model.violations(&a).unwrap();
            assert_eq!(bad.is_empty(), ranging_ok(&t.state, &s, t.params.l_min), "seed {seed}: {bad:?}");
            assert!(v <= objective_ceiling(&t.state, &t.traffic, &t.params) + 1e-9);
        }
    }
}

#[test]
fn routing_assignment_is_feasible_and_matches_simulation() {
    let sc = test_scenario();
    for slots in [4, 6] {
        let s = sc.states[0].with_slots(slots);
        let traffic = sc.traffic_for(&s);
        let model = build_ilp(&s, &traffic, &sc.params).unwrap();
        let x = schedule_state_hmwm(&s, &traffic, &sc.params).unwrap();
        let (a, v) = routing_assignment(&s, &traffic, &sc.params, &x).unwrap().expect("no overflow");
        assert!(model.violations(&a).unwrap().is_empty());
        assert_eq!(model.objective_value(&a).unwrap(), v);
        let out = run(&s, &x, &traffic, &sc.params, SimOptions::default()).unwrap();
        assert_eq!(out.age_sum as f64, v);
    }
}

#[test]
fn tightened_constants_keep_the_optimum() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(4);
    let traffic = sc.traffic_for(&s);
    let tight = sc.params.tightened(4);
    assert_eq!((tight.m_dot, tight.m_big, tight.m_bar, tight.m_tilde), (5, 51, Some(5), Some(5)));
    for build in [build_ilp, build_railp] {
        let a = solve_branch_and_bound(&build(&s, &traffic, &sc.params).unwrap(), Duration::from_secs(60)).unwrap();
        let b = solve_branch_and_bound(&build(&s, &traffic, &tight).unwrap(), Duration::from_secs(60)).unwrap();
        assert_eq!(a.objective_value, b.objective_value);
    }
}

#[test]
fn invalid_constants_are_rejected() {
    let sc = test_scenario();
    let s = &sc.states[0];
    let traffic = sc.traffic_for(s);
    let low_dot = SystemParams { m_dot: 6, ..sc.params.clone() };
    assert!(build_ilp(s, &traffic, &low_dot).is_err());
    let low_m = SystemParams { m_big: 50, ..sc.params.clone() };
    assert!(build_ilp(s, &traffic, &low_m).is_err());
    let low_bar = SystemParams { m_bar: Some(6), ..sc.params.clone() };
    assert!(build_railp(s, &traffic, &low_bar).is_err());
}

fn golden_state() -> (ScenarioState, TrafficProfile, SystemParams) {
    let nodes: Arc<[Node]> = Arc::from(vec![Node::satellite("n"), Node::satellite("a"), Node::antenna("g", "gs")]);
    let state = ScenarioState::from_edges(1, 2, nodes, &[(0, 1), (1, 2)]).unwrap();
    let traffic = TrafficProfile::from_rates(&state, vec![vec![1, 0], vec![1, 1], vec![0, 0]]).unwrap();
    let params = SystemParams {
        l_min: 1,
        b_max: 4,
        c_ss: 2,
        c_sg: 2,
        m_big: 3,
        m_dot: 3,
        ..SystemParams::test_scenario()
    };
    (state, traffic, params)
}

fn golden(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn lp_text_is_stable() {
    let (s, f, p) = golden_state();
    assert_eq!(lp_string(&build_ilp(&s, &f, &p).unwrap()), golden("relay_ilp.lp"));
    assert_eq!(lp_string(&build_railp(&s, &f, &p).unwrap()), golden("relay_railp.lp"));
}

#[test]
fn exported_models_parse() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(4);
    let traffic = sc.traffic_for(&s);
    for m in [build_ilp(&s, &traffic, &sc.params).unwrap(), build_railp(&s, &traffic, &sc.params).unwrap()] {
        let text = lp_string(&m);
        let (kinds, rows, used) = read_lp(&text).unwrap();
        assert_eq!(kinds.len(), m.variables().len());
        assert_eq!(rows.len(), m.constraints.len());
        assert_eq!(rows.iter().collect::<BTreeSet<_>>().len(), rows.len(), "duplicate row names");
        assert!(used.iter().all(|v| kinds.contains_key(v)), "undeclared variable");
        for v in m.variables() {
            let want = if v.kind == VarKind::Binary { "binary" } else { "general" };
            assert_eq!(kinds[&v.name], want);
        }
        assert!(text.lines().all(|l| l.len() < 510));
    }
}

#[test]
fn solution_text_round_trips() {
    let sc = test_scenario();
    let s = sc.states[0].with_slots(4);
    let traffic = sc.traffic_for(&s);
    let m = build_railp(&s, &traffic, &sc.params).unwrap();
    let sol = solve_branch_and_bound(&m, Duration::from_secs(60)).unwrap();
    let mut text = format!("Objective value = {}\n# comment\n", sol.objective_value);
    for (k, v) in &sol.assignment {
        text.push_str(&format!("{k} {v}.0000000001\n"));
    }
    let back = parse_solution(&text).unwrap();
    assert_eq!(back, sol.assignment);
    assert_eq!(m.objective_value(&back).unwrap(), sol.objective_value);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sol.txt");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(import_solution(&path).unwrap(), sol.assignment);
    std::fs::write(&path, "x_1_2_1 0.5\n").unwrap();
    assert!(matches!(import_solution(&path), Err(gnsstopo::Error::Parse { .. })));
    assert!(parse_solution("x 1\nx 1\n").is_err());
    assert!(parse_solution("x 1 2\n").is_err());
    assert!(m.values(&BTreeMap::from([("nope".to_string(), 1)])).is_err());
}

#[test]
fn numbers_print_compactly() {
    assert_eq!(format_number(3.0), "3");
    assert_eq!(format_number(-25.0), "-25");
    assert_eq!(format_number(0.5), "0.5");
    assert_eq!(format_number(2.0 / 3.0), "0.666666666667");
}

#[test]
#[ignore]
fn regenerate_golden_files() {
    let (s, f, p) = golden_state();
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    std::fs::write(dir.join("relay_ilp.lp"), lp_string(&build_ilp(&s, &f, &p).unwrap())).unwrap();
    std::fs::write(dir.join("relay_railp.lp"), lp_string(&build_railp(&s, &f, &p).unwrap())).unwrap();
}
