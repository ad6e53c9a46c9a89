//! Slot-by-slot matching heuristic.
//!
//! Every slot, each visible pair gets weight `eta * w_c + (1 - eta) * w_r`,
//! where `w_c` rewards moving traffic toward the ground and `w_r` rewards
//! new ranging partners for satellites that still need them. A maximum
//! weight matching is scheduled, then node weights are advanced as if the
//! traffic had moved along it.
//!
//! Slots are 0-based here: slot `t` has `T - t` slots remaining, itself
//! included.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::{tiebroken_matching, MatchingMode};
use crate::scenario::{EdgeClass, ScenarioState, SystemParams, TrafficProfile};
use crate::topology::TopologySchedule;

/// Satellite pairs linked so far in the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangingHistory {
    linked: Vec<Vec<bool>>,
    partners: Vec<usize>,
}

impl RangingHistory {
    pub fn new(n: usize) -> Self {
        RangingHistory {
            linked: vec![vec![false; n]; n],
            partners: vec![0; n],
        }
    }

    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.linked[i][j]
    }

    pub fn partners(&self, i: usize) -> usize {
        self.partners[i]
    }

    /// Records slot links; only satellite pairs count.
    pub fn record(&mut self, state: &ScenarioState, links: &[(usize, usize)]) {
        for &(i, j) in links {
            if state.is_satellite(i) && state.is_satellite(j) && !self.linked[i][j] {
                self.linked[i][j] = true;
                self.linked[j][i] = true;
                self.partners[i] += 1;
                self.partners[j] += 1;
            }
        }
    }
}

/// Communication weight. For `Na` edges `rho_i` belongs to the non-anchor,
/// for `Ag` edges to the anchor.
pub fn comm_weight(class: EdgeClass, rho_i: f64, rho_j: f64, q: f64) -> f64 {
    match class {
        EdgeClass::Na => rho_i - rho_j,
        EdgeClass::Ag => rho_i,
        EdgeClass::Nn | EdgeClass::Aa => -q,
    }
}

/// One endpoint's ranging urgency: `beta * (need / remaining)^alpha` for a
/// partner not yet linked, zero otherwise.
pub fn ranging_urgency(
    partners: usize,
    already_linked: bool,
    l_min: usize,
    remaining: usize,
    alpha: f64,
    beta: f64,
) -> f64 {
    let need = l_min.saturating_sub(partners);
    if already_linked || need == 0 {
        return 0.0;
    }
    beta * (need as f64 / remaining as f64).powf(alpha)
}

/// Ranging weight of a visible pair in slot `t`: the mean of both
/// endpoints' urgencies, zero for ground links.
pub fn ranging_weight(
    state: &ScenarioState,
    i: usize,
    j: usize,
    history: &RangingHistory,
    params: &SystemParams,
    t: usize,
) -> Result<f64> {
    if t >= state.slots {
        return Err(Error::invalid(format!("slot {} outside 1..={}", t + 1, state.slots)));
    }
    let class = state
        .edge_class(i, j)
        .ok_or_else(|| Error::invalid(format!("({}, {}) is not a visible pair", i + 1, j + 1)))?;
    if class == EdgeClass::Ag {
        return Ok(0.0);
    }
    let remaining = state.slots - t;
    let linked = history.linked(i, j);
    let side = |a: usize| ranging_urgency(history.partners(a), linked, params.l_min, remaining, params.alpha, params.beta);
    Ok((side(i) + side(j)) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedEdge {
    pub i: usize,
    pub j: usize,
    pub class: EdgeClass,
    pub comm: f64,
    pub ranging: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSlotGraph {
    pub slot: usize,
    pub n: usize,
    pub rho: Vec<f64>,
    pub edges: Vec<WeightedEdge>,
}

impl WeightedSlotGraph {
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = (i.min(j), i.max(j));
        self.edges.iter().find(|e| e.i == i && e.j == j).map(|e| e.weight)
    }
}

/// Weights every visible pair for slot `t`.
pub fn slot_graph(
    state: &ScenarioState,
    rho: &[f64],
    history: &RangingHistory,
    params: &SystemParams,
    t: usize,
) -> Result<WeightedSlotGraph> {
    let mut edges = Vec::with_capacity(state.edges().len());
    for &(i, j) in state.edges() {
        let class = state
            .edge_class(i, j)
            .ok_or_else(|| Error::invalid(format!("unclassified pair ({}, {})", i + 1, j + 1)))?;
        // Orient so the first argument is the non-anchor (Na) or the
        // satellite (Ag).
        let (a, b) = match class {
            EdgeClass::Na if state.is_anchor(i) => (j, i),
            EdgeClass::Ag if !state.is_satellite(i) => (j, i),
            _ => (i, j),
        };
        let comm = comm_weight(class, rho[a], rho[b], params.q);
        let ranging = ranging_weight(state, i, j, history, params, t)?;
        edges.push(WeightedEdge {
            i,
            j,
            class,
            comm,
            ranging,
            weight: params.eta * comm + (1.0 - params.eta) * ranging,
        });
    }
    Ok(WeightedSlotGraph {
        slot: t,
        n: state.node_count(),
        rho: rho.to_vec(),
        edges,
    })
}

/// Maximum-weight matching of a weighted slot graph. Perfect matchings are
/// preferred unless `mode` is `MaxWeight`.
pub fn slot_matching(graph: &WeightedSlotGraph, mode: MatchingMode) -> Vec<(usize, usize)> {
    let edges: Vec<_> = graph.edges.iter().map(|e| (e.i, e.j, e.weight)).collect();
    tiebroken_matching(graph.n, &edges, mode)
}

/// Initial node weights: slot-1 traffic for satellites, zero for antennas.
pub fn initial_weights(state: &ScenarioState, traffic: &TrafficProfile) -> Vec<f64> {
    (0..state.node_count())
        .map(|i| if state.is_satellite(i) && state.slots > 0 { traffic.rate(i, 0) as f64 } else { 0.0 })
        .collect()
}

/// Advances node weights across the links of slot `t`, adding the traffic
/// of slot `t + 1`. Both ends of a link read the pre-update weights.
pub fn update_node_weights(
    state: &ScenarioState,
    rho: &[f64],
    matching: &[(usize, usize)],
    traffic: &TrafficProfile,
    t: usize,
    params: &SystemParams,
) -> Result<Vec<f64>> {
    let n = state.node_count();
    let mut partner = vec![None; n];
    for &(i, j) in matching {
        if !state.visible(i, j) {
            return Err(Error::invalid(format!("matched pair ({}, {}) is not visible", i + 1, j + 1)));
        }
        for (a, b) in [(i, j), (j, i)] {
            if partner[a].replace(b).is_some() {
                return Err(Error::invalid(format!("node {} matched twice", a + 1)));
            }
        }
    }
    let (c_ss, c_sg) = (params.c_ss as f64, params.c_sg as f64);
    let next = t + 1;
    let mut out = vec![0.0; n];
    for i in state.satellites() {
        let f = if next < state.slots { traffic.rate(i, next) as f64 } else { 0.0 };
        let r = rho[i];
        out[i] = f + match partner[i] {
            None => r,
            Some(j) => match state.edge_class(i, j).expect("visible pair") {
                EdgeClass::Na if state.is_anchor(i) => r + rho[j].min(c_ss),
                EdgeClass::Na => (r - c_ss).max(0.0),
                EdgeClass::Ag => (r - c_sg).max(0.0),
                EdgeClass::Nn | EdgeClass::Aa => r,
            },
        };
    }
    Ok(out)
}

/// Per-slot record of a heuristic run.
#[derive(Debug, Clone, Serialize)]
pub struct HmwmSlot {
    pub graph: WeightedSlotGraph,
    pub matching: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HmwmTrace {
    pub slots: Vec<HmwmSlot>,
}

impl HmwmTrace {
    pub fn schedule(&self, n: usize) -> TopologySchedule {
        let m: Vec<_> = self.slots.iter().map(|s| s.matching.clone()).collect();
        TopologySchedule::from_matchings(n, &m)
    }
}

pub fn trace_state_hmwm(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> Result<HmwmTrace> {
    let mode = if params.perfect_matching {
        MatchingMode::MaxCardinality
    } else {
        MatchingMode::MaxWeight
    };
    let mut rho = initial_weights(state, traffic);
    let mut history = RangingHistory::new(state.node_count());
    let mut slots = Vec::with_capacity(state.slots);
    for t in 0..state.slots {
        let graph = slot_graph(state, &rho, &history, params, t)?;
        let matching = slot_matching(&graph, mode);
        history.record(state, &matching);
        rho = update_node_weights(state, &rho, &matching, traffic, t, params)?;
        slots.push(HmwmSlot { graph, matching });
    }
    Ok(HmwmTrace { slots })
}

/// Heuristic schedule for one state. Ranging may still fail for unsuitable
/// weights; audit the result.
pub fn schedule_state_hmwm(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> Result<TopologySchedule> {
    Ok(trace_state_hmwm(state, traffic, params)?.schedule(state.node_count()))
}
