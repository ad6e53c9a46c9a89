//! Routing-agnostic delay model.
//!
//! A row of an access pattern marks the slots in which a satellite can
//! move data one hop closer to the ground. Data generated during a run of
//! `k` slots without access waits `k, k-1, ..., 1` slots, so a row's delay
//! is the sum of `k(k+1)/2` over its zero runs. Multiplying the row by the
//! probe matrices `P(1)..P(T)` turns every zero window into a zero entry,
//! and the same sum appears as the count of zero entries. The model
//! maximizes nonzero entries through binary indicators.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilp::{l_name, x_name};
use crate::model::{Formulation, IlpModel, IlpSolution, LinExpr, ModelSource, ObjSense, Sense, VarId};
use crate::scenario::{ScenarioState, SystemParams, TrafficProfile};
use crate::topology::TopologySchedule;

/// `T x (T - t + 1)` binary matrix; column `c` has ones in rows
/// `c..c+t-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeMatrix {
    pub t: usize,
    pub slots: usize,
    pub p: Vec<Vec<u8>>,
}

pub fn probe_matrix(t: usize, slots: usize) -> Result<ProbeMatrix> {
    if t == 0 || t > slots {
        return Err(Error::invalid(format!("probe length {t} outside 1..={slots}")));
    }
    let cols = slots - t + 1;
    let p = (0..slots)
        .map(|r| (0..cols).map(|c| u8::from(r >= c && r < c + t)).collect())
        .collect();
    Ok(ProbeMatrix { t, slots, p })
}

impl ProbeMatrix {
    pub fn cols(&self) -> usize {
        self.slots - self.t + 1
    }

    /// `row * P`.
    pub fn apply(&self, row: &[u8]) -> Vec<u32> {
        (0..self.cols())
            .map(|c| (0..self.slots).map(|r| u32::from(row[r]) * u32::from(self.p[r][c])).sum())
            .collect()
    }
}

/// Per-slot wait until the next access, counting a virtual access at slot
/// `T + 1`.
pub fn zero_run_delay(row: &[u8]) -> Vec<u32> {
    let mut out = vec![0; row.len()];
    let mut next = 0u32;
    for (t, &a) in row.iter().enumerate().rev() {
        next = if a == 1 { 0 } else { next + 1 };
        out[t] = next;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    NonAnchorToAnchor,
    AnchorToGs,
}

/// Binary access pattern; `rows[k]` is the node of pattern row `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessPattern {
    pub kind: PatternKind,
    pub rows: Vec<usize>,
    pub pattern: Vec<Vec<u8>>,
}

impl AccessPattern {
    pub fn from_schedule(x: &TopologySchedule, state: &ScenarioState, kind: PatternKind) -> Self {
        let rows: Vec<usize> = match kind {
            PatternKind::NonAnchorToAnchor => state.non_anchors().to_vec(),
            PatternKind::AnchorToGs => state.anchors().to_vec(),
        };
        let pattern = rows
            .iter()
            .map(|&i| {
                (0..state.slots)
                    .map(|t| {
                        let hit = match x.partner(i, t) {
                            Some(j) => match kind {
                                PatternKind::NonAnchorToAnchor => state.is_anchor(j),
                                PatternKind::AnchorToGs => !state.is_satellite(j),
                            },
                            None => false,
                        };
                        u8::from(hit)
                    })
                    .collect()
            })
            .collect();
        AccessPattern { kind, rows, pattern }
    }

    pub fn single_row(row: Vec<u8>) -> Self {
        AccessPattern {
            kind: PatternKind::NonAnchorToAnchor,
            rows: vec![0],
            pattern: vec![row],
        }
    }
}

/// Zero entries across `pattern * P(t)` for `t = 1..=T`, by direct matrix
/// products.
pub fn count_probe_zeros(pattern: &AccessPattern) -> u64 {
    let slots = pattern.pattern.first().map_or(0, Vec::len);
    let mut zeros = 0;
    for t in 1..=slots {
        let p = probe_matrix(t, slots).expect("t in range");
        for row in &pattern.pattern {
            zeros += p.apply(row).iter().filter(|&&v| v == 0).count() as u64;
        }
    }
    zeros
}

/// Per-row zero counts, `sum over zero runs of k(k+1)/2`.
pub fn row_zero_counts(pattern: &AccessPattern) -> Vec<u64> {
    pattern
        .pattern
        .iter()
        .map(|row| zero_run_delay(row).iter().map(|&d| u64::from(d)).sum())
        .collect()
}

pub fn delta_name(t: usize, i: usize, c: usize) -> String {
    format!("dn_{}_{}_{}", t, i + 1, c + 1)
}

pub fn lambda_name(t: usize, i: usize, c: usize) -> String {
    format!("dg_{}_{}_{}", t, i + 1, c + 1)
}

/// Row weight `gamma * f_i` for non-anchors, `(1 - gamma) * f_i` for
/// anchors, with `f_i` the slot-1 rate.
pub fn row_weight(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams, i: usize) -> f64 {
    let f = traffic.first_slot_rate(i) as f64;
    if state.is_anchor(i) {
        (1.0 - params.gamma) * f
    } else {
        params.gamma * f
    }
}

/// Builds the routing-agnostic model, maximizing
/// `gamma * sum f_i * nonzeros(Delta_i) + (1 - gamma) * sum f_a * nonzeros(Lambda_a)`.
/// Names: `dn_t_i_c` and `dg_t_i_c` for probe length `t`, row node `i`
/// and window start `c` (1-based).
pub fn build_railp(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> Result<IlpModel> {
    params.validate_for(state.slots)?;
    if !traffic.is_slot_uniform() {
        warn!(
            "state {}: traffic varies across slots; row weights use slot-1 rates",
            state.index
        );
    }
    let n = state.node_count();
    let big_t = state.slots;
    let mut m = IlpModel::new(format!("railp_state_{}", state.index), ObjSense::Maximize);

    let mut x = vec![vec![Vec::new(); n]; n];
    for &(i, j) in state.edges() {
        let ids: Vec<VarId> = (0..big_t).map(|t| m.binary(x_name(i, j, t))).collect();
        x[i][j] = ids.clone();
        x[j][i] = ids;
    }
    for i in 0..n {
        if state.neighbors(i).next().is_none() {
            continue;
        }
        for t in 0..big_t {
            let mut e = LinExpr::new();
            for j in state.neighbors(i) {
                e.add(x[i][j][t], 1.0);
            }
            m.constrain(format!("deg_{}_{}", i + 1, t + 1), e, Sense::Le, 1.0);
        }
    }
    let mut l_of = vec![Vec::new(); n];
    for (i, j) in state.satellite_edges() {
        let l = m.binary(l_name(i, j));
        let mut lo = LinExpr::new().with(l, 1.0);
        let mut hi = LinExpr::new().with(l, -(params.m_dot as f64));
        for t in 0..big_t {
            lo.add(x[i][j][t], -1.0);
            hi.add(x[i][j][t], 1.0);
        }
        m.constrain(format!("lnk_lo_{}_{}", i + 1, j + 1), lo, Sense::Le, 0.0);
        m.constrain(format!("lnk_hi_{}_{}", i + 1, j + 1), hi, Sense::Le, 0.0);
        l_of[i].push(l);
        l_of[j].push(l);
    }
    for i in state.satellites() {
        let mut e = LinExpr::new();
        for &l in &l_of[i] {
            e.add(l, 1.0);
        }
        m.constrain(format!("rng_{}", i + 1), e, Sense::Ge, params.l_min as f64);
    }

    for (rows, anchor_rows) in [(state.non_anchors(), false), (state.anchors(), true)] {
        let big_m = if anchor_rows {
            params.m_tilde_for(big_t)
        } else {
            params.m_bar_for(big_t)
        } as f64;
        for &i in rows {
            // Access expression per slot: links to anchors (non-anchor rows)
            // or to antennas (anchor rows).
            let access: Vec<Vec<VarId>> = (0..big_t)
                .map(|s| {
                    state
                        .neighbors(i)
                        .filter(|&j| if anchor_rows { !state.is_satellite(j) } else { state.is_anchor(j) })
                        .map(|j| x[i][j][s])
                        .collect()
                })
                .collect();
            let w = row_weight(state, traffic, params, i);
            for t in 1..=big_t {
                for c in 0..=big_t - t {
                    let name = if anchor_rows { lambda_name(t, i, c) } else { delta_name(t, i, c) };
                    let d = m.binary(name);
                    if w != 0.0 {
                        m.objective.add(d, w);
                    }
                    let mut window = LinExpr::new();
                    for s in c..c + t {
                        for &v in &access[s] {
                            window.add(v, 1.0);
                        }
                    }
                    let tag = format!("{}_{}_{}", t, i + 1, c + 1);
                    let prefix = if anchor_rows { "pg" } else { "pn" };
                    let mut lo = window.clone();
                    lo.terms.iter_mut().for_each(|term| term.1 = -1.0);
                    m.constrain(format!("{prefix}_lo_{tag}"), lo.with(d, 1.0), Sense::Le, 0.0);
                    m.constrain(format!("{prefix}_hi_{tag}"), window.with(d, -big_m), Sense::Le, 0.0);
                }
            }
        }
    }

    m.source = Some(ModelSource {
        formulation: Formulation::RoutingAgnostic,
        state: state.clone(),
        traffic: traffic.clone(),
        params: params.clone(),
    });
    Ok(m)
}

/// Upper bound on the objective: every indicator set.
pub fn objective_ceiling(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> f64 {
    let per_row = (state.slots * (state.slots + 1) / 2) as f64;
    state
        .satellites()
        .map(|i| row_weight(state, traffic, params, i) * per_row)
        .sum()
}

/// Reads the topology out of a solution of either model. Each `x` name may
/// appear as `x_i_j_t` or `x_j_i_t`; conflicting values are rejected.
pub fn extract_topology(solution: &IlpSolution, state: &ScenarioState) -> Result<TopologySchedule> {
    if !solution.has_point() {
        return Err(Error::Infeasible(format!("state {} has no feasible solution", state.index)));
    }
    schedule_from_assignment(&solution.assignment, state)
}

pub fn schedule_from_assignment(assignment: &BTreeMap<String, i64>, state: &ScenarioState) -> Result<TopologySchedule> {
    let n = state.node_count();
    let mut x = TopologySchedule::empty(n, state.slots);
    let mut seen: BTreeMap<(usize, usize, usize), (i64, String)> = BTreeMap::new();
    for (name, &val) in assignment {
        let Some(rest) = name.strip_prefix("x_") else { continue };
        let parts: Vec<usize> = rest.split('_').filter_map(|p| p.parse().ok()).collect();
        let [i, j, t] = parts[..] else {
            return Err(Error::invalid(format!("malformed link variable `{name}`")));
        };
        if i == 0 || j == 0 || t == 0 || i > n || j > n || t > state.slots {
            return Err(Error::invalid(format!("link variable `{name}` out of range")));
        }
        let key = (i.min(j) - 1, i.max(j) - 1, t - 1);
        if let Some((prev, prev_name)) = seen.get(&key) {
            if *prev != val {
                return Err(Error::invalid(format!(
                    "asymmetric link values for pair ({}, {}) in slot {t}: {prev_name} = {prev}, {name} = {val}",
                    key.0 + 1,
                    key.1 + 1
                )));
            }
        }
        seen.insert(key, (val, name.clone()));
        if !(0..=1).contains(&val) {
            return Err(Error::invalid(format!("link variable `{name}` = {val} is not binary")));
        }
        if val == 1 {
            x.link(key.0, key.1, key.2);
        }
    }
    Ok(x)
}
