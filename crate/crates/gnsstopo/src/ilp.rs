//! Routing-aware delay model: topology, ranging, per-flow routing and
//! buffers, minimizing the age-weighted buffered volume.
//!
//! Variable names use 1-based node, slot and flow numbers:
//! `x_i_j_t` (i < j), `l_i_j` (i < j), `r_f_i_j_t` (directed arc i -> j),
//! `b_f_i_t`. Flow `f` is the f-th entry of [`TrafficProfile::flows`].

use crate::model::{Formulation, IlpModel, LinExpr, ModelSource, ObjSense, Sense, VarId};
use crate::scenario::{EdgeClass, Flow, ScenarioState, SystemParams, TrafficProfile};
use crate::Result;

pub fn x_name(i: usize, j: usize, t: usize) -> String {
    let (a, b) = (i.min(j), i.max(j));
    format!("x_{}_{}_{}", a + 1, b + 1, t + 1)
}

pub fn l_name(i: usize, j: usize) -> String {
    let (a, b) = (i.min(j), i.max(j));
    format!("l_{}_{}", a + 1, b + 1)
}

pub fn r_name(f: usize, i: usize, j: usize, t: usize) -> String {
    format!("r_{}_{}_{}_{}", f + 1, i + 1, j + 1, t + 1)
}

pub fn b_name(f: usize, i: usize, t: usize) -> String {
    format!("b_{}_{}_{}", f + 1, i + 1, t + 1)
}

/// Kind of a directed arc allowed to carry variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    /// Non-anchor to anchor, capacity C_ss.
    Access,
    /// Anchor to antenna, capacity C_sg.
    Downlink,
    /// Non-anchor to non-anchor or anchor to anchor; pinned to zero.
    Forbidden,
}

/// Directed arcs out of satellite `i` that may carry flow.
pub fn arcs_from(state: &ScenarioState, i: usize) -> Vec<(usize, ArcKind)> {
    if !state.is_satellite(i) {
        return Vec::new();
    }
    state
        .neighbors(i)
        .filter_map(|j| match state.edge_class(i, j)? {
            EdgeClass::Na if !state.is_anchor(i) => Some((j, ArcKind::Access)),
            EdgeClass::Na => None,
            EdgeClass::Ag => Some((j, ArcKind::Downlink)),
            EdgeClass::Nn | EdgeClass::Aa => Some((j, ArcKind::Forbidden)),
        })
        .collect()
}

/// Satellites that can ever hold packets of a flow from `src`: the source,
/// plus every anchor when the source is a non-anchor.
pub fn holders(state: &ScenarioState, src: usize) -> Vec<usize> {
    let mut out = vec![src];
    if !state.is_anchor(src) {
        out.extend(state.anchors().iter().copied());
    }
    out
}

/// Builds the routing-aware model. Big-M values come from `params`; use
/// [`SystemParams::tightened`] for the smallest safe values.
pub fn build_ilp(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> Result<IlpModel> {
    params.validate_for(state.slots)?;
    let n = state.node_count();
    let big_t = state.slots;
    let mut m = IlpModel::new(format!("ilp_state_{}", state.index), ObjSense::Minimize);

    // Topology and ranging.
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

    // Routing and buffers.
    let flows = traffic.flows();
    let arcs: Vec<Vec<(usize, ArcKind)>> = (0..n).map(|i| arcs_from(state, i)).collect();
    // Per (i, j, t): routing variables of every flow on that arc.
    let mut on_arc: Vec<Vec<Vec<Vec<VarId>>>> = vec![vec![vec![Vec::new(); big_t]; n]; n];
    // Per (i, t): buffer variables of every flow.
    let mut in_buf: Vec<Vec<Vec<(VarId, f64)>>> = vec![vec![Vec::new(); big_t]; n];
    for (f, &Flow { src, st, packets }) in flows.iter().enumerate() {
        let hold = holders(state, src);
        let mut r_ids = vec![vec![Vec::new(); big_t]; n];
        let mut r_in = vec![vec![Vec::new(); big_t]; n];
        let mut b_ids = vec![vec![None; big_t]; n];
        for &i in &hold {
            for t in st..big_t {
                for &(j, _) in &arcs[i] {
                    let r = m.integer(r_name(f, i, j, t), None);
                    r_ids[i][t].push(r);
                    r_in[j][t].push(r);
                    on_arc[i][j][t].push(r);
                }
                let b = m.integer(b_name(f, i, t), None);
                b_ids[i][t] = Some(b);
                let age = (t - st) as f64;
                if age > 0.0 {
                    m.objective.add(b, age);
                }
                in_buf[i][t].push((b, 1.0));
            }
        }
        for &i in &hold {
            for t in st..big_t {
                let mut e = LinExpr::new();
                for &r in &r_ids[i][t] {
                    e.add(r, 1.0);
                }
                e.add(b_ids[i][t].expect("buffer variable"), 1.0);
                if i == src && t == st {
                    m.constrain(format!("src_{}", f + 1), e, Sense::Eq, packets as f64);
                    continue;
                }
                for &r in &r_in[i][t] {
                    e.add(r, -1.0);
                }
                if t > st {
                    e.add(b_ids[i][t - 1].expect("buffer variable"), -1.0);
                }
                m.constrain(format!("bal_{}_{}_{}", f + 1, i + 1, t + 1), e, Sense::Eq, 0.0);
            }
        }
    }
    for i in state.satellites() {
        for t in 0..big_t {
            if in_buf[i][t].is_empty() {
                continue;
            }
            let e = LinExpr {
                terms: in_buf[i][t].clone(),
            };
            m.constrain(format!("buf_{}_{}", i + 1, t + 1), e, Sense::Le, params.b_max as f64);
        }
    }
    for i in 0..n {
        for &(j, kind) in &arcs[i] {
            for t in 0..big_t {
                let vars = &on_arc[i][j][t];
                if vars.is_empty() {
                    continue;
                }
                let sum = LinExpr {
                    terms: vars.iter().map(|&r| (r, 1.0)).collect(),
                };
                let tag = format!("{}_{}_{}", i + 1, j + 1, t + 1);
                match kind {
                    ArcKind::Access => m.constrain(format!("cap_{tag}"), sum.clone(), Sense::Le, params.c_ss as f64),
                    ArcKind::Downlink => m.constrain(format!("cap_{tag}"), sum.clone(), Sense::Le, params.c_sg as f64),
                    ArcKind::Forbidden => m.constrain(format!("nor_{tag}"), sum.clone(), Sense::Eq, 0.0),
                }
                let en = sum.with(x[i][j][t], -(params.m_big as f64));
                m.constrain(format!("en_{tag}"), en, Sense::Le, 0.0);
            }
        }
    }

    m.source = Some(ModelSource {
        formulation: Formulation::RoutingAware,
        state: state.clone(),
        traffic: traffic.clone(),
        params: params.clone(),
    });
    Ok(m)
}
