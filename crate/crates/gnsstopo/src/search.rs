//! Exact branch-and-bound over per-slot matchings.
//!
//! Once the topology is fixed both delay models are determined: the
//! routing-aware model by oldest-first forwarding along n -> a -> g, the
//! routing-agnostic model by the zero runs of its access patterns. The
//! search therefore picks one matching per slot, in slot order, and
//! scores each prefix incrementally. Optimality is relative to oldest-first
//! forwarding; the exported LP admits routings that hold packets back,
//! which an external solver may exploit.
//!
//! Pruning: ranging feasibility of the remaining slots, an admissible
//! bound on cost still to come, and a memo of the best cost seen for each
//! (slot, buffers or open runs, unmet ranging) state.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::time::{Duration, Instant};

use log::debug;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::forwarding::{Forwarder, Queue};
use crate::hmwm::schedule_state_hmwm;
use crate::ilp::{b_name, l_name, r_name, x_name};
use crate::matching::{max_weight_matching, MatchingMode, WEIGHT_SCALE};
use crate::model::{Formulation, IlpModel, IlpSolution, SearchStats, SolveStatus, TOLERANCE};
use crate::railp::{delta_name, lambda_name, row_weight};
use crate::scenario::{EdgeClass, ScenarioState, SystemParams, TrafficProfile};
use crate::topology::TopologySchedule;

pub const DEFAULT_TIME_BUDGET: Duration = Duration::from_secs(300);

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub time_budget: Duration,
    /// Memo entries kept; zero disables memoization.
    pub memo_limit: usize,
    /// Seed the incumbent with the heuristic schedule.
    pub heuristic_warm_start: bool,
    pub warm_starts: Vec<TopologySchedule>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            time_budget: DEFAULT_TIME_BUDGET,
            memo_limit: 1 << 21,
            heuristic_warm_start: true,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: IlpSolution,
    pub schedule: Option<TopologySchedule>,
}

/// Solves a model built by `build_ilp` or `build_railp`.
pub fn solve_branch_and_bound(model: &IlpModel, time_budget: Duration) -> Result<IlpSolution> {
    let opts = SearchOptions {
        time_budget,
        ..SearchOptions::default()
    };
    Ok(solve(model, &opts)?.solution)
}

pub fn solve(model: &IlpModel, opts: &SearchOptions) -> Result<Solved> {
    let src = model
        .source
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("model `{}` was not built from a scenario state", model.name)))?;
    let (state, traffic, params) = (&src.state, &src.traffic, &src.params);
    let solved = match src.formulation {
        Formulation::RoutingAware => {
            let eval = RoutingAware::new(state, traffic, params);
            run_search(&eval, state, traffic, params, opts)?
        }
        Formulation::RoutingAgnostic => {
            let eval = RoutingAgnostic::new(state, traffic, params);
            run_search(&eval, state, traffic, params, opts)?
        }
    };
    let Some(x) = solved.schedule else {
        return Ok(Solved {
            solution: solved.solution,
            schedule: None,
        });
    };
    let (assignment, objective) = match src.formulation {
        Formulation::RoutingAware => routing_assignment(state, traffic, params, &x)?
            .ok_or_else(|| Error::invalid("incumbent overflows a buffer under oldest-first forwarding"))?,
        Formulation::RoutingAgnostic => railp_assignment(state, traffic, params, &x),
    };
    let bad = model.violations(&assignment)?;
    if let Some(first) = bad.first() {
        return Err(Error::invalid(format!(
            "solver assignment violates {} rows or bounds, first: {first}",
            bad.len()
        )));
    }
    let mut solution = solved.solution;
    debug_assert!((model.objective_value(&assignment)? - objective).abs() < 1e-6);
    solution.objective_value = objective;
    solution.assignment = assignment;
    Ok(Solved {
        solution,
        schedule: Some(x),
    })
}

/// Every matching of the state's visibility graph, the empty one included,
/// each sorted, in lexicographic order.
pub fn slot_matchings(state: &ScenarioState) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        edges: &[(usize, usize)],
        k: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        out.push(cur.clone());
        for e in k..edges.len() {
            let (i, j) = edges[e];
            if used[i] || used[j] {
                continue;
            }
            used[i] = true;
            used[j] = true;
            cur.push((i, j));
            rec(edges, e + 1, used, cur, out);
            cur.pop();
            used[i] = false;
            used[j] = false;
        }
    }
    let mut out = Vec::new();
    rec(
        state.edges(),
        0,
        &mut vec![false; state.node_count()],
        &mut Vec::new(),
        &mut out,
    );
    out
}

/// Matchings kept for branching. An edge whose addition can never raise
/// the cost makes any matching that leaves both its endpoints free
/// redundant.
fn candidates(state: &ScenarioState, always_safe: impl Fn(usize, usize) -> bool) -> Vec<Vec<(usize, usize)>> {
    let n = state.node_count();
    slot_matchings(state)
        .into_iter()
        .filter(|m| {
            let mut used = vec![false; n];
            for &(i, j) in m {
                used[i] = true;
                used[j] = true;
            }
            !state
                .edges()
                .iter()
                .any(|&(i, j)| !used[i] && !used[j] && always_safe(i, j))
        })
        .collect()
}

/// Incremental scoring of one delay model.
trait DelayModel {
    type Node: Clone;
    type Key: Hash + Eq;
    /// A matching precompiled for `advance`.
    type Move;
    fn slots(&self) -> usize;
    fn root(&self) -> Self::Node;
    fn compile(&self, links: &[(usize, usize)]) -> Self::Move;
    /// Applies slot `t`; `None` when the prefix is infeasible.
    fn advance(&self, node: &Self::Node, t: usize, mv: &Self::Move) -> Option<(Self::Node, f64)>;
    /// Cost charged when the horizon closes.
    fn finish(&self, node: &Self::Node) -> f64;
    /// Admissible bound on all cost still to come from slot `next` on,
    /// `finish` included.
    fn bound(&self, node: &Self::Node, next: usize) -> f64;
    fn key(&self, node: &Self::Node) -> Self::Key;
    fn candidates(&self) -> Vec<Vec<(usize, usize)>>;
    /// Bitmask of everything in `links` that moves data or access; two
    /// matchings with equal effect act identically on the node.
    fn effect(&self, links: &[(usize, usize)]) -> Option<u128>;
    /// Maps an internal cost to the model's objective.
    fn objective(&self, cost: f64) -> f64 {
        cost
    }
}

/// Most anchor-antenna links usable in one slot.
fn ground_pairs(state: &ScenarioState) -> usize {
    let ag: Vec<(usize, usize, i64)> = state
        .edges()
        .iter()
        .filter(|&&(i, j)| state.edge_class(i, j) == Some(EdgeClass::Ag))
        .map(|&(i, j)| (i, j, 1))
        .collect();
    max_weight_matching(state.node_count(), &ag, MatchingMode::MaxCardinality)
        .iter()
        .filter(|m| m.is_some())
        .count()
        / 2
}

/// Routing-aware cost: age-weighted buffered volume at the end of each
/// slot under oldest-first forwarding. A prefix that overflows a buffer is
/// infeasible.
struct RoutingAware<'a> {
    state: &'a ScenarioState,
    traffic: &'a TrafficProfile,
    params: &'a SystemParams,
    fwd: Forwarder<'a>,
    /// Most packets deliverable to the ground per slot.
    downlink: u64,
}

impl<'a> RoutingAware<'a> {
    fn new(state: &'a ScenarioState, traffic: &'a TrafficProfile, params: &'a SystemParams) -> Self {
        RoutingAware {
            state,
            traffic,
            params,
            fwd: Forwarder::new(state, params),
            downlink: ground_pairs(state) as u64 * params.c_sg,
        }
    }

    /// Whether some buffer could ever exceed B_max.
    fn buffers_can_bind(&self) -> bool {
        self.traffic.total() > self.params.b_max
    }
}

impl DelayModel for RoutingAware<'_> {
    type Node = Vec<Queue>;
    type Key = Vec<Queue>;
    type Move = Vec<(usize, usize)>;

    fn slots(&self) -> usize {
        self.state.slots
    }

    fn root(&self) -> Vec<Queue> {
        vec![Queue::default(); self.state.node_count()]
    }

    fn compile(&self, links: &[(usize, usize)]) -> Vec<(usize, usize)> {
        links.to_vec()
    }

    fn advance(&self, node: &Vec<Queue>, t: usize, links: &Vec<(usize, usize)>) -> Option<(Vec<Queue>, f64)> {
        let mut q = node.clone();
        let out = self.fwd.step(&mut q, links, t as u64, |i| self.traffic.rate(i, t));
        if !out.blocked.is_empty() {
            return None;
        }
        let cost: u64 = q.iter().map(|b| b.age_sum(t as u64)).sum();
        Some((q, cost as f64))
    }

    fn finish(&self, _: &Vec<Queue>) -> f64 {
        0.0
    }

    /// Pools all buffers and lets the ground take the `downlink` oldest
    /// reachable packets per slot. A packet at an anchor is reachable from
    /// the next slot, one at a non-anchor a slot later; new packets from
    /// the slot they (anchor) or the slot after they (non-anchor) appear.
    /// Serving the oldest first maximizes the saving in this relaxation.
    fn bound(&self, node: &Vec<Queue>, next: usize) -> f64 {
        let s = self.state;
        // (generated, earliest delivery slot, count)
        let mut pool: Vec<(u64, usize, u64)> = Vec::new();
        for i in s.satellites() {
            let hop = if s.is_anchor(i) { 0 } else { 1 };
            for c in node[i].chunks() {
                pool.push((c.generated, next + hop, c.count));
            }
        }
        let mut cost = 0u64;
        for t in next..s.slots {
            for i in s.satellites() {
                let f = self.traffic.rate(i, t);
                if f > 0 {
                    pool.push((t as u64, t + usize::from(!s.is_anchor(i)), f));
                }
            }
            pool.sort_unstable();
            let mut cap = self.downlink;
            for c in pool.iter_mut() {
                if cap == 0 {
                    break;
                }
                if c.1 <= t {
                    let k = c.2.min(cap);
                    c.2 -= k;
                    cap -= k;
                }
            }
            pool.retain(|c| c.2 > 0);
            cost += pool.iter().map(|c| c.2 * (t as u64 - c.0)).sum::<u64>();
        }
        cost as f64
    }

    fn key(&self, node: &Vec<Queue>) -> Vec<Queue> {
        node.clone()
    }

    fn candidates(&self) -> Vec<Vec<(usize, usize)>> {
        let loose = !self.buffers_can_bind();
        candidates(self.state, |i, j| match self.state.edge_class(i, j) {
            Some(EdgeClass::Nn | EdgeClass::Aa) => true,
            Some(EdgeClass::Ag) => loose,
            _ => false,
        })
    }

    fn effect(&self, links: &[(usize, usize)]) -> Option<u128> {
        edge_bits(self.state, links, |i, j| {
            matches!(self.state.edge_class(i, j), Some(EdgeClass::Na | EdgeClass::Ag))
        })
    }
}

/// Bits of the edges in `links` passing `keep`, by position in
/// `state.edges()`; `None` beyond 128 edges.
fn edge_bits(state: &ScenarioState, links: &[(usize, usize)], keep: impl Fn(usize, usize) -> bool) -> Option<u128> {
    if state.edges().len() > 128 {
        return None;
    }
    let mut bits = 0u128;
    for &(i, j) in links {
        if keep(i, j) {
            let k = state.edges().binary_search(&(i.min(j), i.max(j))).ok()?;
            bits |= 1 << k;
        }
    }
    Some(bits)
}

/// Routing-agnostic cost: weighted zero count of the access patterns,
/// i.e. the ceiling minus the model's objective.
struct RoutingAgnostic<'a> {
    state: &'a ScenarioState,
    /// `(node, weight)` of every weighted pattern row.
    rows: Vec<(usize, f64)>,
    /// Row has an access edge at all.
    reachable: Vec<bool>,
    /// Access grants per slot: each anchor's link gives access to one row.
    grants: usize,
    /// Anchor-row grants per slot.
    ground: usize,
    /// Least total weight of reachable rows left without access in a slot.
    idle_floor: f64,
}

impl<'a> RoutingAgnostic<'a> {
    fn new(state: &'a ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> Self {
        let rows: Vec<(usize, f64)> = state
            .satellites()
            .map(|i| (i, row_weight(state, traffic, params, i)))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        let reachable = rows
            .iter()
            .map(|&(i, _)| state.neighbors(i).any(|j| {
                if state.is_anchor(i) {
                    !state.is_satellite(j)
                } else {
                    state.is_anchor(j)
                }
            }))
            .collect();
        let mut m = RoutingAgnostic {
            state,
            rows,
            reachable,
            grants: state.anchors().len(),
            ground: ground_pairs(state),
            idle_floor: 0.0,
        };
        m.idle_floor = m.idle_floor();
        m
    }

    /// Reachable weight minus the heaviest access set one matching can
    /// serve; access edges carry the weight of the row they serve.
    fn idle_floor(&self) -> f64 {
        let n = self.state.node_count();
        let mut weight = vec![0.0; n];
        for &(i, w) in &self.rows {
            weight[i] = w;
        }
        let scaled = |w: f64| (w * WEIGHT_SCALE).round() as i64;
        let edges: Vec<(usize, usize, i64)> = self
            .state
            .edges()
            .iter()
            .filter_map(|&(i, j)| {
                let w = match self.state.edge_class(i, j)? {
                    EdgeClass::Na if self.state.is_anchor(i) => weight[j],
                    EdgeClass::Na => weight[i],
                    EdgeClass::Ag if self.state.is_satellite(i) => weight[i],
                    EdgeClass::Ag => weight[j],
                    _ => 0.0,
                };
                (w > 0.0).then(|| (i, j, scaled(w)))
            })
            .collect();
        let mate = max_weight_matching(n, &edges, MatchingMode::MaxWeight);
        let mut served = 0.0;
        for (r, &(i, w)) in self.rows.iter().enumerate() {
            if self.reachable[r] && mate[i].is_some_and(|j| self.has_access(i, Some(j))) {
                served += w;
            }
        }
        let total: f64 = self.rows.iter().zip(&self.reachable).filter(|p| *p.1).map(|p| p.0 .1).sum();
        (total - served).max(0.0)
    }

    fn has_access(&self, i: usize, partner: Option<usize>) -> bool {
        match partner {
            Some(j) if self.state.is_anchor(i) => !self.state.is_satellite(j),
            Some(j) => self.state.is_anchor(j),
            None => false,
        }
    }
}

fn run_cost(k: u32) -> f64 {
    f64::from(k * (k + 1) / 2)
}

impl DelayModel for RoutingAgnostic<'_> {
    /// Open zero-run length per weighted row.
    type Node = Vec<u32>;
    type Key = Vec<u32>;
    /// Rows with access.
    type Move = u128;

    fn slots(&self) -> usize {
        self.state.slots
    }

    fn root(&self) -> Vec<u32> {
        vec![0; self.rows.len()]
    }

    fn compile(&self, links: &[(usize, usize)]) -> u128 {
        let mut partner = vec![None; self.state.node_count()];
        for &(i, j) in links {
            partner[i] = Some(j);
            partner[j] = Some(i);
        }
        self.rows
            .iter()
            .enumerate()
            .filter(|&(_, &(i, _))| self.has_access(i, partner[i]))
            .fold(0u128, |m, (r, _)| m | 1 << r)
    }

    fn advance(&self, node: &Vec<u32>, _t: usize, access: &u128) -> Option<(Vec<u32>, f64)> {
        let mut runs = node.clone();
        let mut cost = 0.0;
        for (k, &(_, w)) in self.rows.iter().enumerate() {
            if access >> k & 1 == 1 {
                cost += w * run_cost(runs[k]);
                runs[k] = 0;
            } else {
                runs[k] += 1;
            }
        }
        Some((runs, cost))
    }

    fn finish(&self, node: &Vec<u32>) -> f64 {
        self.rows.iter().zip(node).map(|(&(_, w), &k)| w * run_cost(k)).sum()
    }

    /// Two relaxations, the larger wins. Per slot at most `grants` rows
    /// gain access, at most `ground` of them anchors. A row whose next
    /// access is `d` slots away pays at least `w * (run_cost(k) + d * (k + 1))`,
    /// and also at least `w * (run_cost(k) + d * k)` plus `w` for every future
    /// slot without access. Grants handed out by descending slope minimize
    /// each linear relaxation.
    fn bound(&self, node: &Vec<u32>, next: usize) -> f64 {
        let left = self.state.slots - next;
        let mut base = 0.0;
        // (weight, open run, is anchor); at most 64 rows.
        let mut open = [(0.0, 0.0, false); 64];
        let mut len = 0;
        for (r, &(i, w)) in self.rows.iter().enumerate() {
            let k = node[r];
            if self.reachable[r] {
                base += w * run_cost(k);
                open[len] = (w, f64::from(k), self.state.is_anchor(i));
                len += 1;
            } else {
                base += w * run_cost(k + left as u32);
            }
        }
        let open = &open[..len];
        let first_access = |slope: fn(&(f64, f64, bool)) -> f64| -> f64 {
            let mut waiting = [(0.0, false); 64];
            for (w, o) in waiting.iter_mut().zip(open) {
                *w = (slope(o), o.2);
            }
            let waiting = &mut waiting[..open.len()];
            waiting.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
            let mut granted = [false; 64];
            let mut cost = 0.0;
            for _ in 0..left {
                let (mut total, mut anchors, mut rest) = (0, 0, 0.0);
                for (k, &(s, anchor)) in waiting.iter().enumerate() {
                    if granted[k] {
                        continue;
                    }
                    if total < self.grants && !(anchor && anchors == self.ground) {
                        granted[k] = true;
                        total += 1;
                        anchors += usize::from(anchor);
                    } else {
                        rest += s;
                    }
                }
                if rest == 0.0 {
                    break;
                }
                cost += rest;
            }
            cost
        };
        let plain = first_access(|o| o.0 * (o.1 + 1.0));
        let split = first_access(|o| o.0 * o.1) + self.idle_floor * left as f64;
        base + plain.max(split)
    }

    fn key(&self, node: &Vec<u32>) -> Vec<u32> {
        node.clone()
    }

    /// Any added edge only adds access or ranging, so maximal matchings
    /// suffice.
    fn candidates(&self) -> Vec<Vec<(usize, usize)>> {
        candidates(self.state, |_, _| true)
    }

    fn effect(&self, links: &[(usize, usize)]) -> Option<u128> {
        Some(self.compile(links))
    }

    fn objective(&self, cost: f64) -> f64 {
        let per_row = run_cost(self.state.slots as u32);
        self.rows.iter().map(|&(_, w)| w * per_row).sum::<f64>() - cost
    }
}

struct Ranging {
    l_min: usize,
    sat_mask: u64,
    /// Visible satellite neighbours per node.
    vis: Vec<u64>,
}

impl Ranging {
    fn new(state: &ScenarioState, l_min: usize) -> Self {
        let n = state.node_count();
        let sat_mask = state.satellites().fold(0u64, |m, i| m | 1 << i);
        let vis = (0..n)
            .map(|i| state.neighbors(i).fold(0u64, |m, j| m | 1 << j) & sat_mask)
            .collect();
        Ranging { l_min, sat_mask, vis }
    }

    fn record(&self, linked: &mut [u64], links: &[(usize, usize)]) {
        for &(i, j) in links {
            if self.sat_mask >> i & 1 == 1 && self.sat_mask >> j & 1 == 1 {
                linked[i] |= 1 << j;
                linked[j] |= 1 << i;
            }
        }
    }

    fn need(&self, linked: &[u64], i: usize) -> usize {
        self.l_min.saturating_sub(linked[i].count_ones() as usize)
    }

    /// Every satellite can still reach `l_min` partners in `left` slots.
    fn reachable(&self, linked: &[u64], left: usize) -> bool {
        (0..linked.len()).filter(|&i| self.sat_mask >> i & 1 == 1).all(|i| {
            let need = self.need(linked, i);
            need == 0 || (need <= left && need <= (self.vis[i] & !linked[i]).count_ones() as usize)
        })
    }

    fn satisfied(&self, linked: &[u64]) -> bool {
        self.reachable(linked, 0)
    }

    /// Satisfied satellites collapse to one marker; their partners no
    /// longer matter.
    fn key(&self, linked: &[u64]) -> Vec<u64> {
        (0..linked.len())
            .map(|i| if self.need(linked, i) == 0 { u64::MAX } else { linked[i] })
            .collect()
    }
}

struct Engine<'m, D: DelayModel> {
    model: &'m D,
    ranging: Ranging,
    cands: Vec<Vec<(usize, usize)>>,
    moves: Vec<D::Move>,
    /// Candidates with equal effect share a group.
    group: Vec<Option<usize>>,
    groups: usize,
    /// Satellite pairs of each candidate with their edge position.
    pairs: Vec<Vec<(usize, usize, usize)>>,
    best: Option<(f64, Vec<Vec<(usize, usize)>>)>,
    path: Vec<usize>,
    memo: FxHashMap<(usize, Vec<u64>, D::Key), f64>,
    memo_limit: usize,
    stats: SearchStats,
    deadline: Instant,
    timed_out: bool,
    /// Least bound over subtrees abandoned at the deadline.
    open_bound: f64,
}

impl<D: DelayModel> Engine<'_, D> {
    fn offer(&mut self, cost: f64, schedule: Vec<Vec<(usize, usize)>>) {
        if self.best.as_ref().map_or(true, |(b, _)| cost < b - TOLERANCE) {
            self.stats.incumbent_updates += 1;
            debug!("incumbent {cost} after {} nodes", self.stats.nodes);
            self.best = Some((cost, schedule));
        }
    }

    fn incumbent(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    /// Scores a complete schedule; `None` when infeasible.
    fn evaluate(&self, matchings: &[Vec<(usize, usize)>]) -> Option<f64> {
        let mut node = self.model.root();
        let mut cost = 0.0;
        let mut linked = vec![0u64; self.ranging.vis.len()];
        for (t, m) in matchings.iter().enumerate() {
            let (next, c) = self.model.advance(&node, t, &self.model.compile(m))?;
            node = next;
            cost += c;
            self.ranging.record(&mut linked, m);
        }
        self.ranging.satisfied(&linked).then(|| cost + self.model.finish(&node))
    }

    fn dfs(&mut self, t: usize, node: &D::Node, cost: f64, linked: &[u64], lb: f64) {
        self.stats.nodes += 1;
        let slots = self.model.slots();
        if t == slots {
            let total = cost + self.model.finish(node);
            let schedule = self.path.iter().map(|&k| self.cands[k].clone()).collect();
            self.offer(total, schedule);
            return;
        }
        if self.stats.nodes % 1024 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        if self.timed_out {
            self.open_bound = self.open_bound.min(lb);
            return;
        }
        if self.memo_limit > 0 {
            let key = (t, self.ranging.key(linked), self.model.key(node));
            let room = self.memo.len() < self.memo_limit;
            match self.memo.get_mut(&key) {
                Some(seen) if *seen <= cost + TOLERANCE => {
                    self.stats.memo_hits += 1;
                    return;
                }
                Some(seen) => *seen = cost,
                None if room => {
                    self.memo.insert(key, cost);
                }
                None => {}
            }
        }
        // Children scored up front and explored best bound first; ties keep
        // candidate order.
        let mut seen: Vec<Vec<u128>> = vec![Vec::new(); self.groups];
        let mut children = Vec::new();
        for k in 0..self.cands.len() {
            if let Some(g) = self.group[k] {
                let useful = self.pairs[k]
                    .iter()
                    .filter(|&&(i, j, _)| {
                        linked[i] >> j & 1 == 0 && (self.ranging.need(linked, i) > 0 || self.ranging.need(linked, j) > 0)
                    })
                    .fold(0u128, |m, &(_, _, e)| m | 1 << e);
                if seen[g].contains(&useful) {
                    continue;
                }
                seen[g].push(useful);
            }
            let Some((child, c)) = self.model.advance(node, t, &self.moves[k]) else {
                continue;
            };
            let child_lb = cost + c + self.model.bound(&child, t + 1);
            if child_lb >= self.incumbent() - TOLERANCE {
                self.stats.pruned_by_bound += 1;
                continue;
            }
            let mut next_linked = linked.to_vec();
            self.ranging.record(&mut next_linked, &self.cands[k]);
            if !self.ranging.reachable(&next_linked, slots - t - 1) {
                self.stats.pruned_by_ranging += 1;
                continue;
            }
            children.push((child_lb, k, child, cost + c, next_linked));
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (child_lb, k, child, child_cost, next_linked) in children {
            if child_lb >= self.incumbent() - TOLERANCE {
                self.stats.pruned_by_bound += 1;
                continue;
            }
            self.path.push(k);
            self.dfs(t + 1, &child, child_cost, &next_linked, child_lb);
            self.path.pop();
            if self.timed_out {
                self.open_bound = self.open_bound.min(lb);
                return;
            }
        }
    }

}

struct RawOutcome {
    solution: IlpSolution,
    schedule: Option<TopologySchedule>,
}

fn run_search<D: DelayModel>(
    model: &D,
    state: &ScenarioState,
    traffic: &TrafficProfile,
    params: &SystemParams,
    opts: &SearchOptions,
) -> Result<RawOutcome> {
    let start = Instant::now();
    let n = state.node_count();
    if n > 64 {
        return Err(Error::invalid(format!("exact search supports at most 64 nodes, got {n}")));
    }
    let cands = model.candidates();
    let mut distinct: Vec<u128> = Vec::new();
    let group = cands
        .iter()
        .map(|m| {
            let e = model.effect(m)?;
            Some(distinct.iter().position(|&d| d == e).unwrap_or_else(|| {
                distinct.push(e);
                distinct.len() - 1
            }))
        })
        .collect();
    let mut engine = Engine {
        model,
        ranging: Ranging::new(state, params.l_min),
        moves: cands.iter().map(|m| model.compile(m)).collect(),
        group,
        groups: distinct.len(),
        pairs: cands
            .iter()
            .map(|m| {
                m.iter()
                    .filter(|&&(i, j)| state.is_satellite(i) && state.is_satellite(j))
                    .filter_map(|&(i, j)| Some((i, j, state.edges().binary_search(&(i, j)).ok()?)))
                    .collect()
            })
            .collect(),
        cands,
        best: None,
        path: Vec::new(),
        memo: FxHashMap::default(),
        memo_limit: opts.memo_limit,
        stats: SearchStats::default(),
        deadline: start + opts.time_budget,
        timed_out: false,
        open_bound: f64::INFINITY,
    };
    debug!("state {}: {} candidate matchings per slot", state.index, engine.cands.len());
    let mut warm = opts.warm_starts.clone();
    if opts.heuristic_warm_start {
        warm.push(schedule_state_hmwm(state, traffic, params)?);
    }
    for x in &warm {
        if x.node_count() != n || x.slots() != state.slots {
            continue;
        }
        let m = x.matchings();
        if let Some(c) = engine.evaluate(&m) {
            engine.offer(c, m);
        }
    }
    let root = model.root();
    let linked = vec![0; n];
    if engine.ranging.reachable(&linked, state.slots) {
        let lb = model.bound(&root, 0);
        if lb < engine.incumbent() - TOLERANCE {
            engine.dfs(0, &root, 0.0, &linked, lb);
        } else {
            engine.stats.pruned_by_bound += 1;
        }
    } else {
        engine.stats.pruned_by_ranging += 1;
    }
    let mut stats = engine.stats;
    stats.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let Some((cost, matchings)) = engine.best else {
        let mut solution = IlpSolution::infeasible(stats);
        if engine.timed_out {
            solution.status = SolveStatus::Timeout;
            solution.bound = model.objective(engine.open_bound);
        }
        return Ok(RawOutcome {
            solution,
            schedule: None,
        });
    };
    let (status, bound) = if engine.timed_out {
        (SolveStatus::FeasibleTimeout, engine.open_bound.min(cost))
    } else {
        (SolveStatus::Optimal, cost)
    };
    Ok(RawOutcome {
        solution: IlpSolution {
            status,
            assignment: BTreeMap::new(),
            objective_value: model.objective(cost),
            bound: model.objective(bound),
            stats,
        },
        schedule: Some(TopologySchedule::from_matchings(n, &matchings)),
    })
}

fn topology_assignment(state: &ScenarioState, x: &TopologySchedule, out: &mut BTreeMap<String, i64>) {
    for t in 0..state.slots {
        for (i, j) in x.slot_links(t) {
            out.insert(x_name(i, j, t), 1);
        }
    }
    for (i, j) in state.satellite_edges() {
        if (0..state.slots).any(|t| x.get(i, j, t)) {
            out.insert(l_name(i, j), 1);
        }
    }
}

/// Full routing-aware assignment for `x` under oldest-first forwarding,
/// with its objective; `None` when some buffer overflows.
pub fn routing_assignment(
    state: &ScenarioState,
    traffic: &TrafficProfile,
    params: &SystemParams,
    x: &TopologySchedule,
) -> Result<Option<(BTreeMap<String, i64>, f64)>> {
    if x.node_count() != state.node_count() || x.slots() != state.slots {
        return Err(Error::invalid("schedule does not match the state"));
    }
    let flow_of: HashMap<(usize, u64), usize> = traffic
        .flows()
        .iter()
        .enumerate()
        .map(|(f, fl)| ((fl.src, fl.st as u64), f))
        .collect();
    let fwd = Forwarder::new(state, params);
    let mut queues = vec![Queue::default(); state.node_count()];
    let mut out = BTreeMap::new();
    topology_assignment(state, x, &mut out);
    let mut objective = 0u64;
    for (t, links) in x.matchings().iter().enumerate() {
        let slot = fwd.step(&mut queues, links, t as u64, |i| traffic.rate(i, t));
        if !slot.blocked.is_empty() {
            return Ok(None);
        }
        for tr in &slot.transfers {
            for c in &tr.chunks {
                let f = flow_of[&(c.source, c.generated)];
                *out.entry(r_name(f, tr.from, tr.to, t)).or_default() += c.count as i64;
            }
        }
        for (i, q) in queues.iter().enumerate() {
            for c in q.chunks() {
                let f = flow_of[&(c.source, c.generated)];
                out.insert(b_name(f, i, t), c.count as i64);
            }
            objective += q.age_sum(t as u64);
        }
    }
    Ok(Some((out, objective as f64)))
}

/// Full routing-agnostic assignment for `x`, with its objective.
pub fn railp_assignment(
    state: &ScenarioState,
    traffic: &TrafficProfile,
    params: &SystemParams,
    x: &TopologySchedule,
) -> (BTreeMap<String, i64>, f64) {
    let mut out = BTreeMap::new();
    topology_assignment(state, x, &mut out);
    let big_t = state.slots;
    let mut objective = 0.0;
    for i in state.satellites() {
        let access: Vec<bool> = (0..big_t)
            .map(|t| match x.partner(i, t) {
                Some(j) if state.is_anchor(i) => !state.is_satellite(j),
                Some(j) => state.is_anchor(j),
                None => false,
            })
            .collect();
        let w = row_weight(state, traffic, params, i);
        for t in 1..=big_t {
            for c in 0..=big_t - t {
                if access[c..c + t].iter().any(|&a| a) {
                    let name = if state.is_anchor(i) { lambda_name(t, i, c) } else { delta_name(t, i, c) };
                    out.insert(name, 1);
                    objective += w;
                }
            }
        }
    }
    (out, objective)
}
