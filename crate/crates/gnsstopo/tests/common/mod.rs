//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver, forwarding or delay-model code under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use gnsstopo::matching::MatchingMode;
use gnsstopo::scenario::{load_scenario, Node, Scenario, ScenarioState, SystemParams, TrafficProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn test_scenario() -> Scenario {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/test-8node.json");
    load_scenario(p).expect("test scenario loads")
}

pub struct Tiny {
    pub state: ScenarioState,
    pub traffic: TrafficProfile,
    pub params: SystemParams,
}

/// Up to 5 nodes with one antenna (the last node), at most 3 slots, sparse
/// visibility, small capacities so buffers and links bind.
pub fn tiny_instance(seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=5usize);
    let slots = rng.gen_range(1..=3usize);
    let g = n - 1;
    let mut nodes: Vec<Node> = (0..g).map(|k| Node::satellite(format!("s{}", k + 1))).collect();
    nodes.push(Node::antenna("g1", "gs"));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.55) {
                edges.push((i, j));
            }
        }
    }
    let state = ScenarioState::from_edges(1, slots, Arc::from(nodes), &edges).expect("valid tiny state");
    let rates = (0..n)
        .map(|i| (0..slots).map(|_| if i == g { 0 } else { rng.gen_range(0..=3) }).collect())
        .collect();
    let traffic = TrafficProfile::from_rates(&state, rates).expect("valid rates");
    let c_ss = rng.gen_range(1..=2);
    let c_sg = rng.gen_range(1..=3);
    let params = SystemParams {
        l_min: rng.gen_range(0..=2),
        b_max: rng.gen_range(2..=5),
        c_ss,
        c_sg,
        gamma: 0.5,
        m_big: c_ss.max(c_sg) + 1,
        m_dot: slots as u64 + 1,
        ..SystemParams::test_scenario()
    };
    Tiny { state, traffic, params }
}

/// Every matching of the edge list, the empty one included.
pub fn all_matchings(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    fn rec(k: usize, edges: &[(usize, usize)], used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if k == edges.len() {
            out.push(cur.clone());
            return;
        }
        rec(k + 1, edges, used, cur, out);
        let (i, j) = edges[k];
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            cur.push((i, j));
            rec(k + 1, edges, used, cur, out);
            cur.pop();
            used[i] = false;
            used[j] = false;
        }
    }
    let mut out = Vec::new();
    rec(0, edges, &mut vec![false; n], &mut Vec::new(), &mut out);
    out
}

/// Calls `f` on every sequence of `slots` matchings.
pub fn for_each_schedule(ms: &[Vec<(usize, usize)>], slots: usize, f: &mut dyn FnMut(&[Vec<(usize, usize)>])) {
    fn rec(ms: &[Vec<(usize, usize)>], slots: usize, cur: &mut Vec<Vec<(usize, usize)>>, f: &mut dyn FnMut(&[Vec<(usize, usize)>])) {
        if cur.len() == slots {
            f(cur);
            return;
        }
        for m in ms {
            cur.push(m.clone());
            rec(ms, slots, cur, f);
            cur.pop();
        }
    }
    rec(ms, slots, &mut Vec::new(), f);
}

/// Node roles recomputed from raw visibility.
pub struct Roles {
    pub n: usize,
    pub sat: Vec<bool>,
    pub anchor: Vec<bool>,
}

pub fn roles(state: &ScenarioState) -> Roles {
    let n = state.node_count();
    let sat: Vec<bool> = (0..n).map(|i| state.nodes()[i].kind == gnsstopo::NodeKind::Satellite).collect();
    let anchor = (0..n)
        .map(|i| sat[i] && (0..n).any(|j| !sat[j] && state.visible(i, j)))
        .collect();
    Roles { n, sat, anchor }
}

/// Distinct satellite partners of every satellite reach `l_min`.
pub fn ranging_ok(state: &ScenarioState, sched: &[Vec<(usize, usize)>], l_min: usize) -> bool {
    let r = roles(state);
    let mut pairs = std::collections::BTreeSet::new();
    for m in sched {
        for &(i, j) in m {
            if r.sat[i] && r.sat[j] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    (0..r.n)
        .filter(|&i| r.sat[i])
        .all(|i| pairs.iter().filter(|&&(a, b)| a == i || b == i).count() >= l_min)
}

/// Buffers as `counts[node][generation slot]`.
type Buffers = Vec<Vec<u64>>;

/// Every way to move up to `cap` packets out of `from`, as per-generation
/// amounts.
fn splits(from: &[u64], cap: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    fn rec(k: usize, from: &[u64], left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == from.len() {
            out.push(cur.clone());
            return;
        }
        for a in 0..=from[k].min(left) {
            cur.push(a);
            rec(k + 1, from, left - a, cur, out);
            cur.pop();
        }
    }
    rec(0, from, cap, &mut Vec::new(), &mut out);
    out
}

/// Minimum of the age-weighted buffered volume over every integral routing
/// of a fixed schedule; `None` if every routing overflows a buffer.
/// Packets move non-anchor to anchor (C_ss) and anchor to antenna (C_sg),
/// and may be held back in any amount.
pub fn exact_routing_cost(
    state: &ScenarioState,
    traffic: &TrafficProfile,
    params: &SystemParams,
    sched: &[Vec<(usize, usize)>],
) -> Option<u64> {
    let r = roles(state);
    let slots = state.slots;
    let mut memo: HashMap<(usize, Buffers), Option<u64>> = HashMap::new();

    fn go(
        t: usize,
        buf: Buffers,
        r: &Roles,
        traffic: &TrafficProfile,
        params: &SystemParams,
        sched: &[Vec<(usize, usize)>],
        memo: &mut HashMap<(usize, Buffers), Option<u64>>,
    ) -> Option<u64> {
        if t == sched.len() {
            return Some(0);
        }
        if let Some(&v) = memo.get(&(t, buf.clone())) {
            return v;
        }
        let mut b = buf.clone();
        for i in 0..r.n {
            if r.sat[i] {
                b[i][t] += traffic.rate(i, t);
            }
        }
        // Directed transfers possible this slot: (from, to, capacity).
        let mut moves = Vec::new();
        for &(i, j) in &sched[t] {
            for (a, c) in [(i, j), (j, i)] {
                if r.sat[a] && !r.anchor[a] && r.anchor[c] {
                    moves.push((a, c, params.c_ss));
                } else if r.anchor[a] && !r.sat[c] {
                    moves.push((a, c, params.c_sg));
                }
            }
        }
        let mut best: Option<u64> = None;
        let explore = |b: &Buffers, best: &mut Option<u64>, memo: &mut HashMap<(usize, Buffers), Option<u64>>| {
            if (0..r.n).any(|i| r.sat[i] && b[i].iter().sum::<u64>() > params.b_max) {
                return;
            }
            let here: u64 = (0..r.n)
                .filter(|&i| r.sat[i])
                .flat_map(|i| b[i].iter().enumerate().map(move |(g, &c)| c * (t - g.min(t)) as u64))
                .sum();
            if let Some(rest) = go(t + 1, b.clone(), r, traffic, params, sched, memo) {
                let v = here + rest;
                if best.map_or(true, |x| v < x) {
                    *best = Some(v);
                }
            }
        };
        fn expand(
            k: usize,
            moves: &[(usize, usize, u64)],
            b: &mut Buffers,
            r: &Roles,
            visit: &mut dyn FnMut(&Buffers),
        ) {
            if k == moves.len() {
                visit(b);
                return;
            }
            let (from, to, cap) = moves[k];
            for amounts in splits(&b[from].clone(), cap) {
                for (g, &a) in amounts.iter().enumerate() {
                    b[from][g] -= a;
                    if r.sat[to] {
                        b[to][g] += a;
                    }
                }
                expand(k + 1, moves, b, r, visit);
                for (g, &a) in amounts.iter().enumerate() {
                    b[from][g] += a;
                    if r.sat[to] {
                        b[to][g] -= a;
                    }
                }
            }
        }
        let mut outcomes = Vec::new();
        expand(0, &moves, &mut b, r, &mut |b| outcomes.push(b.clone()));
        outcomes.sort();
        outcomes.dedup();
        for o in outcomes {
            explore(&o, &mut best, memo);
        }
        memo.insert((t, buf), best);
        best
    }

    go(0, vec![vec![0; slots]; r.n], &r, traffic, params, sched, &mut memo)
}

/// Oldest-first forwarding with full transfers, written from the rules
/// alone: generation, then each link moves the oldest packets (ties by
/// source) up to capacity and the receiver's free space, then overflow
/// drops the youngest. Returns per-slot `(delivered, buffered, blocked)`
/// and the age-weighted buffered volume.
pub struct Replay {
    pub per_slot: Vec<(u64, u64, u64)>,
    pub age_sum: u64,
    pub blocked: u64,
    /// `(source, generated, delivered)` per delivered packet.
    pub delivered: Vec<(usize, u64, u64)>,
}

pub fn oldest_first_replay(
    state: &ScenarioState,
    traffic: &TrafficProfile,
    params: &SystemParams,
    sched: &[Vec<(usize, usize)>],
    repetitions: usize,
) -> Replay {
    let r = roles(state);
    // Each packet: (generated, source).
    let mut q: Vec<Vec<(u64, usize)>> = vec![Vec::new(); r.n];
    let mut out = Replay {
        per_slot: Vec::new(),
        age_sum: 0,
        blocked: 0,
        delivered: Vec::new(),
    };
    let slots = sched.len();
    for rep in 0..repetitions {
        for (t, m) in sched.iter().enumerate() {
            let now = (rep * slots + t) as u64;
            for i in 0..r.n {
                if r.sat[i] {
                    for _ in 0..traffic.rate(i, t) {
                        q[i].push((now, i));
                    }
                }
            }
            for qi in q.iter_mut() {
                qi.sort();
            }
            let mut delivered = 0;
            let mut moved: Vec<(usize, Vec<(u64, usize)>)> = Vec::new();
            let snapshot: Vec<usize> = q.iter().map(Vec::len).collect();
            for &(i, j) in m {
                for (a, c) in [(i, j), (j, i)] {
                    let k = if r.sat[a] && !r.anchor[a] && r.anchor[c] {
                        let room = (params.b_max as usize).saturating_sub(snapshot[c]);
                        (params.c_ss as usize).min(room).min(q[a].len())
                    } else if r.anchor[a] && !r.sat[c] {
                        (params.c_sg as usize).min(q[a].len())
                    } else {
                        continue;
                    };
                    let taken: Vec<(u64, usize)> = q[a].drain(..k).collect();
                    if r.sat[c] {
                        moved.push((c, taken));
                    } else {
                        delivered += taken.len() as u64;
                        out.delivered.extend(taken.iter().map(|&(g, s)| (s, g, now)));
                    }
                }
            }
            for (c, pk) in moved {
                q[c].extend(pk);
                q[c].sort();
            }
            let mut blocked = 0;
            for i in 0..r.n {
                if r.sat[i] && q[i].len() as u64 > params.b_max {
                    let keep = params.b_max as usize;
                    blocked += (q[i].len() - keep) as u64;
                    q[i].truncate(keep);
                }
            }
            out.blocked += blocked;
            let buffered: u64 = q.iter().map(|v| v.len() as u64).sum();
            out.age_sum += q.iter().flatten().map(|&(g, _)| now - g).sum::<u64>();
            out.per_slot.push((delivered, buffered, blocked));
        }
    }
    out
}

/// Exhaustive routing-aware optimum over all schedules meeting ranging.
pub fn exhaustive_ilp(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> Option<u64> {
    let ms = all_matchings(state.node_count(), state.edges());
    let mut best: Option<u64> = None;
    for_each_schedule(&ms, state.slots, &mut |s| {
        if !ranging_ok(state, s, params.l_min) {
            return;
        }
        if let Some(c) = exact_routing_cost(state, traffic, params, s) {
            if best.map_or(true, |b| c < b) {
                best = Some(c);
            }
        }
    });
    best
}

/// Sum of `k(k+1)/2` over the zero runs of a row.
pub fn run_penalty(row: &[bool]) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    for &hit in row.iter().chain(std::iter::once(&true)) {
        if hit {
            total += run * (run + 1) / 2;
            run = 0;
        } else {
            run += 1;
        }
    }
    total
}

/// Routing-agnostic objective of a schedule: weighted count of windows
/// that contain an access.
pub fn agnostic_value(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams, s: &[Vec<(usize, usize)>]) -> f64 {
    let r = roles(state);
    let t = s.len() as u64;
    let full = t * (t + 1) / 2;
    (0..r.n)
        .filter(|&i| r.sat[i])
        .map(|i| {
            let row: Vec<bool> = s
                .iter()
                .map(|m| {
                    m.iter().any(|&(a, b)| {
                        let other = if a == i { b } else if b == i { a } else { return false };
                        if r.anchor[i] {
                            !r.sat[other]
                        } else {
                            r.anchor[other]
                        }
                    })
                })
                .collect();
            let f = traffic.rate(i, 0) as f64;
            let w = if r.anchor[i] { (1.0 - params.gamma) * f } else { params.gamma * f };
            w * (full - run_penalty(&row)) as f64
        })
        .sum()
}

pub fn exhaustive_railp(state: &ScenarioState, traffic: &TrafficProfile, params: &SystemParams) -> Option<f64> {
    let ms = all_matchings(state.node_count(), state.edges());
    let mut best: Option<f64> = None;
    for_each_schedule(&ms, state.slots, &mut |s| {
        if !ranging_ok(state, s, params.l_min) {
            return;
        }
        let v = agnostic_value(state, traffic, params, s);
        if best.map_or(true, |b| v > b) {
            best = Some(v);
        }
    });
    best
}

/// Best `(cardinality, weight)` over every matching, by exhaustive search.
pub fn brute_force(n: usize, edges: &[(usize, usize, i64)], mode: MatchingMode) -> (usize, i64) {
    fn rec(
        v: usize,
        n: usize,
        adj: &[Vec<(usize, i64)>],
        used: &mut Vec<bool>,
        card: usize,
        w: i64,
        mode: MatchingMode,
        best: &mut (usize, i64),
    ) {
        if v == n {
            let better = match mode {
                MatchingMode::MaxCardinality => (card, w) > *best,
                MatchingMode::MaxWeight => w > best.1,
            };
            if better {
                *best = (card, w);
            }
            return;
        }
        if used[v] {
            return rec(v + 1, n, adj, used, card, w, mode, best);
        }
        rec(v + 1, n, adj, used, card, w, mode, best);
        for &(u, wu) in &adj[v] {
            if u > v && !used[u] {
                used[v] = true;
                used[u] = true;
                rec(v + 1, n, adj, used, card + 1, w + wu, mode, best);
                used[v] = false;
                used[u] = false;
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for &(i, j, w) in edges {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    let mut best = (0, 0);
    rec(0, n, &adj, &mut vec![false; n], 0, 0, mode, &mut best);
    best
}

/// Minimal reader for the LP subset the writer emits: returns the declared
/// variable kinds and the constraint names, rejecting anything malformed.
pub fn read_lp(text: &str) -> Result<(BTreeMap<String, &'static str>, Vec<String>, BTreeSet<String>), String> {
    let mut section = "";
    let mut kinds = BTreeMap::new();
    let mut rows = Vec::new();
    let mut used = BTreeSet::new();
    let mut pending = String::new();
    let flush = |pending: &mut String, rows: &mut Vec<String>, used: &mut BTreeSet<String>| -> Result<(), String> {
        if pending.is_empty() {
            return Ok(());
        }
        let (name, body) = pending.split_once(':').ok_or(format!("row without a name: {pending}"))?;
        let toks: Vec<&str> = body.split_whitespace().collect();
        let n = toks.len();
        let is_obj = name.trim() == "obj";
        let terms = if is_obj {
            &toks[..]
        } else {
            if n < 2 || !matches!(toks[n - 2], "<=" | ">=" | "=") || toks[n - 1].parse::<f64>().is_err() {
                return Err(format!("bad row end: {pending}"));
            }
            &toks[..n - 2]
        };
        for t in terms {
            if matches!(*t, "+" | "-") || t.parse::<f64>().is_ok() {
                continue;
            }
            if !t.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                return Err(format!("bad token `{t}`"));
            }
            used.insert(t.to_string());
        }
        if !is_obj {
            rows.push(name.trim().to_string());
        }
        pending.clear();
        Ok(())
    };
    for line in text.lines() {
        if line.starts_with('\\') {
            continue;
        }
        let head = line.trim();
        if matches!(head, "Minimize" | "Maximize" | "Subject To" | "Bounds" | "Binary" | "General" | "End") {
            flush(&mut pending, &mut rows, &mut used)?;
            section = match head {
                "Minimize" | "Maximize" => "obj",
                "Subject To" => "rows",
                "Bounds" => "bounds",
                "Binary" => "bin",
                "General" => "gen",
                _ => "end",
            };
            continue;
        }
        match section {
            "obj" | "rows" => {
                // Row heads carry `name:`; wrapped terms never contain a colon.
                if !head.contains(':') {
                    pending.push(' ');
                    pending.push_str(head);
                } else {
                    flush(&mut pending, &mut rows, &mut used)?;
                    pending.push_str(head);
                }
            }
            "bin" | "gen" => {
                for v in head.split_whitespace() {
                    let kind = if section == "bin" { "binary" } else { "general" };
                    if kinds.insert(v.to_string(), kind).is_some() {
                        return Err(format!("`{v}` declared twice"));
                    }
                }
            }
            "bounds" => {}
            _ => return Err(format!("text outside a section: {line}")),
        }
    }
    if section != "end" {
        return Err("missing End".into());
    }
    Ok((kinds, rows, used))
}
