//! Scenario model: nodes, FSA states, traffic and system parameters.
//!
//! Node indices are positions in the scenario's node list and are stable
//! across states. Slots are 0-based internally; files and LP names use
//! 1-based slot numbers.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Satellite,
    GsAntenna,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gs_group: Option<String>,
}

impl Node {
    pub fn satellite(name: impl Into<String>) -> Self {
        Node {
            name: name.into(),
            kind: NodeKind::Satellite,
            gs_group: None,
        }
    }

    pub fn antenna(name: impl Into<String>, group: impl Into<String>) -> Self {
        Node {
            name: name.into(),
            kind: NodeKind::GsAntenna,
            gs_group: Some(group.into()),
        }
    }
}

/// Class of a visible pair, determined by the endpoint kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    /// non-anchor to non-anchor
    Nn,
    /// non-anchor to anchor
    Na,
    /// anchor to anchor
    Aa,
    /// anchor to ground antenna
    Ag,
}

/// Anchor / non-anchor split of the satellites, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub anchors: Vec<usize>,
    pub non_anchors: Vec<usize>,
}

/// Checks that `vis` is square, binary, symmetric and has a zero diagonal.
pub fn check_visibility(vis: &[Vec<u8>]) -> Result<()> {
    let n = vis.len();
    for (i, row) in vis.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!(
                "visibility row {} has {} entries, expected {n}",
                i + 1,
                row.len()
            )));
        }
        for (j, &y) in row.iter().enumerate() {
            if y > 1 {
                return Err(Error::invalid(format!(
                    "visibility ({}, {}) = {y} is not binary",
                    i + 1,
                    j + 1
                )));
            }
        }
        if row[i] != 0 {
            return Err(Error::invalid(format!("visibility diagonal ({0}, {0}) is set", i + 1)));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if vis[i][j] != vis[j][i] {
                return Err(Error::invalid(format!(
                    "visibility is asymmetric at pair ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// Splits satellites (every index not in `gs_ids`) into anchors, which see at
/// least one antenna, and non-anchors.
pub fn classify_nodes(vis: &[Vec<u8>], gs_ids: &[usize]) -> Result<Partition> {
    check_visibility(vis)?;
    let n = vis.len();
    let mut is_gs = vec![false; n];
    for &g in gs_ids {
        if g >= n {
            return Err(Error::invalid(format!("antenna index {} out of range", g + 1)));
        }
        is_gs[g] = true;
    }
    let mut part = Partition {
        anchors: Vec::new(),
        non_anchors: Vec::new(),
    };
    for i in (0..n).filter(|&i| !is_gs[i]) {
        if gs_ids.iter().any(|&g| vis[i][g] == 1) {
            part.anchors.push(i);
        } else {
            part.non_anchors.push(i);
        }
    }
    Ok(part)
}

/// One FSA state: fixed visibility over `slots` time slots.
#[derive(Debug, Clone)]
pub struct ScenarioState {
    pub index: usize,
    pub slots: usize,
    nodes: Arc<[Node]>,
    vis: Vec<Vec<bool>>,
    anchor: Vec<bool>,
    partition: Partition,
    edges: Vec<(usize, usize)>,
}

impl ScenarioState {
    pub fn new(index: usize, slots: usize, nodes: Arc<[Node]>, vis: &[Vec<u8>]) -> Result<Self> {
        if vis.len() != nodes.len() {
            return Err(Error::invalid(format!(
                "state {index}: visibility is {}x{}, scenario has {} nodes",
                vis.len(),
                vis.len(),
                nodes.len()
            )));
        }
        let gs: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].kind == NodeKind::GsAntenna)
            .collect();
        let partition = classify_nodes(vis, &gs).map_err(|e| match e {
            Error::Invalid(m) => Error::Invalid(format!("state {index}: {m}")),
            other => other,
        })?;
        for &a in &gs {
            for &b in &gs {
                if a < b && vis[a][b] == 1 {
                    return Err(Error::invalid(format!(
                        "state {index}: antennas {} and {} are mutually visible",
                        nodes[a].name, nodes[b].name
                    )));
                }
            }
        }
        let n = nodes.len();
        let mut anchor = vec![false; n];
        for &a in &partition.anchors {
            anchor[a] = true;
        }
        let vis: Vec<Vec<bool>> = vis
            .iter()
            .map(|r| r.iter().map(|&y| y == 1).collect())
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if vis[i][j] {
                    edges.push((i, j));
                }
            }
        }
        Ok(ScenarioState {
            index,
            slots,
            nodes,
            vis,
            anchor,
            partition,
            edges,
        })
    }

    /// Builds a state from an edge list over 0-based indices.
    pub fn from_edges(
        index: usize,
        slots: usize,
        nodes: Arc<[Node]>,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        let n = nodes.len();
        let mut vis = vec![vec![0u8; n]; n];
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::invalid(format!("bad edge ({}, {})", i + 1, j + 1)));
            }
            vis[i][j] = 1;
            vis[j][i] = 1;
        }
        Self::new(index, slots, nodes, &vis)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn shared_nodes(&self) -> Arc<[Node]> {
        Arc::clone(&self.nodes)
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.nodes[i].kind
    }

    pub fn is_satellite(&self, i: usize) -> bool {
        self.nodes[i].kind == NodeKind::Satellite
    }

    pub fn is_anchor(&self, i: usize) -> bool {
        self.anchor[i]
    }

    pub fn visible(&self, i: usize, j: usize) -> bool {
        self.vis[i][j]
    }

    pub fn visibility_matrix(&self) -> Vec<Vec<u8>> {
        self.vis
            .iter()
            .map(|r| r.iter().map(|&b| u8::from(b)).collect())
            .collect()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn anchors(&self) -> &[usize] {
        &self.partition.anchors
    }

    pub fn non_anchors(&self) -> &[usize] {
        &self.partition.non_anchors
    }

    pub fn satellites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.is_satellite(i))
    }

    pub fn satellite_count(&self) -> usize {
        self.satellites().count()
    }

    pub fn antennas(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| !self.is_satellite(i))
    }

    /// Visible pairs `(i, j)` with `i < j`, lexicographic.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&j| self.vis[i][j])
    }

    /// Visible satellite pairs, the domain of the ranging indicator.
    pub fn satellite_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .copied()
            .filter(move |&(i, j)| self.is_satellite(i) && self.is_satellite(j))
    }

    pub fn edge_class(&self, i: usize, j: usize) -> Option<EdgeClass> {
        if !self.vis[i][j] {
            return None;
        }
        match (self.kind(i), self.kind(j)) {
            (NodeKind::Satellite, NodeKind::Satellite) => Some(match (self.anchor[i], self.anchor[j]) {
                (false, false) => EdgeClass::Nn,
                (true, true) => EdgeClass::Aa,
                _ => EdgeClass::Na,
            }),
            (NodeKind::Satellite, NodeKind::GsAntenna) | (NodeKind::GsAntenna, NodeKind::Satellite) => {
                Some(EdgeClass::Ag)
            }
            (NodeKind::GsAntenna, NodeKind::GsAntenna) => None,
        }
    }

    /// Same state with a different slot count.
    pub fn with_slots(&self, slots: usize) -> Self {
        ScenarioState {
            slots,
            ..self.clone()
        }
    }
}

/// Generated packets per node and slot; antenna rows are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub f_td: u64,
    pub f_sm: u64,
    pub service: Vec<bool>,
    rates: Vec<Vec<u64>>,
}

impl TrafficProfile {
    /// `f[i][t] = f_td + f_sm * service[i]` for every satellite and slot.
    pub fn uniform(state: &ScenarioState, f_td: u64, f_sm: u64, service: &[bool]) -> Self {
        let n = state.node_count();
        let rates = (0..n)
            .map(|i| {
                let r = if state.is_satellite(i) {
                    f_td + if service.get(i).copied().unwrap_or(false) { f_sm } else { 0 }
                } else {
                    0
                };
                vec![r; state.slots]
            })
            .collect();
        let mut service = service.to_vec();
        service.resize(n, false);
        TrafficProfile {
            f_td,
            f_sm,
            service,
            rates,
        }
    }

    /// Arbitrary per-slot rates, `rates[i][t]`; antenna rows must be zero.
    pub fn from_rates(state: &ScenarioState, rates: Vec<Vec<u64>>) -> Result<Self> {
        if rates.len() != state.node_count() || rates.iter().any(|r| r.len() != state.slots) {
            return Err(Error::invalid("traffic matrix does not match N x T"));
        }
        if let Some(g) = state.antennas().find(|&g| rates[g].iter().any(|&f| f > 0)) {
            return Err(Error::invalid(format!("antenna {} generates traffic", state.nodes()[g].name)));
        }
        Ok(TrafficProfile {
            f_td: 0,
            f_sm: 0,
            service: vec![false; state.node_count()],
            rates,
        })
    }

    pub fn zero(state: &ScenarioState) -> Self {
        Self::uniform(state, 0, 0, &[])
    }

    pub fn rate(&self, i: usize, t: usize) -> u64 {
        self.rates[i][t]
    }

    pub fn slots(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    pub fn node_count(&self) -> usize {
        self.rates.len()
    }

    /// Slot-1 rate, the per-row weight of the routing-agnostic objective.
    pub fn first_slot_rate(&self, i: usize) -> u64 {
        self.rates[i].first().copied().unwrap_or(0)
    }

    pub fn is_slot_uniform(&self) -> bool {
        self.rates.iter().all(|r| r.windows(2).all(|w| w[0] == w[1]))
    }

    pub fn total(&self) -> u64 {
        self.rates.iter().flatten().sum()
    }

    /// Nonzero flows as `(source, generation slot, packets)`, ordered by
    /// source then slot.
    pub fn flows(&self) -> Vec<Flow> {
        let mut out = Vec::new();
        for (src, row) in self.rates.iter().enumerate() {
            for (st, &f) in row.iter().enumerate() {
                if f > 0 {
                    out.push(Flow { src, st, packets: f });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub src: usize,
    pub st: usize,
    pub packets: u64,
}

/// System parameters. Defaults are the test-scenario column of the
/// published parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub l_min: usize,
    pub b_max: u64,
    pub c_ss: u64,
    pub c_sg: u64,
    pub gamma: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub m_dot: u64,
    pub m_big: u64,
    /// `None` means T + 1.
    pub m_bar: Option<u64>,
    /// `None` means T + 1.
    pub m_tilde: Option<u64>,
    /// Antennas per physical ground station (metadata).
    pub gs_antennas: Vec<u32>,
    /// Prefer perfect (maximum-cardinality) matchings in the heuristic.
    pub perfect_matching: bool,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::test_scenario()
    }
}

impl SystemParams {
    pub fn test_scenario() -> Self {
        SystemParams {
            l_min: 2,
            b_max: 150,
            c_ss: 25,
            c_sg: 50,
            gamma: 0.5,
            eta: 0.4,
            alpha: 2.0,
            beta: 700.0,
            q: 50.0,
            m_dot: 25,
            m_big: 51,
            m_bar: None,
            m_tilde: None,
            gs_antennas: Vec::new(),
            perfect_matching: true,
        }
    }

    pub fn practical() -> Self {
        SystemParams {
            l_min: 6,
            gamma: 0.1,
            eta: 0.7,
            beta: 500.0,
            gs_antennas: vec![2, 2, 2],
            ..Self::test_scenario()
        }
    }

    /// Structural checks independent of the slot count.
    pub fn validate(&self) -> Result<()> {
        if self.c_ss == 0 || self.c_sg == 0 || self.b_max == 0 {
            return Err(Error::invalid("capacities and buffer size must be positive"));
        }
        if self.m_big <= self.c_ss.max(self.c_sg) {
            return Err(Error::invalid(format!(
                "M = {} must exceed max(C_ss, C_sg) = {}",
                self.m_big,
                self.c_ss.max(self.c_sg)
            )));
        }
        for (name, v) in [("gamma", self.gamma), ("eta", self.eta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("q", self.q)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Full check against a slot count.
    pub fn validate_for(&self, slots: usize) -> Result<()> {
        self.validate()?;
        let t = slots as u64;
        if self.m_dot <= t {
            return Err(Error::invalid(format!("M-dot = {} must exceed T = {slots}", self.m_dot)));
        }
        for (name, m) in [("M-bar", self.m_bar), ("M-tilde", self.m_tilde)] {
            if let Some(m) = m {
                if m <= t {
                    return Err(Error::invalid(format!("{name} = {m} must exceed T = {slots}")));
                }
            }
        }
        Ok(())
    }

    /// Smallest safe big-M values for a slot count.
    pub fn tightened(&self, slots: usize) -> Self {
        SystemParams {
            m_dot: slots as u64 + 1,
            m_big: self.c_ss.max(self.c_sg) + 1,
            m_bar: Some(slots as u64 + 1),
            m_tilde: Some(slots as u64 + 1),
            ..self.clone()
        }
    }

    pub fn m_bar_for(&self, slots: usize) -> u64 {
        self.m_bar.unwrap_or(slots as u64 + 1)
    }

    pub fn m_tilde_for(&self, slots: usize) -> u64 {
        self.m_tilde.unwrap_or(slots as u64 + 1)
    }

    /// Applies a `key=value` override using the scenario-file key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut v = serde_json::to_value(&*self).expect("params serialize");
        let obj = v.as_object_mut().expect("params are an object");
        if !obj.contains_key(key) {
            return Err(Error::invalid(format!("unknown parameter `{key}`")));
        }
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        obj.insert(key.to_string(), parsed);
        *self = serde_json::from_value(v)
            .map_err(|e| Error::invalid(format!("parameter `{key}`: {e}")))?;
        self.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub f_td: u64,
    pub f_sm: u64,
    #[serde(default)]
    pub service_nodes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub index: usize,
    pub slots: usize,
    pub visibility: Vec<Vec<u8>>,
}

/// On-disk scenario layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub nodes: Vec<Node>,
    pub traffic: TrafficSpec,
    #[serde(default)]
    pub params: SystemParams,
    pub states: Vec<StateSpec>,
}

/// A loaded scenario with validated states.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub nodes: Arc<[Node]>,
    pub states: Vec<ScenarioState>,
    pub traffic: TrafficSpec,
    service: Vec<bool>,
    pub params: SystemParams,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for n in &file.nodes {
            if !seen.insert(n.name.as_str()) {
                return Err(Error::invalid(format!("duplicate node name `{}`", n.name)));
            }
        }
        let nodes: Arc<[Node]> = file.nodes.into();
        let mut service = vec![false; nodes.len()];
        for name in &file.traffic.service_nodes {
            let i = nodes
                .iter()
                .position(|n| &n.name == name)
                .ok_or_else(|| Error::invalid(format!("service node `{name}` is not declared")))?;
            if nodes[i].kind != NodeKind::Satellite {
                return Err(Error::invalid(format!("service node `{name}` is not a satellite")));
            }
            service[i] = true;
        }
        file.params.validate()?;
        let mut states = Vec::with_capacity(file.states.len());
        for s in &file.states {
            states.push(ScenarioState::new(s.index, s.slots, Arc::clone(&nodes), &s.visibility)?);
        }
        Ok(Scenario {
            name: file.name,
            nodes,
            states,
            traffic: file.traffic,
            service,
            params: file.params,
        })
    }

    pub fn traffic_for(&self, state: &ScenarioState) -> TrafficProfile {
        TrafficProfile::uniform(state, self.traffic.f_td, self.traffic.f_sm, &self.service)
    }

    pub fn service_flags(&self) -> &[bool] {
        &self.service
    }

    pub fn state(&self, index: usize) -> Option<&ScenarioState> {
        self.states.iter().find(|s| s.index == index)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            description: None,
            nodes: self.nodes.to_vec(),
            traffic: self.traffic.clone(),
            params: self.params.clone(),
            states: self
                .states
                .iter()
                .map(|s| StateSpec {
                    index: s.index,
                    slots: s.slots,
                    visibility: s.visibility_matrix(),
                })
                .collect(),
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Scenario::from_file(file).map_err(|e| match e {
        Error::Invalid(m) => Error::Parse {
            path: path.to_path_buf(),
            message: m,
        },
        other => other,
    })
}
