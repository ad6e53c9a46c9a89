//! The link-assignment tensor and its constraint checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioState;

/// Binary tensor `x[i][j][t]` over N x N x T. Stored densely so that
/// asymmetric (invalid) tensors remain representable for validation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopologySchedule {
    n: usize,
    slots: usize,
    x: Vec<bool>,
}

impl TopologySchedule {
    pub fn empty(n: usize, slots: usize) -> Self {
        TopologySchedule {
            n,
            slots,
            x: vec![false; n * n * slots],
        }
    }

    /// Assembles a schedule from one matching per slot.
    pub fn from_matchings(n: usize, matchings: &[Vec<(usize, usize)>]) -> Self {
        let mut x = Self::empty(n, matchings.len());
        for (t, m) in matchings.iter().enumerate() {
            for &(i, j) in m {
                x.link(i, j, t);
            }
        }
        x
    }

    fn idx(&self, i: usize, j: usize, t: usize) -> usize {
        (t * self.n + i) * self.n + j
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn get(&self, i: usize, j: usize, t: usize) -> bool {
        self.x[self.idx(i, j, t)]
    }

    /// Sets a single directed entry; may break symmetry.
    pub fn set(&mut self, i: usize, j: usize, t: usize, v: bool) {
        let k = self.idx(i, j, t);
        self.x[k] = v;
    }

    /// Sets both `x[i][j][t]` and `x[j][i][t]`.
    pub fn link(&mut self, i: usize, j: usize, t: usize) {
        self.set(i, j, t, true);
        self.set(j, i, t, true);
    }

    /// Links of slot `t` as `(i, j)` with `i < j`, read from the upper
    /// triangle.
    pub fn slot_links(&self, t: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j, t) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn matchings(&self) -> Vec<Vec<(usize, usize)>> {
        (0..self.slots).map(|t| self.slot_links(t)).collect()
    }

    /// Partner of `i` in slot `t`, assuming a valid schedule.
    pub fn partner(&self, i: usize, t: usize) -> Option<usize> {
        (0..self.n).find(|&j| self.get(i, j, t))
    }

    /// Ranging indicator: `l[i][j] = 1` iff the satellites ever link.
    pub fn ranging_matrix(&self, state: &ScenarioState) -> Vec<Vec<bool>> {
        let mut l = vec![vec![false; self.n]; self.n];
        for t in 0..self.slots {
            for i in 0..self.n {
                for j in 0..self.n {
                    if self.get(i, j, t) && state.is_satellite(i) && state.is_satellite(j) {
                        l[i][j] = true;
                    }
                }
            }
        }
        l
    }

    /// Slot order replaced by `order[k]` = source slot of new slot `k`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = Self::empty(self.n, self.slots);
        for (k, &src) in order.iter().enumerate() {
            for i in 0..self.n {
                for j in 0..self.n {
                    if self.get(i, j, src) {
                        out.set(i, j, k, true);
                    }
                }
            }
        }
        out
    }

    pub fn to_file(&self, state: &ScenarioState, algorithm: &str) -> ScheduleFile {
        ScheduleFile {
            state: state.index,
            slots: self.slots,
            algorithm: algorithm.to_string(),
            links: (0..self.slots)
                .map(|t| {
                    self.slot_links(t)
                        .into_iter()
                        .map(|(i, j)| [state.nodes()[i].name.clone(), state.nodes()[j].name.clone()])
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_file(file: &ScheduleFile, state: &ScenarioState) -> Result<Self> {
        if file.slots != state.slots || file.links.len() != state.slots {
            return Err(Error::invalid(format!(
                "schedule for state {} has {} slots, state has {}",
                file.state, file.slots, state.slots
            )));
        }
        let lookup = |name: &str| {
            state
                .nodes()
                .iter()
                .position(|n| n.name == name)
                .ok_or_else(|| Error::invalid(format!("schedule names unknown node `{name}`")))
        };
        let mut x = Self::empty(state.node_count(), state.slots);
        for (t, links) in file.links.iter().enumerate() {
            for [a, b] in links {
                x.link(lookup(a)?, lookup(b)?, t);
            }
        }
        Ok(x)
    }
}

/// Per-slot link lists keyed by node name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub state: usize,
    pub slots: usize,
    pub algorithm: String,
    pub links: Vec<Vec<[String; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    /// `x[i][j][t] != x[j][i][t]`.
    Asymmetric { i: usize, j: usize, slot: usize },
    /// Link between nodes that cannot see each other (includes self-links).
    NotVisible { i: usize, j: usize, slot: usize },
    /// Node linked to more than one partner in a slot.
    Degree { node: usize, slot: usize, links: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Asymmetric { i, j, slot } => {
                write!(f, "symmetry violated at ({}, {}, {})", i + 1, j + 1, slot + 1)
            }
            Violation::NotVisible { i, j, slot } => {
                write!(f, "invisible pair ({}, {}) linked in slot {}", i + 1, j + 1, slot + 1)
            }
            Violation::Degree { node, slot, links } => {
                write!(f, "node {} has {links} links in slot {}", node + 1, slot + 1)
            }
        }
    }
}

/// Lists every violation of binary symmetry, visibility and the
/// one-link-per-slot rule. Empty iff the tensor is a valid schedule.
pub fn validate_topology(x: &TopologySchedule, state: &ScenarioState) -> Result<Vec<Violation>> {
    if x.node_count() != state.node_count() || x.slots() != state.slots {
        return Err(Error::invalid(format!(
            "schedule is {}x{}x{}, state {} is {}x{}x{}",
            x.node_count(),
            x.node_count(),
            x.slots(),
            state.index,
            state.node_count(),
            state.node_count(),
            state.slots
        )));
    }
    let n = x.node_count();
    let mut out = Vec::new();
    for t in 0..x.slots() {
        for i in 0..n {
            for j in i..n {
                let (a, b) = (x.get(i, j, t), x.get(j, i, t));
                if a != b {
                    out.push(Violation::Asymmetric { i, j, slot: t });
                }
                if (a || b) && !state.visible(i, j) {
                    out.push(Violation::NotVisible { i, j, slot: t });
                }
            }
        }
        for i in 0..n {
            let links = (0..n).filter(|&j| x.get(i, j, t)).count();
            if links > 1 {
                out.push(Violation::Degree { node: i, slot: t, links });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangingAudit {
    pub l_min: usize,
    /// Distinct satellite partners, indexed by node; `None` for antennas.
    pub partners: Vec<Option<usize>>,
    pub pass: Vec<Option<bool>>,
}

impl RangingAudit {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().flatten().all(|&p| p)
    }

    pub fn failing(&self) -> Vec<usize> {
        (0..self.pass.len()).filter(|&i| self.pass[i] == Some(false)).collect()
    }
}

/// Counts distinct satellite partners per satellite; antenna links never
/// count toward ranging.
pub fn ranging_audit(x: &TopologySchedule, state: &ScenarioState, l_min: usize) -> RangingAudit {
    let l = x.ranging_matrix(state);
    let mut partners = vec![None; state.node_count()];
    let mut pass = vec![None; state.node_count()];
    for i in state.satellites() {
        let c = l[i].iter().filter(|&&b| b).count();
        partners[i] = Some(c);
        pass[i] = Some(c >= l_min);
    }
    RangingAudit {
        l_min,
        partners,
        pass,
    }
}
