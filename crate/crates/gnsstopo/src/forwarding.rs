//! Oldest-first store-carry-forward mechanics for one slot.
//!
//! Per slot: every satellite first adds its generated packets, then each
//! scheduled link moves packets at once: non-anchor to anchor up to C_ss
//! (and never beyond the anchor's free space), anchor to antenna up to
//! C_sg. Packets received in a slot are not forwarded in that slot because
//! a node holds one link per slot. Any buffer still above B_max at the end
//! of the slot drops its youngest packets, counted as blocked.

use crate::ilp::{arcs_from, ArcKind};
use crate::scenario::{ScenarioState, SystemParams};

/// Packets sharing source and generation slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chunk {
    pub generated: u64,
    pub source: usize,
    pub count: u64,
}

/// One node's buffer, sorted by `(generated, source)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Queue {
    chunks: Vec<Chunk>,
    total: u64,
}

impl Queue {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn push(&mut self, c: Chunk) {
        if c.count == 0 {
            return;
        }
        self.total += c.count;
        let key = (c.generated, c.source);
        match self.chunks.binary_search_by(|x| (x.generated, x.source).cmp(&key)) {
            Ok(k) => self.chunks[k].count += c.count,
            Err(k) => self.chunks.insert(k, c),
        }
    }

    /// Removes up to `k` oldest packets.
    pub fn take_oldest(&mut self, mut k: u64) -> Vec<Chunk> {
        let mut out = Vec::new();
        while k > 0 {
            let Some(front) = self.chunks.first_mut() else { break };
            let moved = front.count.min(k);
            out.push(Chunk { count: moved, ..*front });
            front.count -= moved;
            k -= moved;
            self.total -= moved;
            if front.count == 0 {
                self.chunks.remove(0);
            }
        }
        out
    }

    /// Removes up to `k` youngest packets.
    pub fn take_youngest(&mut self, mut k: u64) -> Vec<Chunk> {
        let mut out = Vec::new();
        while k > 0 {
            let Some(back) = self.chunks.last_mut() else { break };
            let moved = back.count.min(k);
            out.push(Chunk { count: moved, ..*back });
            back.count -= moved;
            k -= moved;
            self.total -= moved;
            if back.count == 0 {
                self.chunks.pop();
            }
        }
        out
    }

    /// Sum of `count * (now - generated)` over held packets.
    pub fn age_sum(&self, now: u64) -> u64 {
        self.chunks.iter().map(|c| c.count * (now - c.generated)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub from: usize,
    pub to: usize,
    pub chunks: Vec<Chunk>,
    /// The receiver is an antenna.
    pub delivered: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotOutcome {
    pub generated: u64,
    pub transfers: Vec<Transfer>,
    pub blocked: Vec<(usize, Chunk)>,
}

impl SlotOutcome {
    pub fn delivered(&self) -> u64 {
        self.transfers
            .iter()
            .filter(|t| t.delivered)
            .flat_map(|t| &t.chunks)
            .map(|c| c.count)
            .sum()
    }

    pub fn blocked_count(&self) -> u64 {
        self.blocked.iter().map(|(_, c)| c.count).sum()
    }
}

/// Arc kinds and limits of one state, precomputed for repeated slots.
#[derive(Debug, Clone)]
pub struct Forwarder<'a> {
    state: &'a ScenarioState,
    params: &'a SystemParams,
    n: usize,
    kind: Vec<Option<ArcKind>>,
    satellites: Vec<usize>,
}

impl<'a> Forwarder<'a> {
    pub fn new(state: &'a ScenarioState, params: &'a SystemParams) -> Self {
        let n = state.node_count();
        let mut kind = vec![None; n * n];
        for i in 0..n {
            for (j, k) in arcs_from(state, i) {
                kind[i * n + j] = Some(k);
            }
        }
        Forwarder {
            state,
            params,
            n,
            kind,
            satellites: state.satellites().collect(),
        }
    }

    pub fn state(&self) -> &ScenarioState {
        self.state
    }

    /// Runs one slot in place. `now` is the global slot number stamped on
    /// new packets; `rate(i)` is node `i`'s generation this slot.
    pub fn step(
        &self,
        queues: &mut [Queue],
        links: &[(usize, usize)],
        now: u64,
        rate: impl Fn(usize) -> u64,
    ) -> SlotOutcome {
        let params = self.params;
        let mut out = SlotOutcome::default();
        for &i in &self.satellites {
            let f = rate(i);
            out.generated += f;
            queues[i].push(Chunk {
                generated: now,
                source: i,
                count: f,
            });
        }
        for &(a, b) in links {
            for (from, to) in [(a, b), (b, a)] {
                let moved = match self.kind[from * self.n + to] {
                    Some(ArcKind::Access) => {
                        let room = params.b_max.saturating_sub(queues[to].total());
                        queues[from].take_oldest(params.c_ss.min(room))
                    }
                    Some(ArcKind::Downlink) => queues[from].take_oldest(params.c_sg),
                    _ => continue,
                };
                if moved.is_empty() {
                    continue;
                }
                let delivered = !self.state.is_satellite(to);
                if !delivered {
                    for &c in &moved {
                        queues[to].push(c);
                    }
                }
                out.transfers.push(Transfer {
                    from,
                    to,
                    chunks: moved,
                    delivered,
                });
            }
        }
        for &i in &self.satellites {
            let excess = queues[i].total().saturating_sub(params.b_max);
            if excess > 0 {
                for c in queues[i].take_youngest(excess) {
                    out.blocked.push((i, c));
                }
            }
        }
        out
    }
}
