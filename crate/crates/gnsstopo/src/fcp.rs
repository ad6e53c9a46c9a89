//! Fair-contact-plan baseline: every slot takes the matching that serves
//! the links idle the longest, then the slots are shuffled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matching::{tiebroken_matching, MatchingMode};
use crate::scenario::ScenarioState;
use crate::topology::TopologySchedule;

/// Slots each visible pair has gone unscheduled since it was last used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessCounters {
    /// Aligned with `ScenarioState::edges`.
    pub disabled: Vec<u64>,
}

impl FairnessCounters {
    pub fn new(state: &ScenarioState) -> Self {
        FairnessCounters {
            disabled: vec![0; state.edges().len()],
        }
    }

    /// Resets scheduled pairs to zero and ages the rest by one slot.
    pub fn update(&mut self, state: &ScenarioState, links: &[(usize, usize)]) {
        for (k, &(i, j)) in state.edges().iter().enumerate() {
            if links.contains(&(i, j)) || links.contains(&(j, i)) {
                self.disabled[k] = 0;
            } else {
                self.disabled[k] += 1;
            }
        }
    }

    pub fn spread(&self) -> u64 {
        let max = self.disabled.iter().max().copied().unwrap_or(0);
        let min = self.disabled.iter().min().copied().unwrap_or(0);
        max - min
    }
}

/// Maximum-cardinality matching of largest total disabled time; ties go
/// to low node indices.
pub fn fcp_slot_matching(state: &ScenarioState, counters: &FairnessCounters) -> Vec<(usize, usize)> {
    let edges: Vec<(usize, usize, f64)> = state
        .edges()
        .iter()
        .zip(&counters.disabled)
        .map(|(&(i, j), &d)| (i, j, d as f64))
        .collect();
    tiebroken_matching(state.node_count(), &edges, MatchingMode::MaxCardinality)
}

/// Unshuffled per-slot matchings with the counters after each slot.
pub fn trace_state_fcp(state: &ScenarioState) -> Vec<(Vec<(usize, usize)>, FairnessCounters)> {
    let mut counters = FairnessCounters::new(state);
    (0..state.slots)
        .map(|_| {
            let m = fcp_slot_matching(state, &counters);
            counters.update(state, &m);
            (m, counters.clone())
        })
        .collect()
}

pub fn schedule_state_fcp(state: &ScenarioState, seed: u64) -> TopologySchedule {
    let mut slots: Vec<Vec<(usize, usize)>> = trace_state_fcp(state).into_iter().map(|(m, _)| m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots.shuffle(&mut rng);
    TopologySchedule::from_matchings(state.node_count(), &slots)
}
