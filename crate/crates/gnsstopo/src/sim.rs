//! Store-carry-forward evaluation of a schedule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forwarding::{Forwarder, Queue};
use crate::scenario::{ScenarioState, SystemParams, TrafficProfile};
use crate::topology::{ranging_audit, validate_topology, TopologySchedule};

/// Packets with the same source, generation slot and fate. Slots are
/// global across repetitions, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub source: usize,
    pub generated_slot: u64,
    /// `None` when still buffered at the end of the horizon.
    pub delivered_slot: Option<u64>,
    pub count: u64,
}

impl PacketRecord {
    pub fn delay_slots(&self) -> Option<u64> {
        self.delivered_slot.map(|d| d - self.generated_slot)
    }
}

/// Running totals after a slot; `generated = delivered + buffered + blocked`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotLedger {
    pub slot: u64,
    pub generated: u64,
    pub delivered: u64,
    pub buffered: u64,
    pub blocked: u64,
}

impl SlotLedger {
    pub fn balanced(&self) -> bool {
        self.generated == self.delivered + self.buffered + self.blocked
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub repetitions: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { repetitions: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub records: Vec<PacketRecord>,
    pub ledger: Vec<SlotLedger>,
    /// Blocked packets as `(node, generated slot, count)`.
    pub blocked: Vec<(usize, u64, u64)>,
    /// Sum over slots of each buffered packet's age at the end of the slot.
    pub age_sum: u64,
    pub buffer_peak: Vec<u64>,
    /// Total slots simulated.
    pub horizon: u64,
}

/// Runs `x` repeated `opts.repetitions` times with buffers carried over.
pub fn run(
    state: &ScenarioState,
    x: &TopologySchedule,
    traffic: &TrafficProfile,
    params: &SystemParams,
    opts: SimOptions,
) -> Result<SimOutcome> {
    let violations = validate_topology(x, state)?;
    if let Some(v) = violations.first() {
        return Err(Error::invalid(format!("invalid schedule: {v}")));
    }
    if opts.repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    if traffic.node_count() != state.node_count() || traffic.slots() != state.slots {
        return Err(Error::invalid("traffic profile does not match the state"));
    }
    let fwd = Forwarder::new(state, params);
    let n = state.node_count();
    let matchings = x.matchings();
    let mut queues = vec![Queue::default(); n];
    let mut out = SimOutcome {
        records: Vec::new(),
        ledger: Vec::new(),
        blocked: Vec::new(),
        age_sum: 0,
        buffer_peak: vec![0; n],
        horizon: (opts.repetitions * state.slots) as u64,
    };
    let (mut generated, mut delivered, mut blocked) = (0u64, 0u64, 0u64);
    for rep in 0..opts.repetitions {
        for (t, links) in matchings.iter().enumerate() {
            let now = (rep * state.slots + t) as u64;
            let slot = fwd.step(&mut queues, links, now, |i| traffic.rate(i, t));
            generated += slot.generated;
            for tr in slot.transfers.iter().filter(|tr| tr.delivered) {
                for c in &tr.chunks {
                    delivered += c.count;
                    out.records.push(PacketRecord {
                        source: c.source,
                        generated_slot: c.generated,
                        delivered_slot: Some(now),
                        count: c.count,
                    });
                }
            }
            for &(i, c) in &slot.blocked {
                blocked += c.count;
                out.blocked.push((i, c.generated, c.count));
            }
            let mut buffered = 0;
            for (i, q) in queues.iter().enumerate() {
                buffered += q.total();
                out.buffer_peak[i] = out.buffer_peak[i].max(q.total());
                out.age_sum += q.age_sum(now);
            }
            out.ledger.push(SlotLedger {
                slot: now,
                generated,
                delivered,
                buffered,
                blocked,
            });
        }
    }
    for q in &queues {
        for c in q.chunks() {
            out.records.push(PacketRecord {
                source: c.source,
                generated_slot: c.generated,
                delivered_slot: None,
                count: c.count,
            });
        }
    }
    Ok(out)
}

/// Delay distribution merged from packet counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayHistogram {
    /// delay in slots -> delivered packets
    pub delivered: BTreeMap<u64, u64>,
    pub generated: u64,
    pub censored: u64,
    pub blocked: u64,
    /// Sum over censored packets of `horizon - generated`.
    pub censored_age: u64,
}

impl DelayHistogram {
    pub fn merge(&mut self, other: &DelayHistogram) {
        for (&d, &c) in &other.delivered {
            *self.delivered.entry(d).or_default() += c;
        }
        self.generated += other.generated;
        self.censored += other.censored;
        self.blocked += other.blocked;
        self.censored_age += other.censored_age;
    }

    pub fn delivered_count(&self) -> u64 {
        self.delivered.values().sum()
    }

    /// Mean delay over delivered packets; 0 when none were delivered.
    pub fn average(&self) -> f64 {
        let n = self.delivered_count();
        if n == 0 {
            return 0.0;
        }
        self.delivered.iter().map(|(&d, &c)| (d * c) as f64).sum::<f64>() / n as f64
    }

    /// Mean over delivered and censored packets, censored ones charged as if
    /// delivered in the first slot after the horizon.
    pub fn average_with_penalty(&self) -> f64 {
        let n = self.delivered_count() + self.censored;
        if n == 0 {
            return 0.0;
        }
        let sum: u64 = self.delivered.iter().map(|(&d, &c)| d * c).sum::<u64>() + self.censored_age;
        sum as f64 / n as f64
    }

    /// Fraction of generated packets delivered within each delay.
    pub fn cdf(&self) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        if self.generated == 0 {
            return out;
        }
        let mut acc = 0;
        for (&d, &c) in &self.delivered {
            acc += c;
            out.insert(d, acc as f64 / self.generated as f64);
        }
        out
    }

    pub fn max_delay(&self) -> Option<u64> {
        self.delivered.keys().next_back().copied()
    }
}

impl SimOutcome {
    pub fn histogram(&self) -> DelayHistogram {
        let mut h = DelayHistogram::default();
        for r in &self.records {
            h.generated += r.count;
            match r.delay_slots() {
                Some(d) => *h.delivered.entry(d).or_default() += r.count,
                None => {
                    h.censored += r.count;
                    h.censored_age += r.count * (self.horizon - r.generated_slot);
                }
            }
        }
        for &(_, _, c) in &self.blocked {
            h.generated += c;
            h.blocked += c;
        }
        h
    }
}

/// Which mean a report leads with; both are always present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Over delivered packets; undelivered ones are counted separately.
    #[default]
    Delivered,
    /// Undelivered packets charged as delivered right after the horizon.
    HorizonPenalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(default)]
    pub algorithm: String,
    #[serde(default)]
    pub scenario: String,
    /// State indices covered.
    pub states: Vec<usize>,
    pub repetitions: usize,
    pub l_min: usize,
    #[serde(default)]
    pub averaging: Averaging,
    pub average_delay_slots: f64,
    pub average_delay_with_penalty: f64,
    pub max_delay: Option<u64>,
    pub generated: u64,
    pub delivered: u64,
    pub undelivered: u64,
    pub blocked: u64,
    pub age_sum: u64,
    pub histogram: DelayHistogram,
    /// Satellite name -> passes the ranging requirement.
    pub ranging_pass: BTreeMap<String, bool>,
    /// States (by index) where every satellite passed.
    pub ranging_states_passed: usize,
    pub buffer_peak: BTreeMap<String, u64>,
    pub runtime_ms: BTreeMap<String, f64>,
}

impl EvaluationReport {
    pub fn headline_delay(&self) -> f64 {
        match self.averaging {
            Averaging::Delivered => self.average_delay_slots,
            Averaging::HorizonPenalty => self.average_delay_with_penalty,
        }
    }

    pub fn cdf(&self) -> BTreeMap<u64, f64> {
        self.histogram.cdf()
    }

    pub fn ranging_pass_rate(&self) -> f64 {
        if self.states.is_empty() {
            return 0.0;
        }
        self.ranging_states_passed as f64 / self.states.len() as f64
    }

    /// Packet-weighted merge of per-state reports of one run. Ranging and
    /// buffer maps keep the worst value per satellite.
    pub fn aggregate(parts: &[EvaluationReport]) -> Option<EvaluationReport> {
        let first = parts.first()?;
        let mut out = EvaluationReport {
            states: Vec::new(),
            histogram: DelayHistogram::default(),
            age_sum: 0,
            ranging_pass: BTreeMap::new(),
            ranging_states_passed: 0,
            buffer_peak: BTreeMap::new(),
            runtime_ms: BTreeMap::new(),
            ..first.clone()
        };
        for p in parts {
            out.states.extend(&p.states);
            out.histogram.merge(&p.histogram);
            out.age_sum += p.age_sum;
            out.ranging_states_passed += p.ranging_states_passed;
            for (k, &v) in &p.ranging_pass {
                let e = out.ranging_pass.entry(k.clone()).or_insert(true);
                *e &= v;
            }
            for (k, &v) in &p.buffer_peak {
                let e = out.buffer_peak.entry(k.clone()).or_default();
                *e = (*e).max(v);
            }
            for (k, &v) in &p.runtime_ms {
                *out.runtime_ms.entry(k.clone()).or_default() += v;
            }
        }
        out.fill_from_histogram();
        Some(out)
    }

    fn fill_from_histogram(&mut self) {
        let h = &self.histogram;
        self.average_delay_slots = h.average();
        self.average_delay_with_penalty = h.average_with_penalty();
        self.max_delay = h.max_delay();
        self.generated = h.generated;
        self.delivered = h.delivered_count();
        self.undelivered = h.censored;
        self.blocked = h.blocked;
    }
}

/// Simulates one state's schedule and assembles its report.
pub fn simulate(
    state: &ScenarioState,
    x: &TopologySchedule,
    traffic: &TrafficProfile,
    params: &SystemParams,
    repetitions: usize,
) -> Result<EvaluationReport> {
    let outcome = run(state, x, traffic, params, SimOptions { repetitions })?;
    Ok(report_from(state, x, params, repetitions, &outcome))
}

pub fn report_from(
    state: &ScenarioState,
    x: &TopologySchedule,
    params: &SystemParams,
    repetitions: usize,
    outcome: &SimOutcome,
) -> EvaluationReport {
    let audit = ranging_audit(x, state, params.l_min);
    let names = state.nodes();
    let mut ranging_pass = BTreeMap::new();
    let mut buffer_peak = BTreeMap::new();
    for i in state.satellites() {
        ranging_pass.insert(names[i].name.clone(), audit.pass[i] == Some(true));
        buffer_peak.insert(names[i].name.clone(), outcome.buffer_peak[i]);
    }
    let mut r = EvaluationReport {
        algorithm: String::new(),
        scenario: String::new(),
        states: vec![state.index],
        repetitions,
        l_min: params.l_min,
        averaging: Averaging::Delivered,
        average_delay_slots: 0.0,
        average_delay_with_penalty: 0.0,
        max_delay: None,
        generated: 0,
        delivered: 0,
        undelivered: 0,
        blocked: 0,
        age_sum: outcome.age_sum,
        histogram: outcome.histogram(),
        ranging_pass,
        ranging_states_passed: usize::from(audit.all_pass()),
        buffer_peak,
        runtime_ms: BTreeMap::new(),
    };
    r.fill_from_histogram();
    r
}

/// One row of an algorithm comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub scenario: String,
    pub l_min: usize,
    pub states: usize,
    pub averaging: Averaging,
    /// The mean selected by `averaging`.
    pub average_delay: f64,
    pub average_delay_slots: f64,
    pub average_delay_with_penalty: f64,
    pub max_delay: Option<u64>,
    pub delivered_fraction: f64,
    pub ranging_pass_rate: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Set when the reports cover different scenarios or state sets.
    pub mismatched: bool,
    /// Delay -> CDF value per algorithm, aligned on the union of delays.
    pub cdf: BTreeMap<u64, Vec<f64>>,
}

/// Tabulates reports, one row each, in input order.
pub fn compare(reports: &[EvaluationReport]) -> Comparison {
    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            algorithm: r.algorithm.clone(),
            scenario: r.scenario.clone(),
            l_min: r.l_min,
            states: r.states.len(),
            averaging: r.averaging,
            average_delay: r.headline_delay(),
            average_delay_slots: r.average_delay_slots,
            average_delay_with_penalty: r.average_delay_with_penalty,
            max_delay: r.max_delay,
            delivered_fraction: if r.generated == 0 {
                0.0
            } else {
                r.delivered as f64 / r.generated as f64
            },
            ranging_pass_rate: r.ranging_pass_rate(),
            runtime_ms: r.runtime_ms.values().sum(),
        })
        .collect();
    let mismatched = reports.windows(2).any(|w| {
        w[0].scenario != w[1].scenario
            || w[0].states != w[1].states
            || w[0].repetitions != w[1].repetitions
            || w[0].averaging != w[1].averaging
    });
    let cdfs: Vec<BTreeMap<u64, f64>> = reports.iter().map(EvaluationReport::cdf).collect();
    let mut cdf = BTreeMap::new();
    let delays: std::collections::BTreeSet<u64> = cdfs.iter().flat_map(|c| c.keys().copied()).collect();
    for d in delays {
        let row = cdfs
            .iter()
            .map(|c| c.range(..=d).next_back().map_or(0.0, |(_, &v)| v))
            .collect();
        cdf.insert(d, row);
    }
    Comparison { rows, mismatched, cdf }
}
