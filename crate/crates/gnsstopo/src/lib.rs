//! Link scheduling for time-slotted GNSS-style satellite networks.

pub mod error;
pub mod fcp;
pub mod forwarding;
pub mod hmwm;
pub mod ilp;
pub mod lp;
pub mod matching;
pub mod model;
pub mod railp;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod synth;
pub mod topology;

pub use error::{Error, Result};
pub use fcp::schedule_state_fcp;
pub use hmwm::schedule_state_hmwm;
pub use ilp::build_ilp;
pub use lp::export_lp;
pub use model::{IlpModel, IlpSolution, SearchStats, SolveStatus};
pub use railp::{build_railp, extract_topology};
pub use scenario::{
    classify_nodes, load_scenario, EdgeClass, Flow, Node, NodeKind, Partition, Scenario, ScenarioState,
    SystemParams, TrafficProfile,
};
pub use search::solve_branch_and_bound;
pub use sim::{compare, simulate, Averaging, EvaluationReport};
pub use topology::{ranging_audit, validate_topology, RangingAudit, TopologySchedule, Violation};
