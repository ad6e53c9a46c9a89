//! Solver-neutral integer program container.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ScenarioState, SystemParams, TrafficProfile};

/// Feasibility tolerance for checking real-weighted rows.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    /// Non-negative integer with an optional upper bound.
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub upper: Option<i64>,
}

pub type VarId = usize;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: VarId, c: f64) -> &mut Self {
        self.terms.push((v, c));
        self
    }

    pub fn with(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, values: &[i64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v] as f64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn holds(&self, values: &[i64]) -> bool {
        let lhs = self.expr.eval(values);
        match self.sense {
            Sense::Le => lhs <= self.rhs + TOLERANCE,
            Sense::Ge => lhs >= self.rhs - TOLERANCE,
            Sense::Eq => (lhs - self.rhs).abs() <= TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjSense {
    Minimize,
    Maximize,
}

/// Which builder produced a model; the internal solver needs the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Routing-aware delay model with per-flow routing and buffers.
    RoutingAware,
    /// Routing-agnostic model over access patterns only.
    RoutingAgnostic,
}

#[derive(Debug, Clone)]
pub struct ModelSource {
    pub formulation: Formulation,
    pub state: ScenarioState,
    pub traffic: TrafficProfile,
    pub params: SystemParams,
}

#[derive(Debug, Clone)]
pub struct IlpModel {
    pub name: String,
    pub sense: ObjSense,
    pub objective: LinExpr,
    variables: Vec<Variable>,
    index: HashMap<String, VarId>,
    pub constraints: Vec<Constraint>,
    pub source: Option<ModelSource>,
}

impl IlpModel {
    pub fn new(name: impl Into<String>, sense: ObjSense) -> Self {
        IlpModel {
            name: name.into(),
            sense,
            objective: LinExpr::new(),
            variables: Vec::new(),
            index: HashMap::new(),
            constraints: Vec::new(),
            source: None,
        }
    }

    /// Declares a variable. Names must be unique.
    pub fn var(&mut self, name: String, kind: VarKind, upper: Option<i64>) -> VarId {
        let id = self.variables.len();
        let prev = self.index.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate variable {name}");
        let upper = if kind == VarKind::Binary { Some(1) } else { upper };
        self.variables.push(Variable { name, kind, upper });
        id
    }

    pub fn binary(&mut self, name: String) -> VarId {
        self.var(name, VarKind::Binary, None)
    }

    pub fn integer(&mut self, name: String, upper: Option<i64>) -> VarId {
        self.var(name, VarKind::Integer, upper)
    }

    pub fn constrain(&mut self, name: String, expr: LinExpr, sense: Sense, rhs: f64) {
        debug_assert!(expr.terms.iter().all(|&(v, _)| v < self.variables.len()));
        self.constraints.push(Constraint { name, expr, sense, rhs });
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn count(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// Dense value vector from a name map; absent names read as zero.
    pub fn values(&self, assignment: &BTreeMap<String, i64>) -> Result<Vec<i64>> {
        let mut out = vec![0; self.variables.len()];
        for (name, &val) in assignment {
            let id = self
                .lookup(name)
                .ok_or_else(|| Error::invalid(format!("assignment names undeclared variable `{name}`")))?;
            out[id] = val;
        }
        Ok(out)
    }

    pub fn objective_value(&self, assignment: &BTreeMap<String, i64>) -> Result<f64> {
        Ok(self.objective.eval(&self.values(assignment)?))
    }

    /// Names of violated bounds and rows; empty iff the assignment is
    /// feasible.
    pub fn violations(&self, assignment: &BTreeMap<String, i64>) -> Result<Vec<String>> {
        let values = self.values(assignment)?;
        let mut out = Vec::new();
        for (v, &x) in self.variables.iter().zip(&values) {
            if x < 0 || v.upper.is_some_and(|u| x > u) {
                out.push(format!("bound {} = {x}", v.name));
            }
        }
        for c in &self.constraints {
            if !c.holds(&values) {
                out.push(format!("row {}: lhs {} {} {}", c.name, c.expr.eval(&values), c.sense, c.rhs));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeout,
    Infeasible,
    /// Budget exhausted before any feasible point was found.
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub pruned_by_bound: u64,
    pub pruned_by_ranging: u64,
    pub memo_hits: u64,
    pub incumbent_updates: u64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlpSolution {
    pub status: SolveStatus,
    /// Nonzero variables only.
    pub assignment: BTreeMap<String, i64>,
    pub objective_value: f64,
    /// Proven bound on the optimum in the model's sense: a lower bound when
    /// minimizing, an upper bound when maximizing.
    pub bound: f64,
    pub stats: SearchStats,
}

impl IlpSolution {
    pub fn infeasible(stats: SearchStats) -> Self {
        IlpSolution {
            status: SolveStatus::Infeasible,
            assignment: BTreeMap::new(),
            objective_value: f64::NAN,
            bound: f64::NAN,
            stats,
        }
    }

    pub fn has_point(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::FeasibleTimeout)
    }

    pub fn value(&self, name: &str) -> i64 {
        self.assignment.get(name).copied().unwrap_or(0)
    }
}
