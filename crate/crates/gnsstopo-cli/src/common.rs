use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use gnsstopo::{load_scenario, Scenario, ScenarioState, SystemParams};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;
pub const EXIT_TIMEOUT: u8 = 5;

/// Directory searched for scenario names that are not existing paths.
pub const SCENARIO_DIR_VAR: &str = "GNSSTOPO_SCENARIO_DIR";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::new(EXIT_USAGE, anyhow!("{msg}"))
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Failure::new(EXIT_INPUT, anyhow!("{msg}"))
    }
}

impl From<gnsstopo::Error> for Failure {
    fn from(e: gnsstopo::Error) -> Self {
        let code = match e {
            gnsstopo::Error::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_INPUT,
        };
        Failure::new(code, e)
    }
}

pub type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Inclusive range of state indices, written `a..b` or `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateRange {
    pub first: usize,
    pub last: usize,
}

impl std::str::FromStr for StateRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad state index `{x}`: {e}"));
        let (first, last) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
            None => {
                let k = num(s)?;
                (k, k)
            }
        };
        if first > last {
            return Err(format!("empty state range {first}..{last}"));
        }
        Ok(StateRange { first, last })
    }
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario file, or a name looked up in $GNSSTOPO_SCENARIO_DIR.
    pub scenario: PathBuf,
    /// Inclusive state index range, e.g. `1..288`; all states by default.
    #[arg(long)]
    pub states: Option<StateRange>,
    /// Override the slot count of every selected state.
    #[arg(long)]
    pub slots: Option<usize>,
    /// Parameter override using scenario-file key names; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,
    /// Use the smallest safe big-M constants for each state.
    #[arg(long)]
    pub tight_m: bool,
    /// Let the heuristic use maximum-weight instead of perfect matchings.
    #[arg(long)]
    pub non_perfect: bool,
    /// Worker threads; states are processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn resolve_scenario(path: &Path) -> CliResult<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if let Some(dir) = std::env::var_os(SCENARIO_DIR_VAR) {
        let dir = PathBuf::from(dir);
        for cand in [dir.join(path), dir.join(path).with_extension("json")] {
            if cand.exists() {
                return Ok(cand);
            }
        }
    }
    Err(Failure::input(format!(
        "scenario `{}` not found (also searched ${SCENARIO_DIR_VAR})",
        path.display()
    )))
}

/// A loaded scenario with overrides applied and the selected states.
pub struct Job {
    pub scenario: Scenario,
    pub states: Vec<ScenarioState>,
    base: SystemParams,
    tight_m: bool,
}

impl Job {
    pub fn load(args: &ScenarioArgs) -> CliResult<Job> {
        if args.workers == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        if args.slots == Some(0) {
            return Err(Failure::usage("--slots must be at least 1"));
        }
        let path = resolve_scenario(&args.scenario)?;
        let scenario = load_scenario(&path)?;
        let mut base = scenario.params.clone();
        for (k, v) in &args.overrides {
            base.set(k, v).map_err(|e| Failure::usage(format!("--set {k}={v}: {e}")))?;
        }
        if args.non_perfect {
            base.perfect_matching = false;
        }
        let selected: Vec<&ScenarioState> = match args.states {
            None => scenario.states.iter().collect(),
            Some(r) => {
                let known = |k| scenario.state(k).is_some();
                if !known(r.first) || !known(r.last) {
                    return Err(Failure::usage(format!(
                        "state range {}..{} is outside the scenario's states",
                        r.first, r.last
                    )));
                }
                scenario
                    .states
                    .iter()
                    .filter(|s| (r.first..=r.last).contains(&s.index))
                    .collect()
            }
        };
        let states = selected
            .into_iter()
            .map(|s| match args.slots {
                Some(t) => s.with_slots(t),
                None => s.clone(),
            })
            .collect();
        log::info!("scenario `{}` from {}", scenario.name, path.display());
        Ok(Job {
            scenario,
            states,
            base,
            tight_m: args.tight_m,
        })
    }

    pub fn params_for(&self, state: &ScenarioState) -> SystemParams {
        if self.tight_m {
            self.base.tightened(state.slots)
        } else {
            self.base.clone()
        }
    }
}

pub fn thread_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::new(1, e))
}

pub fn state_stem(index: usize) -> String {
    format!("state_{index:04}")
}
