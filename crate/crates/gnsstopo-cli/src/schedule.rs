use std::time::{Duration, Instant};

use clap::{Args, ValueEnum};
use gnsstopo::lp::lp_string;
use gnsstopo::search::{solve, SearchOptions};
use gnsstopo::{
    build_ilp, build_railp, ranging_audit, schedule_state_fcp, schedule_state_hmwm, IlpModel,
    ScenarioState, SearchStats, SolveStatus, TopologySchedule,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{
    state_stem, thread_pool, CliResult, Failure, Job, ScenarioArgs, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_TIMEOUT,
};
use crate::output::{opt_real, real, write_atomic, write_json, Csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ilp,
    Railp,
    Hmwm,
    Fcp,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Ilp => "ilp",
            Algo::Railp => "railp",
            Algo::Hmwm => "hmwm",
            Algo::Fcp => "fcp",
        }
    }
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Seed of the one generator all per-state randomness is drawn from.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver budget per state, seconds.
    #[arg(long, default_value_t = 300.0)]
    pub time_budget: f64,
    /// Write the ILP/RAILP model of each state as an LP file and stop.
    #[arg(long)]
    pub export_lp_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Optimal,
    FeasibleTimeout,
    Heuristic,
    Exported,
    Infeasible,
    Timeout,
    Error,
}

impl Status {
    fn name(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::FeasibleTimeout => "feasible_timeout",
            Status::Heuristic => "heuristic",
            Status::Exported => "exported",
            Status::Infeasible => "infeasible",
            Status::Timeout => "timeout",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct StateRun {
    state: usize,
    status: Status,
    build_ms: f64,
    solve_ms: f64,
    wall_ms: f64,
    objective: Option<f64>,
    bound: Option<f64>,
    ranging_pass: Option<bool>,
    stats: Option<SearchStats>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    algorithm: &'a str,
    seed: u64,
    time_budget_s: f64,
    states: &'a [StateRun],
}

struct Planned<'a> {
    state: &'a ScenarioState,
    seed: u64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn run(args: ScheduleArgs) -> CliResult {
    if !(args.time_budget.is_finite() && args.time_budget > 0.0) {
        return Err(Failure::usage("--time-budget must be a positive number of seconds"));
    }
    if args.export_lp_only && matches!(args.algo, Algo::Hmwm | Algo::Fcp) {
        return Err(Failure::usage("--export-lp-only applies to --algo ilp or railp"));
    }
    let job = Job::load(&args.scenario)?;
    log::info!("seed {}", args.seed);
    // Drawn in state order before dispatch, so results do not depend on
    // the worker count.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let plan: Vec<Planned> = job
        .states
        .iter()
        .map(|state| Planned {
            state,
            seed: rng.next_u64(),
        })
        .collect();
    let out = &args.scenario.out;
    std::fs::create_dir_all(out).map_err(|e| Failure::new(1, anyhow::anyhow!("{}: {e}", out.display())))?;
    let pool = thread_pool(args.scenario.workers)?;
    let rows: Vec<StateRun> = pool.install(|| plan.par_iter().map(|p| run_state(&job, &args, p)).collect());
    let mut timing = Csv::new(&[
        "state",
        "algorithm",
        "status",
        "build_ms",
        "solve_ms",
        "wall_ms",
        "objective",
        "bound",
        "nodes",
        "ranging_pass",
    ]);
    for r in &rows {
        timing.row([
            r.state.to_string(),
            args.algo.name().to_string(),
            r.status.name().to_string(),
            real(r.build_ms),
            real(r.solve_ms),
            real(r.wall_ms),
            opt_real(r.objective),
            opt_real(r.bound),
            r.stats.as_ref().map(|s| s.nodes.to_string()).unwrap_or_default(),
            r.ranging_pass.map(|b| b.to_string()).unwrap_or_default(),
        ]);
    }
    timing.write(&out.join("timing.csv"))?;
    write_json(
        &out.join("run.json"),
        &RunSummary {
            scenario: &job.scenario.name,
            algorithm: args.algo.name(),
            seed: args.seed,
            time_budget_s: args.time_budget,
            states: &rows,
        },
    )?;
    finish(&rows)
}

fn finish(rows: &[StateRun]) -> CliResult {
    let count = |s: Status| rows.iter().filter(|r| r.status == s).count();
    let failing = rows.iter().filter(|r| r.ranging_pass == Some(false)).count();
    if failing > 0 {
        log::warn!("{failing} of {} schedules miss the ranging requirement", rows.len());
    }
    if count(Status::FeasibleTimeout) > 0 {
        log::warn!("{} states stopped at the time budget", count(Status::FeasibleTimeout));
    }
    if count(Status::Error) > 0 {
        let first = rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Failure::new(
            EXIT_INPUT,
            anyhow::anyhow!("{} states failed, first: {first}", count(Status::Error)),
        ));
    }
    if count(Status::Infeasible) > 0 {
        return Err(Failure::new(
            EXIT_INFEASIBLE,
            anyhow::anyhow!("{} states are infeasible", count(Status::Infeasible)),
        ));
    }
    if count(Status::Timeout) > 0 {
        return Err(Failure::new(
            EXIT_TIMEOUT,
            anyhow::anyhow!("{} states found no schedule within the budget", count(Status::Timeout)),
        ));
    }
    log::info!("scheduled {} states", rows.len());
    Ok(())
}

fn run_state(job: &Job, args: &ScheduleArgs, p: &Planned) -> StateRun {
    let start = Instant::now();
    let mut row = StateRun {
        state: p.state.index,
        status: Status::Error,
        build_ms: 0.0,
        solve_ms: 0.0,
        wall_ms: 0.0,
        objective: None,
        bound: None,
        ranging_pass: None,
        stats: None,
        error: None,
    };
    if let Err(e) = schedule_one(job, args, p, &mut row) {
        row.status = match &e {
            gnsstopo::Error::Infeasible(_) => Status::Infeasible,
            _ => Status::Error,
        };
        log::warn!("state {}: {e}", p.state.index);
        row.error = Some(e.to_string());
    }
    row.wall_ms = ms(start.elapsed());
    row
}

fn schedule_one(job: &Job, args: &ScheduleArgs, p: &Planned, row: &mut StateRun) -> gnsstopo::Result<()> {
    let state = p.state;
    let params = job.params_for(state);
    let traffic = job.scenario.traffic_for(state);
    let out = &args.scenario.out;
    let stem = state_stem(state.index);
    let x: TopologySchedule = match args.algo {
        Algo::Hmwm | Algo::Fcp => {
            let t0 = Instant::now();
            let x = if args.algo == Algo::Hmwm {
                schedule_state_hmwm(state, &traffic, &params)?
            } else {
                schedule_state_fcp(state, p.seed)
            };
            row.solve_ms = ms(t0.elapsed());
            row.status = Status::Heuristic;
            x
        }
        Algo::Ilp | Algo::Railp => {
            let t0 = Instant::now();
            let model: IlpModel = if args.algo == Algo::Ilp {
                build_ilp(state, &traffic, &params)?
            } else {
                build_railp(state, &traffic, &params)?
            };
            row.build_ms = ms(t0.elapsed());
            if args.export_lp_only {
                let path = out.join(format!("{stem}.lp"));
                write_atomic(&path, lp_string(&model).as_bytes()).map_err(|f| io_error(path, f))?;
                row.status = Status::Exported;
                return Ok(());
            }
            let opts = SearchOptions {
                time_budget: Duration::from_secs_f64(args.time_budget),
                ..SearchOptions::default()
            };
            let t1 = Instant::now();
            let solved = solve(&model, &opts)?;
            row.solve_ms = ms(t1.elapsed());
            let sol = &solved.solution;
            row.status = match sol.status {
                SolveStatus::Optimal => Status::Optimal,
                SolveStatus::FeasibleTimeout => Status::FeasibleTimeout,
                SolveStatus::Infeasible => Status::Infeasible,
                SolveStatus::Timeout => Status::Timeout,
            };
            row.objective = finite(sol.objective_value);
            row.bound = finite(sol.bound);
            row.stats = Some(sol.stats.clone());
            match solved.schedule {
                Some(x) => x,
                None => return Ok(()),
            }
        }
    };
    row.ranging_pass = Some(ranging_audit(&x, state, params.l_min).all_pass());
    let file = x.to_file(state, args.algo.name());
    let path = out.join(format!("{stem}.json"));
    write_json(&path, &file).map_err(|f| io_error(path, f))
}

fn io_error(path: std::path::PathBuf, f: Failure) -> gnsstopo::Error {
    gnsstopo::Error::Io {
        path,
        source: std::io::Error::other(f.error.to_string()),
    }
}
