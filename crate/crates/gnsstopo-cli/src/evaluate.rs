use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use gnsstopo::sim::{self, Averaging};
use gnsstopo::topology::ScheduleFile;
use gnsstopo::{EvaluationReport, ScenarioState, TopologySchedule};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{state_stem, thread_pool, CliResult, Failure, Job, ScenarioArgs};
use crate::output::{real, write_json, Csv};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Directory written by `schedule`.
    #[arg(long)]
    pub schedules: PathBuf,
    /// Times each state's schedule is replayed, buffers carried over.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Lead with the mean that charges undelivered packets up to the horizon.
    #[arg(long)]
    pub horizon_penalty: bool,
}

#[derive(Debug, Serialize)]
struct StateError {
    state: usize,
    error: String,
}

fn load_schedule(dir: &Path, state: &ScenarioState) -> Result<ScheduleFile, String> {
    let path = dir.join(format!("{}.json", state_stem(state.index)));
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Per-stage solver times from a schedule run's timing log, by state.
fn read_timing(dir: &Path) -> BTreeMap<usize, BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let Ok(text) = std::fs::read_to_string(dir.join("timing.csv")) else {
        return out;
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(s), Some(b), Some(v)) = (col("state"), col("build_ms"), col("solve_ms")) else {
        return out;
    };
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let num = |k: usize| f.get(k).and_then(|x| x.parse::<f64>().ok());
        if let (Some(state), Some(build), Some(solve)) = (f.get(s).and_then(|x| x.parse().ok()), num(b), num(v)) {
            out.insert(state, BTreeMap::from([("build".to_string(), build), ("solve".to_string(), solve)]));
        }
    }
    out
}

fn evaluate_state(
    job: &Job,
    args: &EvaluateArgs,
    state: &ScenarioState,
) -> Result<(String, EvaluationReport), String> {
    let file = load_schedule(&args.schedules, state)?;
    let x = TopologySchedule::from_file(&file, state).map_err(|e| e.to_string())?;
    let params = job.params_for(state);
    let traffic = job.scenario.traffic_for(state);
    let t0 = Instant::now();
    let mut r = sim::simulate(state, &x, &traffic, &params, args.reps).map_err(|e| e.to_string())?;
    r.runtime_ms.insert("simulate".into(), t0.elapsed().as_secs_f64() * 1e3);
    Ok((file.algorithm, r))
}

pub fn run(args: EvaluateArgs) -> CliResult {
    if args.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    let job = Job::load(&args.scenario)?;
    let out = &args.scenario.out;
    let timing = read_timing(&args.schedules);
    let averaging = if args.horizon_penalty {
        Averaging::HorizonPenalty
    } else {
        Averaging::Delivered
    };
    let pool = thread_pool(args.scenario.workers)?;
    let results: Vec<_> =
        pool.install(|| job.states.par_iter().map(|s| evaluate_state(&job, &args, s)).collect());
    let mut parts = Vec::new();
    let mut errors = Vec::new();
    let mut algorithms = std::collections::BTreeSet::new();
    for (state, res) in job.states.iter().zip(results) {
        match res {
            Ok((algorithm, mut r)) => {
                r.algorithm = algorithm.clone();
                r.scenario = job.scenario.name.clone();
                r.averaging = averaging;
                if let Some(t) = timing.get(&state.index) {
                    r.runtime_ms.extend(t.clone());
                }
                write_json(&out.join(format!("report_{:04}.json", state.index)), &r)?;
                algorithms.insert(algorithm);
                parts.push(r);
            }
            Err(error) => {
                log::warn!("state {}: {error}", state.index);
                errors.push(StateError {
                    state: state.index,
                    error,
                });
            }
        }
    }
    if algorithms.len() > 1 {
        log::warn!("schedules come from several algorithms: {algorithms:?}");
    }
    write_json(&out.join("errors.json"), &errors)?;
    let Some(agg) = EvaluationReport::aggregate(&parts) else {
        return Err(Failure::input(format!(
            "no schedule in {} could be evaluated",
            args.schedules.display()
        )));
    };
    write_json(&out.join("report.json"), &agg)?;
    let mut cdf = Csv::new(&["delay_slots", "fraction"]);
    for (d, f) in agg.cdf() {
        cdf.row([d.to_string(), real(f)]);
    }
    cdf.write(&out.join("cdf.csv"))?;
    log::info!(
        "{} states, {} packets, average delay {:.6} slots ({} undelivered, {} blocked)",
        agg.states.len(),
        agg.generated,
        agg.headline_delay(),
        agg.undelivered,
        agg.blocked
    );
    Ok(())
}
