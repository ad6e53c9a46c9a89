use std::path::PathBuf;

use clap::Args;
use gnsstopo::synth::{synth_scenario_file, SynthConfig};
use gnsstopo::{Scenario, SystemParams};

use crate::common::{CliResult, Failure};
use crate::output::write_json;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Total node count, satellites plus antennas.
    #[arg(long, default_value_t = 36)]
    pub nodes: usize,
    #[arg(long, default_value_t = 288)]
    pub states: usize,
    #[arg(long, default_value_t = 20)]
    pub slots: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Parameter override on the practical defaults; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Scenario file to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: SynthArgs) -> CliResult {
    if args.states == 0 || args.slots == 0 {
        return Err(Failure::usage("--states and --slots must be at least 1"));
    }
    let mut cfg = SynthConfig::with_nodes(args.nodes, args.seed).map_err(Failure::usage)?;
    cfg.states = args.states;
    cfg.slots = args.slots;
    let mut params = SystemParams::practical();
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("expected key=value, got `{kv}`")))?;
        params.set(k.trim(), v.trim()).map_err(|e| Failure::usage(format!("--set {kv}: {e}")))?;
    }
    log::info!("seed {}", args.seed);
    let file = synth_scenario_file(&cfg, params)?;
    // Round-trips through validation before anything is written.
    Scenario::from_file(file.clone())?;
    write_json(&args.out, &file)?;
    log::info!("wrote `{}` to {}", file.name, args.out.display());
    Ok(())
}
