use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use gnsstopo::{compare, EvaluationReport};

use crate::common::{CliResult, Failure};
use crate::output::{opt_int, real, write_json, Csv};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Evaluation output directories or report JSON files.
    #[arg(required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_report(path: &Path) -> CliResult<EvaluationReport> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text =
        std::fs::read_to_string(&file).map_err(|e| Failure::input(format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", file.display())))
}

/// Column labels; repeated algorithm names are told apart by L_min, then
/// by position.
fn labels(reports: &[EvaluationReport]) -> Vec<String> {
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    for r in reports {
        *count.entry(&r.algorithm).or_default() += 1;
    }
    let mut seen = BTreeMap::new();
    reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let base = if count[r.algorithm.as_str()] > 1 {
                format!("{}_l{}", r.algorithm, r.l_min)
            } else {
                r.algorithm.clone()
            };
            let n = seen.entry(base.clone()).or_insert(0usize);
            *n += 1;
            if *n > 1 {
                format!("{base}_{k}")
            } else {
                base
            }
        })
        .collect()
}

pub fn run(args: CompareArgs) -> CliResult {
    let reports: Vec<EvaluationReport> = args.reports.iter().map(|p| load_report(p)).collect::<CliResult<_>>()?;
    let cmp = compare(&reports);
    if cmp.mismatched {
        log::warn!("reports differ in scenario, states, repetitions or averaging");
    }
    let labels = labels(&reports);
    let mut table = Csv::new(&[
        "label",
        "algorithm",
        "scenario",
        "l_min",
        "states",
        "averaging",
        "average_delay",
        "average_delay_delivered",
        "average_delay_penalized",
        "max_delay",
        "delivered_fraction",
        "ranging_pass_rate",
        "runtime_ms",
        "mismatched",
    ]);
    println!(
        "{:<16} {:>6} {:>14} {:>12} {:>10} {:>12}",
        "label", "l_min", "average_delay", "delivered", "ranging", "runtime_ms"
    );
    for (label, r) in labels.iter().zip(&cmp.rows) {
        let averaging = serde_json::to_value(r.averaging)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        table.row([
            label.clone(),
            r.algorithm.clone(),
            r.scenario.clone(),
            r.l_min.to_string(),
            r.states.to_string(),
            averaging,
            real(r.average_delay),
            real(r.average_delay_slots),
            real(r.average_delay_with_penalty),
            opt_int(r.max_delay),
            real(r.delivered_fraction),
            real(r.ranging_pass_rate),
            real(r.runtime_ms),
            cmp.mismatched.to_string(),
        ]);
        println!(
            "{:<16} {:>6} {:>14.6} {:>12.6} {:>10.6} {:>12.3}",
            label, r.l_min, r.average_delay, r.delivered_fraction, r.ranging_pass_rate, r.runtime_ms
        );
    }
    table.write(&args.out.join("comparison.csv"))?;
    write_json(&args.out.join("comparison.json"), &cmp)?;
    let mut header = vec!["delay_slots"];
    header.extend(labels.iter().map(String::as_str));
    let mut cdf = Csv::new(&header);
    for (d, fr) in &cmp.cdf {
        cdf.row(std::iter::once(d.to_string()).chain(fr.iter().map(|&f| real(f))));
    }
    cdf.write(&args.out.join("cdf.csv"))?;
    Ok(())
}
