//! `beamhop evaluate`: per-cell success report for a scenario + pattern,
//! optionally with Monte-Carlo columns.

use std::path::PathBuf;

use anyhow::{bail, Context};
use beamhop_core::metrics::{evaluate_pattern, SuccessReport};
use beamhop_core::scenario::load_scenario;
use beamhop_core::simulator::{simulate, McConfig};
use clap::Args;

#[derive(Debug, Args, Clone)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub pattern: PathBuf,
    /// Monte-Carlo trials to append (`--mc 100000`).
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report output path (default `<out-dir>/report.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &EvaluateArgs) -> anyhow::Result<(SuccessReport, PathBuf)> {
    let scenario = load_scenario(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    let pattern = crate::patternfile::load_pattern(&args.pattern)?;
    if pattern.n_cells() != scenario.n_cells() || pattern.n_slots() != scenario.n_slot {
        bail!(
            "pattern is {}x{} but the scenario wants {}x{}",
            pattern.n_cells(),
            pattern.n_slots(),
            scenario.n_cells(),
            scenario.n_slot
        );
    }

    let mut report = evaluate_pattern(&scenario, &pattern)?;
    if let Some(trials) = args.mc {
        // the simulator needs every cell illuminated; dark cells keep
        // their analytic zero and no MC columns
        if pattern.row_sums().iter().all(|&r| r >= 1) {
            let mc = simulate(&scenario, &pattern, &McConfig::new(trials, args.seed))?;
            for (cell, counts) in report.cells.iter_mut().zip(&mc.cells) {
                if let Some(rate) = counts.success_rate() {
                    cell.mc = Some((rate, counts.success_stderr()));
                }
            }
        }
    }

    let path = crate::resolve_out(&args.out, "report.csv");
    crate::write_file(&path, &report.to_csv())?;
    Ok((report, path))
}
