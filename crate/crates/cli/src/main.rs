//! `beamhop`: design and evaluate beam-hopping illumination patterns.
//!
//! Exit codes: 0 success, 1 usage error, 2 infeasible instance or
//! pattern, 3 internal error.

use beamhop_cli::{evaluate, generate, optimize, sweep};
use beamhop_core::Error as CoreError;
use clap::Parser;

#[derive(Parser)]
#[command(
    name = "beamhop",
    version,
    about = "Beam-hopping pattern design for grant-free LEO satellite access"
)]
enum Cli {
    /// Generate a scenario file.
    Generate(generate::GenerateArgs),
    /// Design a pattern for a scenario.
    Optimize(optimize::OptimizeArgs),
    /// Per-cell success report for a scenario + pattern.
    Evaluate(evaluate::EvaluateArgs),
    /// Satellite-position sweep producing CDF / fraction-curve data.
    Sweep(sweep::SweepArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify(&e)
        }
    });
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli {
        Cli::Generate(args) => {
            let path = generate::run(&args)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Cli::Optimize(args) => {
            let outcome = optimize::run(&args)?;
            println!("wrote {}", outcome.pattern_path.display());
            if let Some(trace) = &outcome.trace_path {
                println!("wrote {}", trace.display());
            }
            if outcome.feasible {
                Ok(0)
            } else {
                eprintln!("pattern violates feasibility (reported as-is)");
                Ok(2)
            }
        }
        Cli::Evaluate(args) => {
            let (report, path) = evaluate::run(&args)?;
            println!("wrote {}", path.display());
            println!("min p_suc = {:.6}, mean p_suc = {:.6}", report.min_p_suc, report.mean_p_suc);
            Ok(0)
        }
        Cli::Sweep(args) => {
            let (data, min_path, fraction_path) = sweep::run(&args)?;
            println!("wrote {}", min_path.display());
            println!("wrote {}", fraction_path.display());
            if data.failed_positions > 0 {
                eprintln!("{} position(s) failed and were skipped", data.failed_positions);
            }
            Ok(0)
        }
    }
}

fn classify(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Infeasible(_) => 2,
                CoreError::Validation { .. } | CoreError::Json(_) => 1,
                _ => 3,
            };
        }
    }
    3
}
