//! `beamhop sweep`: sample satellite positions, regenerate the scenario
//! at each (fresh grid around the new nadir, reseeded demand, rebuilt
//! gains), run each method, and export the distribution curves behind the
//! CDF and cumulative-fraction figures as long-format CSV.

use std::path::PathBuf;

use beamhop_core::ao::{optimize, AoConfig, InnerSolver};
use beamhop_core::baselines::{
    genetic_pattern, greedy_pattern, random_pattern, round_robin_pattern, GeneticConfig,
};
use beamhop_core::metrics::{evaluate_pattern, SuccessReport};
use beamhop_core::scenario::generate_scenario;
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::generate::ScenarioParamsArgs;
use crate::optimize::Method;

pub const SWEEP_MIN_SCHEMA: &str = "beamhop-sweep-min-v1";
pub const SWEEP_FRACTION_SCHEMA: &str = "beamhop-sweep-fraction-v1";

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub base: ScenarioParamsArgs,
    /// Satellite positions to sample.
    #[arg(long, default_value_t = 100)]
    pub positions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated method list.
    #[arg(long, default_value = "b-l2a,b-a,greedy,round-robin,random")]
    pub methods: String,
    /// Half-width of the latitude sampling box (degrees).
    #[arg(long, default_value_t = 10.0)]
    pub lat_halfwidth: f64,
    /// Half-width of the longitude sampling box (degrees).
    #[arg(long, default_value_t = 10.0)]
    pub lon_halfwidth: f64,
    /// Outer alternating-optimization iterations for b-a / b-l2a.
    #[arg(long, default_value_t = 5)]
    pub n_ao: usize,
    /// Inner solver iteration budget.
    #[arg(long, default_value_t = 300)]
    pub iterations: usize,
    /// Genetic population size (when `genetic` is listed).
    #[arg(long, default_value_t = 100)]
    pub population: usize,
    /// Genetic generations.
    #[arg(long, default_value_t = 250)]
    pub generations: usize,
    /// Output directory (default `<out-dir>`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct MinRow {
    pub method: &'static str,
    pub position: usize,
    pub min_psuc: f64,
    pub mean_psuc: f64,
}

#[derive(Debug, Clone)]
pub struct FractionRow {
    pub method: &'static str,
    pub position: usize,
    pub fraction: f64,
    pub psuc: f64,
}

#[derive(Debug, Default)]
pub struct SweepData {
    pub rows: Vec<MinRow>,
    pub fractions: Vec<FractionRow>,
    pub failed_positions: usize,
}

pub fn parse_methods(list: &str) -> anyhow::Result<Vec<Method>> {
    list.split(',')
        .map(|name| match name.trim() {
            "b-a" => Ok(Method::BA),
            "b-l2a" => Ok(Method::BL2A),
            "random" => Ok(Method::Random),
            "round-robin" => Ok(Method::RoundRobin),
            "greedy" => Ok(Method::Greedy),
            "genetic" => Ok(Method::Genetic),
            other => anyhow::bail!("unknown method `{other}`"),
        })
        .collect()
}

/// Mean success probability over the worst `k` cells, `k = 1..=N_c`.
fn prefix_means(report: &SuccessReport) -> Vec<(f64, f64)> {
    let sorted = report.sorted_p_suc();
    let n = sorted.len();
    let mut acc = 0.0;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            acc += v;
            ((k + 1) as f64 / n as f64, acc / (k + 1) as f64)
        })
        .collect()
}

fn run_position(
    args: &SweepArgs,
    methods: &[Method],
    lat: f64,
    lon: f64,
    position_seed: u64,
) -> anyhow::Result<Vec<(&'static str, SuccessReport)>> {
    let mut params = args.base.params()?;
    params.center_lat_deg = lat;
    params.center_lon_deg = lon;
    let scenario = generate_scenario(&params, position_seed)?;

    let mut out = Vec::with_capacity(methods.len());
    for method in methods {
        let report = match method {
            Method::BA | Method::BL2A => {
                let mut cfg = match method {
                    Method::BA => AoConfig::admm(),
                    _ => AoConfig::l2box(),
                };
                cfg.n_ao = args.n_ao;
                match &mut cfg.solver {
                    InnerSolver::Admm(c) => c.iterations = args.iterations,
                    InnerSolver::L2Box(c) => c.iterations = args.iterations,
                }
                optimize(&scenario, &cfg)?.report
            }
            Method::Random => evaluate_pattern(&scenario, &random_pattern(&scenario, position_seed))?,
            Method::RoundRobin => evaluate_pattern(&scenario, &round_robin_pattern(&scenario))?,
            Method::Greedy => evaluate_pattern(&scenario, &greedy_pattern(&scenario))?,
            Method::Genetic => {
                let cfg = GeneticConfig {
                    population: args.population,
                    generations: args.generations,
                    seed: position_seed,
                    ..GeneticConfig::default()
                };
                evaluate_pattern(&scenario, &genetic_pattern(&scenario, &cfg)?)?
            }
        };
        out.push((method.name(), report));
    }
    Ok(out)
}

/// Runs the sweep in memory. Failed positions are skipped and counted.
pub fn run_sweep(args: &SweepArgs) -> anyhow::Result<SweepData> {
    let methods = parse_methods(&args.methods)?;
    if methods.is_empty() {
        anyhow::bail!("at least one method is required");
    }
    if args.positions == 0 {
        anyhow::bail!("at least one position is required");
    }

    // draw all positions and per-position seeds upfront so the parallel
    // execution order cannot change the results
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let samples: Vec<(f64, f64, u64)> = (0..args.positions)
        .map(|_| {
            let lat = if args.lat_halfwidth > 0.0 {
                args.base.lat + rng.random_range(-args.lat_halfwidth..args.lat_halfwidth)
            } else {
                args.base.lat
            };
            let lon = if args.lon_halfwidth > 0.0 {
                args.base.lon + rng.random_range(-args.lon_halfwidth..args.lon_halfwidth)
            } else {
                args.base.lon
            };
            (lat, lon, rng.random())
        })
        .collect();

    let results: Vec<anyhow::Result<Vec<(&'static str, SuccessReport)>>> = samples
        .par_iter()
        .map(|&(lat, lon, seed_p)| run_position(args, &methods, lat, lon, seed_p))
        .collect();

    let mut data = SweepData::default();
    for (position, result) in results.into_iter().enumerate() {
        match result {
            Ok(reports) => {
                for (method, report) in reports {
                    data.rows.push(MinRow {
                        method,
                        position,
                        min_psuc: report.min_p_suc,
                        mean_psuc: report.mean_p_suc,
                    });
                    for (fraction, psuc) in prefix_means(&report) {
                        data.fractions.push(FractionRow { method, position, fraction, psuc });
                    }
                }
            }
            Err(e) => {
                eprintln!("position {position} failed: {e}");
                data.failed_positions += 1;
            }
        }
    }
    Ok(data)
}

pub fn min_csv(data: &SweepData) -> String {
    let mut out = format!("# schema: {SWEEP_MIN_SCHEMA}\nmethod,position,min_psuc,mean_psuc\n");
    for r in &data.rows {
        out.push_str(&format!("{},{},{},{}\n", r.method, r.position, r.min_psuc, r.mean_psuc));
    }
    out
}

pub fn fraction_csv(data: &SweepData) -> String {
    let mut out = format!("# schema: {SWEEP_FRACTION_SCHEMA}\nmethod,position,fraction,psuc\n");
    for r in &data.fractions {
        out.push_str(&format!("{},{},{},{}\n", r.method, r.position, r.fraction, r.psuc));
    }
    out
}

/// Runs the sweep and writes `sweep_min.csv` / `sweep_fraction.csv`.
pub fn run(args: &SweepArgs) -> anyhow::Result<(SweepData, PathBuf, PathBuf)> {
    let data = run_sweep(args)?;
    let dir = args.out_dir.clone().unwrap_or_else(crate::default_out_dir);
    let min_path = dir.join("sweep_min.csv");
    let fraction_path = dir.join("sweep_fraction.csv");
    crate::write_file(&min_path, &min_csv(&data))?;
    crate::write_file(&fraction_path, &fraction_csv(&data))?;
    Ok((data, min_path, fraction_path))
}
