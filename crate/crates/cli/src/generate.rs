//! `beamhop generate`: write a scenario file from the built-in presets
//! and overrides.

use std::path::PathBuf;

use anyhow::Context;
use beamhop_core::scenario::{
    generate_scenario, load_population_csv, save_scenario, GeneratorParams, Scenario,
};
use clap::Args;

/// Preset scale for the generated scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    /// 80 cells, 6 beams, 64 slots.
    Full,
    /// 20 cells, 3 beams, 16 slots.
    Desk,
}

/// Scenario parameters shared by `generate` and `sweep`.
#[derive(Debug, Args, Clone)]
pub struct ScenarioParamsArgs {
    /// Scenario scale preset.
    #[arg(long, value_enum, default_value_t = Scale::Full)]
    pub scale: Scale,
    #[arg(long)]
    pub n_cells: Option<usize>,
    #[arg(long)]
    pub n_slot: Option<usize>,
    #[arg(long)]
    pub n_b: Option<usize>,
    /// Resource blocks per slot.
    #[arg(long)]
    pub n_r: Option<usize>,
    /// Device activation probability.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Average devices per cell.
    #[arg(long)]
    pub n_avg: Option<f64>,
    /// Population scaling exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Ubiquitous/population demand mix weight.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma_th_db: Option<f64>,
    /// Explicit system SNR (dB); defaults to the link-budget derivation.
    #[arg(long)]
    pub rho_db: Option<f64>,
    /// Sub-satellite latitude (degrees).
    #[arg(long, default_value_t = 0.0)]
    pub lat: f64,
    /// Sub-satellite longitude (degrees).
    #[arg(long, default_value_t = 0.0)]
    pub lon: f64,
    #[arg(long)]
    pub altitude_km: Option<f64>,
    #[arg(long)]
    pub cell_radius_km: Option<f64>,
    /// Log-normal shape of the synthetic populations.
    #[arg(long)]
    pub population_sigma: Option<f64>,
    /// `cell_id,population` CSV replacing the synthetic draw.
    #[arg(long)]
    pub population_csv: Option<PathBuf>,
}

impl ScenarioParamsArgs {
    /// Core generator parameters implied by this invocation.
    pub fn params(&self) -> anyhow::Result<GeneratorParams> {
        let mut p = match self.scale {
            Scale::Full => GeneratorParams::default(),
            Scale::Desk => GeneratorParams::desk(),
        };
        if let Some(v) = self.n_cells {
            p.n_cells = v;
        }
        if let Some(v) = self.n_slot {
            p.n_slot = v;
        }
        if let Some(v) = self.n_b {
            p.n_b = v;
        }
        if let Some(v) = self.n_r {
            p.n_r = v;
        }
        if let Some(v) = self.alpha {
            p.activation = v;
        }
        if let Some(v) = self.n_avg {
            p.n_avg = v;
        }
        if let Some(v) = self.beta {
            p.beta = v;
        }
        if let Some(v) = self.eta {
            p.eta = v;
        }
        if let Some(v) = self.gamma_th_db {
            p.gamma_th_db = v;
        }
        if self.rho_db.is_some() {
            p.rho_db = self.rho_db;
        }
        p.center_lat_deg = self.lat;
        p.center_lon_deg = self.lon;
        if let Some(v) = self.altitude_km {
            p.altitude_km = v;
        }
        if let Some(v) = self.cell_radius_km {
            p.cell_radius_km = v;
        }
        if let Some(v) = self.population_sigma {
            p.population_sigma = v;
        }
        if let Some(csv) = &self.population_csv {
            p.populations = Some(load_population_csv(csv).context("loading population csv")?);
        }
        Ok(p)
    }
}

#[derive(Debug, Args, Clone)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub params: ScenarioParamsArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (default `<out-dir>/scenario.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenerateArgs {
    pub fn build(&self) -> anyhow::Result<Scenario> {
        Ok(generate_scenario(&self.params.params()?, self.seed)?)
    }
}

pub fn run(args: &GenerateArgs) -> anyhow::Result<PathBuf> {
    let scenario = args.build()?;
    let path = crate::resolve_out(&args.out, "scenario.json");
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_scenario(&scenario, &path)?;
    Ok(path)
}
