//! Command implementations behind the `beamhop` binary: scenario
//! generation, pattern optimization, report evaluation, and satellite
//! position sweeps. The binary wires these to clap; tests drive them
//! directly.

pub mod evaluate;
pub mod generate;
pub mod optimize;
pub mod patternfile;
pub mod sweep;

use std::path::{Path, PathBuf};

/// Default output directory: `$BEAMHOP_OUT_DIR` when set, else the
/// current directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os("BEAMHOP_OUT_DIR").map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Resolves an optional explicit path against the default output dir.
pub fn resolve_out(path: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match path {
        Some(p) => p.clone(),
        None => default_out_dir().join(default_name),
    }
}

pub(crate) fn write_file(path: &Path, content: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}
