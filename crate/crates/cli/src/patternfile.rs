//! Beam-hopping pattern file (JSON): schema string, dimensions, and the
//! binary rows.

use std::path::Path;

use anyhow::{bail, Context};
use beamhop_core::metrics::BeamHoppingPattern;
use serde::{Deserialize, Serialize};

pub const PATTERN_SCHEMA: &str = "beamhop-pattern-v1";

#[derive(Serialize, Deserialize)]
struct PatternFile {
    schema: String,
    n_cells: usize,
    n_slot: usize,
    rows: Vec<Vec<u8>>,
}

pub fn pattern_to_json(pattern: &BeamHoppingPattern) -> String {
    let file = PatternFile {
        schema: PATTERN_SCHEMA.into(),
        n_cells: pattern.n_cells(),
        n_slot: pattern.n_slots(),
        rows: pattern.to_rows(),
    };
    serde_json::to_string_pretty(&file).expect("pattern serialization cannot fail")
}

pub fn pattern_from_json(text: &str) -> anyhow::Result<BeamHoppingPattern> {
    let file: PatternFile = serde_json::from_str(text).context("parsing pattern file")?;
    if file.schema != PATTERN_SCHEMA {
        bail!("expected pattern schema `{PATTERN_SCHEMA}`, got `{}`", file.schema);
    }
    if file.rows.len() != file.n_cells || file.rows.iter().any(|r| r.len() != file.n_slot) {
        bail!("pattern dimensions disagree with declared {}x{}", file.n_cells, file.n_slot);
    }
    Ok(BeamHoppingPattern::from_rows(&file.rows)?)
}

pub fn save_pattern(pattern: &BeamHoppingPattern, path: &Path) -> anyhow::Result<()> {
    crate::write_file(path, &pattern_to_json(pattern))
}

pub fn load_pattern(path: &Path) -> anyhow::Result<BeamHoppingPattern> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading pattern file {}", path.display()))?;
    pattern_from_json(&text)
}
