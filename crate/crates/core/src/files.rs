//! On-disk formats: count files (one non-negative integer per line, or a
//! JSON object `{"rate_n": ..., "counts": [...]}`) and distribution files
//! (one real weight per line, normalized on load).

use crate::prob::{CountVector, Distribution};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct CountHeader {
    rate_n: f64,
    counts: Vec<u64>,
}

/// Loads counts from either format. Plain line files carry no rate, so the
/// caller supplies `rate_n` (e.g. from `--n`); the JSON variant embeds it
/// and wins over the argument when both are present.
pub fn load_counts(path: &Path, rate_n: Option<f64>) -> Result<CountVector> {
    let text = std::fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let header: CountHeader = serde_json::from_str(&text)?;
        return CountVector::new(header.counts, header.rate_n);
    }
    let mut counts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: u64 = line.parse().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        counts.push(value);
    }
    let n = rate_n.ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        reason: "plain count files need an explicit rate (pass --n)".into(),
    })?;
    CountVector::new(counts, n)
}

/// Writes the JSON count format.
pub fn save_counts_json(path: &Path, counts: &CountVector) -> Result<()> {
    let header = CountHeader {
        rate_n: counts.rate_n,
        counts: counts.counts.clone(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// Loads a distribution file: one real weight per line, normalized.
pub fn load_distribution(path: &Path) -> Result<Distribution> {
    let text = std::fs::read_to_string(path)?;
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        weights.push(value);
    }
    Distribution::from_weights(&weights)
}

/// Writes a distribution file (one probability per line, 17 significant
/// digits so it round-trips).
pub fn save_distribution(path: &Path, dist: &Distribution) -> Result<()> {
    let mut out = String::new();
    for p in dist.probs() {
        out.push_str(&format!("{p:.16e}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
