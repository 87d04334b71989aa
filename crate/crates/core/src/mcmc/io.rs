//! Chain output files.
//!
//! A run directory holds `chain_<c>.csv` per successful chain (header of
//! parameter names in canonical order, one row per retained draw) and a
//! `manifest.json` recording the sampler configuration, per-chain seeds,
//! acceptance rates, timing and any chain failures.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AcceptanceRates, ChainDraws, ChainOutput, ChainRun, SamplerConfig};
use crate::bayes::FollowUp;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIT_INFO_FILE: &str = "fit.json";

/// Provenance of a fit, stored next to the chain files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub model: String,
    pub scenario: String,
    pub replicate: u64,
    /// Identifier of the subject whose offset was inferred.
    pub individual: usize,
    pub tau_truth: Option<f64>,
    pub followup: FollowUp,
    pub sero_interval: f64,
}

pub fn write_fit_info(dir: &Path, info: &FitInfo) -> Result<()> {
    let path = dir.join(FIT_INFO_FILE);
    let json = serde_json::to_string_pretty(info).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

/// `None` when the directory has no provenance file.
pub fn read_fit_info(dir: &Path) -> Result<Option<FitInfo>> {
    let path = dir.join(FIT_INFO_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::parse(path.display().to_string(), e.line(), "fit info", e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainEntry {
    index: usize,
    seed: u64,
    file: Option<String>,
    draws: usize,
    acceptance: Option<AcceptanceRates>,
    elapsed_secs: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    param_names: Vec<String>,
    config: SamplerConfig,
    chains: Vec<ChainEntry>,
}

const FORMAT: &str = "serorecency chain-output v1";

fn chain_file(c: usize) -> String {
    format!("chain_{c}.csv")
}

pub fn write_chain_output(dir: &Path, output: &ChainOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(output.chains.len());
    for run in &output.chains {
        match &run.result {
            Ok(draws) => {
                let name = chain_file(run.index);
                let mut text = output.param_names.join(",");
                text.push('\n');
                for d in 0..draws.n_draws() {
                    let row: Vec<String> = draws.row(d).iter().map(|v| format!("{v:e}")).collect();
                    text.push_str(&row.join(","));
                    text.push('\n');
                }
                let path = dir.join(&name);
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                entries.push(ChainEntry {
                    index: run.index,
                    seed: run.seed,
                    file: Some(name),
                    draws: draws.n_draws(),
                    acceptance: Some(draws.acceptance.clone()),
                    elapsed_secs: Some(draws.elapsed_secs),
                    error: None,
                });
            }
            Err(e) => entries.push(ChainEntry {
                index: run.index,
                seed: run.seed,
                file: None,
                draws: 0,
                acceptance: None,
                elapsed_secs: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        param_names: output.param_names.clone(),
        config: output.config.clone(),
        chains: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn read_chain_output(dir: &Path) -> Result<ChainOutput> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let shown = path.display().to_string();
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&shown, e.line(), "manifest", e.to_string()))?;
    if manifest.format != FORMAT {
        return Err(Error::parse(&shown, 1, "format", format!("unsupported format {:?}", manifest.format)));
    }
    let n_params = manifest.param_names.len();
    let mut chains = Vec::with_capacity(manifest.chains.len());
    for entry in manifest.chains {
        let result = match (&entry.file, entry.error) {
            (Some(file), _) => {
                let path = dir.join(file);
                let shown = path.display().to_string();
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let mut lines = text.lines();
                let header = lines.next().unwrap_or("");
                if header.split(',').ne(manifest.param_names.iter().map(String::as_str)) {
                    return Err(Error::parse(&shown, 1, "header", "column names differ from the manifest"));
                }
                let mut values = Vec::with_capacity(entry.draws * n_params);
                for (ln, line) in lines.enumerate() {
                    let before = values.len();
                    for (col, field) in line.split(',').enumerate() {
                        let v: f64 = field.trim().parse().map_err(|_| {
                            Error::parse(&shown, ln + 2, &manifest.param_names[col.min(n_params - 1)], format!("not a number: {field:?}"))
                        })?;
                        values.push(v);
                    }
                    if values.len() - before != n_params {
                        return Err(Error::parse(&shown, ln + 2, "row", format!("expected {n_params} columns")));
                    }
                }
                Ok(ChainDraws {
                    n_params,
                    values,
                    acceptance: entry.acceptance.unwrap_or_default(),
                    elapsed_secs: entry.elapsed_secs.unwrap_or(0.0),
                })
            }
            (None, err) => Err(Error::RecordedFailure(err.unwrap_or_else(|| "unknown".into()))),
        };
        chains.push(ChainRun {
            index: entry.index,
            seed: entry.seed,
            result,
        });
    }
    Ok(ChainOutput {
        param_names: manifest.param_names,
        config: manifest.config,
        chains,
    })
}
