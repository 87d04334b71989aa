//! The simulation study: every (replicate, model, out-of-sample individual)
//! combination is fitted with all in-sample individuals plus that single new
//! individual, and the resulting `P_X` values are aggregated over replicates.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{FitData, FollowUp, ModelSpec};
use crate::catalogue::ModelId;
use crate::error::{Error, Result};
use crate::mcmc::{run_chain, SamplerConfig};
use crate::recency::{self, quantile_sorted, DensityGrid, RecencySummary, DEFAULT_RHAT_GATE, DEFAULT_XS};
use crate::rng::derive_seed;
use crate::simgen::{simulate_dataset, ScenarioConfig, ScenarioName};

const TAG_FIT: u64 = 0x5EED_F17;

pub const QUANTILE_CONVENTION: &str = "inclusive linear interpolation between order statistics (h = (n-1)p)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: ScenarioName,
    pub models: Vec<ModelId>,
    pub replicates: u64,
    pub followup: FollowUp,
    pub sampler: SamplerConfig,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    /// Recency horizons in years.
    pub xs: Vec<f64>,
    pub rhat_gate: f64,
    /// Positions of the out-of-sample individuals to fit; all when `None`.
    pub individuals: Option<Vec<usize>>,
    /// Print one line per finished fit to stderr.
    pub progress: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioName::Realistic,
            models: ModelId::ALL.to_vec(),
            replicates: 20,
            followup: FollowUp::DiagnosisOnly,
            sampler: SamplerConfig::default(),
            out_dir: PathBuf::from("study-output"),
            master_seed: 1,
            xs: DEFAULT_XS.to_vec(),
            rhat_gate: DEFAULT_RHAT_GATE,
            individuals: None,
            progress: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("at least one replicate is required".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("the model list is empty".into()));
        }
        if self.xs.is_empty() || self.xs.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Config("recency horizons must be non-negative".into()));
        }
        self.sampler.validate()
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig::for_scenario(self.scenario, self.master_seed)
    }

    fn individual_positions(&self, available: usize) -> Result<Vec<usize>> {
        match &self.individuals {
            None => Ok((0..available).collect()),
            Some(list) => {
                if let Some(bad) = list.iter().find(|&&p| p >= available) {
                    return Err(Error::Config(format!(
                        "individual position {bad} out of range; there are {available}"
                    )));
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitOutcome {
    Done(Box<RecencySummary>),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub replicate: u64,
    pub model: ModelId,
    /// Position among the out-of-sample individuals.
    pub individual: usize,
    pub tau_truth: f64,
    pub outcome: FitOutcome,
}

impl FitRecord {
    pub fn summary(&self) -> Option<&RecencySummary> {
        match &self.outcome {
            FitOutcome::Done(s) => Some(s),
            FitOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelId,
    pub tau_truth: f64,
    pub x: f64,
    /// Replicates entering the quartiles.
    pub n_used: usize,
    /// Replicates dropped by the convergence gate.
    pub n_gated: usize,
    /// Replicates whose fit failed.
    pub n_failed: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        self.median.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub scenario: ScenarioName,
    pub followup: FollowUp,
    pub replicates: u64,
    pub cells: Vec<Cell>,
}

impl StudySummary {
    pub fn cell(&self, model: ModelId, tau_truth: f64, x: f64) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.model == model && (c.tau_truth - tau_truth).abs() < 1e-9 && (c.x - x).abs() < 1e-9)
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub summary: StudySummary,
    pub fits: Vec<FitRecord>,
}

/// Fails early when `dir` cannot hold output files.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Seed of the sampler for one fit.
pub fn fit_seed(master: u64, replicate: u64, model: ModelId, individual: usize) -> u64 {
    derive_seed(master, &[TAG_FIT, replicate, model.index(), individual as u64])
}

fn fit_one(config: &StudyConfig, scenario: &ScenarioConfig, replicate: u64, model: ModelId, pos: usize) -> FitRecord {
    let mut tau_truth = scenario.out_of_sample_taus.get(pos).copied().unwrap_or(f64::NAN);
    let outcome = (|| -> Result<RecencySummary> {
        let panel = simulate_dataset(scenario, model, replicate)?;
        let new = panel
            .out_of_sample()
            .nth(pos)
            .ok_or_else(|| Error::Config(format!("no out-of-sample individual at position {pos}")))?;
        if let Some(t) = new.tau {
            tau_truth = t;
        }
        let spec = ModelSpec::for_model(model, scenario.sero_interval);
        let data = FitData::from_panel(&panel, new.id, config.followup, &spec)?;
        let mut sampler = config.sampler.clone();
        sampler.seed = fit_seed(config.master_seed, replicate, model, pos);
        let output = run_chain(&data, &spec, &sampler)?;
        recency::summarize(&output, &config.xs, scenario.sero_interval, config.rhat_gate)
    })();
    let outcome = match outcome {
        Ok(s) => FitOutcome::Done(Box::new(s)),
        Err(e) => FitOutcome::Failed(e.to_string()),
    };
    if config.progress {
        let status = match &outcome {
            FitOutcome::Done(s) if s.convergence.passed => "ok".to_string(),
            FitOutcome::Done(_) => "gated".to_string(),
            FitOutcome::Failed(e) => format!("failed: {e}"),
        };
        eprintln!("replicate {replicate} model {model} tau {tau_truth}: {status}");
    }
    FitRecord {
        replicate,
        model,
        individual: pos,
        tau_truth,
        outcome,
    }
}

/// Runs the full fit grid and writes the report into `config.out_dir`.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    ensure_writable(&config.out_dir)?;
    let scenario = config.scenario_config();
    scenario.validate()?;
    let positions = config.individual_positions(scenario.out_of_sample_taus.len())?;
    let mut jobs: Vec<(u64, ModelId, usize)> = Vec::new();
    for r in 0..config.replicates {
        for &m in &config.models {
            jobs.extend(positions.iter().map(|&p| (r, m, p)));
        }
    }
    let fits: Vec<FitRecord> = jobs
        .par_iter()
        .map(|&(r, m, p)| fit_one(config, &scenario, r, m, p))
        .collect();
    let summary = aggregate(&fits, config);
    emit_report(&summary, &fits, config)?;
    Ok(StudyResult { summary, fits })
}

/// Median and quartiles of `P_X` per (model, offset, X) over replicates.
/// Gate failures and failed fits are counted and left out.
pub fn aggregate(fits: &[FitRecord], config: &StudyConfig) -> StudySummary {
    let mut taus: Vec<(usize, f64)> = Vec::new();
    for f in fits {
        if !taus.iter().any(|t| t.0 == f.individual) {
            taus.push((f.individual, f.tau_truth));
        }
    }
    taus.sort_by_key(|t| t.0);
    let mut cells = Vec::new();
    for &model in &config.models {
        for &(pos, tau) in &taus {
            let group: Vec<&FitRecord> = fits.iter().filter(|f| f.model == model && f.individual == pos).collect();
            for &x in &config.xs {
                let mut values = Vec::new();
                let (mut gated, mut failed) = (0, 0);
                for f in &group {
                    match f.summary() {
                        None => failed += 1,
                        Some(s) if !s.convergence.passed => gated += 1,
                        Some(s) => values.extend(s.prob(x)),
                    }
                }
                values.sort_by(f64::total_cmp);
                let q = |p: f64| (!values.is_empty()).then(|| quantile_sorted(&values, p));
                cells.push(Cell {
                    model,
                    tau_truth: tau,
                    x,
                    n_used: values.len(),
                    n_gated: gated,
                    n_failed: failed,
                    median: q(0.5),
                    q25: q(0.25),
                    q75: q(0.75),
                });
            }
        }
    }
    StudySummary {
        scenario: config.scenario,
        followup: config.followup,
        replicates: config.replicates,
        cells,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn file_stem(model: ModelId) -> String {
    model.name().replace('&', "_")
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const FITS_FILE: &str = "fits.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const CHART_FILE: &str = "recency_chart.svg";

/// Summary table text. Rows run over models, then offsets, then horizons.
pub fn summary_table(summary: &StudySummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# quantiles: {QUANTILE_CONVENTION}");
    let _ = writeln!(out, "# followup: {}", summary.followup.label());
    out.push_str("model,scenario,tau_truth,X,n_used,n_gated,n_failed,median,q25,q75\n");
    for c in &summary.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.model,
            summary.scenario,
            c.tau_truth,
            c.x,
            c.n_used,
            c.n_gated,
            c.n_failed,
            opt(c.median),
            opt(c.q25),
            opt(c.q75)
        );
    }
    out
}

const COLOURS: [&str; 7] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"];

/// Error-bar chart: one panel per horizon, one group per true offset, one
/// series per model; dots at the median, bars between the quartiles.
pub fn chart_svg(summary: &StudySummary) -> String {
    let mut models: Vec<ModelId> = Vec::new();
    let mut taus: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for c in &summary.cells {
        if !models.contains(&c.model) {
            models.push(c.model);
        }
        if !taus.iter().any(|t| (t - c.tau_truth).abs() < 1e-12) {
            taus.push(c.tau_truth);
        }
        if !xs.iter().any(|x| (x - c.x).abs() < 1e-12) {
            xs.push(c.x);
        }
    }
    let (pw, ph, left, top, bottom) = (320.0, 260.0, 50.0, 40.0, 50.0);
    let legend = 20.0 * models.len() as f64 + 10.0;
    let width = left + pw * xs.len() as f64 + 20.0;
    let height = top + ph + bottom + legend;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let inner = pw - 30.0;
    for (pi, &x) in xs.iter().enumerate() {
        let x0 = left + pi as f64 * pw;
        let y_of = |p: f64| top + (1.0 - p) * ph;
        let months = x * 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">P_X, X = {months:.0} months</text>"#,
            x0 + inner / 2.0,
            top - 15.0
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{top:.2}" width="{inner:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        for tick in 0..=4 {
            let p = tick as f64 / 4.0;
            let _ = writeln!(
                s,
                r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{p:.2}</text>"##,
                y = y_of(p),
                x1 = x0 + inner,
                tx = x0 - 4.0,
                ty = y_of(p) + 4.0
            );
        }
        let gw = inner / taus.len().max(1) as f64;
        for (ti, &tau) in taus.iter().enumerate() {
            let gx = x0 + ti as f64 * gw;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{tau}</text>"#,
                gx + gw / 2.0,
                top + ph + 16.0
            );
            for (mi, &m) in models.iter().enumerate() {
                let Some(c) = summary
                    .cells
                    .iter()
                    .find(|c| c.model == m && (c.tau_truth - tau).abs() < 1e-12 && (c.x - x).abs() < 1e-12)
                else {
                    continue;
                };
                let (Some(med), Some(lo), Some(hi)) = (c.median, c.q25, c.q75) else { continue };
                let cx = gx + gw * (mi as f64 + 1.0) / (models.len() as f64 + 1.0);
                let colour = COLOURS[mi % COLOURS.len()];
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{colour}" stroke-width="1.5"/><circle cx="{cx:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                    y_of(lo),
                    y_of(hi),
                    y_of(med)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">true offset (years)</text>"#,
            x0 + inner / 2.0,
            top + ph + 34.0
        );
    }
    for (mi, m) in models.iter().enumerate() {
        let y = top + ph + bottom + 14.0 + 20.0 * mi as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            left + 5.0,
            y - 4.0,
            COLOURS[mi % COLOURS.len()],
            left + 15.0,
            y,
            xml_escape(m.name())
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Average offset density per true offset for one model, over fits that
/// passed the gate.
pub fn density_table(fits: &[FitRecord], model: ModelId) -> String {
    let mut out = String::from("tau_truth,x,density\n");
    let mut positions: Vec<(usize, f64)> = Vec::new();
    for f in fits.iter().filter(|f| f.model == model) {
        if !positions.iter().any(|p| p.0 == f.individual) {
            positions.push((f.individual, f.tau_truth));
        }
    }
    positions.sort_by_key(|p| p.0);
    for (pos, tau) in positions {
        let grids: Vec<&DensityGrid> = fits
            .iter()
            .filter(|f| f.model == model && f.individual == pos)
            .filter_map(|f| f.summary())
            .filter(|s| s.convergence.passed)
            .map(|s| &s.density)
            .collect();
        let Some(first) = grids.first() else { continue };
        for (i, x) in first.x.iter().enumerate() {
            let mean = grids.iter().map(|g| g.density[i]).sum::<f64>() / grids.len() as f64;
            let _ = writeln!(out, "{tau},{x},{mean}");
        }
    }
    out
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes the summary table, per-fit rows, failures, the chart and one
/// density file per model.
pub fn emit_report(summary: &StudySummary, fits: &[FitRecord], config: &StudyConfig) -> Result<()> {
    let dir = &config.out_dir;
    ensure_writable(dir)?;
    write(dir, SUMMARY_FILE, &summary_table(summary))?;
    let scenario = summary.scenario.to_string();
    let rows: Vec<recency::SummaryRow> = fits
        .iter()
        .filter_map(|f| {
            f.summary()
                .map(|s| recency::summary_rows(s, f.replicate, f.model.name(), &scenario, Some(f.tau_truth)))
        })
        .flatten()
        .collect();
    write(dir, FITS_FILE, &recency::format_summary_rows(&rows))?;
    let mut failures = String::from("replicate,model,tau_truth,message\n");
    for f in fits {
        if let FitOutcome::Failed(msg) = &f.outcome {
            let _ = writeln!(failures, "{},{},{},\"{}\"", f.replicate, f.model, f.tau_truth, msg.replace('"', "'"));
        }
    }
    write(dir, FAILURES_FILE, &failures)?;
    write(dir, CHART_FILE, &chart_svg(summary))?;
    for &m in &config.models {
        write(dir, &format!("density_{}_{scenario}.csv", file_stem(m)), &density_table(fits, m))?;
    }
    Ok(())
}
