//! Recency estimands from posterior draws of the unknown offset: `P_X`,
//! highest-posterior-density intervals and boundary-corrected densities.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{multi_chain_ess, split_rhat, ChainOutput, Ess, Rhat};

/// 2, 4 and 6 months in years.
pub const DEFAULT_XS: [f64; 3] = [2.0 / 12.0, 4.0 / 12.0, 6.0 / 12.0];
pub const DEFAULT_GRID: usize = 201;
pub const DEFAULT_RHAT_GATE: f64 = 1.05;
const MIN_DRAWS: usize = 20;

/// `Pr(tau <= x)` under the empirical distribution of `draws`.
pub fn p_x(draws: &[f64], x: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("X must be non-negative, got {x}")));
    }
    Ok(draws.iter().filter(|&&d| d <= x).count() as f64 / draws.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Shortest window holding `ceil(mass * n)` of the sorted draws.
pub fn hpd_interval(draws: &[f64], mass: f64) -> Result<Interval> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::InsufficientSamples {
            needed: MIN_DRAWS,
            got: draws.len(),
        });
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidArgument(format!("HPD mass must lie in (0, 1), got {mass}")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let (start, _) = (0..=n - k)
        .map(|i| (i, sorted[i + k - 1] - sorted[i]))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(Interval {
        low: sorted[start],
        high: sorted[start + k - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityGrid {
    /// Trapezoid-rule integral.
    pub fn integral(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density\n");
        for (x, d) in self.x.iter().zip(&self.density) {
            let _ = writeln!(out, "{x},{d}");
        }
        out
    }
}

fn silverman(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density on `[0, upper]` with reflection at both ends,
/// Silverman bandwidth and trapezoid renormalization over a grid of
/// `grid_size` equally spaced points.
pub fn posterior_density(draws: &[f64], grid_size: usize, upper: f64) -> Result<DensityGrid> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::InsufficientSamples {
            needed: MIN_DRAWS,
            got: draws.len(),
        });
    }
    if grid_size < 2 || !(upper > 0.0) {
        return Err(Error::InvalidArgument("density grid needs at least 2 points on a positive interval".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Floor keeps degenerate draw sets from producing a zero bandwidth.
    let h = silverman(&sorted).max(upper * 1e-3);
    let reach = 6.0 * h;
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let kernel_sum = |centre: f64| -> f64 {
        let lo = sorted.partition_point(|&v| v < centre - reach);
        let hi = sorted.partition_point(|&v| v <= centre + reach);
        sorted[lo..hi].iter().map(|v| (-0.5 * ((centre - v) / h).powi(2)).exp()).sum()
    };
    let step = upper / (grid_size - 1) as f64;
    let x: Vec<f64> = (0..grid_size).map(|i| i as f64 * step).collect();
    let mut density: Vec<f64> = x
        .iter()
        .map(|&g| norm * (kernel_sum(g) + kernel_sum(-g) + kernel_sum(2.0 * upper - g)))
        .collect();
    let grid = DensityGrid { x: x.clone(), density: density.clone() };
    let total = grid.integral();
    if total > 0.0 {
        density.iter_mut().for_each(|d| *d /= total);
    }
    Ok(DensityGrid { x, density })
}

/// Inclusive linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Split R-hat of the offset; absent with a single chain.
    pub rhat: Option<Rhat>,
    pub ess: Option<Ess>,
    pub gate: f64,
    /// `false` when the R-hat gate was evaluated and failed.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecencySummary {
    /// `(X, P_X)` pairs in increasing `X`.
    pub p_x: Vec<(f64, f64)>,
    pub hpd95: Interval,
    pub density: DensityGrid,
    pub median: f64,
    pub n_draws: usize,
    pub convergence: Convergence,
}

impl RecencySummary {
    pub fn prob(&self, x: f64) -> Option<f64> {
        self.p_x.iter().find(|(k, _)| (k - x).abs() < 1e-12).map(|p| p.1)
    }
}

/// Summary of offset draws given per chain.
pub fn summarize_draws(chains: &[Vec<f64>], xs: &[f64], upper: f64, gate: f64) -> Result<RecencySummary> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let p = xs.iter().map(|&x| Ok((x, p_x(&pooled, x)?))).collect::<Result<Vec<_>>>()?;
    let rhat = if chains.len() >= 2 { split_rhat(chains).ok() } else { None };
    let ess = multi_chain_ess(chains).ok();
    let passed = rhat.is_none_or(|r| !r.diverged && r.value < gate);
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(RecencySummary {
        p_x: p,
        hpd95: hpd_interval(&pooled, 0.95)?,
        density: posterior_density(&pooled, DEFAULT_GRID, upper)?,
        median: quantile_sorted(&sorted, 0.5),
        n_draws: pooled.len(),
        convergence: Convergence { rhat, ess, gate, passed },
    })
}

/// Pools the offset draws of every successful chain. A failed R-hat gate is
/// reported through `convergence.passed`, not as an error.
pub fn summarize(output: &ChainOutput, xs: &[f64], upper: f64, gate: f64) -> Result<RecencySummary> {
    summarize_draws(&output.offset_chains(), xs, upper, gate)
}

/// One line of a recency summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub replicate: u64,
    pub model: String,
    pub scenario: String,
    pub tau_truth: Option<f64>,
    pub x: f64,
    pub p_x: f64,
    pub hpd: Interval,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

pub const SUMMARY_COLUMNS: &str = "replicate,model,scenario,tau_truth,X,pX,hpd_low,hpd_high,rhat,ess";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn summary_rows(
    summary: &RecencySummary,
    replicate: u64,
    model: &str,
    scenario: &str,
    tau_truth: Option<f64>,
) -> Vec<SummaryRow> {
    summary
        .p_x
        .iter()
        .map(|&(x, p)| SummaryRow {
            replicate,
            model: model.to_string(),
            scenario: scenario.to_string(),
            tau_truth,
            x,
            p_x: p,
            hpd: summary.hpd95,
            rhat: summary.convergence.rhat.map(|r| r.value),
            ess: summary.convergence.ess.map(|e| e.value),
        })
        .collect()
}

pub fn format_summary_rows(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_COLUMNS);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.replicate,
            r.model,
            r.scenario,
            opt(r.tau_truth),
            r.x,
            r.p_x,
            r.hpd.low,
            r.hpd.high,
            opt(r.rhat),
            opt(r.ess)
        );
    }
    out
}

pub fn write_summary_rows(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    std::fs::write(path, format_summary_rows(rows)).map_err(|e| Error::io(path, e))
}

pub fn write_density(path: &Path, grid: &DensityGrid) -> Result<()> {
    std::fs::write(path, grid.to_csv()).map_err(|e| Error::io(path, e))
}
