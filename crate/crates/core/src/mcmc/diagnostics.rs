//! Convergence diagnostics: split R-hat and effective sample size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reported in place of an infinite R-hat.
pub const RHAT_SENTINEL: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rhat {
    pub value: f64,
    /// Chains sit at different constant levels.
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    pub zero_variance: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Split-chain potential scale reduction factor. Chains are truncated to
/// the shortest length and each is split into two halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Rhat> {
    if chains.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: chains.len(),
        });
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: len });
    }
    let half = len / 2;
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(&c[..half]);
        halves.push(&c[len - half..len]);
    }
    let n = half as f64;
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let (_, var_means) = mean_var(&means);
    let b = n * var_means;
    let constant = halves.iter().all(|h| h.iter().all(|v| *v == h[0]));
    if constant || !(w > 0.0) {
        let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - means.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(if spread == 0.0 {
            Rhat { value: 1.0, diverged: false }
        } else {
            Rhat { value: RHAT_SENTINEL, diverged: true }
        });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    let value = (var_plus / w).sqrt();
    Ok(if value.is_finite() {
        Rhat { value, diverged: false }
    } else {
        Rhat { value: RHAT_SENTINEL, diverged: true }
    })
}

/// Autocovariance at lags `0..` computed lazily.
fn autocov(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / n as f64
}

/// Geyer's initial monotone sequence applied to autocorrelations `rho(t)`.
fn integrated_time(rho: impl Fn(usize) -> f64, max_lag: usize) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < max_lag {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    (2.0 * sum - 1.0).max(1e-12)
}

/// Single-chain effective sample size.
pub fn effective_sample_size(draws: &[f64]) -> Result<Ess> {
    let n = draws.len();
    if n < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: n });
    }
    if draws.iter().all(|v| *v == draws[0]) {
        return Ok(Ess {
            value: n as f64,
            zero_variance: true,
        });
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let c0 = autocov(draws, mean, 0);
    if !(c0 > 0.0) {
        return Ok(Ess {
            value: n as f64,
            zero_variance: true,
        });
    }
    let tau = integrated_time(|t| autocov(draws, mean, t) / c0, n);
    Ok(Ess {
        value: n as f64 / tau,
        zero_variance: false,
    })
}

/// Effective sample size pooled over chains, combining within-chain
/// autocorrelations with the between-chain variance.
pub fn multi_chain_ess(chains: &[Vec<f64>]) -> Result<Ess> {
    if chains.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if chains.len() == 1 {
        return effective_sample_size(&chains[0]);
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: len });
    }
    let m = chains.len() as f64;
    let n = len as f64;
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..len]).collect();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let (_, var_means) = mean_var(&stats.iter().map(|s| s.0).collect::<Vec<_>>());
    let var_plus = (n - 1.0) / n * w + var_means;
    if chains.iter().all(|c| c.iter().all(|v| *v == chains[0][0])) || !(var_plus > 0.0) {
        return Ok(Ess {
            value: m * n,
            zero_variance: true,
        });
    }
    let rho = |t: usize| {
        let within: f64 = chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| autocov(c, s.0, t) * n / (n - 1.0))
            .sum::<f64>()
            / m;
        1.0 - (w - within) / var_plus
    };
    let tau = integrated_time(rho, len);
    Ok(Ess {
        value: m * n / tau,
        zero_variance: false,
    })
}
