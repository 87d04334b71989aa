#![allow(dead_code)]

use nalgebra::DMatrix;
use serorecency::bayes::{ChainState, FitData, ModelSpec, Subject};
use serorecency::growth::{GrowthKind, GrowthModelSpec};
use serorecency::mcmc::{BlockMask, SamplerConfig};

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value with
/// the Stephens small-sample correction.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    (d, kolmogorov_survival(lambda))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn linear_model() -> ModelSpec {
    ModelSpec::new(vec![GrowthModelSpec::random(GrowthKind::Linear)], 1.0).unwrap()
}

pub fn only(set: impl Fn(&mut BlockMask)) -> BlockMask {
    let mut mask = BlockMask {
        mean: false,
        fixed_effects: false,
        covariance: false,
        error_variance: false,
        effects: false,
        offset: false,
        joint_new: false,
        mode_jump: false,
    };
    set(&mut mask);
    mask
}

pub fn manual_config(blocks: BlockMask) -> SamplerConfig {
    SamplerConfig {
        n_chains: 1,
        iterations: 20_000,
        burn_in: 10_000,
        thinning: 1,
        adaptation_window: 5_000,
        blocks,
        ..SamplerConfig::default()
    }
}

/// Linear-growth subjects with known offsets plus one unknown subject, with
/// fixed effects and deterministic pseudo-noise.
pub struct LinearToy {
    pub data: FitData,
    pub betas: Vec<Vec<f64>>,
}

pub fn linear_toy(n_known: usize) -> LinearToy {
    let model = linear_model();
    let mut subjects = Vec::new();
    let mut betas = Vec::new();
    for i in 0..=n_known {
        let b = vec![5.0 + 0.3 * ((i * 7 % 5) as f64 - 2.0), 2.0 + 0.2 * ((i * 3 % 4) as f64 - 1.5)];
        let tau = if i < n_known { Some(0.1 * (i % 10) as f64) } else { None };
        let times = vec![0.0, 0.5, 1.0];
        let y = times
            .iter()
            .enumerate()
            .map(|(j, t)| b[0] + b[1] * (t + tau.unwrap_or(0.3)) + 0.05 * (((i + 2 * j) % 5) as f64 - 2.0))
            .collect();
        subjects.push(Subject { times, y: vec![y], tau });
        betas.push(b);
    }
    LinearToy {
        data: FitData::new(subjects, &model).unwrap(),
        betas,
    }
}

pub fn linear_state(betas: &[Vec<f64>], sigma: DMatrix<f64>, eps_var: f64) -> ChainState {
    ChainState {
        betas: betas.to_vec(),
        mu: vec![5.0, 2.0],
        sigma_beta: sigma,
        eps_var: vec![eps_var],
        tau: 0.3,
    }
}
