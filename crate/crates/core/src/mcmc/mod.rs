//! Metropolis-within-Gibbs sampling of the hierarchical growth model.
//!
//! A sweep updates, in order: the random-coordinate population mean
//! (conjugate normal), the population-fixed coordinates (random walk), the
//! random-effects covariance (conjugate inverse-Wishart), each error
//! variance (conjugate inverse-gamma), each subject's random effects
//! (adaptive random walk, plus an independence move between separated modes
//! once those have been located), the unknown offset (reflective random
//! walk) and finally the unknown subject's effects together with its offset.

mod adapt;
pub mod diagnostics;
pub mod io;
mod modes;
mod sampler;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{FitData, ModelSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

pub use adapt::reflected_proposal_density;
pub use diagnostics::{effective_sample_size, multi_chain_ess, split_rhat, Ess, Rhat};
pub use sampler::{init_state, AcceptanceRates, Sampler};

/// Switches for the individual sweep blocks. Disabled blocks keep their
/// current value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMask {
    pub mean: bool,
    pub fixed_effects: bool,
    pub covariance: bool,
    pub error_variance: bool,
    pub effects: bool,
    pub offset: bool,
    pub joint_new: bool,
    /// Independence moves between separated modes of a subject's effects.
    pub mode_jump: bool,
}

impl Default for BlockMask {
    fn default() -> Self {
        Self {
            mean: true,
            fixed_effects: true,
            covariance: true,
            error_variance: true,
            effects: true,
            offset: true,
            joint_new: true,
            mode_jump: true,
        }
    }
}

/// Initial proposal standard deviations per block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub effects: f64,
    pub fixed_effects: f64,
    /// In years.
    pub offset: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            effects: 0.05,
            fixed_effects: 0.01,
            offset: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub adaptation_window: usize,
    pub target_scalar: f64,
    pub target_vector: f64,
    pub step_sizes: StepSizes,
    pub seed: u64,
    pub blocks: BlockMask,
    /// Also retain every subject's effects.
    pub store_all_effects: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            iterations: 20_000,
            burn_in: 10_000,
            thinning: 5,
            adaptation_window: 5_000,
            target_scalar: 0.44,
            target_vector: 0.234,
            step_sizes: StepSizes::default(),
            seed: 1,
            blocks: BlockMask::default(),
            store_all_effects: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_chains == 0 {
            return bad("at least one chain is required");
        }
        if self.burn_in >= self.iterations {
            return bad("burn-in must be smaller than the number of iterations");
        }
        if self.thinning == 0 {
            return bad("thinning must be at least 1");
        }
        if self.adaptation_window > self.burn_in {
            return bad("the adaptation window must end before burn-in does");
        }
        for t in [self.target_scalar, self.target_vector] {
            if !(t > 0.0 && t < 1.0) {
                return bad("target acceptance rates must lie in (0, 1)");
            }
        }
        let s = &self.step_sizes;
        if ![s.effects, s.fixed_effects, s.offset].iter().all(|v| *v > 0.0 && v.is_finite()) {
            return bad("initial step sizes must be positive and finite");
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }

    pub(crate) fn target_for(&self, dim: usize) -> f64 {
        if dim <= 1 {
            self.target_scalar
        } else {
            self.target_vector
        }
    }

    /// Seed of chain `c`.
    pub fn chain_seed(&self, c: usize) -> u64 {
        derive_seed(self.seed, &[c as u64])
    }
}

/// Retained draws of one chain, one row per kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub n_params: usize,
    /// Row-major, `n_draws * n_params`.
    pub values: Vec<f64>,
    pub acceptance: AcceptanceRates,
    pub elapsed_secs: f64,
}

impl ChainDraws {
    pub fn n_draws(&self) -> usize {
        if self.n_params == 0 {
            0
        } else {
            self.values.len() / self.n_params
        }
    }

    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.n_params..(d + 1) * self.n_params]
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        self.values.iter().skip(p).step_by(self.n_params).copied().collect()
    }
}

#[derive(Debug)]
pub struct ChainRun {
    pub index: usize,
    pub seed: u64,
    pub result: Result<ChainDraws>,
}

/// Output of a multi-chain run.
#[derive(Debug)]
pub struct ChainOutput {
    /// Canonical parameter order; see [`parameter_names`].
    pub param_names: Vec<String>,
    pub config: SamplerConfig,
    pub chains: Vec<ChainRun>,
}

impl ChainOutput {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn successful(&self) -> impl Iterator<Item = &ChainDraws> {
        self.chains.iter().filter_map(|c| c.result.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &Error)> {
        self.chains.iter().filter_map(|c| c.result.as_ref().err().map(|e| (c.index, e)))
    }

    /// Draws of one parameter, one vector per successful chain.
    pub fn chains_of(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let p = self
            .param_index(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))?;
        Ok(self.successful().map(|c| c.column(p)).collect())
    }

    /// Offset draws of every successful chain.
    pub fn offset_chains(&self) -> Vec<Vec<f64>> {
        self.successful().map(|c| c.column(0)).collect()
    }
}

/// Parameter names in storage order:
///
/// * `tau`: offset of the unknown subject;
/// * `mu.k.j`: population mean, biomarker `k`, coordinate `j`;
/// * `Sigma.a.b`: random-effects covariance, lower triangle, indexed by
///   stacked coordinate;
/// * `sigma2_eps.k`: error variance of biomarker `k`;
/// * `beta_new.k.j`: effects of the unknown subject;
/// * `beta.i.k.j`: effects of subject `i`, only with `store_all_effects`.
///
/// All indices are 1-based.
pub fn parameter_names(model: &ModelSpec, n_subjects: usize, all_effects: bool) -> Vec<String> {
    let layout = model.layout();
    let coord = |c: usize| {
        let k = layout.offsets.iter().rposition(|&o| o <= c).unwrap_or(0);
        (k + 1, c - layout.offsets[k] + 1)
    };
    let mut names = vec!["tau".to_string()];
    for c in 0..layout.dim {
        let (k, j) = coord(c);
        names.push(format!("mu.{k}.{j}"));
    }
    for (a, &ca) in layout.random.iter().enumerate() {
        for &cb in &layout.random[..=a] {
            names.push(format!("Sigma.{}.{}", ca + 1, cb + 1));
        }
    }
    for k in 0..model.biomarkers.len() {
        names.push(format!("sigma2_eps.{}", k + 1));
    }
    for c in 0..layout.dim {
        let (k, j) = coord(c);
        names.push(format!("beta_new.{k}.{j}"));
    }
    if all_effects {
        for i in 0..n_subjects {
            for c in 0..layout.dim {
                let (k, j) = coord(c);
                names.push(format!("beta.{}.{k}.{j}", i + 1));
            }
        }
    }
    names
}

fn push_row(out: &mut Vec<f64>, sampler: &Sampler, data: &FitData, all_effects: bool) {
    let s = sampler.state();
    out.push(s.tau);
    out.extend_from_slice(&s.mu);
    let r = s.sigma_beta.nrows();
    for a in 0..r {
        for b in 0..=a {
            out.push(s.sigma_beta[(a, b)]);
        }
    }
    out.extend_from_slice(&s.eps_var);
    out.extend_from_slice(&s.betas[data.unknown]);
    if all_effects {
        for b in &s.betas {
            out.extend_from_slice(b);
        }
    }
}

fn run_single(data: &FitData, model: &ModelSpec, config: &SamplerConfig, index: usize) -> Result<ChainDraws> {
    let start = Instant::now();
    let seed = config.chain_seed(index);
    let mut init_rng = stream(seed, &[0]);
    let state = init_state(data, model, &mut init_rng)?;
    let mut sampler = Sampler::new(data, model, config, state, stream(seed, &[1]))?;
    let n_params = parameter_names(model, data.subjects.len(), config.store_all_effects).len();
    let mut values = Vec::with_capacity(config.draws_per_chain() * n_params);
    for t in 0..config.iterations {
        sampler.gibbs_step()?;
        if t >= config.burn_in && (t + 1 - config.burn_in) % config.thinning == 0 {
            push_row(&mut values, &sampler, data, config.store_all_effects);
        }
    }
    Ok(ChainDraws {
        n_params,
        values,
        acceptance: sampler.acceptance(),
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs all chains in parallel. Configuration errors are returned directly;
/// a failing chain is recorded in its [`ChainRun`] and does not stop the
/// others.
pub fn run_chain(data: &FitData, model: &ModelSpec, config: &SamplerConfig) -> Result<ChainOutput> {
    config.validate()?;
    model.validate()?;
    let chains = (0..config.n_chains)
        .into_par_iter()
        .map(|c| ChainRun {
            index: c,
            seed: config.chain_seed(c),
            result: run_single(data, model, config, c).map_err(|e| match e {
                Error::ChainFailure { iteration, source, .. } => Error::ChainFailure {
                    chain: c,
                    iteration,
                    source,
                },
                other => other,
            }),
        })
        .collect();
    Ok(ChainOutput {
        param_names: parameter_names(model, data.subjects.len(), config.store_all_effects),
        config: config.clone(),
        chains,
    })
}
