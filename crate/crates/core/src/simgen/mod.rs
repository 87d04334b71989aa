//! Simulated biomarker panels.
//!
//! A replicate dataset holds `n_in_sample` individuals with known
//! seroconversion offsets `tau_i ~ U(0, L)` followed by the out-of-sample
//! individuals, whose offsets are fixed by the scenario. Each individual's
//! random effects are drawn from `N(mu_beta, Sigma_beta)`; measurements add
//! independent Gaussian noise per biomarker.

mod io;

pub use io::{read_dataset, read_scenario, write_dataset, write_scenario};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::catalogue::{ModelBlock, ModelId};
use crate::error::{Error, Result};
use crate::growth::eval_trajectory;
use crate::linalg;
use crate::rng::{self, StreamRng};

/// Two weeks in years.
pub const TWO_WEEKS: f64 = 2.0 / 52.0;
/// One month in years.
pub const ONE_MONTH: f64 = 1.0 / 12.0;

/// Random-effect variance of every non-fixed coordinate in the ideal scenario.
pub const IDEAL_VARIANCE: f64 = 0.01;

const TAG_TAU: u64 = 1;
const TAG_EFFECTS: u64 = 2;
const TAG_NOISE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Realistic,
    Ideal,
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Realistic => "realistic",
            ScenarioName::Ideal => "ideal",
        })
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "realistic" => Ok(ScenarioName::Realistic),
            "ideal" => Ok(ScenarioName::Ideal),
            _ => Err(Error::InvalidArgument(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub models: Vec<ModelBlock>,
    pub n_in_sample: usize,
    /// Years before the first positive test, one per out-of-sample individual.
    pub out_of_sample_taus: Vec<f64>,
    /// Years from the first positive test.
    pub in_sample_schedule: Vec<f64>,
    pub out_of_sample_schedule: Vec<f64>,
    pub sero_interval: f64,
    pub master_seed: u64,
}

impl ScenarioConfig {
    pub fn realistic(master_seed: u64) -> Self {
        Self {
            name: ScenarioName::Realistic,
            models: ModelId::ALL.iter().map(|m| m.realistic_block()).collect(),
            n_in_sample: 100,
            out_of_sample_taus: vec![0.014, 0.250, 0.500, 0.750, 0.986],
            in_sample_schedule: (0..9).map(|k| k as f64 * 0.25).collect(),
            out_of_sample_schedule: vec![0.0, TWO_WEEKS, ONE_MONTH],
            sero_interval: 1.0,
            master_seed,
        }
    }

    pub fn ideal(master_seed: u64) -> Self {
        ideal_from_realistic(&Self::realistic(master_seed))
    }

    pub fn for_scenario(name: ScenarioName, master_seed: u64) -> Self {
        match name {
            ScenarioName::Realistic => Self::realistic(master_seed),
            ScenarioName::Ideal => Self::ideal(master_seed),
        }
    }

    pub fn block(&self, model: ModelId) -> Result<&ModelBlock> {
        self.models
            .iter()
            .find(|b| b.model == model)
            .ok_or_else(|| Error::Config(format!("scenario has no parameter block for {model}")))
    }

    pub fn validate(&self) -> Result<()> {
        for block in &self.models {
            validate_block(block)?;
        }
        check_schedule(&self.in_sample_schedule, "in-sample schedule")?;
        check_schedule(&self.out_of_sample_schedule, "out-of-sample schedule")?;
        if !(self.sero_interval > 0.0 && self.sero_interval.is_finite()) {
            return Err(Error::Config(format!(
                "seroconversion interval must be positive, got {}",
                self.sero_interval
            )));
        }
        if let Some(t) = self
            .out_of_sample_taus
            .iter()
            .find(|&&t| !(0.0..=self.sero_interval).contains(&t))
        {
            return Err(Error::Config(format!(
                "out-of-sample tau {t} lies outside [0, {}]",
                self.sero_interval
            )));
        }
        Ok(())
    }
}

fn check_schedule(s: &[f64], what: &str) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Config(format!("{what} is empty")));
    }
    if s.iter().any(|t| !t.is_finite() || *t < 0.0) || s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{what} must be non-negative and strictly increasing"
        )));
    }
    Ok(())
}

fn validate_block(block: &ModelBlock) -> Result<()> {
    let dim: usize = block.model.growth_specs().iter().map(|s| s.dim()).sum();
    let k = block.model.biomarkers().len();
    let ctx = |msg: String| Error::Config(format!("{}: {msg}", block.model));
    if block.mean.len() != dim || block.cov.len() != dim || block.cov.iter().any(|r| r.len() != dim) {
        return Err(ctx(format!("mean/covariance must have dimension {dim}")));
    }
    if block.mean.iter().any(|m| !m.is_finite()) {
        return Err(ctx("mean must be finite".into()));
    }
    linalg::check_psd(&linalg::from_rows(&block.cov))
        .map_err(|e| ctx(format!("random-effects covariance: {e}")))?;
    if block.error_cov.len() != k || block.error_cov.iter().any(|r| r.len() != k) {
        return Err(ctx(format!("measurement-error covariance must be {k}x{k}")));
    }
    for i in 0..k {
        for j in 0..k {
            let v = block.error_cov[i][j];
            if i == j && !(v > 0.0 && v.is_finite()) {
                return Err(ctx(format!("measurement-error variance must be positive, got {v}")));
            }
            if i != j && v != 0.0 {
                return Err(ctx("measurement-error covariance must be diagonal".into()));
            }
        }
    }
    Ok(())
}

/// Sets every non-zero random-effect variance to 0.01 and rescales
/// covariances so correlation coefficients are unchanged.
pub fn ideal_from_realistic(config: &ScenarioConfig) -> ScenarioConfig {
    let mut out = config.clone();
    out.name = ScenarioName::Ideal;
    for block in &mut out.models {
        let sd: Vec<f64> = (0..block.cov.len()).map(|i| block.cov[i][i].sqrt()).collect();
        for i in 0..sd.len() {
            for j in 0..sd.len() {
                if sd[i] > 0.0 && sd[j] > 0.0 {
                    block.cov[i][j] = block.cov[i][j] / (sd[i] * sd[j]) * IDEAL_VARIANCE;
                }
            }
        }
    }
    out
}

/// Multivariate normal sampler that tolerates zero rows/columns: the
/// non-degenerate principal block is factored and degenerate coordinates stay
/// at their mean.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    mean: Vec<f64>,
    active: Vec<usize>,
    factor: DMatrix<f64>,
}

impl MvnSampler {
    pub fn new(mean: &[f64], cov: &[Vec<f64>]) -> Result<Self> {
        let full = linalg::from_rows(cov);
        if full.nrows() != mean.len() {
            return Err(Error::InvalidArgument(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                full.nrows(),
                full.ncols()
            )));
        }
        linalg::check_psd(&full)?;
        let active: Vec<usize> = (0..mean.len()).filter(|&i| full[(i, i)] > 0.0).collect();
        let sub = full.select_rows(&active).select_columns(&active);
        let factor = match sub.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                // Singular but PSD block: symmetric square root with clipped eigenvalues.
                let eig = sub.symmetric_eigen();
                let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
            }
        };
        Ok(Self {
            mean: mean.to_vec(),
            active,
            factor,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.active.len()).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = self.mean.clone();
        for (a, &i) in self.active.iter().enumerate() {
            let mut acc = 0.0;
            for (b, zb) in z.iter().enumerate() {
                acc += self.factor[(a, b)] * zb;
            }
            out[i] += acc;
        }
        out
    }
}

/// One draw from `N(mean, cov)` with `cov` positive semi-definite.
pub fn draw_random_effects<R: Rng + ?Sized>(mean: &[f64], cov: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
    Ok(MvnSampler::new(mean, cov)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    InSample,
    OutOfSample,
}

impl Role {
    pub fn code(self) -> &'static str {
        match self {
            Role::InSample => "in",
            Role::OutOfSample => "out",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: usize,
    pub role: Role,
    /// Years from seroconversion to the first positive test. Always present
    /// for in-sample individuals; the ground truth for out-of-sample ones.
    pub tau: Option<f64>,
    /// Years from the first positive test.
    pub times: Vec<f64>,
    /// One vector per biomarker, aligned with `times`.
    pub measurements: Vec<Vec<f64>>,
    /// Ground-truth stacked random effects, when known.
    pub random_effects: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub scenario: String,
    pub model: String,
    pub replicate: u64,
    pub biomarkers: Vec<String>,
    pub individuals: Vec<Individual>,
}

impl PanelDataset {
    pub fn in_sample(&self) -> impl Iterator<Item = &Individual> {
        self.individuals.iter().filter(|i| i.role == Role::InSample)
    }

    pub fn out_of_sample(&self) -> impl Iterator<Item = &Individual> {
        self.individuals.iter().filter(|i| i.role == Role::OutOfSample)
    }
}

/// Simulates one individual's measurements for `block`.
///
/// `effects_rng` drives the random-effect draw, `noise_rngs[k]` the noise of
/// biomarker `k`.
pub fn simulate_individual(
    sampler: &MvnSampler,
    block: &ModelBlock,
    schedule: &[f64],
    id: usize,
    role: Role,
    tau: f64,
    effects_rng: &mut StreamRng,
    noise_rngs: &mut [StreamRng],
) -> Result<Individual> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidArgument(format!("tau must be non-negative, got {tau}")));
    }
    let specs = block.model.growth_specs();
    if noise_rngs.len() != specs.len() {
        return Err(Error::InvalidArgument(format!(
            "need {} noise streams, got {}",
            specs.len(),
            noise_rngs.len()
        )));
    }
    let beta = sampler.sample(effects_rng);
    let error_var = block.error_variances();
    let mut offset = 0;
    let mut measurements = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let curve = eval_trajectory(spec, &beta[offset..offset + spec.dim()], tau, schedule)?;
        let sd = error_var[k].sqrt();
        let rng = &mut noise_rngs[k];
        measurements.push(
            curve
                .into_iter()
                .map(|g| {
                    let z: f64 = rng.sample(StandardNormal);
                    g + sd * z
                })
                .collect(),
        );
        offset += spec.dim();
    }
    Ok(Individual {
        id,
        role,
        tau: Some(tau),
        times: schedule.to_vec(),
        measurements,
        random_effects: Some(beta),
    })
}

/// Replicate `replicate` of `model` under `config`. Deterministic in
/// `(config.master_seed, replicate, model)`; in-sample offsets are shared by
/// every model of the same replicate.
pub fn simulate_dataset(config: &ScenarioConfig, model: ModelId, replicate: u64) -> Result<PanelDataset> {
    config.validate()?;
    let block = config.block(model)?;
    let sampler = MvnSampler::new(&block.mean, &block.cov)?;
    let n_bio = model.biomarkers().len() as u64;
    let seed = config.master_seed;
    let m = model.index();

    let mut individuals = Vec::with_capacity(config.n_in_sample + config.out_of_sample_taus.len());
    let taus = (0..config.n_in_sample)
        .map(|i| {
            let u: f64 = rng::stream(seed, &[replicate, i as u64, TAG_TAU]).random();
            (Role::InSample, u * config.sero_interval)
        })
        .chain(config.out_of_sample_taus.iter().map(|&t| (Role::OutOfSample, t)));
    for (id, (role, tau)) in taus.enumerate() {
        let schedule = match role {
            Role::InSample => &config.in_sample_schedule,
            Role::OutOfSample => &config.out_of_sample_schedule,
        };
        let mut effects_rng = rng::stream(seed, &[replicate, id as u64, TAG_EFFECTS, m]);
        let mut noise_rngs: Vec<StreamRng> = (0..n_bio)
            .map(|k| rng::stream(seed, &[replicate, id as u64, TAG_NOISE, m, k]))
            .collect();
        individuals.push(simulate_individual(
            &sampler,
            block,
            schedule,
            id,
            role,
            tau,
            &mut effects_rng,
            &mut noise_rngs,
        )?);
    }
    Ok(PanelDataset {
        scenario: config.name.to_string(),
        model: model.name().to_string(),
        replicate,
        biomarkers: model.biomarkers().iter().map(|s| s.to_string()).collect(),
        individuals,
    })
}
