//! Likelihoods, priors and conjugate full conditionals of the hierarchical
//! growth model.
//!
//! For subject `i` and biomarker `k`:
//!
//! ```text
//! y_ij^k ~ N(g_k(t_ij + tau_i, beta_i^k), sigma2_k)
//! beta_i ~ N(mu, Sigma)                  (random coordinates only)
//! mu_d ~ N(0, 1e6)
//! sigma2_k ~ IG(2, 0.01)                 (shape, scale)
//! Sigma ~ IW(r + 1, I_r)
//! tau_new ~ U(0, L)
//! ```
//!
//! Fixed-effect coordinates (zero random-effect variance) share a single
//! population value: `beta_i[f] == mu[f]` for every subject, and `Sigma` only
//! covers the `r` random coordinates. In-sample offsets `tau_i` are known
//! constants; exactly one subject carries the unknown offset.

pub mod dist;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::catalogue::ModelId;
use crate::error::{Error, Result};
use crate::growth::{BivariateSpec, GrowthModelSpec};
use crate::linalg;
use crate::simgen::{PanelDataset, Role, ONE_MONTH, TWO_WEEKS};

pub use dist::{inv_gamma_logpdf, inv_wishart_logpdf, mvn_logpdf, normal_logpdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    /// Variance of the Gaussian prior on every mean coordinate.
    pub mean_var: f64,
    pub eps_shape: f64,
    pub eps_scale: f64,
    /// Inverse-Wishart degrees of freedom minus the matrix dimension.
    pub iw_extra_df: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            mean_var: 1e6,
            eps_shape: 2.0,
            eps_scale: 0.01,
            iw_extra_df: 1.0,
        }
    }
}

/// Index bookkeeping for the stacked parameter vector of one subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// Start of each biomarker's block.
    pub offsets: Vec<usize>,
    pub dim: usize,
    /// Coordinates with a random effect, in stacked order.
    pub random: Vec<usize>,
    /// Population-fixed coordinates.
    pub fixed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub biomarkers: Vec<GrowthModelSpec>,
    /// Length of the seroconversion interval; the unknown offset is uniform on
    /// `[0, sero_interval]`.
    pub sero_interval: f64,
    pub priors: Priors,
}

impl ModelSpec {
    pub fn new(biomarkers: Vec<GrowthModelSpec>, sero_interval: f64) -> Result<Self> {
        let spec = Self {
            biomarkers,
            sero_interval,
            priors: Priors::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn for_model(model: ModelId, sero_interval: f64) -> Self {
        Self::new(model.growth_specs(), sero_interval).expect("catalogue models are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.biomarkers.is_empty() || self.biomarkers.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "models have one or two biomarkers, got {}",
                self.biomarkers.len()
            )));
        }
        let p = &self.priors;
        if !(self.sero_interval > 0.0
            && p.mean_var > 0.0
            && p.eps_shape > 0.0
            && p.eps_scale > 0.0
            && p.iw_extra_df > 0.0)
        {
            return Err(Error::InvalidArgument(
                "seroconversion interval and prior hyperparameters must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let mut offsets = Vec::with_capacity(self.biomarkers.len());
        let mut random = Vec::new();
        let mut fixed = Vec::new();
        let mut dim = 0;
        for spec in &self.biomarkers {
            offsets.push(dim);
            for (j, &is_fixed) in spec.fixed_mask().iter().enumerate() {
                if is_fixed {
                    fixed.push(dim + j);
                } else {
                    random.push(dim + j);
                }
            }
            dim += spec.dim();
        }
        Layout {
            offsets,
            dim,
            random,
            fixed,
        }
    }

    pub fn iw_df(&self) -> f64 {
        self.layout().random.len() as f64 + self.priors.iw_extra_df
    }
}

/// Out-of-sample measurements retained for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FollowUp {
    DiagnosisOnly,
    TwoWeeks,
    OneMonth,
}

impl FollowUp {
    pub fn cutoff(self) -> f64 {
        match self {
            FollowUp::DiagnosisOnly => 0.0,
            FollowUp::TwoWeeks => TWO_WEEKS,
            FollowUp::OneMonth => ONE_MONTH,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FollowUp::DiagnosisOnly => "diagnosis",
            FollowUp::TwoWeeks => "2w",
            FollowUp::OneMonth => "1m",
        }
    }
}

impl std::str::FromStr for FollowUp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "diagnosis" | "diagnosis-only" | "0" => Ok(FollowUp::DiagnosisOnly),
            "2w" | "two-weeks" | "2weeks" => Ok(FollowUp::TwoWeeks),
            "1m" | "one-month" | "1month" => Ok(FollowUp::OneMonth),
            _ => Err(Error::InvalidArgument(format!("unknown follow-up truncation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub times: Vec<f64>,
    /// One vector per biomarker.
    pub y: Vec<Vec<f64>>,
    /// `None` for the subject whose offset is inferred.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub subjects: Vec<Subject>,
    /// Index of the subject with unknown offset.
    pub unknown: usize,
}

impl FitData {
    pub fn new(subjects: Vec<Subject>, model: &ModelSpec) -> Result<Self> {
        let unknown: Vec<usize> = subjects
            .iter()
            .enumerate()
            .filter(|(_, s)| s.tau.is_none())
            .map(|(i, _)| i)
            .collect();
        if unknown.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "exactly one subject must have an unknown offset, found {}",
                unknown.len()
            )));
        }
        let k = model.biomarkers.len();
        for (i, s) in subjects.iter().enumerate() {
            if s.y.len() != k || s.y.iter().any(|y| y.len() != s.times.len()) {
                return Err(Error::InvalidArgument(format!(
                    "subject {i}: expected {k} measurement vectors aligned with its times"
                )));
            }
            if s.times.iter().chain(s.y.iter().flatten()).any(|v| !v.is_finite())
                || s.times.iter().any(|&t| t < 0.0)
            {
                return Err(Error::InvalidArgument(format!(
                    "subject {i}: times must be non-negative and all values finite"
                )));
            }
            if let Some(t) = s.tau {
                if !(0.0..=model.sero_interval).contains(&t) {
                    return Err(Error::InvalidArgument(format!(
                        "subject {i}: known offset {t} outside [0, {}]",
                        model.sero_interval
                    )));
                }
            }
        }
        Ok(Self {
            subjects,
            unknown: unknown[0],
        })
    }

    /// All in-sample individuals of `panel` plus the out-of-sample individual
    /// `new_id`, whose measurements are truncated to `followup` and whose
    /// offset is treated as unknown.
    pub fn from_panel(panel: &PanelDataset, new_id: usize, followup: FollowUp, model: &ModelSpec) -> Result<Self> {
        if panel.biomarkers.len() != model.biomarkers.len() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} biomarkers, model expects {}",
                panel.biomarkers.len(),
                model.biomarkers.len()
            )));
        }
        let mut subjects: Vec<Subject> = panel
            .in_sample()
            .map(|ind| Subject {
                times: ind.times.clone(),
                y: ind.measurements.clone(),
                tau: ind.tau,
            })
            .collect();
        let new = panel
            .individuals
            .iter()
            .find(|i| i.id == new_id && i.role == Role::OutOfSample)
            .ok_or_else(|| Error::InvalidArgument(format!("no out-of-sample individual with id {new_id}")))?;
        let keep = new.times.iter().filter(|&&t| t <= followup.cutoff() + 1e-12).count();
        subjects.push(Subject {
            times: new.times[..keep].to_vec(),
            y: new.measurements.iter().map(|m| m[..keep].to_vec()).collect(),
            tau: None,
        });
        Self::new(subjects, model)
    }

    pub fn n_obs(&self, k: usize) -> usize {
        self.subjects.iter().map(|s| s.y[k].len()).sum()
    }
}

/// Unknowns of the hierarchical model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Full stacked parameter vector per subject.
    pub betas: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    /// Covariance of the random coordinates.
    pub sigma_beta: DMatrix<f64>,
    pub eps_var: Vec<f64>,
    /// Offset of the unknown subject.
    pub tau: f64,
}

impl ChainState {
    /// Offset used for subject `i`.
    pub fn tau_of(&self, data: &FitData, i: usize) -> f64 {
        data.subjects[i].tau.unwrap_or(self.tau)
    }

    pub fn random_part(&self, i: usize, layout: &Layout) -> Vec<f64> {
        layout.random.iter().map(|&c| self.betas[i][c]).collect()
    }
}

pub fn loglik_individual_univariate(
    y: &[f64],
    times: &[f64],
    tau: f64,
    beta: &[f64],
    eps_var: f64,
    spec: &GrowthModelSpec,
) -> Result<f64> {
    if !(eps_var > 0.0) {
        return Err(Error::Domain(format!("measurement-error variance must be positive, got {eps_var}")));
    }
    if y.len() != times.len() || beta.len() != spec.dim() {
        return Err(Error::InvalidArgument("inconsistent likelihood dimensions".into()));
    }
    let ss = spec.kind().sum_sq_resid(beta, tau, times, y);
    Ok(gaussian_loglik(ss, y.len(), eps_var))
}

#[allow(clippy::too_many_arguments)]
pub fn loglik_individual_bivariate(
    y_first: &[f64],
    y_second: &[f64],
    times: &[f64],
    tau: f64,
    beta_first: &[f64],
    beta_second: &[f64],
    eps_var: [f64; 2],
    spec: &BivariateSpec,
) -> Result<f64> {
    Ok(
        loglik_individual_univariate(y_first, times, tau, beta_first, eps_var[0], &spec.first)?
            + loglik_individual_univariate(y_second, times, tau, beta_second, eps_var[1], &spec.second)?,
    )
}

/// `-n/2 ln(2 pi s2) - ss / (2 s2)`.
#[inline]
pub fn gaussian_loglik(ss: f64, n: usize, var: f64) -> f64 {
    -0.5 * n as f64 * (std::f64::consts::TAU * var).ln() - 0.5 * ss / var
}

/// Log-likelihood of every subject's data under `state`.
pub fn loglik(state: &ChainState, data: &FitData, model: &ModelSpec) -> Result<f64> {
    let layout = model.layout();
    let mut total = 0.0;
    for (i, s) in data.subjects.iter().enumerate() {
        let tau = state.tau_of(data, i);
        for (k, spec) in model.biomarkers.iter().enumerate() {
            let off = layout.offsets[k];
            total += loglik_individual_univariate(
                &s.y[k],
                &s.times,
                tau,
                &state.betas[i][off..off + spec.dim()],
                state.eps_var[k],
                spec,
            )?;
        }
    }
    Ok(total)
}

/// Log prior density of `state`, including the random-effect terms
/// `N(beta_i | mu, Sigma)`. Out-of-support states give `-inf`.
pub fn logprior(state: &ChainState, model: &ModelSpec) -> Result<f64> {
    let layout = model.layout();
    let p = &model.priors;
    if !(0.0..=model.sero_interval).contains(&state.tau) {
        return Ok(f64::NEG_INFINITY);
    }
    if state.eps_var.iter().any(|&v| !(v > 0.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    if state
        .betas
        .iter()
        .any(|b| layout.fixed.iter().any(|&f| b[f] != state.mu[f]))
    {
        return Ok(f64::NEG_INFINITY);
    }
    let mut total = -model.sero_interval.ln();
    total += state.mu.iter().map(|&m| normal_logpdf(m, 0.0, p.mean_var)).sum::<f64>();
    total += state
        .eps_var
        .iter()
        .map(|&v| inv_gamma_logpdf(v, p.eps_shape, p.eps_scale))
        .sum::<f64>();
    let r = layout.random.len();
    if r > 0 {
        let df = r as f64 + p.iw_extra_df;
        total += inv_wishart_logpdf(&state.sigma_beta, df, &DMatrix::identity(r, r))?;
        let (prec, logdet) = linalg::spd_inverse_logdet(&state.sigma_beta, "random-effects covariance")?;
        let mu_r: Vec<f64> = layout.random.iter().map(|&c| state.mu[c]).collect();
        let norm = -0.5 * (r as f64 * (std::f64::consts::TAU).ln() + logdet);
        for i in 0..state.betas.len() {
            let diff: Vec<f64> = state
                .random_part(i, &layout)
                .iter()
                .zip(&mu_r)
                .map(|(b, m)| b - m)
                .collect();
            total += norm - 0.5 * linalg::quad_form(&prec, &diff);
        }
    }
    Ok(total)
}

/// Unnormalized log posterior.
pub fn log_posterior(state: &ChainState, data: &FitData, model: &ModelSpec) -> Result<f64> {
    let prior = logprior(state, model)?;
    if prior == f64::NEG_INFINITY {
        return Ok(prior);
    }
    Ok(prior + loglik(state, data, model)?)
}

/// Conditional of the random-coordinate mean given random effects and
/// `Sigma`: returns `(mean, covariance)`.
pub fn full_conditional_mu(
    betas: &[Vec<f64>],
    sigma_beta: &DMatrix<f64>,
    prior_var: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let r = sigma_beta.nrows();
    if betas.iter().any(|b| b.len() != r) {
        return Err(Error::InvalidArgument("random-effect vectors do not match Sigma".into()));
    }
    let (sigma_inv, _) = linalg::spd_inverse_logdet(sigma_beta, "random-effects covariance")?;
    let mut sum = DVector::<f64>::zeros(r);
    for b in betas {
        sum += linalg::dvec(b);
    }
    conditional_mu_from_sum(&sigma_inv, &sum, betas.len(), prior_var)
}

pub(crate) fn conditional_mu_from_sum(
    sigma_inv: &DMatrix<f64>,
    sum: &DVector<f64>,
    n: usize,
    prior_var: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let r = sigma_inv.nrows();
    let precision = sigma_inv * n as f64 + DMatrix::<f64>::identity(r, r) / prior_var;
    let (cov, _) = linalg::spd_inverse_logdet(&precision, "conditional precision of mu")?;
    let mean = &cov * (sigma_inv * sum);
    Ok((mean, cov))
}

/// Inverse-Wishart conditional of `Sigma`: returns `(df', scale')`.
pub fn full_conditional_sigma_beta(
    betas: &[Vec<f64>],
    mu: &[f64],
    df: f64,
    scale: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>)> {
    let r = mu.len();
    if scale.nrows() != r || betas.iter().any(|b| b.len() != r) {
        return Err(Error::InvalidArgument("random-effect vectors do not match the IW scale".into()));
    }
    let mut out = scale.clone();
    for b in betas {
        let d = DVector::from_iterator(r, b.iter().zip(mu).map(|(x, m)| x - m));
        out += &d * d.transpose();
    }
    Ok((df + betas.len() as f64, out))
}

/// Inverse-gamma conditional of a measurement-error variance: returns
/// `(shape', scale')`.
pub fn full_conditional_sigma_eps(residuals: &[f64], shape: f64, scale: f64) -> (f64, f64) {
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    ig_posterior(ss, residuals.len(), shape, scale)
}

#[inline]
pub(crate) fn ig_posterior(ss: f64, n: usize, shape: f64, scale: f64) -> (f64, f64) {
    (shape + 0.5 * n as f64, scale + 0.5 * ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::GrowthKind;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    const LOG_STD_NORMAL_AT_0: f64 = -0.9189385332046727;

    fn nl_spec() -> GrowthModelSpec {
        GrowthModelSpec::random(GrowthKind::Nonlinear3)
    }

    #[test]
    fn zero_residual_loglik() {
        let spec = GrowthModelSpec::random(GrowthKind::Linear);
        let v = loglik_individual_univariate(&[5.0], &[0.0], 0.0, &[5.0, 2.0], 1.0, &spec).unwrap();
        assert!((v - LOG_STD_NORMAL_AT_0).abs() < 1e-12);
        assert!(matches!(
            loglik_individual_univariate(&[5.0], &[0.0], 0.0, &[5.0, 2.0], 0.0, &spec),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn doubling_a_residual() {
        let spec = GrowthModelSpec::random(GrowthKind::Linear);
        let (r, s2) = (0.3, 0.5);
        let a = loglik_individual_univariate(&[5.0 + r], &[0.0], 0.0, &[5.0, 2.0], s2, &spec).unwrap();
        let b = loglik_individual_univariate(&[5.0 + 2.0 * r], &[0.0], 0.0, &[5.0, 2.0], s2, &spec).unwrap();
        assert!((a - b - 3.0 * r * r / (2.0 * s2)).abs() < 1e-12);
    }

    #[test]
    fn loglik_matches_product_of_densities() {
        let mut rng = stream(5, &[]);
        for _ in 0..20 {
            let times: Vec<f64> = (0..6).map(|j| j as f64 * 0.3).collect();
            let beta = [1.5, -1.0 + rng.random::<f64>(), rng.random::<f64>()];
            let tau: f64 = rng.random();
            let s2 = 0.01 + rng.random::<f64>();
            let y: Vec<f64> = times.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let fast = loglik_individual_univariate(&y, &times, tau, &beta, s2, &nl_spec()).unwrap();
            // Naive oracle: product of per-point normal densities.
            let mut prod = 1.0;
            for (t, yy) in times.iter().zip(&y) {
                let s = t + tau;
                let g = beta[0] + (beta[1] - beta[0]) * (-(beta[2].exp()) * s).exp();
                prod *= (-(yy - g).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
            }
            assert!((fast - prod.ln()).abs() <= 1e-10 * prod.ln().abs());
        }
    }

    #[test]
    fn bivariate_is_sum_and_matches_block_mvn() {
        let spec = BivariateSpec {
            first: nl_spec(),
            second: GrowthModelSpec::random(GrowthKind::ViralDecay),
        };
        let v = loglik_individual_bivariate(&[-1.0], &[6.0], &[0.0], 0.0, &[0.0, -1.0, 1.0], &[3.0, 2.0], [1.0, 1.0], &spec)
            .unwrap();
        assert!((v - 2.0 * LOG_STD_NORMAL_AT_0).abs() < 1e-12);

        let mut rng = stream(6, &[]);
        let times = [0.0, 0.25, 0.5];
        let y1: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 1.0).collect();
        let y2: Vec<f64> = (0..3).map(|_| 3.0 + rng.random::<f64>()).collect();
        let (b1, b2) = ([1.5, -1.2, 0.7], [3.1, 1.8]);
        let eps = [0.02, 0.3];
        let tau = 0.4;
        let joint = loglik_individual_bivariate(&y1, &y2, &times, tau, &b1, &b2, eps, &spec).unwrap();
        let sum = loglik_individual_univariate(&y1, &times, tau, &b1, eps[0], &spec.first).unwrap()
            + loglik_individual_univariate(&y2, &times, tau, &b2, eps[1], &spec.second).unwrap();
        assert!((joint - sum).abs() < 1e-12);

        // Oracle: one 6-dimensional normal with block-diagonal covariance.
        let mean = crate::growth::eval_bivariate(&spec, &b1, &b2, tau, &times).unwrap();
        let y: Vec<f64> = y1.iter().chain(&y2).copied().collect();
        let cov = DMatrix::from_fn(6, 6, |i, j| if i == j { eps[i / 3] } else { 0.0 });
        let mvn = mvn_logpdf(&y, &mean, &cov).unwrap();
        assert!((joint - mvn).abs() < 1e-10);
    }

    fn toy_state(model: &ModelSpec, n: usize) -> ChainState {
        let layout = model.layout();
        let r = layout.random.len();
        let mu = vec![1.5, -1.5, 0.8];
        ChainState {
            betas: (0..n).map(|i| vec![1.5, -1.5 + 0.01 * i as f64, 0.8 - 0.02 * i as f64]).collect(),
            mu,
            sigma_beta: DMatrix::identity(r, r) * 0.3,
            eps_var: vec![0.01],
            tau: 0.5,
        }
    }

    #[test]
    fn flat_tau_prior_and_support() {
        let model = ModelSpec::for_model(ModelId::Ar4, 1.0);
        let mut s = toy_state(&model, 3);
        let a = logprior(&s, &model).unwrap();
        s.tau = 0.2;
        assert_eq!(logprior(&s, &model).unwrap(), a);
        s.tau = 1.2;
        assert_eq!(logprior(&s, &model).unwrap(), f64::NEG_INFINITY);
        s.tau = -0.01;
        assert_eq!(logprior(&s, &model).unwrap(), f64::NEG_INFINITY);
        s.tau = 0.5;
        s.betas[1][0] = 1.4;
        assert_eq!(logprior(&s, &model).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn mu_conditional_limits() {
        let (m, v) = full_conditional_mu(&[], &DMatrix::identity(2, 2), 1e6).unwrap();
        assert!(m.amax() < 1e-12);
        assert!((v - DMatrix::identity(2, 2) * 1e6).amax() < 1e-6);

        let betas: Vec<Vec<f64>> = (0..100).map(|_| vec![1.0, 2.0]).collect();
        let (m, _) = full_conditional_mu(&betas, &DMatrix::identity(2, 2), 1e6).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-4 && (m[1] - 2.0).abs() < 2e-4);

        let singular = linalg::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(full_conditional_mu(&betas, &singular, 1e6), Err(Error::Singular(_))));
    }

    #[test]
    fn mu_conditional_matches_grid_argmax_and_curvature() {
        // Oracle: dense 2-D grid of the unnormalized conditional log-density.
        let sigma = linalg::from_rows(&[vec![0.4, -0.1], vec![-0.1, 0.3]]);
        let betas = vec![vec![0.2, 1.1], vec![-0.3, 0.9], vec![0.5, 1.4], vec![0.1, 0.8]];
        let (mean, cov) = full_conditional_mu(&betas, &sigma, 1e6).unwrap();
        let logp = |x: f64, y: f64| -> f64 {
            let mut acc = normal_logpdf(x, 0.0, 1e6) + normal_logpdf(y, 0.0, 1e6);
            for b in &betas {
                acc += mvn_logpdf(b, &[x, y], &sigma).unwrap();
            }
            acc
        };
        let (mut best, mut arg) = (f64::NEG_INFINITY, (0.0, 0.0));
        let h = 0.0025;
        for i in 0..=400 {
            for j in 0..=400 {
                let (x, y) = (-0.4 + i as f64 * h, 0.55 + j as f64 * h);
                let v = logp(x, y);
                if v > best {
                    best = v;
                    arg = (x, y);
                }
            }
        }
        assert!((arg.0 - mean[0]).abs() <= h && (arg.1 - mean[1]).abs() <= h);
        // Curvature by central differences equals the conditional precision.
        let e = 1e-3;
        let (x0, y0) = (mean[0], mean[1]);
        let hxx = (logp(x0 + e, y0) - 2.0 * logp(x0, y0) + logp(x0 - e, y0)) / (e * e);
        let hyy = (logp(x0, y0 + e) - 2.0 * logp(x0, y0) + logp(x0, y0 - e)) / (e * e);
        let hxy = (logp(x0 + e, y0 + e) - logp(x0 + e, y0 - e) - logp(x0 - e, y0 + e) + logp(x0 - e, y0 - e))
            / (4.0 * e * e);
        let (prec, _) = linalg::spd_inverse_logdet(&cov, "cov").unwrap();
        assert!((-hxx - prec[(0, 0)]).abs() < 1e-3 * prec[(0, 0)]);
        assert!((-hyy - prec[(1, 1)]).abs() < 1e-3 * prec[(1, 1)]);
        assert!((-hxy - prec[(0, 1)]).abs() < 1e-3 * prec[(0, 0)]);
    }

    #[test]
    fn sigma_conditional() {
        let scale = DMatrix::identity(2, 2);
        let (df, s) = full_conditional_sigma_beta(&[], &[0.0, 0.0], 3.0, &scale).unwrap();
        assert_eq!(df, 3.0);
        assert_eq!(s, scale);
        let betas = vec![vec![1.0, 2.0]; 7];
        let (df, s) = full_conditional_sigma_beta(&betas, &[1.0, 2.0], 3.0, &scale).unwrap();
        assert_eq!(df, 10.0);
        assert_eq!(s, scale);
    }

    #[test]
    fn sigma_conditional_moment_identity() {
        // Oracle: E[IW(df, S)] = S / (df - d - 1).
        let mut rng = stream(9, &[]);
        let betas: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal), 0.5 * rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let (df, scale) = full_conditional_sigma_beta(&betas, &[0.1, -0.1], 3.0, &DMatrix::identity(2, 2)).unwrap();
        let n = 20_000;
        let mut acc = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            acc += dist::sample_inv_wishart(df, &scale, &mut rng).unwrap();
        }
        let expect = &scale / (df - 3.0);
        assert!(((acc / n as f64) - &expect).amax() < 0.03 * expect.amax());
    }

    #[test]
    fn eps_conditional() {
        assert_eq!(full_conditional_sigma_eps(&[0.0; 10], 2.0, 0.01), (7.0, 0.01));
        let (a, b) = full_conditional_sigma_eps(&[1.0, -0.5, 0.5, 0.5f64.sqrt()], 2.0, 0.01);
        assert_eq!(a, 4.0);
        assert!((b - 1.01).abs() < 1e-12);
        // Oracle: E[IG(a, b)] = b / (a - 1).
        let mut rng = stream(2, &[]);
        let n = 50_000;
        let m = (0..n).map(|_| dist::sample_inv_gamma(a, b, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((m - b / (a - 1.0)).abs() < 0.02 * b / (a - 1.0));
    }

    #[test]
    fn panel_conversion_truncates_followup() {
        let cfg = crate::simgen::ScenarioConfig::realistic(3);
        let panel = crate::simgen::simulate_dataset(&cfg, ModelId::Ar4Vl, 0).unwrap();
        let model = ModelSpec::for_model(ModelId::Ar4Vl, 1.0);
        let new_id = panel.out_of_sample().next().unwrap().id;
        for (f, n) in [(FollowUp::DiagnosisOnly, 1), (FollowUp::TwoWeeks, 2), (FollowUp::OneMonth, 3)] {
            let d = FitData::from_panel(&panel, new_id, f, &model).unwrap();
            assert_eq!(d.subjects.len(), 101);
            assert_eq!(d.unknown, 100);
            assert_eq!(d.subjects[100].times.len(), n);
            assert_eq!(d.subjects[100].y[1].len(), n);
        }
        assert!(FitData::from_panel(&panel, 3, FollowUp::DiagnosisOnly, &model).is_err());
    }
}
