//! One Metropolis-within-Gibbs chain.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::adapt::{reflect, AdaptiveRw};
use super::modes::ModeMixture;
use super::SamplerConfig;
use crate::bayes::dist::{sample_inv_gamma, sample_inv_wishart, sample_mvn_chol};
use crate::bayes::{conditional_mu_from_sum, ig_posterior, ChainState, FitData, Layout, ModelSpec};
use crate::error::{Error, Result};
use crate::growth::GrowthKind;
use crate::linalg;
use crate::rng::StreamRng;

/// Starting state from per-subject curve heuristics.
///
/// Only subjects with a known offset feed the heuristics, and each of them
/// needs at least two observations. The population mean is jittered
/// uniformly by up to two heuristic standard deviations per coordinate so
/// that chains start overdispersed.
pub fn init_state(data: &FitData, model: &ModelSpec, rng: &mut StreamRng) -> Result<ChainState> {
    model.validate()?;
    let layout = model.layout();
    let known: Vec<usize> = (0..data.subjects.len()).filter(|&i| i != data.unknown).collect();
    for &i in &known {
        let n = data.subjects[i].times.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "subject {i} has {n} observation(s); curve initialization needs at least 2"
            )));
        }
    }

    let dim = layout.dim;
    let mut center = vec![0.0; dim];
    let mut spread = vec![1.0; dim];
    if !known.is_empty() {
        let guesses: Vec<Vec<f64>> = known
            .iter()
            .map(|&i| {
                let s = &data.subjects[i];
                let tau = s.tau.unwrap_or(0.0);
                let mut g = Vec::with_capacity(dim);
                for (k, spec) in model.biomarkers.iter().enumerate() {
                    g.extend(curve_guess(spec.kind(), &s.times, &s.y[k], tau));
                }
                g
            })
            .collect();
        let n = guesses.len() as f64;
        for d in 0..dim {
            let m = guesses.iter().map(|g| g[d]).sum::<f64>() / n;
            let v = guesses.iter().map(|g| (g[d] - m).powi(2)).sum::<f64>() / n;
            center[d] = m;
            spread[d] = v.sqrt();
        }
    }
    let mu: Vec<f64> = center
        .iter()
        .zip(&spread)
        .map(|(c, s)| c + (rng.random::<f64>() * 4.0 - 2.0) * s)
        .collect();

    let tau = rng.random::<f64>() * model.sero_interval;
    let r = layout.random.len();
    let prior_mean = if model.priors.eps_shape > 1.0 {
        model.priors.eps_scale / (model.priors.eps_shape - 1.0)
    } else {
        model.priors.eps_scale
    };
    let mut eps_var = Vec::with_capacity(model.biomarkers.len());
    for (k, spec) in model.biomarkers.iter().enumerate() {
        let off = layout.offsets[k];
        let beta = &mu[off..off + spec.dim()];
        let mut ss = 0.0;
        let mut n = 0;
        for (i, s) in data.subjects.iter().enumerate() {
            let t = if i == data.unknown { tau } else { s.tau.unwrap_or(tau) };
            ss += spec.kind().sum_sq_resid(beta, t, &s.times, &s.y[k]);
            n += s.times.len();
        }
        let v = if n > 0 && ss.is_finite() { (ss / n as f64).max(1e-8) } else { prior_mean };
        eps_var.push(v);
    }

    Ok(ChainState {
        betas: vec![mu.clone(); data.subjects.len()],
        mu,
        sigma_beta: DMatrix::identity(r, r),
        eps_var,
        tau,
    })
}

fn curve_guess(kind: GrowthKind, times: &[f64], y: &[f64], tau: f64) -> Vec<f64> {
    let first = y[0];
    let last = y[y.len() - 1];
    match kind {
        GrowthKind::Linear => {
            let n = times.len() as f64;
            let sm = times.iter().map(|t| t + tau).sum::<f64>() / n;
            let ym = y.iter().sum::<f64>() / n;
            let sxx: f64 = times.iter().map(|t| (t + tau - sm).powi(2)).sum();
            let sxy: f64 = times.iter().zip(y).map(|(t, v)| (t + tau - sm) * (v - ym)).sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            vec![ym - slope * sm, slope]
        }
        GrowthKind::Nonlinear3 => vec![last, first, 0.0],
        GrowthKind::ViralDecay => vec![last, 1.0],
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    tries: u64,
    accepts: u64,
}

impl Tally {
    fn rate(&self) -> Option<f64> {
        (self.tries > 0).then(|| self.accepts as f64 / self.tries as f64)
    }
}

/// Per-block acceptance rates measured after the adaptation window.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AcceptanceRates {
    pub effects: Option<f64>,
    pub new_effects: Option<f64>,
    pub offset: Option<f64>,
    pub joint_new: Option<f64>,
    pub fixed_effects: Option<f64>,
    pub mode_jump: Option<f64>,
}

/// A single chain with its proposal kernels and likelihood caches.
pub struct Sampler<'a> {
    data: &'a FitData,
    model: &'a ModelSpec,
    config: &'a SamplerConfig,
    layout: Layout,
    kinds: Vec<GrowthKind>,
    state: ChainState,
    rng: StreamRng,
    iteration: usize,
    /// Residual sum of squares per subject and biomarker.
    ss: Vec<Vec<f64>>,
    sigma_inv: DMatrix<f64>,
    effect_rw: Vec<AdaptiveRw>,
    fixed_rw: Option<AdaptiveRw>,
    tau_rw: AdaptiveRw,
    joint_rw: AdaptiveRw,
    tally_effects: Tally,
    tally_new: Tally,
    tally_tau: Tally,
    tally_joint: Tally,
    tally_fixed: Tally,
    tally_mode: Tally,
    modes: Vec<Option<ModeMixture>>,
    // Scratch buffers.
    cur_r: Vec<f64>,
    prop_r: Vec<f64>,
    prop_full: Vec<f64>,
    prop_ss: Vec<f64>,
    joint_cur: Vec<f64>,
    joint_prop: Vec<f64>,
    fixed_cur: Vec<f64>,
    fixed_prop: Vec<f64>,
    fixed_ss: Vec<Vec<f64>>,
}

impl<'a> Sampler<'a> {
    pub fn new(
        data: &'a FitData,
        model: &'a ModelSpec,
        config: &'a SamplerConfig,
        state: ChainState,
        rng: StreamRng,
    ) -> Result<Self> {
        let layout = model.layout();
        let kinds: Vec<GrowthKind> = model.biomarkers.iter().map(|b| b.kind()).collect();
        let r = layout.random.len();
        let f = layout.fixed.len();
        let n = data.subjects.len();
        let steps = &config.step_sizes;
        let max_step = model.sero_interval;
        let effect_rw = (0..n)
            .map(|_| AdaptiveRw::new(&vec![steps.effects; r], config.target_for(r), f64::INFINITY))
            .collect();
        let fixed_rw =
            (f > 0).then(|| AdaptiveRw::new(&vec![steps.fixed_effects; f], config.target_for(f), f64::INFINITY));
        let mut joint_steps = vec![steps.effects; r];
        joint_steps.push(steps.offset);
        let mut sampler = Self {
            data,
            model,
            config,
            kinds,
            state,
            rng,
            iteration: 0,
            ss: vec![vec![0.0; model.biomarkers.len()]; n],
            sigma_inv: DMatrix::identity(r, r),
            effect_rw,
            fixed_rw,
            tau_rw: AdaptiveRw::new(&[steps.offset], config.target_scalar, max_step),
            joint_rw: AdaptiveRw::new(&joint_steps, config.target_for(r + 1), f64::INFINITY),
            tally_effects: Tally::default(),
            tally_new: Tally::default(),
            tally_tau: Tally::default(),
            tally_joint: Tally::default(),
            tally_fixed: Tally::default(),
            tally_mode: Tally::default(),
            modes: vec![None; n],
            cur_r: vec![0.0; r],
            prop_r: vec![0.0; r],
            prop_full: vec![0.0; layout.dim],
            prop_ss: vec![0.0; model.biomarkers.len()],
            joint_cur: vec![0.0; r + 1],
            joint_prop: vec![0.0; r + 1],
            fixed_cur: vec![0.0; f],
            fixed_prop: vec![0.0; f],
            fixed_ss: vec![vec![0.0; model.biomarkers.len()]; n],
            layout,
        };
        sampler.check_state()?;
        sampler.refresh_caches()?;
        Ok(sampler)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn check_state(&self) -> Result<()> {
        let s = &self.state;
        let r = self.layout.random.len();
        if s.mu.len() != self.layout.dim
            || s.betas.len() != self.data.subjects.len()
            || s.betas.iter().any(|b| b.len() != self.layout.dim)
            || s.sigma_beta.shape() != (r, r)
            || s.eps_var.len() != self.model.biomarkers.len()
        {
            return Err(Error::InvalidArgument("chain state does not match the model layout".into()));
        }
        if !(0.0..=self.model.sero_interval).contains(&s.tau) || s.eps_var.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("chain state outside the parameter support".into()));
        }
        Ok(())
    }

    fn refresh_caches(&mut self) -> Result<()> {
        for i in 0..self.data.subjects.len() {
            for k in 0..self.kinds.len() {
                self.ss[i][k] = self.subject_ss(i, k, &self.state.betas[i], self.state.tau_of(self.data, i));
            }
        }
        self.refresh_precision()
    }

    fn refresh_precision(&mut self) -> Result<()> {
        if !self.layout.random.is_empty() {
            let (inv, _) = linalg::spd_inverse_logdet(&self.state.sigma_beta, "random-effects covariance")
                .map_err(|e| self.fail(e))?;
            self.sigma_inv = inv;
        }
        Ok(())
    }

    fn fail(&self, e: Error) -> Error {
        Error::ChainFailure {
            chain: 0,
            iteration: self.iteration,
            source: Box::new(e),
        }
    }

    #[inline]
    fn subject_ss(&self, i: usize, k: usize, beta: &[f64], tau: f64) -> f64 {
        let s = &self.data.subjects[i];
        let off = self.layout.offsets[k];
        let kind = self.kinds[k];
        kind.sum_sq_resid(&beta[off..off + kind.dim()], tau, &s.times, &s.y[k])
    }

    #[inline]
    fn data_term(&self, ss: &[f64]) -> f64 {
        ss.iter().zip(&self.state.eps_var).map(|(s, v)| -0.5 * s / v).sum()
    }

    /// `-0.5 (x - mu_R)' Sigma^-1 (x - mu_R)` for a random-coordinate vector.
    #[inline]
    fn effect_term(&self, x: &[f64]) -> f64 {
        let r = x.len();
        let mut q = 0.0;
        for a in 0..r {
            let da = x[a] - self.state.mu[self.layout.random[a]];
            let mut row = 0.0;
            for b in 0..r {
                row += self.sigma_inv[(a, b)] * (x[b] - self.state.mu[self.layout.random[b]]);
            }
            q += da * row;
        }
        -0.5 * q
    }

    fn adapting(&self) -> bool {
        self.iteration < self.config.adaptation_window
    }

    fn counting(&self) -> bool {
        self.iteration >= self.config.adaptation_window
    }

    /// One full sweep over all enabled blocks.
    pub fn gibbs_step(&mut self) -> Result<()> {
        let w = self.config.adaptation_window;
        if w > 0 && self.iteration == w / 2 {
            self.effect_rw.iter_mut().for_each(|rw| rw.switch_to_empirical());
            if let Some(rw) = self.fixed_rw.as_mut() {
                rw.switch_to_empirical();
            }
            self.tau_rw.switch_to_empirical();
            self.joint_rw.switch_to_empirical();
            if self.config.blocks.mode_jump && self.config.blocks.effects && !self.layout.random.is_empty() {
                self.locate_modes();
            }
        }
        let blocks = self.config.blocks;
        let has_random = !self.layout.random.is_empty();
        if blocks.mean && has_random {
            self.update_mean()?;
        }
        if blocks.fixed_effects && self.fixed_rw.is_some() {
            self.update_fixed();
        }
        if blocks.covariance && has_random {
            self.update_covariance()?;
        }
        if blocks.error_variance {
            self.update_error_variances()?;
        }
        if blocks.effects && has_random {
            for i in 0..self.data.subjects.len() {
                self.update_effects(i);
                if self.modes[i].is_some() {
                    self.update_mode_jump(i);
                }
            }
        }
        if blocks.offset {
            self.update_offset();
        }
        if blocks.joint_new && blocks.effects && blocks.offset {
            self.update_joint_new();
        }
        let record = w > 0 && self.iteration >= w / 4 && self.iteration < w / 2;
        if record {
            self.record_for_adaptation();
        }
        self.iteration += 1;
        Ok(())
    }

    fn record_for_adaptation(&mut self) {
        for i in 0..self.data.subjects.len() {
            for (a, &c) in self.layout.random.iter().enumerate() {
                self.cur_r[a] = self.state.betas[i][c];
            }
            self.effect_rw[i].record(&self.cur_r);
        }
        if let Some(rw) = self.fixed_rw.as_mut() {
            for (a, &c) in self.layout.fixed.iter().enumerate() {
                self.fixed_cur[a] = self.state.mu[c];
            }
            rw.record(&self.fixed_cur);
        }
        self.tau_rw.record(&[self.state.tau]);
        let u = self.data.unknown;
        let r = self.layout.random.len();
        for (a, &c) in self.layout.random.iter().enumerate() {
            self.joint_cur[a] = self.state.betas[u][c];
        }
        self.joint_cur[r] = self.state.tau;
        self.joint_rw.record(&self.joint_cur);
    }

    fn update_mean(&mut self) -> Result<()> {
        let r = self.layout.random.len();
        let mut sum = DVector::<f64>::zeros(r);
        for b in &self.state.betas {
            for (a, &c) in self.layout.random.iter().enumerate() {
                sum[a] += b[c];
            }
        }
        let (mean, cov) =
            conditional_mu_from_sum(&self.sigma_inv, &sum, self.state.betas.len(), self.model.priors.mean_var)
                .map_err(|e| self.fail(e))?;
        let chol = linalg::cholesky(&cov, "conditional covariance of mu").map_err(|e| self.fail(e))?;
        let draw = sample_mvn_chol(&mean, &chol, &mut self.rng);
        for (a, &c) in self.layout.random.iter().enumerate() {
            self.state.mu[c] = draw[a];
        }
        Ok(())
    }

    fn update_fixed(&mut self) {
        let prior_var = self.model.priors.mean_var;
        let n = self.data.subjects.len();
        for (a, &c) in self.layout.fixed.iter().enumerate() {
            self.fixed_cur[a] = self.state.mu[c];
        }
        let mut rw = self.fixed_rw.take().expect("fixed block present");
        rw.propose(&self.fixed_cur, &mut self.rng, &mut self.fixed_prop);

        let mut delta = 0.0;
        for a in 0..self.fixed_cur.len() {
            delta += -0.5 * (self.fixed_prop[a].powi(2) - self.fixed_cur[a].powi(2)) / prior_var;
        }
        for i in 0..n {
            self.prop_full.copy_from_slice(&self.state.betas[i]);
            for (a, &c) in self.layout.fixed.iter().enumerate() {
                self.prop_full[c] = self.fixed_prop[a];
            }
            let tau = self.state.tau_of(self.data, i);
            for k in 0..self.kinds.len() {
                let new = self.subject_ss(i, k, &self.prop_full, tau);
                self.fixed_ss[i][k] = new;
                delta += -0.5 * (new - self.ss[i][k]) / self.state.eps_var[k];
            }
        }
        let accept = self.metropolis(delta, &mut rw);
        if self.counting() {
            self.tally_fixed.tries += 1;
            self.tally_fixed.accepts += accept as u64;
        }
        if accept {
            for (a, &c) in self.layout.fixed.iter().enumerate() {
                self.state.mu[c] = self.fixed_prop[a];
                for b in self.state.betas.iter_mut() {
                    b[c] = self.fixed_prop[a];
                }
            }
            std::mem::swap(&mut self.ss, &mut self.fixed_ss);
        }
        self.fixed_rw = Some(rw);
    }

    fn update_covariance(&mut self) -> Result<()> {
        let r = self.layout.random.len();
        let mut scale = DMatrix::<f64>::identity(r, r);
        for b in &self.state.betas {
            for (a, &ca) in self.layout.random.iter().enumerate() {
                let da = b[ca] - self.state.mu[ca];
                for (bb, &cb) in self.layout.random.iter().enumerate().take(a + 1) {
                    let v = da * (b[cb] - self.state.mu[cb]);
                    scale[(a, bb)] += v;
                    if a != bb {
                        scale[(bb, a)] += v;
                    }
                }
            }
        }
        let df = self.model.iw_df() + self.state.betas.len() as f64;
        let draw = sample_inv_wishart(df, &scale, &mut self.rng).map_err(|e| self.fail(e))?;
        self.state.sigma_beta = draw;
        self.refresh_precision()
    }

    fn update_error_variances(&mut self) -> Result<()> {
        let p = self.model.priors;
        for k in 0..self.kinds.len() {
            let ss: f64 = self.ss.iter().map(|s| s[k]).sum();
            let (shape, scale) = ig_posterior(ss, self.data.n_obs(k), p.eps_shape, p.eps_scale);
            let v = sample_inv_gamma(shape, scale, &mut self.rng).map_err(|e| self.fail(e))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(self.fail(Error::Singular(format!("error variance draw {v}"))));
            }
            self.state.eps_var[k] = v;
        }
        Ok(())
    }

    fn update_effects(&mut self, i: usize) {
        for (a, &c) in self.layout.random.iter().enumerate() {
            self.cur_r[a] = self.state.betas[i][c];
        }
        let mut rw = std::mem::replace(&mut self.effect_rw[i], AdaptiveRw::new(&[], 0.5, 1.0));
        rw.propose(&self.cur_r, &mut self.rng, &mut self.prop_r);
        self.prop_full.copy_from_slice(&self.state.betas[i]);
        for (a, &c) in self.layout.random.iter().enumerate() {
            self.prop_full[c] = self.prop_r[a];
        }
        let tau = self.state.tau_of(self.data, i);
        for k in 0..self.kinds.len() {
            self.prop_ss[k] = self.subject_ss(i, k, &self.prop_full, tau);
        }
        let delta = self.data_term(&self.prop_ss) - self.data_term(&self.ss[i]) + self.effect_term(&self.prop_r)
            - self.effect_term(&self.cur_r);
        let accept = self.metropolis(delta, &mut rw);
        if self.counting() {
            let tally = if i == self.data.unknown { &mut self.tally_new } else { &mut self.tally_effects };
            tally.tries += 1;
            tally.accepts += accept as u64;
        }
        if accept {
            self.state.betas[i].copy_from_slice(&self.prop_full);
            self.ss[i].copy_from_slice(&self.prop_ss);
        }
        self.effect_rw[i] = rw;
    }

    /// Conditional log density of subject `i`'s random coordinates, up to a
    /// constant.
    fn effects_logdens(&self, i: usize, x: &[f64]) -> f64 {
        let mut full = self.state.betas[i].clone();
        for (a, &c) in self.layout.random.iter().enumerate() {
            full[c] = x[a];
        }
        let tau = self.state.tau_of(self.data, i);
        let ss: Vec<f64> = (0..self.kinds.len()).map(|k| self.subject_ss(i, k, &full, tau)).collect();
        self.data_term(&ss) + self.effect_term(x)
    }

    fn locate_modes(&mut self) {
        const STARTS: usize = 24;
        let r = self.layout.random.len();
        let Ok(chol) = linalg::cholesky(&self.state.sigma_beta, "random-effects covariance") else {
            return;
        };
        let mu_r: Vec<f64> = self.layout.random.iter().map(|&c| self.state.mu[c]).collect();
        let scales: Vec<f64> = (0..r).map(|a| self.state.sigma_beta[(a, a)].sqrt().max(1e-3)).collect();
        for i in 0..self.data.subjects.len() {
            let mut starts = vec![self.state.random_part(i, &self.layout)];
            for _ in 0..STARTS {
                let z: Vec<f64> = (0..r).map(|_| self.rng.sample(rand_distr::StandardNormal)).collect();
                let mut x = vec![0.0; r];
                linalg::lower_mul(&chol, &z, &mut x);
                starts.push(x.iter().zip(&mu_r).map(|(a, b)| a + b).collect());
            }
            self.modes[i] = ModeMixture::build(|x| self.effects_logdens(i, x), &starts, &scales);
        }
    }

    /// Independence proposal from subject `i`'s mode mixture.
    fn update_mode_jump(&mut self, i: usize) {
        let mut mix = self.modes[i].take().expect("mixture present");
        for (a, &c) in self.layout.random.iter().enumerate() {
            self.cur_r[a] = self.state.betas[i][c];
        }
        mix.sample(&mut self.rng, &mut self.prop_r);
        self.prop_full.copy_from_slice(&self.state.betas[i]);
        for (a, &c) in self.layout.random.iter().enumerate() {
            self.prop_full[c] = self.prop_r[a];
        }
        let tau = self.state.tau_of(self.data, i);
        for k in 0..self.kinds.len() {
            self.prop_ss[k] = self.subject_ss(i, k, &self.prop_full, tau);
        }
        let delta = self.data_term(&self.prop_ss) - self.data_term(&self.ss[i]) + self.effect_term(&self.prop_r)
            - self.effect_term(&self.cur_r)
            + mix.log_density(&self.cur_r)
            - mix.log_density(&self.prop_r);
        let prob = if delta.is_nan() { 0.0 } else { delta.min(0.0).exp() };
        let accept = prob > 0.0 && self.rng.random::<f64>() < prob;
        if self.counting() {
            self.tally_mode.tries += 1;
            self.tally_mode.accepts += accept as u64;
        }
        if accept {
            self.state.betas[i].copy_from_slice(&self.prop_full);
            self.ss[i].copy_from_slice(&self.prop_ss);
        }
        self.modes[i] = Some(mix);
    }

    fn update_offset(&mut self) {
        let u = self.data.unknown;
        let upper = self.model.sero_interval;
        let mut raw = [0.0];
        let mut rw = std::mem::replace(&mut self.tau_rw, AdaptiveRw::new(&[], 0.5, 1.0));
        rw.propose(&[self.state.tau], &mut self.rng, &mut raw);
        let proposal = reflect(raw[0], upper);
        for k in 0..self.kinds.len() {
            self.prop_ss[k] = self.subject_ss(u, k, &self.state.betas[u], proposal);
        }
        let delta = self.data_term(&self.prop_ss) - self.data_term(&self.ss[u]);
        let accept = self.metropolis(delta, &mut rw);
        if self.counting() {
            self.tally_tau.tries += 1;
            self.tally_tau.accepts += accept as u64;
        }
        if accept {
            self.state.tau = proposal;
            self.ss[u].copy_from_slice(&self.prop_ss);
        }
        self.tau_rw = rw;
    }

    /// Joint random walk on the unknown subject's random effects and offset.
    /// Proposals outside the offset support are rejected.
    fn update_joint_new(&mut self) {
        let u = self.data.unknown;
        let r = self.layout.random.len();
        for (a, &c) in self.layout.random.iter().enumerate() {
            self.joint_cur[a] = self.state.betas[u][c];
        }
        self.joint_cur[r] = self.state.tau;
        let mut rw = std::mem::replace(&mut self.joint_rw, AdaptiveRw::new(&[], 0.5, 1.0));
        rw.propose(&self.joint_cur, &mut self.rng, &mut self.joint_prop);
        let tau = self.joint_prop[r];
        let accept = if (0.0..=self.model.sero_interval).contains(&tau) {
            self.prop_full.copy_from_slice(&self.state.betas[u]);
            for (a, &c) in self.layout.random.iter().enumerate() {
                self.prop_full[c] = self.joint_prop[a];
            }
            for k in 0..self.kinds.len() {
                self.prop_ss[k] = self.subject_ss(u, k, &self.prop_full, tau);
            }
            let delta = self.data_term(&self.prop_ss) - self.data_term(&self.ss[u])
                + self.effect_term(&self.joint_prop[..r])
                - self.effect_term(&self.joint_cur[..r]);
            self.metropolis(delta, &mut rw)
        } else {
            if self.adapting() {
                rw.adapt(0.0);
            }
            false
        };
        if self.counting() {
            self.tally_joint.tries += 1;
            self.tally_joint.accepts += accept as u64;
        }
        if accept {
            self.state.betas[u].copy_from_slice(&self.prop_full);
            self.state.tau = tau;
            self.ss[u].copy_from_slice(&self.prop_ss);
        }
        self.joint_rw = rw;
    }

    fn metropolis(&mut self, delta: f64, rw: &mut AdaptiveRw) -> bool {
        let prob = if delta.is_nan() { 0.0 } else { delta.min(0.0).exp() };
        if self.adapting() {
            rw.adapt(prob);
        }
        prob > 0.0 && self.rng.random::<f64>() < prob
    }

    pub fn acceptance(&self) -> AcceptanceRates {
        AcceptanceRates {
            effects: self.tally_effects.rate(),
            new_effects: self.tally_new.rate(),
            offset: self.tally_tau.rate(),
            joint_new: self.tally_joint.rate(),
            fixed_effects: self.tally_fixed.rate(),
            mode_jump: self.tally_mode.rate(),
        }
    }
}
