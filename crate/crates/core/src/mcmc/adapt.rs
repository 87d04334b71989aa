//! Adaptive Gaussian random-walk proposals.
//!
//! During the first half of the adaptation window the proposal is a scaled
//! diagonal. Draws from its second quarter feed an empirical covariance that
//! replaces the diagonal at the half-way point; the global scale keeps being
//! tuned by Robbins-Monro towards the target acceptance rate until the window
//! closes, after which the kernel is frozen.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Optimal-scaling constant for Gaussian random walks.
const SCALE_CONST: f64 = 2.38;
const MAX_LOG_SCALE: f64 = 20.0;

#[derive(Debug, Clone)]
pub(crate) struct AdaptiveRw {
    dim: usize,
    chol: DMatrix<f64>,
    log_scale: f64,
    max_step: f64,
    target: f64,
    steps: usize,
    // Welford accumulators.
    count: usize,
    mean: Vec<f64>,
    m2: DMatrix<f64>,
    z: Vec<f64>,
}

impl AdaptiveRw {
    /// `steps[d]` is the initial proposal sd of coordinate `d`; `max_step`
    /// caps the proposal sd of any coordinate.
    pub fn new(steps: &[f64], target: f64, max_step: f64) -> Self {
        let dim = steps.len();
        Self {
            dim,
            chol: DMatrix::from_fn(dim, dim, |i, j| if i == j { steps[i] } else { 0.0 }),
            log_scale: 0.0,
            max_step,
            target,
            steps: 0,
            count: 0,
            mean: vec![0.0; dim],
            m2: DMatrix::zeros(dim, dim),
            z: vec![0.0; dim],
        }
    }

    /// Writes `current + scale * L z` into `out`.
    pub fn propose<R: Rng + ?Sized>(&mut self, current: &[f64], rng: &mut R, out: &mut [f64]) {
        let scale = self.log_scale.exp();
        for z in self.z.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.chol[(i, j)] * self.z[j];
            }
            out[i] = current[i] + scale * acc;
        }
    }

    /// Robbins-Monro update of the log scale from an acceptance probability.
    pub fn adapt(&mut self, accept_prob: f64) {
        self.steps += 1;
        let gain = (self.steps as f64).powf(-0.6);
        self.log_scale += gain * (accept_prob - self.target);
        // Keep the largest marginal step below the cap.
        let widest = (0..self.dim)
            .map(|i| (0..=i).map(|j| self.chol[(i, j)].powi(2)).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        if widest > 0.0 {
            let cap = (self.max_step / widest).ln();
            self.log_scale = self.log_scale.min(cap);
        }
        self.log_scale = self.log_scale.clamp(-MAX_LOG_SCALE, MAX_LOG_SCALE);
    }

    pub fn record(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        let mut delta = vec![0.0; self.dim];
        for i in 0..self.dim {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.m2[(i, j)] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Swaps the diagonal for the recorded empirical covariance, if usable.
    pub fn switch_to_empirical(&mut self) {
        if self.count >= 2 * self.dim + 2 {
            let mut cov = &self.m2 / (self.count as f64 - 1.0);
            let trace = cov.trace();
            if trace.is_finite() && trace > 0.0 {
                let jitter = 1e-8 * trace / self.dim as f64;
                for i in 0..self.dim {
                    cov[(i, i)] += jitter;
                }
                if let Some(c) = cov.cholesky() {
                    self.chol = c.l();
                    self.log_scale = (SCALE_CONST / (self.dim as f64).sqrt()).ln();
                }
            }
        }
        self.steps = 0;
        self.count = 0;
        self.mean.iter_mut().for_each(|m| *m = 0.0);
        self.m2.fill(0.0);
    }

    #[cfg(test)]
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }
}

/// Folds `x` into `[0, upper]` by reflecting at both ends.
pub(crate) fn reflect(x: f64, upper: f64) -> f64 {
    let period = 2.0 * upper;
    let mut y = x.rem_euclid(period);
    if y > upper {
        y = period - y;
    }
    y
}

/// Density at `to` of the reflected Gaussian step from `from` with standard
/// deviation `step` on `[0, upper]`, summed over mirror images.
pub fn reflected_proposal_density(from: f64, to: f64, step: f64, upper: f64) -> f64 {
    let reach = (12.0 * step / upper).ceil() as i64 + 1;
    let phi = |x: f64| (-0.5 * (x / step).powi(2)).exp() / (step * (2.0 * std::f64::consts::PI).sqrt());
    (-reach..=reach)
        .map(|k| {
            let shift = 2.0 * k as f64 * upper;
            phi(to + shift - from) + phi(-to + shift - from)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn reflection_stays_in_bounds() {
        assert!((reflect(1.2, 1.0) - 0.8).abs() < 1e-12);
        assert!((reflect(-0.3, 1.0) - 0.3).abs() < 1e-12);
        assert!((reflect(2.5, 1.0) - 0.5).abs() < 1e-12);
        assert!((reflect(-3.7, 1.0) - 0.3).abs() < 1e-12);
        assert_eq!(reflect(0.4, 1.0), 0.4);
        let mut rng = stream(0, &[]);
        for _ in 0..10_000 {
            let x = reflect(rng.random::<f64>() * 20.0 - 10.0, 1.0);
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn reflected_kernel_is_symmetric() {
        for (a, b, step) in [(0.05, 0.9, 0.3), (0.01, 0.02, 2.0), (0.5, 0.999, 0.05)] {
            let ab = reflected_proposal_density(a, b, step, 1.0);
            let ba = reflected_proposal_density(b, a, step, 1.0);
            assert!((ab - ba).abs() < 1e-12 * ab.max(1e-300), "{ab} vs {ba}");
        }
        // Integrates to one over the support.
        let n = 20_000;
        let h = 1.0 / n as f64;
        let total: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * reflected_proposal_density(0.1, i as f64 * h, 0.4, 1.0)
            })
            .sum::<f64>()
            * h;
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn adaptation_moves_towards_target() {
        let mut rw = AdaptiveRw::new(&[1.0], 0.44, 100.0);
        for _ in 0..500 {
            rw.adapt(1.0);
        }
        assert!(rw.scale() > 1.0);
        let mut rw = AdaptiveRw::new(&[1.0], 0.44, 100.0);
        for _ in 0..500 {
            rw.adapt(0.0);
        }
        assert!(rw.scale() < 1.0);
        let mut rw = AdaptiveRw::new(&[1.0], 0.44, 2.0);
        for _ in 0..5000 {
            rw.adapt(1.0);
        }
        assert!(rw.scale() <= 2.0 + 1e-12);
    }

    #[test]
    fn empirical_covariance_is_adopted() {
        let mut rw = AdaptiveRw::new(&[1.0, 1.0], 0.234, 1e9);
        let mut rng = stream(1, &[]);
        for _ in 0..20_000 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            rw.record(&[3.0 * a, a + 0.1 * b]);
        }
        rw.switch_to_empirical();
        let cov = &rw.chol * rw.chol.transpose();
        assert!((cov[(0, 0)] - 9.0).abs() < 0.3);
        assert!((cov[(0, 1)] - 3.0).abs() < 0.15);
        assert!((rw.scale() - 2.38 / 2f64.sqrt()).abs() < 1e-12);
    }
}
