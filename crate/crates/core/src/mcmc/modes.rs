//! Mode-jumping independence proposals.
//!
//! Some growth curves admit several well-separated parameter settings that
//! fit a subject's data about equally well (a fast decay that has already
//! levelled off versus a slow decay from half the plateau, for instance).
//! A local random walk cannot cross between them. Here the local maxima of a
//! subject's conditional density are located by multi-start Nelder-Mead and
//! turned into a fixed mixture of multivariate t densities, used as an
//! independence Metropolis-Hastings proposal.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

const T_DOF: f64 = 4.0;
const MAX_COMPONENTS: usize = 4;
const MIN_WEIGHT: f64 = 0.1;
const INFLATE: f64 = 1.5;

#[derive(Debug, Clone)]
struct Component {
    mean: Vec<f64>,
    chol: DMatrix<f64>,
    prec: DMatrix<f64>,
    log_norm: f64,
    log_weight: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ModeMixture {
    comps: Vec<Component>,
    z: Vec<f64>,
}

struct Negated<'f, F: Fn(&[f64]) -> f64>(&'f F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Negated<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        let v = -(self.0)(p);
        Ok(if v.is_finite() { v } else { f64::MAX / 4.0 })
    }
}

fn maximize<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], scales: &[f64]) -> Option<Vec<f64>> {
    let d = start.len();
    let mut simplex = vec![start.to_vec()];
    for j in 0..d {
        let mut v = start.to_vec();
        v[j] += 0.5 * scales[j];
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-10).ok()?;
    let res = Executor::new(Negated(f), solver)
        .configure(|s| s.max_iters(400 * d as u64))
        .run()
        .ok()?;
    res.state.best_param
}

/// Negative Hessian by central differences.
fn neg_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], scales: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let h: Vec<f64> = scales.iter().map(|s| 1e-3 * s).collect();
    let f0 = f(x);
    let mut out = DMatrix::zeros(d, d);
    let mut p = x.to_vec();
    for a in 0..d {
        for b in 0..=a {
            let v = if a == b {
                p[a] = x[a] + h[a];
                let fp = f(&p);
                p[a] = x[a] - h[a];
                let fm = f(&p);
                p[a] = x[a];
                -(fp - 2.0 * f0 + fm) / (h[a] * h[a])
            } else {
                let mut e = |sa: f64, sb: f64| {
                    p[a] = x[a] + sa * h[a];
                    p[b] = x[b] + sb * h[b];
                    let v = f(&p);
                    p[a] = x[a];
                    p[b] = x[b];
                    v
                };
                -(e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * h[a] * h[b])
            };
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

impl ModeMixture {
    /// Locates local maxima of `logdens` from each of `starts`. Returns
    /// `None` unless at least two distinct maxima with a usable curvature
    /// are found.
    pub fn build<F: Fn(&[f64]) -> f64>(logdens: F, starts: &[Vec<f64>], scales: &[f64]) -> Option<Self> {
        let d = scales.len();
        let mut found: Vec<(Vec<f64>, f64, DMatrix<f64>, DMatrix<f64>)> = Vec::new();
        for s in starts {
            let Some(m) = maximize(&logdens, s, scales) else { continue };
            let value = logdens(&m);
            if !value.is_finite() {
                continue;
            }
            let duplicate = found.iter().any(|(fm, _, prec, _)| {
                let diff: Vec<f64> = m.iter().zip(fm).map(|(a, b)| a - b).collect();
                crate::linalg::quad_form(prec, &diff) < 4.0
            });
            if duplicate {
                continue;
            }
            let nh = neg_hessian(&logdens, &m, scales);
            let Some(c) = nh.clone().cholesky() else { continue };
            let cov = c.inverse() * (INFLATE * INFLATE);
            let Some(chol) = cov.clone().cholesky() else { continue };
            let prec = nh / (INFLATE * INFLATE);
            found.push((m, value, prec, chol.l()));
        }
        if found.len() < 2 {
            return None;
        }
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        found.truncate(MAX_COMPONENTS);

        // Laplace evidence of each mode, floored so minor modes stay reachable.
        let log_ev: Vec<f64> = found
            .iter()
            .map(|(_, v, _, l)| v + l.diagonal().iter().map(|x| x.ln()).sum::<f64>())
            .collect();
        let top = log_ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = log_ev.iter().map(|e| (e - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        let floored: Vec<f64> = raw.iter().map(|w| (w / total).max(MIN_WEIGHT)).collect();
        let total: f64 = floored.iter().sum();

        let dd = d as f64;
        let comps = found
            .into_iter()
            .zip(floored)
            .map(|((mean, _, prec, chol), w)| {
                let half_logdet: f64 = chol.diagonal().iter().map(|x| x.ln()).sum();
                let log_norm = ln_gamma(0.5 * (T_DOF + dd))
                    - ln_gamma(0.5 * T_DOF)
                    - 0.5 * dd * (T_DOF * std::f64::consts::PI).ln()
                    - half_logdet;
                Component {
                    mean,
                    chol,
                    prec,
                    log_norm,
                    log_weight: (w / total).ln(),
                }
            })
            .collect();
        Some(Self { comps, z: vec![0.0; d] })
    }

    #[cfg(test)]
    pub fn n_modes(&self) -> usize {
        self.comps.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let dd = x.len() as f64;
        let terms = self.comps.iter().map(|c| {
            let diff: Vec<f64> = x.iter().zip(&c.mean).map(|(a, b)| a - b).collect();
            let q = crate::linalg::quad_form(&c.prec, &diff);
            c.log_weight + c.log_norm - 0.5 * (T_DOF + dd) * (q / T_DOF).ln_1p()
        });
        let v: Vec<f64> = terms.collect();
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + v.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.comps.len() - 1;
        for (i, c) in self.comps.iter().enumerate() {
            acc += c.log_weight.exp();
            if u < acc {
                pick = i;
                break;
            }
        }
        let c = &self.comps[pick];
        let w: f64 = ChiSquared::new(T_DOF).expect("positive dof").sample(rng);
        let s = (T_DOF / w).sqrt();
        for z in self.z.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        crate::linalg::lower_mul(&c.chol, &self.z, out);
        for (o, m) in out.iter_mut().zip(&c.mean) {
            *o = m + s * *o;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn two_bumps(x: &[f64]) -> f64 {
        let a = -0.5 * ((x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2)) / 0.01;
        let b = -0.5 * ((x[0] + 2.0).powi(2) + (x[1] + 1.0).powi(2)) / 0.04;
        a.max(b) + (a.min(b) - a.max(b)).exp().ln_1p()
    }

    #[test]
    fn finds_both_bumps() {
        let starts = vec![vec![1.5, 0.5], vec![-1.0, -0.5], vec![2.5, 1.2]];
        let mix = ModeMixture::build(two_bumps, &starts, &[1.0, 1.0]).unwrap();
        assert_eq!(mix.n_modes(), 2);
        let mut means: Vec<f64> = mix.comps.iter().map(|c| c.mean[0]).collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 2.0).abs() < 1e-3 && (means[1] - 2.0).abs() < 1e-3);
        let (lo, hi) = (&mix.comps[0], &mix.comps[1]);
        assert!((lo.log_weight.exp() + hi.log_weight.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_gives_none() {
        let f = |x: &[f64]| -0.5 * x[0] * x[0];
        assert!(ModeMixture::build(f, &[vec![1.0], vec![-1.0]], &[1.0]).is_none());
    }

    #[test]
    fn density_integrates_to_one_and_matches_samples() {
        let starts = vec![vec![1.5, 0.5], vec![-1.0, -0.5]];
        let mut mix = ModeMixture::build(two_bumps, &starts, &[1.0, 1.0]).unwrap();
        let h = 0.02;
        let mut total = 0.0;
        let mut x = -12.0;
        while x < 12.0 {
            let mut y = -12.0;
            while y < 12.0 {
                total += mix.log_density(&[x, y]).exp() * h * h;
                y += h;
            }
            x += h;
        }
        assert!((total - 1.0).abs() < 0.02, "{total}");
        let mut rng = stream(2, &[]);
        let mut out = [0.0; 2];
        let n = 20_000;
        let right = (0..n)
            .filter(|_| {
                mix.sample(&mut rng, &mut out);
                out[0] > 0.0
            })
            .count() as f64
            / n as f64;
        let right_w = mix.comps.iter().find(|c| c.mean[0] > 0.0).unwrap().log_weight.exp();
        assert!((right - right_w).abs() < 0.02);
    }
}
