//! Log-densities and samplers for the distributions of the hierarchical model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * r * r / var
}

/// Inverse-gamma with shape `a` and scale `b`: density
/// `b^a / Gamma(a) * x^(-a-1) * exp(-b / x)`, mean `b / (a - 1)`.
pub fn inv_gamma_logpdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// `ln Gamma_d(a)`, the multivariate gamma function.
pub fn ln_multigamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    df * (df - 1.0) / 4.0 * PI.ln() + (0..d).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

/// Inverse-Wishart log-density with `df` degrees of freedom and scale matrix
/// `scale`, mean `scale / (df - d - 1)`.
pub fn inv_wishart_logpdf(x: &DMatrix<f64>, df: f64, scale: &DMatrix<f64>) -> Result<f64> {
    let d = x.nrows();
    let (x_inv, x_logdet) = linalg::spd_inverse_logdet(x, "inverse-Wishart argument")?;
    let (_, s_logdet) = linalg::spd_inverse_logdet(scale, "inverse-Wishart scale")?;
    let trace = (scale * x_inv).trace();
    let dd = d as f64;
    Ok(0.5 * df * s_logdet
        - 0.5 * df * dd * std::f64::consts::LN_2
        - ln_multigamma(d, 0.5 * df)
        - 0.5 * (df + dd + 1.0) * x_logdet
        - 0.5 * trace)
}

pub fn mvn_logpdf(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let (prec, logdet) = linalg::spd_inverse_logdet(cov, "covariance")?;
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    Ok(-0.5 * (x.len() as f64 * LN_2PI + logdet + linalg::quad_form(&prec, &diff)))
}

pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0)
        .map_err(|e| Error::Domain(format!("inverse-gamma shape {shape}: {e}")))?;
    let draw: f64 = g.sample(rng);
    Ok(scale / draw)
}

/// `N(mean, cov)` given the lower Cholesky factor of `cov`.
pub fn sample_mvn_chol<R: Rng + ?Sized>(mean: &DVector<f64>, chol: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + chol * z
}

/// Draw from the inverse-Wishart by Bartlett decomposition of the Wishart
/// distribution of its inverse.
pub fn sample_inv_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if df <= d as f64 - 1.0 {
        return Err(Error::Domain(format!(
            "inverse-Wishart needs df > {}, got {df}",
            d as f64 - 1.0
        )));
    }
    let (scale_inv, _) = linalg::spd_inverse_logdet(scale, "inverse-Wishart scale")?;
    let c = linalg::cholesky(&scale_inv, "inverse-Wishart scale inverse")?;
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(df - i as f64)
            .map_err(|e| Error::Domain(format!("chi-squared df: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let m = c * a;
    let m_inv = m
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Singular("Bartlett factor is singular".into()))?;
    let out = m_inv.transpose() * m_inv;
    // Symmetrize away rounding.
    Ok((&out + out.transpose()) * 0.5)
}
