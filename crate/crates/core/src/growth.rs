//! Mean-trajectory functions for biomarker growth.
//!
//! Every evaluator takes the time since seroconversion `s` in years, i.e.
//! `t_ij + tau_i` where `t_ij` is measured from the first positive test.
//! Parameter vectors follow the subscript order of each model: `(b1, b2)` for
//! the linear and viral-decay forms, `(b1, b2, b3)` for the three-parameter
//! non-linear form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    /// Biomarker value at seroconversion.
    pub intercept: f64,
    /// Units per year.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinear3Params {
    pub asymptote: f64,
    /// Value at seroconversion.
    pub intercept: f64,
    /// Log of the rate constant (1/year).
    pub log_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViralDecayParams {
    pub plateau: f64,
    /// 1/year.
    pub decay_rate: f64,
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} must be finite, got {v}")));
    }
    Ok(())
}

fn check_time(s: f64) -> Result<()> {
    check_finite(&[s], "time since seroconversion")?;
    if s < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time since seroconversion must be non-negative, got {s}"
        )));
    }
    Ok(())
}

/// `b1 + b2 * s`.
pub fn eval_linear(p: LinearParams, s: f64) -> Result<f64> {
    check_finite(&[p.intercept, p.slope], "linear parameters")?;
    check_time(s)?;
    Ok(linear(p.intercept, p.slope, s))
}

/// `b1 + (b2 - b1) * exp(-exp(b3) * s)`.
///
/// `exp(b3)` is not clamped: an overflowing rate gives the asymptote for any
/// `s > 0`, which is the analytic limit.
pub fn eval_nonlinear3(p: Nonlinear3Params, s: f64) -> Result<f64> {
    check_finite(&[p.asymptote, p.intercept, p.log_rate], "non-linear parameters")?;
    check_time(s)?;
    Ok(nonlinear3(p.asymptote, p.intercept, p.log_rate.exp(), s))
}

/// `b1 * (1 + exp(-b2 * s))`.
pub fn eval_viral(p: ViralDecayParams, s: f64) -> Result<f64> {
    check_finite(&[p.plateau, p.decay_rate], "viral-decay parameters")?;
    check_time(s)?;
    Ok(viral(p.plateau, p.decay_rate, s))
}

#[inline]
fn linear(intercept: f64, slope: f64, s: f64) -> f64 {
    intercept + slope * s
}

#[inline]
fn nonlinear3(asymptote: f64, intercept: f64, rate: f64, s: f64) -> f64 {
    // 0 * inf is NaN; at s = 0 the curve is the intercept whatever the rate.
    if s == 0.0 {
        return intercept;
    }
    asymptote + (intercept - asymptote) * (-rate * s).exp()
}

#[inline]
fn viral(plateau: f64, decay_rate: f64, s: f64) -> f64 {
    plateau * (1.0 + (-decay_rate * s).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthKind {
    Linear,
    Nonlinear3,
    ViralDecay,
}

impl GrowthKind {
    /// Length of the random-effect vector.
    pub fn dim(self) -> usize {
        match self {
            GrowthKind::Linear | GrowthKind::ViralDecay => 2,
            GrowthKind::Nonlinear3 => 3,
        }
    }

    /// Unchecked evaluation at a single `s`.
    #[inline]
    pub fn eval(self, beta: &[f64], s: f64) -> f64 {
        match self {
            GrowthKind::Linear => linear(beta[0], beta[1], s),
            GrowthKind::Nonlinear3 => nonlinear3(beta[0], beta[1], beta[2].exp(), s),
            GrowthKind::ViralDecay => viral(beta[0], beta[1], s),
        }
    }

    /// Sum of squared residuals `sum_j (y_j - g(t_j + tau))^2`, unchecked.
    ///
    /// This is the hot path of the sampler, so the per-curve constants are
    /// hoisted out of the loop.
    #[inline]
    pub fn sum_sq_resid(self, beta: &[f64], tau: f64, times: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(times.len(), y.len());
        let mut acc = 0.0;
        match self {
            GrowthKind::Linear => {
                for (&t, &obs) in times.iter().zip(y) {
                    let r = obs - linear(beta[0], beta[1], t + tau);
                    acc += r * r;
                }
            }
            GrowthKind::Nonlinear3 => {
                let rate = beta[2].exp();
                for (&t, &obs) in times.iter().zip(y) {
                    let r = obs - nonlinear3(beta[0], beta[1], rate, t + tau);
                    acc += r * r;
                }
            }
            GrowthKind::ViralDecay => {
                for (&t, &obs) in times.iter().zip(y) {
                    let r = obs - viral(beta[0], beta[1], t + tau);
                    acc += r * r;
                }
            }
        }
        acc
    }
}

/// Functional form of one biomarker plus the mask of population-fixed
/// coordinates (zero random-effect variance).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthModelSpec {
    kind: GrowthKind,
    fixed: Vec<bool>,
}

impl GrowthModelSpec {
    pub fn new(kind: GrowthKind, fixed: Vec<bool>) -> Result<Self> {
        if fixed.len() != kind.dim() {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} has {} parameters but the fixed-effect mask has {}",
                kind.dim(),
                fixed.len()
            )));
        }
        Ok(Self { kind, fixed })
    }

    /// All coordinates random.
    pub fn random(kind: GrowthKind) -> Self {
        Self {
            kind,
            fixed: vec![false; kind.dim()],
        }
    }

    pub fn kind(&self) -> GrowthKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn fixed_mask(&self) -> &[bool] {
        &self.fixed
    }
}

/// Two biomarkers modelled jointly; the kinds may differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BivariateSpec {
    pub first: GrowthModelSpec,
    pub second: GrowthModelSpec,
}

/// `g(t_j + tau, beta)` for every observation time.
pub fn eval_trajectory(
    spec: &GrowthModelSpec,
    beta: &[f64],
    tau: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    if beta.len() != spec.dim() {
        return Err(Error::InvalidArgument(format!(
            "{:?} expects {} parameters, got {}",
            spec.kind,
            spec.dim(),
            beta.len()
        )));
    }
    check_finite(beta, "growth parameters")?;
    check_finite(&[tau], "tau")?;
    times
        .iter()
        .map(|&t| {
            if t < 0.0 || !t.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "observation times must be finite and non-negative, got {t}"
                )));
            }
            let s = t + tau;
            check_time(s)?;
            Ok(spec.kind.eval(beta, s))
        })
        .collect()
}

/// Stacked `(g_1 block, g_2 block)` in the response order of the joint model.
pub fn eval_bivariate(
    spec: &BivariateSpec,
    beta_first: &[f64],
    beta_second: &[f64],
    tau: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let mut out = eval_trajectory(&spec.first, beta_first, tau, times)?;
    out.extend(eval_trajectory(&spec.second, beta_second, tau, times)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn linear_examples() {
        let p = LinearParams { intercept: 5.0, slope: 2.0 };
        assert_eq!(eval_linear(p, 0.0).unwrap(), 5.0);
        assert_eq!(eval_linear(p, 1.0).unwrap(), 7.0);
        let q = LinearParams { intercept: 0.0, slope: 3.0 };
        assert!((eval_linear(q, 0.25).unwrap() - 0.75).abs() < TOL);
    }

    #[test]
    fn nonlinear_examples() {
        let p = Nonlinear3Params { asymptote: 0.0, intercept: -1.0, log_rate: 1.0 };
        assert_eq!(eval_nonlinear3(p, 0.0).unwrap(), -1.0);
        assert!(eval_nonlinear3(p, 1e3).unwrap().abs() < TOL);
        // -exp(-e), evaluated independently.
        assert!((eval_nonlinear3(p, 1.0).unwrap() - (-0.06598803584531254)).abs() < TOL);
    }

    #[test]
    fn viral_examples() {
        let p = ViralDecayParams { plateau: 3.0, decay_rate: 2.0 };
        assert_eq!(eval_viral(p, 0.0).unwrap(), 6.0);
        assert!((eval_viral(p, 1e3).unwrap() - 3.0).abs() < TOL);
        assert!((eval_viral(p, 1.0).unwrap() - 3.4060058497098384).abs() < TOL);
    }

    #[test]
    fn non_finite_and_negative_inputs_rejected() {
        let p = LinearParams { intercept: f64::NAN, slope: 1.0 };
        assert!(matches!(eval_linear(p, 0.0), Err(Error::InvalidArgument(_))));
        let q = ViralDecayParams { plateau: 3.0, decay_rate: 2.0 };
        assert!(eval_viral(q, f64::INFINITY).is_err());
        assert!(eval_viral(q, -0.1).is_err());
        let r = Nonlinear3Params { asymptote: 0.0, intercept: 1.0, log_rate: f64::NEG_INFINITY };
        assert!(eval_nonlinear3(r, 1.0).is_err());
    }

    #[test]
    fn overflowing_rate_gives_asymptote() {
        let p = Nonlinear3Params { asymptote: 2.0, intercept: -1.0, log_rate: 800.0 };
        assert_eq!(eval_nonlinear3(p, 0.5).unwrap(), 2.0);
        assert_eq!(eval_nonlinear3(p, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn trajectory_examples() {
        let lin = GrowthModelSpec::random(GrowthKind::Linear);
        let v = eval_trajectory(&lin, &[5.0, 2.0], 0.5, &[0.0, 0.25]).unwrap();
        assert!((v[0] - 6.0).abs() < TOL && (v[1] - 6.5).abs() < TOL);

        let nl = GrowthModelSpec::random(GrowthKind::Nonlinear3);
        assert_eq!(eval_trajectory(&nl, &[0.0, -1.0, 1.0], 0.0, &[0.0]).unwrap(), vec![-1.0]);

        let vl = GrowthModelSpec::random(GrowthKind::ViralDecay);
        let v = eval_trajectory(&vl, &[3.0, 2.0], 1.0, &[0.0]).unwrap();
        assert!((v[0] - 3.4060058497098384).abs() < TOL);

        assert!(matches!(
            eval_trajectory(&vl, &[3.0, 2.0, 1.0], 0.0, &[0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mask_length_must_match() {
        assert!(GrowthModelSpec::new(GrowthKind::Nonlinear3, vec![true, false]).is_err());
        assert!(GrowthModelSpec::new(GrowthKind::Nonlinear3, vec![true, false, false]).is_ok());
    }

    #[test]
    fn bivariate_examples() {
        let spec = BivariateSpec {
            first: GrowthModelSpec::random(GrowthKind::Linear),
            second: GrowthModelSpec::random(GrowthKind::ViralDecay),
        };
        assert_eq!(eval_bivariate(&spec, &[5.0, 2.0], &[3.0, 2.0], 0.0, &[0.0]).unwrap(), vec![5.0, 6.0]);
        assert!(eval_bivariate(&spec, &[5.0, 2.0], &[3.0, 2.0], 0.0, &[]).unwrap().is_empty());

        let spec = BivariateSpec {
            first: GrowthModelSpec::new(GrowthKind::Nonlinear3, vec![true, false, false]).unwrap(),
            second: GrowthModelSpec::random(GrowthKind::ViralDecay),
        };
        let v = eval_bivariate(&spec, &[1.5, -1.5, 0.8], &[3.0, 2.0], 0.5, &[0.0]).unwrap();
        let a = eval_nonlinear3(Nonlinear3Params { asymptote: 1.5, intercept: -1.5, log_rate: 0.8 }, 0.5).unwrap();
        let b = eval_viral(ViralDecayParams { plateau: 3.0, decay_rate: 2.0 }, 0.5).unwrap();
        assert!((v[0] - a).abs() < TOL && (v[1] - b).abs() < TOL);
        assert!((v[0] - 0.5140584199510987).abs() < TOL);
        assert!((v[1] - 4.103638323514327).abs() < TOL);
    }

    #[test]
    fn sum_sq_resid_matches_trajectory() {
        let times = [0.0, 0.1, 0.7, 2.0];
        let y = [1.0, -0.3, 0.2, 0.9];
        for (kind, beta) in [
            (GrowthKind::Linear, vec![0.3, 1.1]),
            (GrowthKind::Nonlinear3, vec![1.5, -1.5, 0.8]),
            (GrowthKind::ViralDecay, vec![0.5, 2.0]),
        ] {
            let g = eval_trajectory(&GrowthModelSpec::random(kind), &beta, 0.3, &times).unwrap();
            let direct: f64 = g.iter().zip(&y).map(|(g, y)| (y - g).powi(2)).sum();
            assert!((kind.sum_sq_resid(&beta, 0.3, &times, &y) - direct).abs() < 1e-12);
        }
    }

    fn sorted_grid(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    proptest! {
        #[test]
        fn nonlinear_is_monotone(
            b1 in -3.0f64..3.0, gap in 0.01f64..3.0, b3 in -2.0f64..2.0,
            grid in proptest::collection::vec(0.0f64..5.0, 2..20),
        ) {
            let grid = sorted_grid(grid);
            let up = Nonlinear3Params { asymptote: b1, intercept: b1 - gap, log_rate: b3 };
            let down = Nonlinear3Params { asymptote: b1, intercept: b1 + gap, log_rate: b3 };
            for w in grid.windows(2) {
                prop_assert!(eval_nonlinear3(up, w[1]).unwrap() >= eval_nonlinear3(up, w[0]).unwrap());
                prop_assert!(eval_nonlinear3(down, w[1]).unwrap() <= eval_nonlinear3(down, w[0]).unwrap());
                // Strict where the exponential has not underflowed.
                if (-(b3.exp()) * w[1]).exp() > 1e-12 {
                    prop_assert!(eval_nonlinear3(up, w[1]).unwrap() > eval_nonlinear3(up, w[0]).unwrap());
                }
            }
        }

        #[test]
        fn distance_to_limit_shrinks(
            b1 in 0.1f64..4.0, b2 in -3.0f64..3.0, b3 in -1.0f64..1.5, rate in 0.05f64..4.0,
            grid in proptest::collection::vec(0.0f64..6.0, 2..20),
        ) {
            let grid = sorted_grid(grid);
            let nl = Nonlinear3Params { asymptote: b1, intercept: b2, log_rate: b3 };
            let vl = ViralDecayParams { plateau: b1, decay_rate: rate };
            for w in grid.windows(2) {
                prop_assert!((eval_nonlinear3(nl, w[1]).unwrap() - b1).abs() <= (eval_nonlinear3(nl, w[0]).unwrap() - b1).abs());
                prop_assert!((eval_viral(vl, w[1]).unwrap() - b1).abs() <= (eval_viral(vl, w[0]).unwrap() - b1).abs());
            }
        }

        #[test]
        fn time_shift_identity(
            b in proptest::collection::vec(-2.0f64..2.0, 3), tau in 0.0f64..1.0,
            times in proptest::collection::vec(0.0f64..2.0, 0..10),
        ) {
            for kind in [GrowthKind::Linear, GrowthKind::Nonlinear3, GrowthKind::ViralDecay] {
                let spec = GrowthModelSpec::random(kind);
                let beta = &b[..kind.dim()];
                let shifted: Vec<f64> = times.iter().map(|t| t + tau).collect();
                let a = eval_trajectory(&spec, beta, tau, &times).unwrap();
                let c = eval_trajectory(&spec, beta, 0.0, &shifted).unwrap();
                for (x, y) in a.iter().zip(&c) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }

        #[test]
        fn bivariate_blocks_match_univariate(
            b1 in proptest::collection::vec(-2.0f64..2.0, 3), b2 in proptest::collection::vec(0.1f64..3.0, 2),
            tau in 0.0f64..1.0, times in proptest::collection::vec(0.0f64..2.0, 0..10),
        ) {
            let spec = BivariateSpec {
                first: GrowthModelSpec::random(GrowthKind::Nonlinear3),
                second: GrowthModelSpec::random(GrowthKind::ViralDecay),
            };
            let stacked = eval_bivariate(&spec, &b1, &b2, tau, &times).unwrap();
            let u1 = eval_trajectory(&spec.first, &b1, tau, &times).unwrap();
            let u2 = eval_trajectory(&spec.second, &b2, tau, &times).unwrap();
            prop_assert_eq!(stacked.len(), 2 * times.len());
            for (x, y) in stacked.iter().zip(u1.iter().chain(&u2)) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
