//! The seven biomarker models of the simulation study and their generating
//! parameters under the realistic scenario.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{GrowthKind, GrowthModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "AR1")]
    Ar1,
    #[serde(rename = "AR2")]
    Ar2,
    #[serde(rename = "AR3")]
    Ar3,
    #[serde(rename = "AR4")]
    Ar4,
    #[serde(rename = "VL")]
    Vl,
    #[serde(rename = "AR1&AR4")]
    Ar1Ar4,
    #[serde(rename = "AR4&VL")]
    Ar4Vl,
}

impl ModelId {
    pub const ALL: [ModelId; 7] = [
        ModelId::Ar1,
        ModelId::Ar2,
        ModelId::Ar3,
        ModelId::Ar4,
        ModelId::Vl,
        ModelId::Ar1Ar4,
        ModelId::Ar4Vl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Ar1 => "AR1",
            ModelId::Ar2 => "AR2",
            ModelId::Ar3 => "AR3",
            ModelId::Ar4 => "AR4",
            ModelId::Vl => "VL",
            ModelId::Ar1Ar4 => "AR1&AR4",
            ModelId::Ar4Vl => "AR4&VL",
        }
    }

    /// Stable small integer used when deriving random streams.
    pub fn index(self) -> u64 {
        Self::ALL.iter().position(|&m| m == self).unwrap() as u64
    }

    /// Biomarker labels in the order their parameters are stacked. The joint
    /// AR1 & AR4 model stacks AR4 first, as its generating mean vector does.
    pub fn biomarkers(self) -> &'static [&'static str] {
        match self {
            ModelId::Ar1 => &["AR1"],
            ModelId::Ar2 => &["AR2"],
            ModelId::Ar3 => &["AR3"],
            ModelId::Ar4 => &["AR4"],
            ModelId::Vl => &["VL"],
            ModelId::Ar1Ar4 => &["AR4", "AR1"],
            ModelId::Ar4Vl => &["AR4", "VL"],
        }
    }

    pub fn is_joint(self) -> bool {
        self.biomarkers().len() == 2
    }

    /// Growth specs for fitting, with antibody asymptotes as fixed effects.
    pub fn growth_specs(self) -> Vec<GrowthModelSpec> {
        self.biomarkers().iter().map(|b| biomarker_spec(b)).collect()
    }

    /// Realistic-scenario generating block.
    pub fn realistic_block(self) -> ModelBlock {
        let (mean, cov, error_var): (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) = match self {
            ModelId::Ar1 => (vec![5.0, 2.0], ar1_cov(), vec![0.01]),
            ModelId::Ar2 => (vec![0.0, -1.0, 1.0], ar23_cov(), vec![0.0025]),
            ModelId::Ar3 => (vec![0.0, -1.5, 0.5], ar23_cov(), vec![0.0025]),
            ModelId::Ar4 => (vec![1.5, -1.5, 0.8], ar4_cov(), vec![0.0025]),
            ModelId::Vl => (vec![3.0, 2.0], vl_cov(), vec![0.04]),
            ModelId::Ar1Ar4 => (
                vec![1.5, -1.5, 0.8, 5.0, 2.0],
                vec![
                    vec![0.0, 0.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.4, -0.147, 0.045, -0.028],
                    vec![0.0, -0.147, 0.6, -0.055, 0.173],
                    vec![0.0, 0.045, -0.055, 0.5, -0.19],
                    vec![0.0, -0.028, 0.173, -0.19, 0.2],
                ],
                vec![0.0025, 0.01],
            ),
            ModelId::Ar4Vl => (
                vec![1.5, -1.5, 0.8, 3.0, 2.0],
                vec![
                    vec![0.0, 0.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.4, -0.147, 0.063, 0.134],
                    vec![0.0, -0.147, 0.6, 0.232, 0.055],
                    vec![0.0, 0.063, 0.232, 1.0, 0.3536],
                    vec![0.0, 0.134, 0.055, 0.3536, 0.5],
                ],
                vec![0.0025, 0.04],
            ),
        };
        let k = error_var.len();
        let mut error_cov = vec![vec![0.0; k]; k];
        for (i, v) in error_var.into_iter().enumerate() {
            error_cov[i][i] = v;
        }
        ModelBlock {
            model: self,
            mean,
            cov,
            error_cov,
        }
    }
}

fn biomarker_spec(label: &str) -> GrowthModelSpec {
    match label {
        "AR1" => GrowthModelSpec::random(GrowthKind::Linear),
        "VL" => GrowthModelSpec::random(GrowthKind::ViralDecay),
        _ => GrowthModelSpec::new(GrowthKind::Nonlinear3, vec![true, false, false])
            .expect("mask length is 3"),
    }
}

fn ar1_cov() -> Vec<Vec<f64>> {
    vec![vec![0.5, -0.19], vec![-0.19, 0.2]]
}

fn ar23_cov() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.0, 0.0],
        vec![0.0, 0.2, -0.085],
        vec![0.0, -0.085, 0.4],
    ]
}

fn ar4_cov() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.0, 0.0],
        vec![0.0, 0.4, -0.147],
        vec![0.0, -0.147, 0.6],
    ]
}

fn vl_cov() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.3536], vec![0.3536, 0.5]]
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| if c == '+' || c == '_' { '&' } else { c.to_ascii_uppercase() })
            .collect();
        let found = match norm.as_str() {
            "AR1" => ModelId::Ar1,
            "AR2" => ModelId::Ar2,
            "AR3" => ModelId::Ar3,
            "AR4" => ModelId::Ar4,
            "VL" => ModelId::Vl,
            "AR1&AR4" | "AR4&AR1" => ModelId::Ar1Ar4,
            "AR4&VL" | "VL&AR4" => ModelId::Ar4Vl,
            _ => return Err(Error::InvalidArgument(format!("unknown model `{s}`"))),
        };
        Ok(found)
    }
}

/// Generating parameters of one model: random-effect mean and covariance
/// (zero rows mark fixed effects) and the measurement-error covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBlock {
    pub model: ModelId,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub error_cov: Vec<Vec<f64>>,
}

impl ModelBlock {
    pub fn error_variances(&self) -> Vec<f64> {
        (0..self.error_cov.len()).map(|i| self.error_cov[i][i]).collect()
    }
}
