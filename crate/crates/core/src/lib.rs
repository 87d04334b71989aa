//! Bayesian mixed-effects models of biomarker growth for estimating how
//! recently an HIV-positive individual seroconverted.
//!
//! The crate covers the whole pipeline of a simulation study:
//!
//! * [`growth`]: linear, three-parameter non-linear and viral-decay mean
//!   trajectories, and their stacking into a bivariate response;
//! * [`simgen`]: seeded replicate panels of in-sample individuals (known
//!   seroconversion offset) and out-of-sample individuals (unknown offset);
//! * [`bayes`]: likelihoods, priors and conjugate full conditionals;
//! * [`mcmc`]: a Metropolis-within-Gibbs sampler with convergence diagnostics;
//! * [`recency`]: posterior probabilities `P_X = Pr(tau <= X | data)`, HPD
//!   intervals and boundary-corrected posterior densities;
//! * [`study`]: the replicate x model x individual fit grid and its reports.
//!
//! All times are in years.

pub mod bayes;
pub mod catalogue;
pub mod error;
pub mod growth;
pub mod linalg;
pub mod mcmc;
pub mod recency;
pub mod rng;
pub mod simgen;
pub mod study;

pub use catalogue::{ModelBlock, ModelId};
pub use error::{Error, Result};
