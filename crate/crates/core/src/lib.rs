//! Dirichlet process mixtures of exponential random graph models (ERGMs)
//! for ensembles of networks observed on a common node set.
//!
//! Two posterior samplers share one slice-sampling scan:
//!
//! * [`dpm::run_iims`] works with the true likelihood. Normalising-constant
//!   ratios are estimated by intermediate importance sampling over a path
//!   of parameters ([`ratio`]), with auxiliary networks drawn by
//!   single-dyad Metropolis updates ([`simulate`]).
//! * [`pseudo::run_pms`] swaps the likelihood for the pseudo-likelihood and
//!   never simulates.
//!
//! [`simulate::exact_distribution`] enumerates every graph on a handful of
//! nodes and is the reference the estimators are tested against.

pub mod assess;
pub mod dpm;
pub mod error;
pub mod graph;
pub mod pseudo;
pub mod ratio;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{Covariates, Ensemble, Graph};
pub use stats::{ModelSpec, StatTerm};

/// Parameter vector of one ERGM component, in [`ModelSpec`] term order.
pub type Theta = Vec<f64>;
