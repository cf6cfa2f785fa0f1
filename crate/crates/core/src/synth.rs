//! Synthetic ensembles drawn from a finite mixture of ERGMs.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CovariateSet, Covariates, Ensemble, Graph, NodeAttr};
use crate::rng::{domain, Stream};
use crate::simulate::{simulate_ergm, ChainLength};
use crate::stats::ModelSpec;
use crate::Theta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub spec: ModelSpec,
    pub weights: Vec<f64>,
    pub thetas: Vec<Theta>,
    pub n: usize,
    #[serde(default)]
    pub directed: bool,
    /// Number of networks.
    pub networks: usize,
    pub seed: u64,
    /// Random categorical node attributes shared by all networks, given
    /// as attribute name to number of levels.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub categorical: BTreeMap<String, usize>,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.thetas.len() {
            return Err(Error::Config(
                "need one weight per component and at least one component".into(),
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        for t in &self.thetas {
            self.spec.check_theta(t).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if self.networks == 0 {
            return Err(Error::Config("networks must be positive".into()));
        }
        if self.categorical.values().any(|&k| k == 0) {
            return Err(Error::Config("categorical attributes need at least one level".into()));
        }
        Ok(())
    }
}

/// Draws `count` component labels (1-based) with probabilities `weights`.
pub fn draw_labels(weights: &[f64], count: usize, stream: Stream) -> Vec<usize> {
    let mut rng = stream.rng();
    (0..count)
        .map(|_| {
            let mut x: f64 = rng.random();
            for (j, &w) in weights.iter().enumerate() {
                if x < w {
                    return j + 1;
                }
                x -= w;
            }
            weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) + 1
        })
        .collect()
}

/// Generates the ensemble. Each network is one draw from its own chain,
/// started at the empty graph; ground-truth labels are attached to the
/// result (see [`Ensemble::truth`]).
pub fn generate(ms: &MixtureSpec, chain: &ChainLength) -> Result<Ensemble> {
    ms.validate()?;
    chain.validate()?;
    let root = Stream::new(ms.seed).child(domain::SYNTH);
    let labels = draw_labels(&ms.weights, ms.networks, root.child(0));
    let mut cov = Covariates::new();
    for (k, (name, &levels)) in ms.categorical.iter().enumerate() {
        let mut rng = root.child(1).child(k as u64).rng();
        let values: Vec<String> = (0..ms.n).map(|_| rng.random_range(0..levels).to_string()).collect();
        cov = cov.with_node_attr(name, NodeAttr::categorical(&values));
    }
    let empty = Graph::empty(ms.n, ms.directed)?;
    let graphs: Vec<Graph> = labels
        .par_iter()
        .enumerate()
        .map(|(i, &z)| {
            let cfg = chain.resolve(ms.n, ms.directed, root.child(2).child(i as u64).seed())?;
            let mut g = simulate_ergm(&ms.spec, &ms.thetas[z - 1], &empty, &cov, 1, &cfg)?;
            Ok(g.pop().expect("one draw"))
        })
        .collect::<Result<_>>()?;
    Ensemble::new(graphs, CovariateSet::Shared(cov))?.with_truth(labels)
}
