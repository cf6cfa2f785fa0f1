//! Drawing networks from an ERGM by single-dyad Metropolis updates, plus
//! exhaustive enumeration of tiny state spaces.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Covariates, Graph};
use crate::rng::{Stream, StreamRng};
use crate::stats::{dot, BoundSpec, ModelSpec};

static CHAINS_STARTED: AtomicU64 = AtomicU64::new(0);

/// Number of Metropolis chains started by this process so far.
pub fn chains_started() -> u64 {
    CHAINS_STARTED.load(Ordering::Relaxed)
}

/// Burn-in and thinning, both counted in dyad-toggle proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(burn_in: usize, thin: usize, seed: u64) -> Result<Self> {
        if thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(SimConfig { burn_in, thin, seed })
    }

    /// `20 x #dyads` burn-in and `10 x #dyads` thinning.
    pub fn default_for(n: usize, directed: bool, seed: u64) -> Self {
        let d = crate::graph::dyad_count(n, directed).max(1);
        SimConfig {
            burn_in: 20 * d,
            thin: 10 * d,
            seed,
        }
    }
}

/// Chain lengths with per-graph-size defaults; the seed is supplied later
/// from the caller's random stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainLength {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
}

impl ChainLength {
    pub fn fixed(burn_in: usize, thin: usize) -> Self {
        ChainLength {
            burn_in: Some(burn_in),
            thin: Some(thin),
        }
    }

    pub fn resolve(&self, n: usize, directed: bool, seed: u64) -> Result<SimConfig> {
        let d = SimConfig::default_for(n, directed, seed);
        SimConfig::new(self.burn_in.unwrap_or(d.burn_in), self.thin.unwrap_or(d.thin), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == Some(0) {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// A Metropolis chain over graphs targeting `exp(theta . S(y)) / k(theta)`.
///
/// Proposals pick a dyad uniformly and flip it; the acceptance probability
/// is `min(1, exp(+-theta . Delta S))`, the sign depending on whether the
/// flip adds or removes the edge. Statistics are tracked incrementally.
pub struct ErgmChain<'s, 'a> {
    spec: &'s BoundSpec<'a>,
    theta: &'s [f64],
    graph: Graph,
    stats: Vec<f64>,
    delta: Vec<f64>,
    rng: StreamRng,
    proposed: u64,
    accepted: u64,
}

impl<'s, 'a> ErgmChain<'s, 'a> {
    pub fn new(spec: &'s BoundSpec<'a>, theta: &'s [f64], start: Graph, rng: StreamRng) -> Result<Self> {
        if theta.len() != spec.dim() {
            return Err(Error::Spec(format!(
                "theta has length {}, model has {} terms",
                theta.len(),
                spec.dim()
            )));
        }
        if start.n() < 2 {
            return Err(Error::Domain("simulation needs at least two nodes".into()));
        }
        let stats = spec.stats(&start)?;
        CHAINS_STARTED.fetch_add(1, Ordering::Relaxed);
        Ok(ErgmChain {
            spec,
            theta,
            graph: start,
            delta: vec![0.0; stats.len()],
            stats,
            rng,
            proposed: 0,
            accepted: 0,
        })
    }

    #[inline]
    pub fn step(&mut self) {
        let n = self.graph.n();
        let r = self.rng.random_range(0..n);
        let mut s = self.rng.random_range(0..n - 1);
        if s >= r {
            s += 1;
        }
        self.spec.change_into(&mut self.graph, r, s, &mut self.delta);
        let present = self.graph.has_edge(r, s);
        let mut log_ratio = dot(self.theta, &self.delta);
        if present {
            log_ratio = -log_ratio;
        }
        self.proposed += 1;
        if log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp() {
            self.graph.set_edge(r, s, !present);
            let sign = if present { -1.0 } else { 1.0 };
            for (st, d) in self.stats.iter_mut().zip(&self.delta) {
                *st += sign * d;
            }
            self.accepted += 1;
        }
    }

    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Draws `count` graphs, the first after `burn_in + thin` proposals and the
/// rest every `thin` proposals. Deterministic in `cfg.seed` and the inputs.
pub fn simulate_ergm(
    spec: &ModelSpec,
    theta: &[f64],
    template: &Graph,
    cov: &Covariates,
    count: usize,
    cfg: &SimConfig,
) -> Result<Vec<Graph>> {
    spec.check_theta(theta)?;
    let bound = spec.bind(cov, template.n(), template.is_directed())?;
    let mut chain = ErgmChain::new(&bound, theta, template.clone(), Stream::new(cfg.seed).rng())?;
    chain.advance(cfg.burn_in);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        chain.advance(cfg.thin.max(1));
        out.push(chain.graph().clone());
    }
    Ok(out)
}

/// Like [`simulate_ergm`] but keeps only the statistic vectors of the draws.
pub fn simulate_stats(
    spec: &BoundSpec<'_>,
    theta: &[f64],
    template: &Graph,
    count: usize,
    cfg: &SimConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut chain = ErgmChain::new(spec, theta, template.clone(), Stream::new(cfg.seed).rng())?;
    chain.advance(cfg.burn_in);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        chain.advance(cfg.thin.max(1));
        out.push(chain.stats().to_vec());
    }
    Ok(out)
}

/// Largest enumerable state space, in dyads.
pub const MAX_ENUM_DYADS: usize = 20;

/// Every graph on `n` nodes with its statistic vector. Graph `k` has dyad
/// `d` (in [`Graph::dyads`] order) present iff bit `d` of `k` is set.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n: usize,
    directed: bool,
    dyads: Vec<(usize, usize)>,
    stats: Vec<Vec<f64>>,
}

impl StateSpace {
    pub fn new(spec: &ModelSpec, n: usize, directed: bool, cov: &Covariates) -> Result<Self> {
        let empty = Graph::empty(n, directed)?;
        let dyads: Vec<_> = empty.dyads().collect();
        if dyads.len() > MAX_ENUM_DYADS {
            return Err(Error::Capacity(format!(
                "{} dyads exceeds the enumeration limit of {MAX_ENUM_DYADS}",
                dyads.len()
            )));
        }
        let bound = spec.bind(cov, n, directed)?;
        let mut stats = Vec::with_capacity(1 << dyads.len());
        for mask in 0u32..(1u32 << dyads.len()) {
            let g = graph_from_mask(n, directed, &dyads, mask);
            stats.push(bound.stats(&g)?);
        }
        Ok(StateSpace {
            n,
            directed,
            dyads,
            stats,
        })
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn stats(&self, index: usize) -> &[f64] {
        &self.stats[index]
    }

    pub fn graph(&self, index: usize) -> Graph {
        graph_from_mask(self.n, self.directed, &self.dyads, index as u32)
    }

    pub fn index_of(&self, g: &Graph) -> usize {
        self.dyads
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| g.has_edge(i, j))
            .map(|(d, _)| 1usize << d)
            .sum()
    }

    /// `log k(theta)`.
    pub fn log_normalizer(&self, theta: &[f64]) -> f64 {
        let logs: Vec<f64> = self.stats.iter().map(|s| dot(theta, s)).collect();
        log_sum_exp(&logs)
    }

    pub fn distribution(&self, theta: &[f64]) -> ExactDistribution {
        let logs: Vec<f64> = self.stats.iter().map(|s| dot(theta, s)).collect();
        let log_k = log_sum_exp(&logs);
        ExactDistribution {
            log_k,
            probs: logs.iter().map(|l| (l - log_k).exp()).collect(),
        }
    }
}

fn graph_from_mask(n: usize, directed: bool, dyads: &[(usize, usize)], mask: u32) -> Graph {
    let mut g = Graph::empty(n, directed).expect("n >= 1");
    for (d, &(i, j)) in dyads.iter().enumerate() {
        if mask >> d & 1 == 1 {
            g.set_edge(i, j, true);
        }
    }
    g
}

/// Probability of every graph in a [`StateSpace`] plus `log k(theta)`.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub log_k: f64,
    pub probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn normalizer(&self) -> f64 {
        self.log_k.exp()
    }
}

/// Enumerates all graphs on `n` nodes (at most 2^20 of them).
pub fn exact_distribution(
    spec: &ModelSpec,
    theta: &[f64],
    n: usize,
    directed: bool,
    cov: &Covariates,
) -> Result<(StateSpace, ExactDistribution)> {
    spec.check_theta(theta)?;
    let space = StateSpace::new(spec, n, directed, cov)?;
    let dist = space.distribution(theta);
    Ok((space, dist))
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
