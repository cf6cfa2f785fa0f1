//! Slice sampler for Dirichlet process mixtures of ERGMs.
//!
//! The state is `(u, v, w, z, theta)` with stick-breaking weights
//! `w_j = v_j prod_{l<j} (1 - v_l)` and slice sequence `xi_j = e^-j`. One
//! iteration updates, in order:
//!
//! 1. slice variables `u_i ~ U(0, xi_{z_i})`;
//! 2. sticks `v_j ~ Beta(1 + a_j, beta + b_j)` for the instantiated components;
//! 3. component parameters by a Metropolis move whose likelihood part comes
//!    from a [`Likelihood`] backend;
//! 4. allocations `z_i` over the candidate set `{j : xi_j > u_i}`,
//!    instantiating new components from the prior as the set requires.
//!
//! [`TrueLikelihood`] drives the IIMS sampler: normalising-constant ratios
//! in both moves are replaced by intermediate importance-sampling estimates.
//! The PMS backend lives in [`crate::pseudo`].
//!
//! Each random draw comes from a stream keyed by
//! `(iteration, step, component or network id)`, so results do not depend
//! on how many worker threads run the per-component and per-network tasks.

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Ensemble;
use crate::ratio::{IntermediateIs, LogRatioEstimator, RatioConfig};
use crate::rng::{domain, Stream, StreamRng};
use crate::stats::{dot, BoundSpec, ModelSpec};
use crate::trace::{ComponentRecord, TraceRecord};
use crate::Theta;

mod step {
    pub const U: u64 = 1;
    pub const STICKS: u64 = 2;
    pub const THETA: u64 = 3;
    pub const EXTEND: u64 = 4;
    pub const RATIO: u64 = 5;
    pub const Z: u64 = 6;
}

/// `xi_j = e^-j`.
pub fn xi(j: usize) -> Result<f64> {
    if j < 1 {
        return Err(Error::Domain("component labels start at 1".into()));
    }
    Ok((-(j as f64)).exp())
}

/// `floor(-ln u)`: the number of components `j` with `xi_j > u`.
pub fn max_component(u: f64) -> Result<usize> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("slice variable {u} is outside (0, 1)")));
    }
    Ok((-u.ln()).floor() as usize)
}

/// A covariance given either as its diagonal or as a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    pub fn isotropic(d: usize, sd: f64) -> Self {
        Covariance::Diagonal(vec![sd * sd; d])
    }

    pub fn to_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            Covariance::Diagonal(v) => {
                if v.len() != d {
                    return Err(Error::Config(format!("diagonal has {} entries, expected {d}", v.len())));
                }
                DMatrix::from_diagonal(&DVector::from_column_slice(v))
            }
            Covariance::Full(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!("covariance must be {d}x{d}")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
        };
        for i in 0..d {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                    return Err(Error::Config("covariance is not symmetric".into()));
                }
            }
        }
        Ok(m)
    }
}

/// Multivariate normal with a Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    lower: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: &[f64], cov: &Covariance) -> Result<Self> {
        let d = mean.len();
        let m = cov.to_matrix(d)?;
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Config("covariance is not positive definite".into()))?;
        Ok(Gaussian {
            mean: DVector::from_column_slice(mean),
            lower: chol.l(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        let e = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mean + &self.lower * e).iter().copied().collect()
    }

    /// Zero-mean draw scaled by the factor (a random-walk increment).
    pub fn sample_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        let e = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.lower * e).iter().copied().collect()
    }

    /// Log density up to an additive constant.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let y = self
            .lower
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor is invertible");
        -0.5 * y.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpmConfig {
    /// DP concentration; sticks are `Beta(1, beta)` a priori.
    pub beta: f64,
    pub mu0: Theta,
    pub sigma0: Covariance,
    pub proposal_cov: Covariance,
    #[serde(default = "RatioConfig::mmcmh_default")]
    pub ratio_mmcmh: RatioConfig,
    #[serde(default = "RatioConfig::alloc_default")]
    pub ratio_alloc: RatioConfig,
    pub iterations: usize,
    #[serde(default)]
    pub burn_in: usize,
    pub seed: u64,
    pub theta0: Theta,
}

impl DpmConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config("beta must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config("burn_in must be smaller than iterations".into()));
        }
        for (name, v) in [("mu0", &self.mu0), ("theta0", &self.theta0)] {
            if v.len() != d {
                return Err(Error::Config(format!(
                    "{name} has length {}, model has {d} terms",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Gaussian::new(&self.mu0, &self.sigma0)?;
        Gaussian::new(&vec![0.0; d], &self.proposal_cov)?;
        self.ratio_mmcmh.validate()?;
        self.ratio_alloc.validate()
    }
}

/// Full sampler state. Component labels are 1-based; index `j - 1` of
/// `v`, `w` and `theta` belongs to label `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<usize>,
    pub theta: Vec<Theta>,
}

impl SamplerState {
    /// All networks in component 1 at `theta0`.
    pub fn single_component(n_networks: usize, theta0: Theta) -> Self {
        let mut s = SamplerState {
            u: vec![0.5 * xi(1).unwrap(); n_networks],
            v: vec![0.5],
            w: Vec::new(),
            z: vec![1; n_networks],
            theta: vec![theta0],
        };
        s.recompute_weights();
        s
    }

    pub fn k_star(&self) -> usize {
        self.theta.len()
    }

    /// `a_j` for `j = 1..=k_star`.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut a = vec![0; self.k_star()];
        for &z in &self.z {
            a[z - 1] += 1;
        }
        a
    }

    pub fn recompute_weights(&mut self) {
        self.w = stick_weights(&self.v);
    }

    pub fn members(&self, label: usize) -> Vec<usize> {
        (0..self.z.len()).filter(|&i| self.z[i] == label).collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let k = self.k_star();
        if self.v.len() != k || self.w.len() != k {
            return Err(Error::Numerical("stick arrays disagree with k_star".into()));
        }
        if stick_weights(&self.v) != self.w {
            return Err(Error::Numerical("weights do not follow the stick recursion".into()));
        }
        for (i, (&z, &u)) in self.z.iter().zip(&self.u).enumerate() {
            if z < 1 || z > k {
                return Err(Error::Numerical(format!("label {z} of network {i} outside 1..={k}")));
            }
            if !(u > 0.0 && u < xi(z)?) {
                return Err(Error::Numerical(format!(
                    "slice variable of network {i} violates u < xi(z)"
                )));
            }
        }
        Ok(())
    }
}

/// `w_1 = v_1`, `w_j = v_j prod_{l<j} (1 - v_l)`.
pub fn stick_weights(v: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    v.iter()
        .map(|&vj| {
            let w = vj * rest;
            rest *= 1.0 - vj;
            w
        })
        .collect()
}

/// Observed data prepared for sampling.
pub struct Context<'a> {
    ensemble: &'a Ensemble,
    bound: Vec<BoundSpec<'a>>,
    stats: Vec<Theta>,
    ids: Vec<u64>,
    spec: ModelSpec,
}

impl<'a> Context<'a> {
    pub fn new(ensemble: &'a Ensemble, spec: &ModelSpec) -> Result<Self> {
        let mut bound = Vec::with_capacity(ensemble.len());
        let mut stats = Vec::with_capacity(ensemble.len());
        for i in 0..ensemble.len() {
            let b = spec.bind(ensemble.covariates(i), ensemble.n(), ensemble.is_directed())?;
            stats.push(b.stats(ensemble.graph(i))?);
            bound.push(b);
        }
        Ok(Context {
            ensemble,
            bound,
            stats,
            ids: (0..ensemble.len() as u64).collect(),
            spec: spec.clone(),
        })
    }

    /// Assigns the per-network stream ids (default: the network index).
    /// Permuting networks together with their ids permutes the output.
    pub fn with_stream_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if ids.len() != self.len() || sorted.len() != ids.len() {
            return Err(Error::Domain("stream ids must be distinct, one per network".into()));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn ensemble(&self) -> &'a Ensemble {
        self.ensemble
    }

    pub fn bound(&self, i: usize) -> &BoundSpec<'a> {
        &self.bound[i]
    }

    /// `S(y_i, X_i)`.
    pub fn stats(&self, i: usize) -> &[f64] {
        &self.stats[i]
    }

    pub fn stream_id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    /// Network whose observed graph seeds auxiliary chains for a component:
    /// the member with the smallest stream id, or the smallest id overall
    /// for an empty component.
    pub fn template_for(&self, members: &[usize]) -> usize {
        let pool: Box<dyn Iterator<Item = usize>> = if members.is_empty() {
            Box::new(0..self.len())
        } else {
            Box::new(members.iter().copied())
        };
        pool.min_by_key(|&i| self.ids[i]).expect("ensemble is non-empty")
    }
}

/// The likelihood-dependent parts of the parameter and allocation moves.
pub trait Likelihood: Sync {
    /// `log L(proposal) - log L(current)` over the member networks.
    fn log_lik_ratio(
        &self,
        ctx: &Context<'_>,
        members: &[usize],
        current: &[f64],
        proposal: &[f64],
        stream: Stream,
    ) -> Result<f64>;

    /// `terms[i][j - 1]`: log-likelihood of network `i` under component `j`,
    /// up to a constant shared by all components, for `j = 1..=thetas.len()`.
    fn allocation_terms(
        &self,
        ctx: &Context<'_>,
        thetas: &[Theta],
        occupancy: &[usize],
        templates: &[usize],
        stream: Stream,
    ) -> Result<Vec<Vec<f64>>>;
}

/// Choice of the reference parameter `theta_c` in the allocation move.
#[derive(Debug, Clone, PartialEq)]
pub enum Center {
    /// Occupancy-weighted mean of the current component parameters.
    OccupancyMean,
    Fixed(Theta),
}

impl Center {
    pub fn resolve(&self, thetas: &[Theta], occupancy: &[usize]) -> Theta {
        match self {
            Center::Fixed(t) => t.clone(),
            Center::OccupancyMean => {
                let d = thetas[0].len();
                let total: usize = occupancy.iter().sum();
                let mut c = vec![0.0; d];
                for (t, &a) in thetas.iter().zip(occupancy) {
                    for (ck, tk) in c.iter_mut().zip(t) {
                        *ck += a as f64 * tk;
                    }
                }
                c.iter_mut().for_each(|x| *x /= total.max(1) as f64);
                c
            }
        }
    }
}

/// The true ERGM likelihood with estimated normalising-constant ratios.
///
/// Parameter moves use `(theta' - theta) . sum_i S(y_i) - n_j log gamma`
/// with `gamma` estimating `k(theta')/k(theta)`. Allocation terms are
/// `theta_j . S(y_i) + log k(theta_c)/k(theta_j)`; one ratio per component
/// per sweep, shared by all networks.
pub struct TrueLikelihood<M, A> {
    pub mmcmh: M,
    pub alloc: A,
    pub center: Center,
}

impl TrueLikelihood<IntermediateIs, IntermediateIs> {
    pub fn from_config(cfg: &DpmConfig) -> Self {
        TrueLikelihood {
            mmcmh: IntermediateIs(cfg.ratio_mmcmh),
            alloc: IntermediateIs(cfg.ratio_alloc),
            center: Center::OccupancyMean,
        }
    }
}

impl<M: LogRatioEstimator, A: LogRatioEstimator> Likelihood for TrueLikelihood<M, A> {
    fn log_lik_ratio(
        &self,
        ctx: &Context<'_>,
        members: &[usize],
        current: &[f64],
        proposal: &[f64],
        stream: Stream,
    ) -> Result<f64> {
        let step: Vec<f64> = proposal.iter().zip(current).map(|(a, b)| a - b).collect();
        let data: f64 = members.iter().map(|&i| dot(&step, ctx.stats(i))).sum();
        let t = ctx.template_for(members);
        let log_gamma = self
            .mmcmh
            .log_ratio(ctx.bound(t), current, proposal, ctx.ensemble().graph(t), stream)?;
        Ok(data - members.len() as f64 * log_gamma)
    }

    fn allocation_terms(
        &self,
        ctx: &Context<'_>,
        thetas: &[Theta],
        occupancy: &[usize],
        templates: &[usize],
        stream: Stream,
    ) -> Result<Vec<Vec<f64>>> {
        let occupied: Vec<Theta> = thetas[..occupancy.len()].to_vec();
        let center = self.center.resolve(&occupied, occupancy);
        let log_ratios: Vec<f64> = (0..thetas.len())
            .into_par_iter()
            .map(|j| {
                let t = templates[j];
                self.alloc.log_ratio(
                    ctx.bound(t),
                    &thetas[j],
                    &center,
                    ctx.ensemble().graph(t),
                    stream.child(j as u64 + 1),
                )
            })
            .collect::<Result<_>>()?;
        Ok((0..ctx.len())
            .map(|i| {
                thetas
                    .iter()
                    .zip(&log_ratios)
                    .map(|(t, lr)| dot(t, ctx.stats(i)) + lr)
                    .collect()
            })
            .collect())
    }
}

/// Step 1: `u_i ~ U(0, xi(z_i))`, drawn from the network's own stream.
pub fn update_u(state: &mut SamplerState, ctx: &Context<'_>, stream: Stream) {
    for i in 0..state.z.len() {
        let mut rng = stream.child(ctx.stream_id(i)).rng();
        state.u[i] = draw_slice(state.z[i], &mut rng);
    }
}

fn draw_slice(label: usize, rng: &mut StreamRng) -> f64 {
    let x: f64 = rng.sample(Open01);
    x * xi(label).expect("labels are >= 1")
}

/// Step 2: `v_j ~ Beta(1 + a_j, beta + b_j)` and the weight recursion.
pub fn update_sticks(state: &mut SamplerState, beta: f64, stream: Stream) -> Result<()> {
    let a = state.occupancy();
    let mut above: usize = state.z.len();
    for j in 0..state.k_star() {
        above -= a[j];
        let dist = Beta::new(1.0 + a[j] as f64, beta + above as f64)
            .map_err(|e| Error::Numerical(format!("stick posterior: {e}")))?;
        state.v[j] = dist.sample(&mut stream.child(j as u64 + 1).rng());
    }
    state.recompute_weights();
    Ok(())
}

/// Step 3: one Metropolis move per occupied component; empty components
/// are redrawn from the prior. Returns the accept flag per component.
pub fn update_thetas<L: Likelihood>(
    state: &mut SamplerState,
    ctx: &Context<'_>,
    lik: &L,
    prior: &Gaussian,
    proposal: &Gaussian,
    stream: Stream,
) -> Result<Vec<Option<bool>>> {
    let k = state.k_star();
    let occupancy = state.occupancy();
    let results: Vec<(Theta, Option<bool>)> = (0..k)
        .into_par_iter()
        .map(|j| {
            let s = stream.child(j as u64 + 1);
            let mut rng = s.child(0).rng();
            let current = &state.theta[j];
            if occupancy[j] == 0 {
                return Ok((prior.sample(&mut rng), None));
            }
            let step = proposal.sample_increment(&mut rng);
            let candidate: Theta = current.iter().zip(&step).map(|(a, b)| a + b).collect();
            let members = state.members(j + 1);
            let log_alpha = prior.log_density(&candidate) - prior.log_density(current)
                + lik.log_lik_ratio(ctx, &members, current, &candidate, s.child(1))?;
            if log_alpha.is_nan() {
                log::warn!("component {}: non-finite acceptance ratio, rejecting", j + 1);
                return Ok((current.clone(), Some(false)));
            }
            let accept = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
            Ok(if accept {
                (candidate, Some(true))
            } else {
                (current.clone(), Some(false))
            })
        })
        .collect::<Result<_>>()?;
    let mut flags = Vec::with_capacity(k);
    for (j, (t, f)) in results.into_iter().enumerate() {
        state.theta[j] = t;
        flags.push(f);
    }
    Ok(flags)
}

/// Step 4: allocation over `{j : xi_j > u_i}`. Components up to the largest
/// candidate label are instantiated (stick from `Beta(1, beta)`, parameter
/// from the prior); afterwards trailing empty components are dropped.
pub fn update_z<L: Likelihood>(
    state: &mut SamplerState,
    ctx: &Context<'_>,
    lik: &L,
    prior: &Gaussian,
    beta: f64,
    stream: Stream,
) -> Result<()> {
    let caps: Vec<usize> = state.u.iter().map(|&u| max_component(u)).collect::<Result<_>>()?;
    let k_max = caps.iter().copied().max().unwrap_or(1).max(state.k_star());
    let occupancy = state.occupancy();
    let stick_prior = Beta::new(1.0, beta).map_err(|e| Error::Numerical(format!("stick prior: {e}")))?;
    for j in state.k_star()..k_max {
        let mut rng = stream.child(step::EXTEND).child(j as u64 + 1).rng();
        state.v.push(stick_prior.sample(&mut rng));
        state.theta.push(prior.sample(&mut rng));
    }
    state.recompute_weights();

    let logits = allocation_logits(state, ctx, lik, &occupancy, stream.child(step::RATIO))?;
    let draws: Vec<(usize, f64)> = (0..ctx.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(step::Z).child(ctx.stream_id(i)).rng();
            let mut u = state.u[i];
            let mut cap = caps[i];
            for attempt in 0..2 {
                if let Some(j) = sample_log_weights(&logits[i][..cap.min(k_max)], &mut rng) {
                    return Ok((j + 1, u));
                }
                if attempt == 0 {
                    log::warn!("network {i}: all allocation weights vanished, redrawing its slice variable");
                    u = draw_slice(state.z[i], &mut rng);
                    cap = max_component(u)?;
                }
            }
            Err(Error::Numerical(format!(
                "network {i}: allocation weights are all zero or non-finite"
            )))
        })
        .collect::<Result<_>>()?;
    for (i, (z, u)) in draws.into_iter().enumerate() {
        state.z[i] = z;
        state.u[i] = u;
    }
    let k = state.z.iter().copied().max().unwrap_or(1);
    state.v.truncate(k);
    state.theta.truncate(k);
    state.recompute_weights();
    Ok(())
}

/// `log(w_j / xi_j) + term(i, j)` for every network and every instantiated
/// label; entries past a network's candidate set are included.
fn allocation_logits<L: Likelihood>(
    state: &SamplerState,
    ctx: &Context<'_>,
    lik: &L,
    occupancy: &[usize],
    stream: Stream,
) -> Result<Vec<Vec<f64>>> {
    let templates: Vec<usize> = (1..=state.k_star())
        .map(|j| ctx.template_for(&state.members(j)))
        .collect();
    let mut terms = lik.allocation_terms(ctx, &state.theta, occupancy, &templates, stream)?;
    for row in &mut terms {
        for (j, t) in row.iter_mut().enumerate() {
            *t += state.w[j].ln() + (j + 1) as f64;
        }
    }
    Ok(terms)
}

/// Normalised allocation probabilities over each network's candidate set
/// `{j : xi_j > u_i}`, for a state whose components already cover every
/// candidate set. `stream` plays the role of the ratio-estimation stream.
pub fn allocation_probabilities<L: Likelihood>(
    state: &SamplerState,
    ctx: &Context<'_>,
    lik: &L,
    stream: Stream,
) -> Result<Vec<Vec<f64>>> {
    let logits = allocation_logits(state, ctx, lik, &state.occupancy(), stream)?;
    logits
        .iter()
        .zip(&state.u)
        .map(|(row, &u)| {
            let cap = max_component(u)?;
            if cap > state.k_star() {
                return Err(Error::Domain(
                    "candidate set exceeds the instantiated components".into(),
                ));
            }
            let row = &row[..cap];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row.iter().map(|l| (l - m).exp()).sum();
            Ok(row.iter().map(|l| (l - m).exp() / total).collect())
        })
        .collect()
}

/// Samples an index with probability proportional to `exp(logits)`;
/// `None` when no entry is finite.
pub(crate) fn sample_log_weights<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> Option<usize> {
    let m = logits
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let weights: Vec<f64> = logits
        .iter()
        .map(|&l| if l.is_finite() { (l - m).exp() } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (j, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if target < *w {
                return Some(j);
            }
            target -= w;
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Drives the four-step scan and produces one [`TraceRecord`] per iteration.
pub struct Sampler<'c, 'a, L> {
    ctx: &'c Context<'a>,
    lik: L,
    beta: f64,
    prior: Gaussian,
    proposal: Gaussian,
    iterations: usize,
    root: Stream,
    state: SamplerState,
    iteration: usize,
}

impl<'c, 'a, L: Likelihood> Sampler<'c, 'a, L> {
    pub fn new(ctx: &'c Context<'a>, lik: L, cfg: &DpmConfig) -> Result<Self> {
        cfg.validate(ctx.dim())?;
        Ok(Sampler {
            ctx,
            lik,
            beta: cfg.beta,
            prior: Gaussian::new(&cfg.mu0, &cfg.sigma0)?,
            proposal: Gaussian::new(&vec![0.0; ctx.dim()], &cfg.proposal_cov)?,
            iterations: cfg.iterations,
            root: Stream::new(cfg.seed).child(domain::DPM),
            state: SamplerState::single_component(ctx.len(), cfg.theta0.clone()),
            iteration: 0,
        })
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    /// Runs one full iteration and returns its record.
    pub fn step(&mut self) -> Result<TraceRecord> {
        let it = self.root.child(self.iteration as u64);
        update_u(&mut self.state, self.ctx, it.child(step::U));
        update_sticks(&mut self.state, self.beta, it.child(step::STICKS))?;
        let flags = update_thetas(
            &mut self.state,
            self.ctx,
            &self.lik,
            &self.prior,
            &self.proposal,
            it.child(step::THETA),
        )?;
        update_z(&mut self.state, self.ctx, &self.lik, &self.prior, self.beta, it)?;
        debug_assert!(self.state.check_invariants().is_ok());
        let occupancy = self.state.occupancy();
        let components = (1..=self.state.k_star())
            .filter(|&j| occupancy[j - 1] > 0)
            .map(|j| ComponentRecord {
                label: j,
                theta: self.state.theta[j - 1].clone(),
                occupancy: occupancy[j - 1],
                accepted: flags.get(j - 1).copied().flatten(),
            })
            .collect();
        let rec = TraceRecord {
            iteration: self.iteration,
            k_star: self.state.k_star(),
            z: self.state.z.clone(),
            components,
        };
        self.iteration += 1;
        Ok(rec)
    }

    /// Runs the configured number of iterations, handing each record to
    /// `sink` as it is produced. An error stops the run; records already
    /// handed over stay with the sink.
    pub fn run<F: FnMut(&TraceRecord) -> Result<()>>(&mut self, mut sink: F) -> Result<()> {
        while self.iteration < self.iterations {
            let rec = self.step().map_err(|e| {
                log::error!("iteration {} failed: {e}", self.iteration);
                e
            })?;
            sink(&rec)?;
        }
        Ok(())
    }
}

/// IIMS: the slice sampler with true-likelihood moves.
pub fn run_iims(ensemble: &Ensemble, spec: &ModelSpec, cfg: &DpmConfig) -> Result<Vec<TraceRecord>> {
    let ctx = Context::new(ensemble, spec)?;
    let mut sampler = Sampler::new(&ctx, TrueLikelihood::from_config(cfg), cfg)?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    sampler.run(|r| {
        trace.push(r.clone());
        Ok(())
    })?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::stats::StatTerm;

    #[test]
    fn xi_values() {
        assert!((xi(1).unwrap() - 0.36787944117144233).abs() < 1e-15);
        assert_eq!(xi(2).unwrap(), (-2.0f64).exp());
        for j in 1..50 {
            assert!(xi(j + 1).unwrap() < xi(j).unwrap());
        }
        assert!(matches!(xi(0), Err(Error::Domain(_))));
    }

    #[test]
    fn max_component_values() {
        assert_eq!(max_component(0.05).unwrap(), 2);
        assert_eq!(max_component(0.5).unwrap(), 0);
        assert_eq!(max_component((-3.0f64).exp() * 0.999).unwrap(), 3);
        assert!(max_component(0.0).is_err());
        assert!(max_component(1.0).is_err());
        assert!(max_component(f64::NAN).is_err());
    }

    #[test]
    fn stick_recursion() {
        assert_eq!(stick_weights(&[0.5, 0.5, 0.5]), vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn diagonal_and_full_covariances_agree() {
        let a = Gaussian::new(&[1.0, -1.0], &Covariance::Diagonal(vec![4.0, 0.25])).unwrap();
        let b = Gaussian::new(&[1.0, -1.0], &Covariance::Full(vec![vec![4.0, 0.0], vec![0.0, 0.25]])).unwrap();
        let x = [0.3, 0.2];
        assert!((a.log_density(&x) - b.log_density(&x)).abs() < 1e-14);
        let expected = -0.5 * ((0.7f64).powi(2) / 4.0 + (1.2f64).powi(2) / 0.25);
        assert!((a.log_density(&x) - expected).abs() < 1e-14);
        assert!(Gaussian::new(&[0.0], &Covariance::Diagonal(vec![-1.0])).is_err());
        assert!(Gaussian::new(&[0.0, 0.0], &Covariance::Full(vec![vec![1.0, 0.5], vec![0.4, 1.0]])).is_err());
    }

    #[test]
    fn slice_draws_respect_support() {
        let g = Graph::empty(4, false).unwrap();
        let ens = Ensemble::from_graphs(vec![g; 6]).unwrap();
        let spec = ModelSpec::new(vec![StatTerm::edges()]).unwrap();
        let ctx = Context::new(&ens, &spec).unwrap();
        let mut s = SamplerState::single_component(6, vec![0.0]);
        s.theta.push(vec![0.0]);
        s.v.push(0.5);
        s.recompute_weights();
        s.z = vec![1, 2, 1, 2, 2, 1];
        for t in 0..200 {
            update_u(&mut s, &ctx, Stream::new(t));
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn logit_sampler_handles_infinities() {
        let mut rng = Stream::new(1).rng();
        assert_eq!(sample_log_weights(&[f64::NEG_INFINITY, 0.0], &mut rng), Some(1));
        assert_eq!(sample_log_weights(&[f64::NAN, f64::NEG_INFINITY], &mut rng), None);
        assert_eq!(sample_log_weights(&[1e308, -1e308], &mut rng), Some(0));
    }

    #[test]
    fn config_validation() {
        let cfg = DpmConfig {
            beta: 0.1,
            mu0: vec![-3.0, 0.0],
            sigma0: Covariance::isotropic(2, 4.0),
            proposal_cov: Covariance::isotropic(2, 0.05),
            ratio_mmcmh: RatioConfig::mmcmh_default(),
            ratio_alloc: RatioConfig::alloc_default(),
            iterations: 10,
            burn_in: 2,
            seed: 1,
            theta0: vec![-2.0, 0.0],
        };
        assert!(cfg.validate(2).is_ok());
        assert!(cfg.validate(3).is_err());
        assert!(DpmConfig {
            burn_in: 10,
            ..cfg.clone()
        }
        .validate(2)
        .is_err());
        assert!(DpmConfig {
            beta: 0.0,
            ..cfg.clone()
        }
        .validate(2)
        .is_err());
    }
}
