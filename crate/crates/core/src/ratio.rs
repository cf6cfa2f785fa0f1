//! Normalising-constant ratios `k(theta') / k(theta)` by intermediate
//! importance sampling.
//!
//! The straight line from `theta` to `theta'` is cut into `m1 + 1` segments.
//! For each segment start `theta_r` a fresh Metropolis chain draws `m2`
//! networks `z_r^s`, and the estimate is
//!
//! ```text
//! gamma = prod_r (1/m2) sum_s exp{(theta_{r+1} - theta_r) . S(z_r^s)}
//! ```
//!
//! Everything is carried in log space; `m1 = 0` is plain importance sampling.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Covariates, Graph};
use crate::rng::{domain, Stream};
use crate::simulate::{simulate_stats, ChainLength, StateSpace, MAX_ENUM_DYADS};
use crate::stats::{dot, BoundSpec, ModelSpec};
use crate::trace::fmt_f64;
use crate::Theta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioConfig {
    /// Number of intermediate parameter values.
    pub m1: usize,
    /// Auxiliary networks per segment.
    pub m2: usize,
    #[serde(default)]
    pub chain: ChainLength,
}

impl RatioConfig {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        let cfg = RatioConfig {
            m1,
            m2,
            chain: ChainLength::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_chain(mut self, chain: ChainLength) -> Self {
        self.chain = chain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m2 == 0 {
            return Err(Error::Config("m2 must be at least 1".into()));
        }
        self.chain.validate()
    }

    /// `m1 = 2, m2 = 10`, the default for parameter updates.
    pub fn mmcmh_default() -> Self {
        RatioConfig {
            m1: 2,
            m2: 10,
            chain: ChainLength::default(),
        }
    }

    /// `m1 = 5, m2 = 10`, the default for allocation updates.
    pub fn alloc_default() -> Self {
        RatioConfig {
            m1: 5,
            m2: 10,
            chain: ChainLength::default(),
        }
    }
}

/// `theta = p_0, p_1, ..., p_{m1}, p_{m1+1} = theta'`, equally spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPath {
    points: Vec<Theta>,
}

impl ThetaPath {
    pub fn points(&self) -> &[Theta] {
        &self.points
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        self.points.last().unwrap()
    }
}

pub fn make_path(theta: &[f64], theta_prime: &[f64], m1: usize) -> Result<ThetaPath> {
    if theta.len() != theta_prime.len() {
        return Err(Error::Spec(format!(
            "path endpoints differ in dimension ({} vs {})",
            theta.len(),
            theta_prime.len()
        )));
    }
    let steps = (m1 + 1) as f64;
    let mut points = Vec::with_capacity(m1 + 2);
    points.push(theta.to_vec());
    for r in 1..=m1 {
        let t = r as f64 / steps;
        points.push(theta.iter().zip(theta_prime).map(|(a, b)| a + t * (b - a)).collect());
    }
    points.push(theta_prime.to_vec());
    Ok(ThetaPath { points })
}

/// `log (1/m) sum_s exp(x_s)`.
pub(crate) fn log_mean_exp(xs: &[f64]) -> f64 {
    crate::simulate::log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Log of one importance-sampling factor `k(to)/k(from)` from `m2` draws at `from`.
pub fn segment_log_estimate(
    spec: &BoundSpec<'_>,
    from: &[f64],
    to: &[f64],
    template: &Graph,
    m2: usize,
    chain: &ChainLength,
    seed: u64,
) -> Result<f64> {
    let step: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
    if step.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let sim = chain.resolve(template.n(), template.is_directed(), seed)?;
    let draws = simulate_stats(spec, from, template, m2, &sim)?;
    let exps: Vec<f64> = draws.iter().map(|s| dot(&step, s)).collect();
    Ok(log_mean_exp(&exps))
}

/// Per-segment log factors; segment `r` draws from `stream.child(r)`.
pub fn segment_log_estimates(
    spec: &BoundSpec<'_>,
    path: &ThetaPath,
    template: &Graph,
    cfg: &RatioConfig,
    stream: Stream,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let pts = path.points();
    (0..path.segments())
        .into_par_iter()
        .map(|r| {
            segment_log_estimate(
                spec,
                &pts[r],
                &pts[r + 1],
                template,
                cfg.m2,
                &cfg.chain,
                stream.child(r as u64).seed(),
            )
        })
        .collect()
}

/// `log gamma`, the log of the intermediate importance-sampling estimate.
pub fn estimate_log_ratio(
    spec: &BoundSpec<'_>,
    path: &ThetaPath,
    template: &Graph,
    cfg: &RatioConfig,
    stream: Stream,
) -> Result<f64> {
    let parts = segment_log_estimates(spec, path, template, cfg, stream)?;
    Ok(parts.iter().sum())
}

/// `gamma`, estimating `k(path.end()) / k(path.start())`.
pub fn estimate_ratio(
    spec: &ModelSpec,
    path: &ThetaPath,
    cov: &Covariates,
    template: &Graph,
    cfg: &RatioConfig,
    seed: u64,
) -> Result<f64> {
    spec.check_theta(path.start())?;
    let bound = spec.bind(cov, template.n(), template.is_directed())?;
    let stream = Stream::new(seed).child(domain::RATIO);
    Ok(estimate_log_ratio(&bound, path, template, cfg, stream)?.exp())
}

/// Source of `log k(to)/k(from)` values for the samplers.
pub trait LogRatioEstimator: Send + Sync {
    fn log_ratio(
        &self,
        spec: &BoundSpec<'_>,
        from: &[f64],
        to: &[f64],
        template: &Graph,
        stream: Stream,
    ) -> Result<f64>;
}

/// Intermediate importance sampling with a fixed [`RatioConfig`].
#[derive(Debug, Clone, Copy)]
pub struct IntermediateIs(pub RatioConfig);

impl LogRatioEstimator for IntermediateIs {
    fn log_ratio(
        &self,
        spec: &BoundSpec<'_>,
        from: &[f64],
        to: &[f64],
        template: &Graph,
        stream: Stream,
    ) -> Result<f64> {
        let path = make_path(from, to, self.0.m1)?;
        estimate_log_ratio(spec, &path, template, &self.0, stream)
    }
}

/// Exact ratios from an enumerated state space. Only usable on tiny graphs.
#[derive(Debug, Clone)]
pub struct ExactRatio {
    space: StateSpace,
}

impl ExactRatio {
    pub fn new(spec: &ModelSpec, n: usize, directed: bool, cov: &Covariates) -> Result<Self> {
        Ok(ExactRatio {
            space: StateSpace::new(spec, n, directed, cov)?,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }
}

impl LogRatioEstimator for ExactRatio {
    fn log_ratio(&self, _: &BoundSpec<'_>, from: &[f64], to: &[f64], _: &Graph, _: Stream) -> Result<f64> {
        Ok(self.space.log_normalizer(to) - self.space.log_normalizer(from))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m1: usize,
    pub m2: usize,
    pub replication: usize,
    pub log_estimate: f64,
    pub log_exact: Option<f64>,
}

impl SweepRow {
    pub fn estimate(&self) -> f64 {
        self.log_estimate.exp()
    }
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub theta: Theta,
    pub theta_prime: Theta,
    pub m1_grid: Vec<usize>,
    pub m2_grid: Vec<usize>,
    pub replications: usize,
    pub chain: ChainLength,
    pub seed: u64,
}

/// One estimate per `(m1, m2, replication)` cell, each from its own stream.
/// The exact log-ratio is attached when the graph is small enough to enumerate.
pub fn sweep_estimator(
    spec: &ModelSpec,
    template: &Graph,
    cov: &Covariates,
    plan: &SweepPlan,
) -> Result<Vec<SweepRow>> {
    if plan.m1_grid.is_empty() || plan.m2_grid.is_empty() || plan.replications == 0 {
        return Err(Error::Config(
            "sweep grids and replication count must be non-empty".into(),
        ));
    }
    spec.check_theta(&plan.theta)?;
    spec.check_theta(&plan.theta_prime)?;
    let bound = spec.bind(cov, template.n(), template.is_directed())?;
    let log_exact = if template.dyad_count() <= MAX_ENUM_DYADS {
        let space = StateSpace::new(spec, template.n(), template.is_directed(), cov)?;
        Some(space.log_normalizer(&plan.theta_prime) - space.log_normalizer(&plan.theta))
    } else {
        None
    };
    let root = Stream::new(plan.seed).child(domain::SWEEP);
    let mut cells = Vec::new();
    for &m1 in &plan.m1_grid {
        for &m2 in &plan.m2_grid {
            for rep in 0..plan.replications {
                cells.push((m1, m2, rep));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(m1, m2, rep)| {
            let cfg = RatioConfig {
                m1,
                m2,
                chain: plan.chain,
            };
            cfg.validate()?;
            let path = make_path(&plan.theta, &plan.theta_prime, m1)?;
            let stream = root.derive(&[m1 as u64, m2 as u64, rep as u64]);
            Ok(SweepRow {
                m1,
                m2,
                replication: rep,
                log_estimate: estimate_log_ratio(&bound, &path, template, &cfg, stream)?,
                log_exact,
            })
        })
        .collect()
}

/// CSV with columns `m1,m2,replication,estimate,exact,log_estimate,log_exact`;
/// `exact` columns are empty when no oracle applies.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "m1",
        "m2",
        "replication",
        "estimate",
        "exact",
        "log_estimate",
        "log_exact",
    ])?;
    for r in rows {
        let exact = r.log_exact.map(|l| fmt_f64(l.exp())).unwrap_or_default();
        let log_exact = r.log_exact.map(fmt_f64).unwrap_or_default();
        w.write_record([
            r.m1.to_string(),
            r.m2.to_string(),
            r.replication.to_string(),
            fmt_f64(r.estimate()),
            exact,
            fmt_f64(r.log_estimate),
            log_exact,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::StatTerm;

    #[test]
    fn midpoint_path() {
        let p = make_path(&[0.0, 0.0], &[2.0, 2.0], 1).unwrap();
        assert_eq!(p.points(), &[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
    }

    #[test]
    fn endpoints_only_when_no_intermediates() {
        let p = make_path(&[0.3], &[-0.1], 0).unwrap();
        assert_eq!(p.points().len(), 2);
        assert_eq!(p.segments(), 1);
    }

    #[test]
    fn constant_path() {
        let p = make_path(&[1.5, -2.0], &[1.5, -2.0], 4).unwrap();
        assert!(p.points().iter().all(|q| q == &vec![1.5, -2.0]));
    }

    #[test]
    fn collinear_equal_spacing() {
        let p = make_path(&[-3.0, 0.9], &[-1.0, 0.0], 2).unwrap();
        assert_eq!(p.points().len(), 4);
        let pts = p.points();
        for r in 0..3 {
            let d0 = pts[r + 1][0] - pts[r][0];
            let d1 = pts[r + 1][1] - pts[r][1];
            assert!((d0 - 2.0 / 3.0).abs() < 1e-12);
            assert!((d1 + 0.3).abs() < 1e-12);
        }
        assert_eq!(pts[3], vec![-1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(make_path(&[0.0], &[0.0, 1.0], 1), Err(Error::Spec(_))));
    }

    #[test]
    fn identical_endpoints_give_exactly_one() {
        let spec = ModelSpec::new(vec![StatTerm::edges(), StatTerm::triangles()]).unwrap();
        let g = Graph::empty(6, false).unwrap();
        for m1 in [0, 3] {
            let path = make_path(&[-1.0, 0.4], &[-1.0, 0.4], m1).unwrap();
            let cfg = RatioConfig::new(m1, 7).unwrap();
            assert_eq!(
                estimate_ratio(&spec, &path, &Covariates::new(), &g, &cfg, 5).unwrap(),
                1.0
            );
        }
    }

    #[test]
    fn log_mean_exp_is_stable() {
        assert!((log_mean_exp(&[1000.0, 1000.0]) - 1000.0).abs() < 1e-12);
        assert!((log_mean_exp(&[0.0, (3.0f64).ln()]) - 2.0f64.ln()).abs() < 1e-12);
    }
}
