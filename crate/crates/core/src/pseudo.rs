//! Pseudo-likelihood backend (PMS).
//!
//! `log PL(theta; y) = sum over dyads of y_rs eta_rs - log(1 + exp(eta_rs))`
//! with `eta_rs = theta . Delta S_rs(y)`. Change statistics of the observed
//! graphs are computed once; identical `(y_rs, Delta S_rs)` rows are merged
//! with a count. Nothing here ever runs a graph simulation.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dpm::{Context, DpmConfig, Likelihood, Sampler};
use crate::error::{Error, Result};
use crate::graph::{Ensemble, Graph};
use crate::rng::Stream;
use crate::stats::{dot, BoundSpec, ModelSpec};
use crate::trace::TraceRecord;
use crate::Theta;

/// Cached change statistics of one observed graph.
#[derive(Debug, Clone)]
pub struct PlCache {
    dim: usize,
    /// Flattened `Delta S` rows, `dim` entries each.
    delta: Vec<f64>,
    present: Vec<bool>,
    count: Vec<f64>,
    /// Row index of each dyad, in `Graph::dyads` order.
    row_of: Vec<u32>,
    n: usize,
    directed: bool,
}

impl PlCache {
    pub fn new(spec: &BoundSpec<'_>, g: &Graph) -> Result<Self> {
        spec.stats(g)?;
        let dim = spec.dim();
        let mut scratch = g.clone();
        let mut row = vec![0.0; dim];
        let mut index: HashMap<(bool, Vec<u64>), usize> = HashMap::new();
        let mut cache = PlCache {
            dim,
            delta: Vec::new(),
            present: Vec::new(),
            count: Vec::new(),
            row_of: Vec::new(),
            n: g.n(),
            directed: g.is_directed(),
        };
        for (r, s) in g.dyads() {
            spec.change_into(&mut scratch, r, s, &mut row);
            let y = g.has_edge(r, s);
            let key = (y, row.iter().map(|x| x.to_bits()).collect());
            let k = *index.entry(key).or_insert_with(|| {
                cache.delta.extend_from_slice(&row);
                cache.present.push(y);
                cache.count.push(0.0);
                cache.count.len() - 1
            });
            cache.count[k] += 1.0;
            cache.row_of.push(k as u32);
        }
        Ok(cache)
    }

    pub fn dyads(&self) -> usize {
        self.row_of.len()
    }

    /// Distinct `(y_rs, Delta S_rs)` rows.
    pub fn distinct_rows(&self) -> usize {
        self.count.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cached `Delta S_rs` (for undirected graphs `(r, s)` and `(s, r)` agree).
    pub fn entry(&self, r: usize, s: usize) -> Result<&[f64]> {
        let n = self.n;
        if r == s || r >= n || s >= n {
            return Err(Error::Domain(format!("({r}, {s}) is not a dyad of a {n}-node graph")));
        }
        let idx = if self.directed {
            r * (n - 1) + if s < r { s } else { s - 1 }
        } else {
            let (i, j) = (r.min(s), r.max(s));
            i * n - i * (i + 1) / 2 + (j - i - 1)
        };
        let k = self.row_of[idx] as usize;
        Ok(&self.delta[k * self.dim..(k + 1) * self.dim])
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Spec(format!(
                "theta has length {}, model has {} terms",
                theta.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], bool, f64)> + '_ {
        self.delta
            .chunks_exact(self.dim.max(1))
            .zip(&self.present)
            .zip(&self.count)
            .map(|((d, &y), &c)| (d, y, c))
    }

    pub fn log_pl(&self, theta: &[f64]) -> f64 {
        self.rows()
            .map(|(d, y, c)| {
                let eta = dot(theta, d);
                c * (if y { eta } else { 0.0 } - softplus(eta))
            })
            .sum()
    }

    /// `sum (y_rs - sigmoid(eta_rs)) Delta S_rs`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (d, y, c) in self.rows() {
            let resid = c * (if y { 1.0 } else { 0.0 } - sigmoid(dot(theta, d)));
            for (gk, dk) in g.iter_mut().zip(d) {
                *gk += resid * dk;
            }
        }
        g
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log PL(theta; y)` computed directly.
pub fn log_pseudo_likelihood(spec: &BoundSpec<'_>, g: &Graph, theta: &[f64]) -> Result<f64> {
    let cache = PlCache::new(spec, g)?;
    cache.check_theta(theta)?;
    Ok(cache.log_pl(theta))
}

/// The PMS likelihood: sums of cached log pseudo-likelihoods.
pub struct PseudoLikelihood {
    caches: Vec<PlCache>,
}

impl PseudoLikelihood {
    pub fn new(ctx: &Context<'_>) -> Result<Self> {
        let caches = (0..ctx.len())
            .into_par_iter()
            .map(|i| PlCache::new(ctx.bound(i), ctx.ensemble().graph(i)))
            .collect::<Result<_>>()?;
        Ok(PseudoLikelihood { caches })
    }

    pub fn cache(&self, i: usize) -> &PlCache {
        &self.caches[i]
    }
}

impl Likelihood for PseudoLikelihood {
    fn log_lik_ratio(
        &self,
        _: &Context<'_>,
        members: &[usize],
        current: &[f64],
        proposal: &[f64],
        _: Stream,
    ) -> Result<f64> {
        Ok(members
            .iter()
            .map(|&i| self.caches[i].log_pl(proposal) - self.caches[i].log_pl(current))
            .sum())
    }

    fn allocation_terms(
        &self,
        _: &Context<'_>,
        thetas: &[Theta],
        _: &[usize],
        _: &[usize],
        _: Stream,
    ) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .caches
            .par_iter()
            .map(|c| thetas.iter().map(|t| c.log_pl(t)).collect())
            .collect())
    }
}

/// PMS: the slice sampler with pseudo-likelihood moves. The ratio settings
/// in `cfg` are not used.
pub fn run_pms(ensemble: &Ensemble, spec: &ModelSpec, cfg: &DpmConfig) -> Result<Vec<TraceRecord>> {
    let ctx = Context::new(ensemble, spec)?;
    let lik = PseudoLikelihood::new(&ctx)?;
    let mut sampler = Sampler::new(&ctx, lik, cfg)?;
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
    use crate::graph::Covariates;
    use crate::stats::StatTerm;

    fn brute_log_pl(spec: &BoundSpec<'_>, g: &Graph, theta: &[f64]) -> f64 {
        g.dyads()
            .map(|(r, s)| {
                let eta = dot(theta, &spec.change(g, r, s).unwrap());
                let p_on = eta.exp() / (1.0 + eta.exp());
                if g.has_edge(r, s) {
                    p_on.ln()
                } else {
                    (1.0 - p_on).ln()
                }
            })
            .sum()
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(3.0) - (1.0 + 3f64.exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn matches_dyad_by_dyad_logistic_terms() {
        let cov = Covariates::default();
        let spec = ModelSpec::new(vec![StatTerm::edges(), StatTerm::triangles(), StatTerm::gwesp(0.5)]).unwrap();
        let b = spec.bind(&cov, 7, false).unwrap();
        let g = Graph::from_edges(7, false, &[(0, 1), (1, 2), (0, 2), (2, 3), (4, 5), (5, 6), (3, 6)]).unwrap();
        for theta in [[-1.0, 0.3, 0.2], [0.5, -0.2, 1.0], [0.0, 0.0, 0.0]] {
            let fast = log_pseudo_likelihood(&b, &g, &theta).unwrap();
            assert!((fast - brute_log_pl(&b, &g, &theta)).abs() < 1e-10);
        }
        let cache = PlCache::new(&b, &g).unwrap();
        for (r, s) in g.dyads() {
            assert_eq!(cache.entry(s, r).unwrap(), b.change(&g, r, s).unwrap().as_slice());
        }
        assert!(matches!(log_pseudo_likelihood(&b, &g, &[0.0; 2]), Err(Error::Spec(_))));
        let zero = log_pseudo_likelihood(&b, &g, &[0.0; 3]).unwrap();
        assert!((zero + 21.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cov = Covariates::default();
        let spec = ModelSpec::new(vec![StatTerm::edges(), StatTerm::mutual()]).unwrap();
        let b = spec.bind(&cov, 5, true).unwrap();
        let g = Graph::from_edges(5, true, &[(0, 1), (1, 0), (2, 3), (4, 0), (3, 2), (1, 4)]).unwrap();
        let cache = PlCache::new(&b, &g).unwrap();
        assert_eq!(cache.dyads(), 20);
        for (r, s) in g.dyads() {
            assert_eq!(cache.entry(r, s).unwrap(), b.change(&g, r, s).unwrap().as_slice());
        }
        assert!(cache.entry(2, 2).is_err());
        let theta = [-0.4, 0.9];
        let grad = cache.gradient(&theta);
        for k in 0..2 {
            let h = 1e-6;
            let mut hi = theta;
            let mut lo = theta;
            hi[k] += h;
            lo[k] -= h;
            let fd = (cache.log_pl(&hi) - cache.log_pl(&lo)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6);
        }
    }
}
