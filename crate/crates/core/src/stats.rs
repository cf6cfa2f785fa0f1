//! Network summary statistics `S(y, X)` and change statistics.
//!
//! A [`ModelSpec`] is an ordered list of [`StatTerm`]s; term order fixes the
//! coordinate order of both `S` and `theta`. Before evaluation a spec is
//! bound to a node count, directedness and covariates ([`BoundSpec`]), which
//! resolves attribute references once.
//!
//! Shared partners are counted in the undirected skeleton: `t` is a shared
//! partner of `{r, s}` when `t` touches both `r` and `s` by an edge in
//! either direction. The convention lives in [`Graph::common_skel_neighbors`]
//! and [`BoundSpec::gw_pair`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Covariates, EdgeAttr, Graph, NodeAttr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Edges,
    Triangles,
    Mutual,
    Nodematch,
    Edgecov,
    Gwesp,
    Gwdsp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatTerm {
    pub kind: TermKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
}

impl StatTerm {
    pub fn edges() -> Self {
        StatTerm {
            kind: TermKind::Edges,
            attr: None,
            decay: None,
        }
    }

    pub fn triangles() -> Self {
        StatTerm {
            kind: TermKind::Triangles,
            attr: None,
            decay: None,
        }
    }

    pub fn mutual() -> Self {
        StatTerm {
            kind: TermKind::Mutual,
            attr: None,
            decay: None,
        }
    }

    pub fn nodematch(attr: &str) -> Self {
        StatTerm {
            kind: TermKind::Nodematch,
            attr: Some(attr.into()),
            decay: None,
        }
    }

    pub fn edgecov(attr: &str) -> Self {
        StatTerm {
            kind: TermKind::Edgecov,
            attr: Some(attr.into()),
            decay: None,
        }
    }

    pub fn gwesp(decay: f64) -> Self {
        StatTerm {
            kind: TermKind::Gwesp,
            attr: None,
            decay: Some(decay),
        }
    }

    pub fn gwdsp(decay: f64) -> Self {
        StatTerm {
            kind: TermKind::Gwdsp,
            attr: None,
            decay: Some(decay),
        }
    }

    pub fn name(&self) -> String {
        let base = format!("{:?}", self.kind).to_lowercase();
        match (&self.attr, self.decay) {
            (Some(a), _) => format!("{base}.{a}"),
            (None, Some(d)) => format!("{base}.{d}"),
            _ => base,
        }
    }

    /// Statistics that decompose into independent per-dyad contributions.
    pub fn is_dyad_independent(&self) -> bool {
        matches!(self.kind, TermKind::Edges | TermKind::Nodematch | TermKind::Edgecov)
    }

    fn check_shape(&self) -> Result<()> {
        let needs_attr = matches!(self.kind, TermKind::Nodematch | TermKind::Edgecov);
        let needs_decay = matches!(self.kind, TermKind::Gwesp | TermKind::Gwdsp);
        match (&self.attr, needs_attr) {
            (None, true) => return Err(Error::Spec(format!("{} needs an `attr`", self.name()))),
            (Some(_), false) => return Err(Error::Spec(format!("{:?} takes no `attr`", self.kind))),
            _ => {}
        }
        match (self.decay, needs_decay) {
            (None, true) => Err(Error::Spec(format!("{} needs a `decay`", self.name()))),
            (Some(d), true) if !(d.is_finite() && d > 0.0) => Err(Error::Spec(format!(
                "{} decay must be finite and positive",
                self.name()
            ))),
            (Some(_), false) => Err(Error::Spec(format!("{:?} takes no `decay`", self.kind))),
            _ => Ok(()),
        }
    }
}

/// Ordered list of statistic terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSpec {
    terms: Vec<StatTerm>,
}

impl ModelSpec {
    pub fn new(terms: Vec<StatTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Spec("model needs at least one term".into()));
        }
        for t in &terms {
            t.check_shape()?;
        }
        Ok(ModelSpec { terms })
    }

    pub fn terms(&self) -> &[StatTerm] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(StatTerm::name).collect()
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.terms.iter().all(StatTerm::is_dyad_independent)
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Spec(format!(
                "theta has length {}, model has {} terms",
                theta.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Resolves attribute references against `cov` for graphs on `n` nodes.
    pub fn bind<'a>(&self, cov: &'a Covariates, n: usize, directed: bool) -> Result<BoundSpec<'a>> {
        if self.terms.is_empty() {
            return Err(Error::Spec("model needs at least one term".into()));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            t.check_shape()?;
            let b = match t.kind {
                TermKind::Edges => Bound::Edges,
                TermKind::Triangles => {
                    if directed {
                        return Err(Error::Spec("triangles is defined for undirected graphs only".into()));
                    }
                    Bound::Triangles
                }
                TermKind::Mutual => {
                    if !directed {
                        return Err(Error::Spec("mutual needs a directed graph".into()));
                    }
                    Bound::Mutual
                }
                TermKind::Nodematch => {
                    let a = cov.node_attr(t.attr.as_deref().unwrap())?;
                    if a.len() != n {
                        return Err(Error::Spec(format!("attribute length differs from n = {n}")));
                    }
                    Bound::Nodematch(a)
                }
                TermKind::Edgecov => {
                    let a = cov.edge_attr(t.attr.as_deref().unwrap())?;
                    if a.n() != n {
                        return Err(Error::Spec(format!("edge attribute is not {n}x{n}")));
                    }
                    Bound::Edgecov(a)
                }
                TermKind::Gwesp | TermKind::Gwdsp => {
                    let phi = t.decay.unwrap();
                    let q = 1.0 - (-phi).exp();
                    Bound::Gw {
                        edgewise: t.kind == TermKind::Gwesp,
                        scale: phi.exp(),
                        weights: (0..=n).map(|k| 1.0 - q.powi(k as i32)).collect(),
                    }
                }
            };
            terms.push(b);
        }
        Ok(BoundSpec { terms, n, directed })
    }
}

#[derive(Debug, Clone)]
enum Bound<'a> {
    Edges,
    Triangles,
    Mutual,
    Nodematch(&'a NodeAttr),
    Edgecov(&'a EdgeAttr),
    Gw {
        edgewise: bool,
        scale: f64,
        /// `1 - (1 - e^-phi)^k` for `k = 0..=n`.
        weights: Vec<f64>,
    },
}

/// A [`ModelSpec`] with covariates resolved, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct BoundSpec<'a> {
    terms: Vec<Bound<'a>>,
    n: usize,
    directed: bool,
}

impl<'a> BoundSpec<'a> {
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    fn has_gw(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Bound::Gw { .. }))
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.n() != self.n || g.is_directed() != self.directed {
            return Err(Error::Spec(format!(
                "graph ({} nodes, directed = {}) does not match the bound model ({} nodes, directed = {})",
                g.n(),
                g.is_directed(),
                self.n,
                self.directed
            )));
        }
        Ok(())
    }

    pub fn stats(&self, g: &Graph) -> Result<Vec<f64>> {
        self.check_graph(g)?;
        Ok(self.terms.iter().map(|t| self.term_stat(t, g)).collect())
    }

    fn term_stat(&self, term: &Bound<'_>, g: &Graph) -> f64 {
        match term {
            Bound::Edges => g.edge_count() as f64,
            Bound::Triangles => {
                let mut tri = 0u64;
                for (i, j) in g.edges() {
                    // each triangle counted once at its two smallest nodes
                    tri += g.skel_neighbors(i).filter(|&k| k > j && g.has_edge(j, k)).count() as u64;
                }
                tri as f64
            }
            Bound::Mutual => g.edges().filter(|&(i, j)| i < j && g.has_edge(j, i)).count() as f64,
            Bound::Nodematch(a) => g.edges().filter(|&(i, j)| a.same(i, j)).count() as f64,
            Bound::Edgecov(x) => g.edges().map(|(i, j)| x.get(i, j)).sum(),
            Bound::Gw {
                edgewise,
                scale,
                weights,
            } => {
                let mut total = 0.0;
                if *edgewise {
                    for (i, j) in g.edges() {
                        total += weights[g.common_skel_neighbors(i, j) as usize];
                    }
                } else {
                    for i in 0..g.n() {
                        for j in i + 1..g.n() {
                            total += weights[g.common_skel_neighbors(i, j) as usize];
                        }
                    }
                }
                scale * total
            }
        }
    }

    /// `S(y with (r,s) on) - S(y with (r,s) off)`, written into `out`.
    ///
    /// `g` is used as scratch space for the shared-partner terms and is
    /// restored before returning.
    pub fn change_into(&self, g: &mut Graph, r: usize, s: usize, out: &mut [f64]) {
        debug_assert!(r != s);
        for (slot, t) in out.iter_mut().zip(&self.terms) {
            *slot = match t {
                Bound::Gw {
                    edgewise,
                    scale,
                    weights,
                } => scale * self.gw_delta(g, r, s, *edgewise, weights),
                simple => self.simple_delta(simple, g, r, s),
            };
        }
    }

    #[inline]
    fn simple_delta(&self, term: &Bound<'_>, g: &Graph, r: usize, s: usize) -> f64 {
        match term {
            Bound::Edges => 1.0,
            Bound::Triangles => g.common_skel_neighbors(r, s) as f64,
            Bound::Mutual => g.has_edge(s, r) as u8 as f64,
            Bound::Nodematch(a) => a.same(r, s) as u8 as f64,
            Bound::Edgecov(x) => {
                if self.directed {
                    x.get(r, s)
                } else {
                    x.get(r.min(s), r.max(s))
                }
            }
            Bound::Gw { .. } => unreachable!(),
        }
    }

    /// Contribution of pair `{a, b}` to the unscaled GW sum.
    #[inline]
    fn gw_pair(g: &Graph, a: usize, b: usize, edgewise: bool, weights: &[f64]) -> f64 {
        let mult = if edgewise {
            let mut m = g.has_edge(a, b) as u8;
            if g.is_directed() {
                m += g.has_edge(b, a) as u8;
            }
            m as f64
        } else {
            1.0
        };
        if mult == 0.0 {
            return 0.0;
        }
        mult * weights[g.common_skel_neighbors(a, b) as usize]
    }

    /// Restricted recomputation over the pairs whose contribution can change:
    /// `{r, s}` itself, `{r, t}` for `t ~ s` and `{s, t}` for `t ~ r`.
    fn gw_delta(&self, g: &mut Graph, r: usize, s: usize, edgewise: bool, weights: &[f64]) -> f64 {
        let prev = g.set_edge(r, s, true);
        let via_s: Vec<usize> = g.skel_neighbors(s).filter(|&t| t != r).collect();
        let via_r: Vec<usize> = g.skel_neighbors(r).filter(|&t| t != s).collect();
        let local = |g: &Graph| {
            let mut sum = Self::gw_pair(g, r, s, edgewise, weights);
            for &t in &via_s {
                sum += Self::gw_pair(g, r, t, edgewise, weights);
            }
            for &t in &via_r {
                sum += Self::gw_pair(g, s, t, edgewise, weights);
            }
            sum
        };
        let on = local(g);
        g.set_edge(r, s, false);
        let off = local(g);
        g.set_edge(r, s, prev);
        on - off
    }

    pub fn change(&self, g: &Graph, r: usize, s: usize) -> Result<Vec<f64>> {
        self.check_graph(g)?;
        if r == s {
            return Err(Error::Domain(format!("change statistic of self-dyad ({r}, {s})")));
        }
        if r >= g.n() || s >= g.n() {
            return Err(Error::Domain(format!("dyad ({r}, {s}) out of range")));
        }
        let mut out = vec![0.0; self.dim()];
        if self.has_gw() {
            let mut scratch = g.clone();
            self.change_into(&mut scratch, r, s, &mut out);
        } else {
            for (slot, t) in out.iter_mut().zip(&self.terms) {
                *slot = self.simple_delta(t, g, r, s);
            }
        }
        Ok(out)
    }
}

/// `S(g, cov)` in term order.
pub fn compute_stats(spec: &ModelSpec, g: &Graph, cov: &Covariates) -> Result<Vec<f64>> {
    spec.bind(cov, g.n(), g.is_directed())?.stats(g)
}

/// `Delta S_rs`: statistics with `(r, s)` present minus with it absent.
pub fn change_stats(spec: &ModelSpec, g: &Graph, cov: &Covariates, r: usize, s: usize) -> Result<Vec<f64>> {
    spec.bind(cov, g.n(), g.is_directed())?.change(g, r, s)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
