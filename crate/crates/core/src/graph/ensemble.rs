use super::{Covariates, Graph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateSet {
    Shared(Covariates),
    PerGraph(Vec<Covariates>),
}

/// `N >= 1` graphs sharing node count and directedness.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    graphs: Vec<Graph>,
    covariates: CovariateSet,
    node_labels: Vec<String>,
    truth: Option<Vec<usize>>,
}

impl Ensemble {
    pub fn new(graphs: Vec<Graph>, covariates: CovariateSet) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::Structural("ensemble must contain at least one graph".into()))?;
        let (n, directed) = (first.n(), first.is_directed());
        for (k, g) in graphs.iter().enumerate() {
            if g.n() != n {
                return Err(Error::Structural(format!(
                    "graph {k} has {} nodes, expected {n}",
                    g.n()
                )));
            }
            if g.is_directed() != directed {
                return Err(Error::Structural(format!(
                    "graph {k} differs in directedness from graph 0"
                )));
            }
        }
        match &covariates {
            CovariateSet::Shared(c) => c.validate(n)?,
            CovariateSet::PerGraph(cs) => {
                if cs.len() != graphs.len() {
                    return Err(Error::Structural(format!(
                        "{} covariate sets for {} graphs",
                        cs.len(),
                        graphs.len()
                    )));
                }
                for c in cs {
                    c.validate(n)?;
                }
            }
        }
        Ok(Ensemble {
            graphs,
            covariates,
            node_labels: (0..n).map(|i| i.to_string()).collect(),
            truth: None,
        })
    }

    /// Ensemble with no covariates.
    pub fn from_graphs(graphs: Vec<Graph>) -> Result<Self> {
        Ensemble::new(graphs, CovariateSet::Shared(Covariates::new()))
    }

    pub fn with_node_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Structural(format!(
                "{} node labels for {} nodes",
                labels.len(),
                self.n()
            )));
        }
        self.node_labels = labels;
        Ok(self)
    }

    /// Attaches ground-truth component labels (ignored by fitting).
    pub fn with_truth(mut self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.len() {
            return Err(Error::Structural("truth labels length differs from N".into()));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.graphs[0].n()
    }

    pub fn is_directed(&self) -> bool {
        self.graphs[0].is_directed()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn graph(&self, i: usize) -> &Graph {
        &self.graphs[i]
    }

    pub fn covariate_set(&self) -> &CovariateSet {
        &self.covariates
    }

    pub fn covariates(&self, i: usize) -> &Covariates {
        match &self.covariates {
            CovariateSet::Shared(c) => c,
            CovariateSet::PerGraph(cs) => &cs[i],
        }
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    /// Reorders the member graphs: position `k` of the result holds graph `order[k]`.
    pub fn reordered(&self, order: &[usize]) -> Result<Ensemble> {
        let mut seen = vec![false; self.len()];
        for &k in order {
            if k >= self.len() || std::mem::replace(&mut seen[k], true) {
                return Err(Error::Domain("order is not a permutation".into()));
            }
        }
        if order.len() != self.len() {
            return Err(Error::Domain("order is not a permutation".into()));
        }
        let covariates = match &self.covariates {
            CovariateSet::Shared(c) => CovariateSet::Shared(c.clone()),
            CovariateSet::PerGraph(cs) => CovariateSet::PerGraph(order.iter().map(|&k| cs[k].clone()).collect()),
        };
        Ok(Ensemble {
            graphs: order.iter().map(|&k| self.graphs[k].clone()).collect(),
            covariates,
            node_labels: self.node_labels.clone(),
            truth: self.truth.as_ref().map(|t| order.iter().map(|&k| t[k]).collect()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mixed_sizes() {
        let a = Graph::empty(3, false).unwrap();
        let b = Graph::empty(4, false).unwrap();
        assert!(matches!(
            Ensemble::from_graphs(vec![a.clone(), b]),
            Err(Error::Structural(_))
        ));
        let c = Graph::empty(3, true).unwrap();
        assert!(Ensemble::from_graphs(vec![a, c]).is_err());
        assert!(Ensemble::from_graphs(vec![]).is_err());
    }
}
