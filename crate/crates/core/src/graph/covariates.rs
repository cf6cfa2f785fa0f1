use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A per-node attribute. String-valued attributes are stored as integer
/// codes into a level table; equality tests compare codes.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeAttr {
    Categorical { codes: Vec<u32>, levels: Vec<String> },
    Real(Vec<f64>),
}

impl NodeAttr {
    pub fn categorical<S: AsRef<str>>(values: &[S]) -> Self {
        let mut levels: Vec<String> = values.iter().map(|v| v.as_ref().to_owned()).collect();
        levels.sort();
        levels.dedup();
        let codes = values
            .iter()
            .map(|v| levels.binary_search_by(|l| l.as_str().cmp(v.as_ref())).unwrap() as u32)
            .collect();
        NodeAttr::Categorical { codes, levels }
    }

    pub fn len(&self) -> usize {
        match self {
            NodeAttr::Categorical { codes, .. } => codes.len(),
            NodeAttr::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether nodes `i` and `j` carry the same value.
    #[inline]
    pub fn same(&self, i: usize, j: usize) -> bool {
        match self {
            NodeAttr::Categorical { codes, .. } => codes[i] == codes[j],
            NodeAttr::Real(v) => v[i] == v[j],
        }
    }

    pub(crate) fn permuted(&self, order: &[usize]) -> NodeAttr {
        match self {
            NodeAttr::Categorical { codes, levels } => NodeAttr::Categorical {
                codes: order.iter().map(|&k| codes[k]).collect(),
                levels: levels.clone(),
            },
            NodeAttr::Real(v) => NodeAttr::Real(order.iter().map(|&k| v[k]).collect()),
        }
    }
}

/// An `n x n` real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAttr {
    n: usize,
    values: Vec<f64>,
}

impl EdgeAttr {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Structural(format!(
                "edge attribute has {} entries, expected {}",
                values.len(),
                n * n
            )));
        }
        Ok(EdgeAttr { n, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Structural("edge attribute matrix is not square".into()));
        }
        EdgeAttr::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub(crate) fn permuted(&self, order: &[usize]) -> EdgeAttr {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                values[a * n + b] = self.get(i, j);
            }
        }
        EdgeAttr { n, values }
    }
}

/// Node and dyad covariates for one graph (or shared by an ensemble).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Covariates {
    pub node_attrs: BTreeMap<String, NodeAttr>,
    pub edge_attrs: BTreeMap<String, EdgeAttr>,
}

impl Covariates {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_node_attr(mut self, name: &str, attr: NodeAttr) -> Self {
        self.node_attrs.insert(name.to_owned(), attr);
        self
    }

    pub fn with_edge_attr(mut self, name: &str, attr: EdgeAttr) -> Self {
        self.edge_attrs.insert(name.to_owned(), attr);
        self
    }

    pub fn node_attr(&self, name: &str) -> Result<&NodeAttr> {
        self.node_attrs
            .get(name)
            .ok_or_else(|| Error::Spec(format!("unknown node attribute `{name}`")))
    }

    pub fn edge_attr(&self, name: &str) -> Result<&EdgeAttr> {
        self.edge_attrs
            .get(name)
            .ok_or_else(|| Error::Spec(format!("unknown edge attribute `{name}`")))
    }

    /// Checks every vector has length `n` and every matrix is `n x n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, a) in &self.node_attrs {
            if a.len() != n {
                return Err(Error::Structural(format!(
                    "node attribute `{name}` has length {}, expected {n}",
                    a.len()
                )));
            }
        }
        for (name, a) in &self.edge_attrs {
            if a.n() != n {
                return Err(Error::Structural(format!(
                    "edge attribute `{name}` is {0}x{0}, expected {n}x{n}",
                    a.n()
                )));
            }
        }
        Ok(())
    }

    /// Reindexes nodes: new node `a` takes the attributes of old node `order[a]`.
    pub fn permuted(&self, order: &[usize]) -> Covariates {
        Covariates {
            node_attrs: self
                .node_attrs
                .iter()
                .map(|(k, v)| (k.clone(), v.permuted(order)))
                .collect(),
            edge_attrs: self
                .edge_attrs
                .iter()
                .map(|(k, v)| (k.clone(), v.permuted(order)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_codes_follow_sorted_levels() {
        let a = NodeAttr::categorical(&["b", "a", "b", "c"]);
        match &a {
            NodeAttr::Categorical { codes, levels } => {
                assert_eq!(levels, &["a", "b", "c"]);
                assert_eq!(codes, &[1, 0, 1, 2]);
            }
            _ => unreachable!(),
        }
        assert!(a.same(0, 2));
        assert!(!a.same(0, 1));
    }

    #[test]
    fn validate_catches_length_mismatch() {
        let c = Covariates::new().with_node_attr("x", NodeAttr::Real(vec![1.0; 3]));
        assert!(c.validate(3).is_ok());
        assert!(c.validate(4).is_err());
        assert!(matches!(c.node_attr("y"), Err(Error::Spec(_))));
    }
}
