//! Graphs, covariates and ensembles of networks on a shared node set.

mod covariates;
mod ensemble;
pub mod io;

pub use covariates::{Covariates, EdgeAttr, NodeAttr};
pub use ensemble::{CovariateSet, Ensemble};
pub use io::{load_ensemble, save_edge_list_dir, save_json_bundle, EnsembleFormat};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// A binary graph on `n` labelled nodes with dense bit-packed rows.
///
/// Undirected graphs keep both `(i, j)` and `(j, i)` bits set so that row
/// intersections give common neighbours directly. Directed graphs also keep
/// the rows of the underlying undirected skeleton (`i ~ j` iff `i -> j` or
/// `j -> i`), which is what shared-partner terms look at.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    directed: bool,
    words: usize,
    out: Vec<u64>,
    skel: Vec<u64>,
    edges: usize,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("directed", &self.directed)
            .field("edges", &self.edge_list())
            .finish()
    }
}

impl Graph {
    pub fn empty(n: usize, directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structural("graph must have at least one node".into()));
        }
        let words = n.div_ceil(WORD);
        Ok(Graph {
            n,
            directed,
            words,
            out: vec![0; n * words],
            skel: if directed { vec![0; n * words] } else { Vec::new() },
            edges: 0,
        })
    }

    /// Builds a graph from 0-based edge pairs. Duplicate pairs are merged.
    pub fn from_edges(n: usize, directed: bool, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n, directed)?;
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Structural(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if i == j {
                return Err(Error::Structural(format!("self-loop at node {i}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    /// The complete graph, used mostly by tests and degeneracy checks.
    pub fn complete(n: usize, directed: bool) -> Result<Self> {
        let mut g = Graph::empty(n, directed)?;
        for (i, j) in g.dyads().collect::<Vec<_>>() {
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Number of free dyads: `n(n-1)` directed, `n(n-1)/2` undirected.
    pub fn dyad_count(&self) -> usize {
        dyad_count(self.n, self.directed)
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        bit(&self.out, self.words, i, j)
    }

    #[inline]
    pub(crate) fn out_row(&self, i: usize) -> &[u64] {
        &self.out[i * self.words..(i + 1) * self.words]
    }

    /// Row of the undirected skeleton.
    #[inline]
    pub(crate) fn skel_row(&self, i: usize) -> &[u64] {
        let rows = if self.directed { &self.skel } else { &self.out };
        &rows[i * self.words..(i + 1) * self.words]
    }

    /// Whether `i` and `j` are joined in either direction.
    #[inline]
    pub fn skel_adjacent(&self, i: usize, j: usize) -> bool {
        if self.directed {
            bit(&self.skel, self.words, i, j)
        } else {
            self.has_edge(i, j)
        }
    }

    /// Nodes adjacent to `i` in the skeleton, in increasing order.
    pub(crate) fn skel_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        iter_bits(self.skel_row(i))
    }

    /// Sets dyad `(i, j)` (and `(j, i)` when undirected). Returns the previous state.
    ///
    /// Callers must guarantee `i != j` and both indices in range.
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) -> bool {
        debug_assert!(i != j && i < self.n && j < self.n);
        let before = self.has_edge(i, j);
        if before == present {
            return before;
        }
        let w = self.words;
        put(&mut self.out, w, i, j, present);
        if self.directed {
            let reverse = self.has_edge(j, i);
            put(&mut self.skel, w, i, j, present || reverse);
            put(&mut self.skel, w, j, i, present || reverse);
        } else {
            put(&mut self.out, w, j, i, present);
        }
        if present {
            self.edges += 1;
        } else {
            self.edges -= 1;
        }
        before
    }

    fn check_dyad(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::Domain(format!("dyad ({i}, {j}) is a self-loop")));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::Domain(format!(
                "dyad ({i}, {j}) out of range for {} nodes",
                self.n
            )));
        }
        Ok(())
    }

    /// Flips dyad `(i, j)` in place.
    pub fn toggle_in_place(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_dyad(i, j)?;
        let cur = self.has_edge(i, j);
        self.set_edge(i, j, !cur);
        Ok(())
    }

    /// Returns a copy of the graph with dyad `(i, j)` flipped.
    pub fn toggle_edge(&self, i: usize, j: usize) -> Result<Graph> {
        let mut g = self.clone();
        g.toggle_in_place(i, j)?;
        Ok(g)
    }

    /// All free dyads: `i < j` undirected, all `i != j` directed.
    pub fn dyads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        let directed = self.directed;
        (0..n).flat_map(move |i| {
            let start = if directed { 0 } else { i + 1 };
            (start..n).filter(move |&j| j != i).map(move |j| (i, j))
        })
    }

    /// Present edges in canonical order (`i < j` when undirected).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            iter_bits(self.out_row(i))
                .filter(move |&j| self.directed || j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.edges().collect()
    }

    /// Number of nodes adjacent to both `i` and `j` in the skeleton.
    #[inline]
    pub(crate) fn common_skel_neighbors(&self, i: usize, j: usize) -> u32 {
        self.skel_row(i)
            .iter()
            .zip(self.skel_row(j))
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// Applies a node permutation: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::Domain("permutation length differs from n".into()));
        }
        let edges: Vec<_> = self.edges().map(|(i, j)| (perm[i], perm[j])).collect();
        Graph::from_edges(self.n, self.directed, &edges)
    }
}

pub(crate) fn dyad_count(n: usize, directed: bool) -> usize {
    if directed {
        n * (n - 1)
    } else {
        n * (n - 1) / 2
    }
}

#[inline]
fn bit(rows: &[u64], words: usize, i: usize, j: usize) -> bool {
    rows[i * words + j / WORD] >> (j % WORD) & 1 == 1
}

#[inline]
fn put(rows: &mut [u64], words: usize, i: usize, j: usize, on: bool) {
    let idx = i * words + j / WORD;
    let mask = 1u64 << (j % WORD);
    if on {
        rows[idx] |= mask;
    } else {
        rows[idx] &= !mask;
    }
}

pub(crate) fn iter_bits(row: &[u64]) -> impl Iterator<Item = usize> + '_ {
    row.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * WORD + b)
            }
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toggle_adds_single_edge() {
        let g = Graph::empty(3, false).unwrap();
        let h = g.toggle_edge(0, 1).unwrap();
        assert_eq!(h.edge_count(), 1);
        assert!(h.has_edge(1, 0));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn toggle_twice_restores() {
        let g = Graph::from_edges(5, true, &[(0, 1), (2, 3), (4, 0)]).unwrap();
        let h = g.toggle_edge(0, 1).unwrap().toggle_edge(0, 1).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn self_toggle_is_domain_error() {
        let g = Graph::empty(4, false).unwrap();
        assert!(matches!(g.toggle_edge(2, 2), Err(Error::Domain(_))));
        assert!(matches!(g.toggle_edge(0, 9), Err(Error::Domain(_))));
    }

    #[test]
    fn complete_thirty_node_graph() {
        let g = Graph::complete(30, false).unwrap();
        assert_eq!(g.edge_count(), 435);
        for (i, j) in [(0, 1), (7, 29), (12, 3)] {
            assert_eq!(g.toggle_edge(i, j).unwrap().edge_count(), 434);
        }
    }

    #[test]
    fn directed_skeleton_tracks_either_direction() {
        let mut g = Graph::empty(4, true).unwrap();
        g.set_edge(0, 1, true);
        assert!(g.skel_adjacent(1, 0) && g.skel_adjacent(0, 1));
        g.set_edge(1, 0, true);
        g.set_edge(0, 1, false);
        assert!(g.skel_adjacent(0, 1));
        g.set_edge(1, 0, false);
        assert!(!g.skel_adjacent(0, 1));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn wide_graph_rows() {
        let mut g = Graph::empty(130, false).unwrap();
        g.set_edge(0, 129, true);
        g.set_edge(64, 129, true);
        g.set_edge(0, 64, true);
        assert_eq!(g.common_skel_neighbors(0, 64), 1);
        assert_eq!(g.skel_neighbors(129).collect::<Vec<_>>(), vec![0, 64]);
        assert_eq!(g.edge_list(), vec![(0, 64), (0, 129), (64, 129)]);
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            Graph::from_edges(3, false, &[(1, 1)]),
            Err(Error::Structural(_))
        ));
    }
}
