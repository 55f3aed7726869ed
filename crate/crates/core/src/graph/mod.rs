//! Undirected graphs over a dense node-feature matrix.

mod heuristics;
pub mod reference;
mod subgraph;

pub use heuristics::{
    common_neighbors, preferential_attachment, shortest_path_length, Heuristic, PathLength,
};
pub use subgraph::{
    extract_enclosing_subgraph, make_batch, ExtractOptions, LabeledSubgraph, LabeledSubgraphBatch,
};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Csr, Tensor};
use crate::{Error, Result};

/// Whether a link is an observed edge or a sampled non-edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LinkLabel {
    Positive,
    Negative,
}

impl LinkLabel {
    pub fn target(self) -> f64 {
        match self {
            LinkLabel::Positive => 1.0,
            LinkLabel::Negative => 0.0,
        }
    }
}

/// A candidate link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub label: LinkLabel,
}

impl Edge {
    pub fn new(u: usize, v: usize, label: LinkLabel) -> Self {
        Edge { u, v, label }
    }

    pub fn positive(u: usize, v: usize) -> Self {
        Self::new(u, v, LinkLabel::Positive)
    }

    pub fn negative(u: usize, v: usize) -> Self {
        Self::new(u, v, LinkLabel::Negative)
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        g.check_node(self.u)?;
        g.check_node(self.v)?;
        if self.u == self.v {
            return Err(Error::input(format!(
                "self-loop link ({}, {})",
                self.u, self.v
            )));
        }
        Ok(())
    }
}

/// An immutable undirected graph: CSR adjacency plus an `n x d` feature
/// matrix.
///
/// Rows of the adjacency are sorted, symmetric and free of self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: Tensor,
}

impl Graph {
    /// Builds a graph from undirected edges. Self-loops, duplicates (in
    /// either orientation) and out-of-range ids are rejected.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Tensor,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::input(format!(
                "feature matrix has {} rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        let mut deg = vec![0usize; num_nodes];
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::input(format!(
                    "edge #{i} ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                return Err(Error::input(format!("edge #{i} is a self-loop on {u}")));
            }
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut offsets = vec![0usize; num_nodes + 1];
        for i in 0..num_nodes {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[num_nodes]];
        for &(u, v) in edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for u in 0..num_nodes {
            let row = &mut neighbors[offsets[u]..offsets[u + 1]];
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::input(format!("duplicate edge ({u}, {})", w[0])));
            }
        }
        Ok(Graph {
            offsets,
            neighbors,
            features,
        })
    }

    /// Same nodes and features, different edge set.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        Graph::from_edges(self.num_nodes(), edges, self.features.clone())
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn features(&self) -> &Tensor {
        &self.features
    }

    /// Sorted neighbor list of `u`.
    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && v < self.num_nodes() && self.neighbors(u).binary_search(&v).is_ok()
    }

    pub(crate) fn check_node(&self, u: usize) -> Result<()> {
        if u >= self.num_nodes() {
            return Err(Error::input(format!(
                "node {u} out of range (graph has {} nodes)",
                self.num_nodes()
            )));
        }
        Ok(())
    }

    /// Every undirected edge once, as `(u, v)` with `u < v`, in ascending
    /// order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// The 0/1 adjacency as a sparse matrix.
    pub fn adjacency(&self) -> Csr {
        let n = self.num_nodes();
        Csr::from_triplets(
            n,
            n,
            (0..n).flat_map(|u| self.neighbors(u).iter().map(move |&v| (u, v, 1.0))),
        )
        .expect("valid graph")
    }

    /// Number of unordered node pairs that are not edges.
    pub fn non_edge_count(&self) -> usize {
        let n = self.num_nodes();
        n * n.saturating_sub(1) / 2 - self.edge_count()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn rows_are_sorted_and_symmetric() {
        let g = unfeatured(4, &[(3, 0), (0, 1), (2, 0), (1, 2)]);
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        for (u, v) in g.edges() {
            assert!(g.has_edge(v, u));
        }
        assert_eq!(g.edge_count(), 4);
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (0, 3), (1, 2)]
        );
    }

    #[test]
    fn rejects_bad_edges() {
        let f = || Tensor::ones(3, 1);
        assert!(Graph::from_edges(3, &[(0, 0)], f()).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)], f()).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)], f()).is_err());
        assert!(Graph::from_edges(4, &[(0, 1)], f()).is_err());
    }
}
