use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use super::{Edge, Graph, LinkLabel};
use crate::autodiff::{Csr, Tensor};
use crate::rng::Rng;
use crate::{Error, Result};

/// Knobs for [`extract_enclosing_subgraph`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractOptions {
    /// Neighbourhood radius `k`.
    pub hops: usize,
    /// Node cap; targets are never dropped.
    pub max_nodes: usize,
    /// Drop the `(u, v)` pair from the local adjacency.
    pub exclude_target: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            hops: 1,
            max_nodes: 1000,
            exclude_target: true,
        }
    }
}

/// The `k`-hop enclosing subgraph of a link, with zero-one node labels.
///
/// Local index 0 is `u`, 1 is `v`; the remaining nodes follow in ascending
/// global id.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSubgraph {
    /// Local index to global node id.
    pub node_map: Vec<usize>,
    /// Local edges `(i, j)` with `i < j`, sorted.
    pub local_edges: Vec<(usize, usize)>,
    pub features: Tensor,
    /// 1 for the two target endpoints, 0 elsewhere.
    pub labels: Vec<u8>,
    /// Local indices of `(u, v)`; always `(0, 1)`.
    pub target: (usize, usize),
    pub hops: usize,
    pub link_label: LinkLabel,
}

impl LabeledSubgraph {
    pub fn num_nodes(&self) -> usize {
        self.node_map.len()
    }

    pub fn dense_adjacency(&self) -> Tensor {
        let n = self.num_nodes();
        let mut a = Tensor::zeros(n, n);
        for &(i, j) in &self.local_edges {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        a
    }
}

/// Extracts the union of the `k`-hop neighbourhoods of `e.u` and `e.v`.
///
/// If the union is larger than `max_nodes`, non-target nodes are subsampled
/// uniformly with `rng`. When `exclude_target` is set the link itself is
/// never part of the local adjacency.
pub fn extract_enclosing_subgraph(
    g: &Graph,
    e: &Edge,
    opts: &ExtractOptions,
    rng: &mut Rng,
) -> Result<LabeledSubgraph> {
    e.validate(g)?;
    if opts.hops == 0 {
        return Err(Error::input("hop count must be at least 1"));
    }
    if opts.max_nodes < 2 {
        return Err(Error::input("max_nodes must be at least 2"));
    }
    let mut within = BTreeMap::new();
    for root in [e.u, e.v] {
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::new();
        dist.insert(root, 0usize);
        queue.push_back(root);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            within.insert(x, ());
            if d == opts.hops {
                continue;
            }
            for &y in g.neighbors(x) {
                if let alloc::collections::btree_map::Entry::Vacant(slot) = dist.entry(y) {
                    slot.insert(d + 1);
                    queue.push_back(y);
                }
            }
        }
    }
    let mut others: Vec<usize> = within
        .keys()
        .copied()
        .filter(|&x| x != e.u && x != e.v)
        .collect();
    let room = opts.max_nodes - 2;
    if others.len() > room {
        let mut keep: Vec<usize> = index::sample(rng, others.len(), room)
            .into_iter()
            .map(|i| others[i])
            .collect();
        keep.sort_unstable();
        others = keep;
    }
    let mut node_map = Vec::with_capacity(others.len() + 2);
    node_map.push(e.u);
    node_map.push(e.v);
    node_map.extend(others);

    let local: BTreeMap<usize, usize> = node_map.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut local_edges = Vec::new();
    for (i, &x) in node_map.iter().enumerate() {
        for &y in g.neighbors(x) {
            if let Some(&j) = local.get(&y) {
                if j > i && !(opts.exclude_target && i == 0 && j == 1) {
                    local_edges.push((i, j));
                }
            }
        }
    }
    local_edges.sort_unstable();

    let mut features = Tensor::zeros(node_map.len(), g.feature_dim());
    for (i, &x) in node_map.iter().enumerate() {
        features.row_mut(i).copy_from_slice(g.features().row(x));
    }
    let mut labels = vec![0u8; node_map.len()];
    labels[0] = 1;
    labels[1] = 1;
    Ok(LabeledSubgraph {
        node_map,
        local_edges,
        features,
        labels,
        target: (0, 1),
        hops: opts.hops,
        link_label: e.label,
    })
}

/// Labeled subgraphs stacked along the block diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSubgraphBatch {
    pub blocks: Vec<LabeledSubgraph>,
    pub block_sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    pub batch_labels: Vec<LinkLabel>,
}

/// Concatenates subgraphs into one block-diagonal batch.
pub fn make_batch(subgraphs: Vec<LabeledSubgraph>) -> Result<LabeledSubgraphBatch> {
    if subgraphs.is_empty() {
        return Err(Error::input("cannot batch an empty list of subgraphs"));
    }
    let block_sizes: Vec<usize> = subgraphs.iter().map(LabeledSubgraph::num_nodes).collect();
    let mut offsets = Vec::with_capacity(block_sizes.len());
    let mut acc = 0;
    for &s in &block_sizes {
        offsets.push(acc);
        acc += s;
    }
    let batch_labels = subgraphs.iter().map(|s| s.link_label).collect();
    Ok(LabeledSubgraphBatch {
        blocks: subgraphs,
        block_sizes,
        offsets,
        batch_labels,
    })
}

impl LabeledSubgraphBatch {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Batched edges in global (batch) indices, `i < j`.
    pub fn global_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .flat_map(|(b, &o)| b.local_edges.iter().map(move |&(i, j)| (i + o, j + o)))
    }

    /// Symmetric 0/1 block-diagonal adjacency.
    pub fn adjacency(&self) -> Csr {
        let n = self.total_nodes();
        Csr::from_triplets(
            n,
            n,
            self.global_edges()
                .flat_map(|(i, j)| [(i, j, 1.0), (j, i, 1.0)]),
        )
        .expect("edges inside batch")
    }

    /// Row-stacked node features.
    pub fn features(&self) -> Tensor {
        let parts: Vec<&Tensor> = self.blocks.iter().map(|b| &b.features).collect();
        Tensor::concat_rows(&parts).expect("blocks share the feature width")
    }

    /// Zero-one labels as an `N x 1` column.
    pub fn label_column(&self) -> Tensor {
        Tensor::column(
            self.blocks
                .iter()
                .flat_map(|b| b.labels.iter().map(|&l| f64::from(l)))
                .collect(),
        )
    }

    /// Target endpoints of each block, in batch indices.
    pub fn targets(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .map(|(b, &o)| (b.target.0 + o, b.target.1 + o))
            .collect()
    }

    /// Which block a batch node belongs to.
    pub fn block_of(&self, node: usize) -> Result<usize> {
        if node >= self.total_nodes() {
            return Err(Error::input(format!(
                "node {node} outside batch of {}",
                self.total_nodes()
            )));
        }
        Ok(self.offsets.partition_point(|&o| o <= node) - 1)
    }
}
