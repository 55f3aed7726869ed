//! JSON dump of generated subgraphs.

use flexlp_core::graph::LinkLabel;
use flexlp_core::sivi::GeneratedSample;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedBlock {
    pub size: usize,
    pub label: LinkLabel,
    /// Local endpoints of the block's link.
    pub target: (usize, usize),
    /// Global id of every local node.
    pub nodes: Vec<usize>,
    /// Local `(i, j, p)` with `i < j` and `p > 0` after thresholding.
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedDump {
    pub gamma: f64,
    pub block_sizes: Vec<usize>,
    pub blocks: Vec<GeneratedBlock>,
}

impl GeneratedDump {
    pub fn from_sample(s: &GeneratedSample) -> Self {
        let blocks = (0..s.num_blocks())
            .map(|b| {
                let p = &s.edge_probs[b];
                let a = &s.thresholded_adj[b];
                let n = s.block_sizes[b];
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if a.get(i, j) > 0.0 {
                            edges.push((i, j, p.get(i, j)));
                        }
                    }
                }
                GeneratedBlock {
                    size: n,
                    label: s.link_labels[b],
                    target: s.target_indices[b],
                    nodes: s.node_maps[b].clone(),
                    edges,
                }
            })
            .collect();
        GeneratedDump {
            gamma: s.gamma,
            block_sizes: s.block_sizes.clone(),
            blocks,
        }
    }
}
