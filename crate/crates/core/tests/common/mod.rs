#![allow(dead_code)]

use flexlp_core::autodiff::{ParamSet, Tensor};
use flexlp_core::flex::PipelineConfig;
use flexlp_core::graph::{
    self, extract_enclosing_subgraph, make_batch, Edge, ExtractOptions, Graph, LabeledSubgraphBatch,
};
use flexlp_core::rng::{self, Rng};
use flexlp_core::split::{generate_split, DatasetSplit, Direction, SplitSpec};
use flexlp_core::synth::{generate, GraphFamily, SyntheticGraphSpec};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Four-block community graph used by the end-to-end checks.
pub fn community_sbm(seed: u64) -> Graph {
    generate(&SyntheticGraphSpec {
        graph: GraphFamily::Sbm {
            blocks: 4,
            nodes: 200,
            p_in: 0.15,
            p_out: 0.005,
            p_ring: None,
        },
        features: "community:16".parse().unwrap(),
        seed,
    })
    .unwrap()
}

/// Ring of nine sparse blocks; long detours make every path-length bucket
/// reachable.
pub fn ring_sbm(seed: u64) -> Graph {
    generate(&SyntheticGraphSpec {
        graph: GraphFamily::Sbm {
            blocks: 9,
            nodes: 300,
            p_in: 0.15,
            p_out: 0.0,
            p_ring: Some(0.003),
        },
        features: "community:8".parse().unwrap(),
        seed,
    })
    .unwrap()
}

pub fn cn_split(seed: u64, direction: Direction) -> (Graph, DatasetSplit) {
    let g = community_sbm(seed);
    let spec = SplitSpec::standard(graph::Heuristic::CommonNeighbors, direction, seed);
    let split = generate_split(&g, &spec).unwrap();
    (g, split)
}

/// Pipeline settings shared by the end-to-end checks.
pub fn pipeline(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.ggm.epochs = 40;
    cfg.ggm.patience = 40;
    cfg.flex.gamma = 0.9;
    cfg
}

/// Erdős–Rényi graph with Gaussian features.
pub fn random_graph(rng: &mut Rng, n: usize, p: f64, feature_dim: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, gaussian(rng, n, feature_dim)).unwrap()
}

pub fn gaussian(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// A batch of enclosing subgraphs for the given links (positives first).
pub fn batch_for(
    g: &Graph,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> LabeledSubgraphBatch {
    let mut r = rng::seeded(0);
    let opts = ExtractOptions::default();
    let subs = pos
        .iter()
        .map(|&(u, v)| Edge::positive(u, v))
        .chain(neg.iter().map(|&(u, v)| Edge::negative(u, v)))
        .map(|e| extract_enclosing_subgraph(g, &e, &opts, &mut r).unwrap())
        .collect();
    make_batch(subs).unwrap()
}

/// Some existing edges and some non-edges of `g`.
pub type Links = Vec<(usize, usize)>;

pub fn some_links(g: &Graph, count: usize) -> (Links, Links) {
    let pos: Vec<_> = g.edges().take(count).collect();
    let n = g.num_nodes();
    let mut neg = Vec::new();
    'outer: for u in 0..n {
        for v in u + 1..n {
            if !g.has_edge(u, v) {
                neg.push((u, v));
                if neg.len() == count {
                    break 'outer;
                }
            }
        }
    }
    (pos, neg)
}

/// Largest relative error between `analytic` gradients and central
/// differences of `value` over every entry of every parameter set.
///
/// Entries where both gradients are below `floor` in magnitude are compared
/// against `floor` instead.
pub fn finite_difference_error(
    sets: &[ParamSet],
    analytic: &[Vec<Tensor>],
    value: &dyn Fn(&[ParamSet]) -> f64,
    step: f64,
    floor: f64,
) -> f64 {
    let mut worst = 0.0f64;
    let mut work = sets.to_vec();
    for (s, set) in sets.iter().enumerate() {
        for (t, tensor) in set.tensors().iter().enumerate() {
            for k in 0..tensor.len() {
                let orig = tensor.data()[k];
                work[s].tensors_mut()[t].data_mut()[k] = orig + step;
                let up = value(&work);
                work[s].tensors_mut()[t].data_mut()[k] = orig - step;
                let down = value(&work);
                work[s].tensors_mut()[t].data_mut()[k] = orig;
                let numeric = (up - down) / (2.0 * step);
                let a = analytic[s][t].data()[k];
                let denom = a.abs().max(numeric.abs()).max(floor);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
    }
    worst
}

/// Mean CN of `links` measured on `g`.
pub fn mean_cn(g: &Graph, links: &[(usize, usize)]) -> f64 {
    let total: usize = links
        .iter()
        .map(|&(u, v)| graph::reference::common_neighbors(g, u, v))
        .sum();
    total as f64 / links.len() as f64
}

/// Graph with a constant one-column feature.
pub fn plain_graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::from_edges(n, edges, Tensor::ones(n, 1)).unwrap()
}
