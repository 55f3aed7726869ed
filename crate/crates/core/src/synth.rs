//! Synthetic graph families and node-feature modes.

use alloc::format;
#[cfg(feature = "serde")]
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Tensor;
use crate::graph::Graph;
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Random graph family and its size parameters.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)
)]
pub enum GraphFamily {
    /// Stochastic block model with equal blocks. Blocks are arranged on a
    /// ring; neighbouring blocks connect with `p_ring` when given, all other
    /// block pairs with `p_out`.
    Sbm {
        blocks: usize,
        nodes: usize,
        p_in: f64,
        p_out: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        p_ring: Option<f64>,
    },
    /// Barabási–Albert preferential attachment seeded with a clique of `m`
    /// nodes.
    #[cfg_attr(feature = "serde", serde(rename = "ba"))]
    BarabasiAlbert { nodes: usize, m: usize },
    /// Erdős–Rényi `G(n, p)`.
    #[cfg_attr(feature = "serde", serde(rename = "er"))]
    ErdosRenyi { nodes: usize, p: f64 },
}

/// How node features are synthesised.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureMode {
    /// `d` columns of ones.
    Constant(usize),
    /// One-hot of `min(degree, D - 1)`.
    DegreeOneHot(usize),
    /// `d` i.i.d. standard normal columns.
    Gaussian(usize),
    /// Standard normal columns plus a unit shift on column `community % d`.
    /// SBM nodes take their block as community, other families use 0.
    Community(usize),
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, width) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("feature mode `{s}` lacks `:<width>`")))?;
        let width: usize = width
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad feature width in `{s}`")))?;
        if width == 0 {
            return Err(Error::config("feature width must be positive"));
        }
        match kind.trim() {
            "constant" => Ok(FeatureMode::Constant(width)),
            "degree-onehot" => Ok(FeatureMode::DegreeOneHot(width)),
            "gaussian" => Ok(FeatureMode::Gaussian(width)),
            "community" => Ok(FeatureMode::Community(width)),
            other => Err(Error::config(format!("unknown feature mode `{other}`"))),
        }
    }
}

impl core::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FeatureMode::Constant(d) => write!(f, "constant:{d}"),
            FeatureMode::DegreeOneHot(d) => write!(f, "degree-onehot:{d}"),
            FeatureMode::Gaussian(d) => write!(f, "gaussian:{d}"),
            FeatureMode::Community(d) => write!(f, "community:{d}"),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for FeatureMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for FeatureMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        s.parse()
            .map_err(|e: Error| serde::de::Error::custom(e.to_string()))
    }
}

/// A complete recipe for a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SyntheticGraphSpec {
    pub graph: GraphFamily,
    pub features: FeatureMode,
    pub seed: u64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

impl GraphFamily {
    pub fn num_nodes(&self) -> usize {
        match *self {
            GraphFamily::Sbm { nodes, .. }
            | GraphFamily::BarabasiAlbert { nodes, .. }
            | GraphFamily::ErdosRenyi { nodes, .. } => nodes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if n < 10 {
            return Err(Error::config(format!(
                "synthetic graphs need n >= 10, got {n}"
            )));
        }
        match *self {
            GraphFamily::Sbm {
                blocks,
                nodes,
                p_in,
                p_out,
                p_ring,
            } => {
                if blocks == 0 || blocks > nodes {
                    return Err(Error::config(format!("{blocks} blocks for {nodes} nodes")));
                }
                check_prob("p_in", p_in)?;
                check_prob("p_out", p_out)?;
                if let Some(p) = p_ring {
                    check_prob("p_ring", p)?;
                }
            }
            GraphFamily::BarabasiAlbert { nodes, m } => {
                if m == 0 || m >= nodes {
                    return Err(Error::config(format!("BA needs 1 <= m < n, got m = {m}")));
                }
            }
            GraphFamily::ErdosRenyi { p, .. } => check_prob("p", p)?,
        }
        Ok(())
    }

    /// Samples the undirected edge list (`u < v`).
    pub fn sample_edges(&self, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
        self.validate()?;
        Ok(match *self {
            GraphFamily::Sbm {
                blocks,
                nodes,
                p_in,
                p_out,
                p_ring,
            } => {
                let block_of = |i: usize| i * blocks / nodes;
                let mut edges = Vec::new();
                for u in 0..nodes {
                    for v in u + 1..nodes {
                        let (bu, bv) = (block_of(u), block_of(v));
                        let p = if bu == bv {
                            p_in
                        } else if ring_adjacent(bu, bv, blocks) {
                            p_ring.unwrap_or(p_out)
                        } else {
                            p_out
                        };
                        if rng.random_bool(p) {
                            edges.push((u, v));
                        }
                    }
                }
                edges
            }
            GraphFamily::BarabasiAlbert { nodes, m } => barabasi_albert(nodes, m, rng),
            GraphFamily::ErdosRenyi { nodes, p } => {
                let mut edges = Vec::new();
                for u in 0..nodes {
                    for v in u + 1..nodes {
                        if rng.random_bool(p) {
                            edges.push((u, v));
                        }
                    }
                }
                edges
            }
        })
    }
}

impl GraphFamily {
    /// Community of every node: the block for SBM, 0 otherwise.
    pub fn communities(&self) -> Vec<usize> {
        match *self {
            GraphFamily::Sbm { blocks, nodes, .. } => {
                (0..nodes).map(|i| i * blocks / nodes).collect()
            }
            _ => vec![0; self.num_nodes()],
        }
    }
}

fn ring_adjacent(a: usize, b: usize, blocks: usize) -> bool {
    (a + 1) % blocks == b || (b + 1) % blocks == a
}

fn barabasi_albert(n: usize, m: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    // endpoint multiset: a node appears once per incident edge
    let mut ends: Vec<usize> = Vec::new();
    for u in 0..m {
        for v in u + 1..m {
            edges.push((u, v));
            ends.push(u);
            ends.push(v);
        }
    }
    for new in m..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = if ends.is_empty() {
                rng.random_range(0..new)
            } else {
                ends[rng.random_range(0..ends.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t.min(new), t.max(new)));
            ends.push(t);
            ends.push(new);
        }
    }
    edges
}

/// Builds the `n x d` feature matrix for `mode`; `communities` has one entry
/// per node.
pub fn make_features(
    mode: FeatureMode,
    edges: &[(usize, usize)],
    communities: &[usize],
    rng: &mut Rng,
) -> Tensor {
    let n = communities.len();
    match mode {
        FeatureMode::Constant(d) => Tensor::ones(n, d),
        FeatureMode::DegreeOneHot(d) => {
            let mut deg = vec![0usize; n];
            for &(u, v) in edges {
                deg[u] += 1;
                deg[v] += 1;
            }
            let mut t = Tensor::zeros(n, d);
            for (i, &k) in deg.iter().enumerate() {
                t.set(i, k.min(d - 1), 1.0);
            }
            t
        }
        FeatureMode::Gaussian(d) => {
            let data = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
            Tensor::from_vec(n, d, data).expect("sized")
        }
        FeatureMode::Community(d) => {
            let mut t = make_features(FeatureMode::Gaussian(d), edges, communities, rng);
            for (i, &c) in communities.iter().enumerate() {
                t.set(i, c % d, t.get(i, c % d) + 1.0);
            }
            t
        }
    }
}

/// Samples a full synthetic graph. The structure and the features use
/// separate random streams of `spec.seed`.
pub fn generate(spec: &SyntheticGraphSpec) -> Result<Graph> {
    let mut structure = rng::stream(spec.seed, "synth-structure");
    let mut feats = rng::stream(spec.seed, "synth-features");
    let edges = spec.graph.sample_edges(&mut structure)?;
    let n = spec.graph.num_nodes();
    let x = make_features(spec.features, &edges, &spec.graph.communities(), &mut feats);
    Graph::from_edges(n, &edges, x)
}
