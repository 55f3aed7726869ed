use alloc::collections::VecDeque;
use alloc::vec;

use super::Graph;
use crate::Result;

/// Hop distance between two nodes, or unreachable.
///
/// `Unreachable` orders above every finite length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathLength {
    Hops(usize),
    Unreachable,
}

impl PathLength {
    /// Finite lengths as-is, unreachable as `+inf`.
    pub fn as_f64(self) -> f64 {
        match self {
            PathLength::Hops(h) => h as f64,
            PathLength::Unreachable => f64::INFINITY,
        }
    }
}

/// Link heuristics used to define structural shifts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Heuristic {
    #[cfg_attr(feature = "serde", serde(rename = "CN"))]
    CommonNeighbors,
    #[cfg_attr(feature = "serde", serde(rename = "SP"))]
    ShortestPath,
    #[cfg_attr(feature = "serde", serde(rename = "PA"))]
    PreferentialAttachment,
}

impl Heuristic {
    pub fn short_name(self) -> &'static str {
        match self {
            Heuristic::CommonNeighbors => "CN",
            Heuristic::ShortestPath => "SP",
            Heuristic::PreferentialAttachment => "PA",
        }
    }

    /// Whether values are integral (CN, SP) rather than products (PA).
    pub fn is_integral(self) -> bool {
        !matches!(self, Heuristic::PreferentialAttachment)
    }

    /// Evaluates the heuristic for `(u, v)`. Shortest paths skip the direct
    /// edge when it exists, so an existing link does not trivially score 1.
    pub fn evaluate(self, g: &Graph, u: usize, v: usize) -> Result<f64> {
        Ok(match self {
            Heuristic::CommonNeighbors => common_neighbors(g, u, v)? as f64,
            Heuristic::ShortestPath => shortest_path_length(g, u, v, true)?.as_f64(),
            Heuristic::PreferentialAttachment => preferential_attachment(g, u, v)? as f64,
        })
    }
}

/// `|N(u) ∩ N(v)|`, excluding `u` and `v` themselves.
pub fn common_neighbors(g: &Graph, u: usize, v: usize) -> Result<usize> {
    g.check_node(u)?;
    g.check_node(v)?;
    let (a, b) = (g.neighbors(u), g.neighbors(v));
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                if a[i] != u && a[i] != v {
                    count += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    Ok(count)
}

/// BFS hop count from `u` to `v`. With `exclude_edge`, the direct edge
/// `(u, v)` (if present) is ignored during the search.
pub fn shortest_path_length(
    g: &Graph,
    u: usize,
    v: usize,
    exclude_edge: bool,
) -> Result<PathLength> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Ok(PathLength::Hops(0));
    }
    let n = g.num_nodes();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    dist[u] = 0;
    queue.push_back(u);
    while let Some(x) = queue.pop_front() {
        for &y in g.neighbors(x) {
            if exclude_edge && ((x == u && y == v) || (x == v && y == u)) {
                continue;
            }
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                if y == v {
                    return Ok(PathLength::Hops(dist[y]));
                }
                queue.push_back(y);
            }
        }
    }
    Ok(PathLength::Unreachable)
}

/// `deg(u) * deg(v)`.
pub fn preferential_attachment(g: &Graph, u: usize, v: usize) -> Result<u64> {
    g.check_node(u)?;
    g.check_node(v)?;
    Ok(g.degree(u) as u64 * g.degree(v) as u64)
}
