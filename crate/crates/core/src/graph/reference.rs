//! Brute-force heuristic oracles.
//!
//! These deliberately share no code with the production heuristics: common
//! neighbours go through ordered sets, shortest paths through a dense
//! adjacency matrix with full relaxation, and degrees are counted by a scan
//! over the edge list. [`crate::split::verify_split`] checks splits with
//! these.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{Graph, Heuristic};

fn neighbor_set(g: &Graph, u: usize) -> BTreeSet<usize> {
    g.edges()
        .filter_map(|(a, b)| {
            if a == u {
                Some(b)
            } else if b == u {
                Some(a)
            } else {
                None
            }
        })
        .collect()
}

pub fn common_neighbors(g: &Graph, u: usize, v: usize) -> usize {
    let nu = neighbor_set(g, u);
    let nv = neighbor_set(g, v);
    nu.intersection(&nv).filter(|&&w| w != u && w != v).count()
}

/// Hop distance with the direct edge removed; `None` when unreachable.
pub fn shortest_path_excluding_edge(g: &Graph, u: usize, v: usize) -> Option<usize> {
    let n = g.num_nodes();
    let mut adj = vec![vec![false; n]; n];
    for (a, b) in g.edges() {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    adj[u][v] = false;
    adj[v][u] = false;
    // Frontier expansion over the dense matrix until nothing changes.
    let mut reached = vec![false; n];
    reached[u] = true;
    let mut frontier: Vec<usize> = vec![u];
    let mut hops = 0;
    while !frontier.is_empty() {
        if reached[v] {
            return Some(hops);
        }
        hops += 1;
        let mut next = Vec::new();
        for &x in &frontier {
            for y in 0..n {
                if adj[x][y] && !reached[y] {
                    reached[y] = true;
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    if reached[v] {
        Some(hops)
    } else {
        None
    }
}

pub fn preferential_attachment(g: &Graph, u: usize, v: usize) -> u64 {
    let count = |x: usize| g.edges().filter(|&(a, b)| a == x || b == x).count() as u64;
    count(u) * count(v)
}

/// Oracle value of `h` for `(u, v)`, with the same conventions as
/// [`Heuristic::evaluate`].
pub fn evaluate(h: Heuristic, g: &Graph, u: usize, v: usize) -> f64 {
    match h {
        Heuristic::CommonNeighbors => common_neighbors(g, u, v) as f64,
        Heuristic::ShortestPath => {
            shortest_path_excluding_edge(g, u, v).map_or(f64::INFINITY, |h| h as f64)
        }
        Heuristic::PreferentialAttachment => preferential_attachment(g, u, v) as f64,
    }
}
