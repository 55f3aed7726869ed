//! Edge-list and feature ingestion.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flexlp_core::autodiff::Tensor;
use flexlp_core::graph::Graph;
use flexlp_core::rng;
use flexlp_core::synth::{make_features, FeatureMode};

use crate::error::{CliError, Result};

pub type EdgeList = Vec<(usize, usize)>;

/// Parses `u<TAB>v` lines with 0-based ids. Blank lines and lines starting
/// with `#` are skipped; anything else malformed is reported with its line
/// number.
pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CliError::validation(format!(
                "line {lineno}: expected `u<TAB>v`, got `{line}`"
            )));
        };
        let id = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::validation(format!("line {lineno}: `{s}` is not a node id")))
        };
        let (u, v) = (id(a)?, id(b)?);
        if u == v {
            return Err(CliError::validation(format!(
                "line {lineno}: self-loop on node {u}"
            )));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(CliError::validation(format!(
                "line {lineno}: duplicate edge ({u}, {v})"
            )));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_edge_list(&text).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn format_edge_list(edges: &[(usize, usize)]) -> String {
    let mut out = String::with_capacity(edges.len() * 8);
    for &(u, v) in edges {
        let _ = writeln!(out, "{u}\t{v}");
    }
    out
}

/// Reads an `n x d` CSV of numbers without a header row.
pub fn read_features_csv(path: &Path) -> Result<Tensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        CliError::validation(format!(
                            "{} row {}: `{s}` is not a finite number",
                            path.display(),
                            i + 1
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no feature rows",
            path.display()
        )));
    }
    Tensor::from_rows(&rows).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::validation(format!("{}: {other:?}", path.display())),
    }
}

pub fn format_features_csv(x: &Tensor) -> String {
    let mut out = String::new();
    for r in 0..x.rows() {
        let row: Vec<String> = x.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Where node features come from: a CSV file or a synthetic mode.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureSource {
    File(PathBuf),
    Mode(FeatureMode),
}

impl FromStr for FeatureSource {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let looks_like_mode = s.split_once(':').is_some_and(|(k, _)| {
            !k.is_empty() && k.chars().all(|c| c.is_ascii_lowercase() || c == '-')
        });
        if looks_like_mode {
            s.parse::<FeatureMode>()
                .map(FeatureSource::Mode)
                .map_err(|e| CliError::config(e.to_string()))
        } else {
            Ok(FeatureSource::File(PathBuf::from(s)))
        }
    }
}

/// Loads a graph. With a feature file the node count is its row count,
/// otherwise the largest id plus one. Synthetic modes use `seed`.
pub fn load_graph(edges_path: &Path, features: &FeatureSource, seed: u64) -> Result<Graph> {
    let edges = read_edge_list(edges_path)?;
    let max_id = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let x = match features {
        FeatureSource::File(p) => read_features_csv(p)?,
        FeatureSource::Mode(mode) => {
            let mut r = rng::stream(seed, "features");
            make_features(*mode, &edges, &vec![0; max_id], &mut r)
        }
    };
    if max_id > x.rows() {
        return Err(CliError::validation(format!(
            "edge list references node {} but features cover {} nodes",
            max_id - 1,
            x.rows()
        )));
    }
    Ok(Graph::from_edges(x.rows(), &edges, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        assert_eq!(
            parse_edge_list("0\t1\n1\t2\n").unwrap(),
            vec![(0, 1), (1, 2)]
        );
        let e = parse_edge_list("0\t1\n\n2\t2\n").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("self-loop"), "{e}");
        let e = parse_edge_list("0\t1\n1\t0\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("duplicate"), "{e}");
        let e = parse_edge_list("0 1\n").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
        assert!(parse_edge_list("# comment\n0\t1\n").is_ok());
        assert!(parse_edge_list("0\t-1\n").is_err());
    }

    #[test]
    fn feature_sources() {
        assert_eq!(
            "constant:3".parse::<FeatureSource>().unwrap(),
            FeatureSource::Mode(FeatureMode::Constant(3))
        );
        assert_eq!(
            "data/x.csv".parse::<FeatureSource>().unwrap(),
            FeatureSource::File("data/x.csv".into())
        );
        assert!("degree-onehot:0".parse::<FeatureSource>().is_err());
    }
}
