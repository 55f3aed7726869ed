//! Split JSON: the split settings, their seed and the six edge lists.

use std::fs;
use std::path::Path;

use flexlp_core::graph::Graph;
use flexlp_core::split::{verify_split, DatasetSplit, SplitReport, SplitSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::EdgeList;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub spec: SplitSpec,
    pub seed: u64,
    pub num_nodes: usize,
    pub train_pos: EdgeList,
    pub valid_pos: EdgeList,
    pub test_pos: EdgeList,
    pub train_neg: EdgeList,
    pub valid_neg: EdgeList,
    pub test_neg: EdgeList,
}

impl SplitFile {
    pub fn from_split(split: &DatasetSplit) -> Self {
        SplitFile {
            spec: split.spec.clone(),
            seed: split.spec.seed,
            num_nodes: split.observed_graph.num_nodes(),
            train_pos: split.train_pos.clone(),
            valid_pos: split.valid_pos.clone(),
            test_pos: split.test_pos.clone(),
            train_neg: split.train_neg.clone(),
            valid_neg: split.valid_neg.clone(),
            test_neg: split.test_neg.clone(),
        }
    }

    /// Rebuilds the split on `g` and re-runs the oracle verification.
    pub fn into_split(self, g: &Graph) -> Result<(DatasetSplit, SplitReport)> {
        if self.num_nodes != g.num_nodes() {
            return Err(CliError::validation(format!(
                "split was made for {} nodes, graph has {}",
                self.num_nodes,
                g.num_nodes()
            )));
        }
        if self.seed != self.spec.seed {
            return Err(CliError::validation(format!(
                "split seed {} disagrees with its spec seed {}",
                self.seed, self.spec.seed
            )));
        }
        let split = DatasetSplit::from_parts(
            g,
            self.spec,
            [self.train_pos, self.valid_pos, self.test_pos],
            [self.train_neg, self.valid_neg, self.test_neg],
        )?;
        let report = verify_split(g, &split)?;
        Ok((split, report))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::formats::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}
