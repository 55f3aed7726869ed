//! Run configuration: defaults, then a JSON or TOML file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use flexlp_core::analysis::SweepParam;
use flexlp_core::flex::{Ablation, FlexConfig, PipelineConfig};
use flexlp_core::gnn::{EvalAdjacency, GnnTrainConfig};
use flexlp_core::graph::Heuristic;
use flexlp_core::sivi::GgmTrainConfig;
use flexlp_core::split::{Direction, SplitSpec};
use flexlp_core::synth::{FeatureMode, GraphFamily, SyntheticGraphSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every stage seed derives from it.
    pub seed: u64,
    /// Where artifacts are read from and written to.
    pub dir: PathBuf,
    /// Edge list; `<dir>/graph.tsv` when unset.
    pub edges: Option<PathBuf>,
    /// Feature CSV or mode such as `constant:1`; `<dir>/features.csv` when
    /// unset.
    pub features: Option<String>,
    /// Single-mechanism ablation applied to the generator and co-training.
    pub ablation: Option<Ablation>,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub gnn: GnnTrainConfig,
    pub ggm: GgmTrainConfig,
    pub flex: FlexConfig,
    pub eval: EvalConfig,
    pub analyze: AnalyzeConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dir: PathBuf::from("run"),
            edges: None,
            features: None,
            ablation: None,
            synth: SynthConfig::default(),
            split: SplitConfig::default(),
            gnn: GnnTrainConfig::default(),
            ggm: GgmTrainConfig::default(),
            flex: FlexConfig::default(),
            eval: EvalConfig::default(),
            analyze: AnalyzeConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub graph: GraphFamily,
    pub features: FeatureMode,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            graph: GraphFamily::Sbm {
                blocks: 4,
                nodes: 200,
                p_in: 0.15,
                p_out: 0.005,
                p_ring: None,
            },
            features: FeatureMode::Community(16),
        }
    }
}

/// Split settings; thresholds fall back to the standard pair of the
/// heuristic and direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub heuristic: Heuristic,
    pub direction: Direction,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub neg_ratio: f64,
    pub min_negatives: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::standard(Heuristic::CommonNeighbors, Direction::Backward, 0);
        SplitConfig {
            heuristic: s.heuristic,
            direction: s.direction,
            t1: None,
            t2: None,
            neg_ratio: s.neg_ratio,
            min_negatives: s.min_negatives,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub adjacency: EvalAdjacency,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 20,
            adjacency: EvalAdjacency::Observed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Threshold for the generated samples; `flex.gamma` when unset.
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    /// The parameter's default grid when unset.
    pub grid: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            param: SweepParam::Gamma,
            grid: None,
            seeds: vec![0, 1, 2],
        }
    }
}

impl RunConfig {
    /// Parses a file as TOML when it ends in `.toml`, JSON otherwise.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                CliError::config(format!("config file {} not found", path.display()))
            }
            _ => CliError::io(path, e),
        })?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        Self::parse(&text, is_toml)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, is_toml: bool) -> std::result::Result<Self, String> {
        if is_toml {
            toml::from_str(text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn edges_path(&self) -> PathBuf {
        self.edges
            .clone()
            .unwrap_or_else(|| self.dir.join(crate::paths::GRAPH))
    }

    pub fn features_source(&self) -> String {
        self.features.clone().unwrap_or_else(|| {
            self.dir
                .join(crate::paths::FEATURES)
                .to_string_lossy()
                .into_owned()
        })
    }

    pub fn synth_spec(&self) -> SyntheticGraphSpec {
        SyntheticGraphSpec {
            graph: self.synth.graph.clone(),
            features: self.synth.features,
            seed: self.seed,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        let std = SplitSpec::standard(self.split.heuristic, self.split.direction, self.seed);
        SplitSpec {
            t1: self.split.t1.unwrap_or(std.t1),
            t2: self.split.t2.unwrap_or(std.t2),
            neg_ratio: self.split.neg_ratio,
            min_negatives: self.split.min_negatives,
            ..std
        }
    }

    /// Training settings with every stage seeded from the root seed.
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            gnn: self.gnn.clone(),
            ggm: self.ggm.clone(),
            flex: self.flex.clone(),
        }
        .with_seed(self.seed)
        .ablated(self.ablation)
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec().validate()?;
        self.gnn.validate()?;
        self.ggm.validate()?;
        self.flex.validate()?;
        if self.eval.k == 0 {
            return Err(CliError::config("eval.k must be at least 1"));
        }
        if let Some(g) = self.analyze.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(CliError::config("analyze.gamma must lie in [0, 1)"));
            }
        }
        if self.sweep.seeds.is_empty() {
            return Err(CliError::config("sweep.seeds must not be empty"));
        }
        if self.sweep.grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(CliError::config("sweep.grid must not be empty"));
        }
        Ok(())
    }
}
