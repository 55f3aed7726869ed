//! Command-line arguments and how they override the run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use flexlp_core::analysis::SweepParam;
use flexlp_core::flex::{Ablation, UpdateRule};
use flexlp_core::gnn::EvalAdjacency;
use flexlp_core::graph::Heuristic;
use flexlp_core::split::Direction;
use flexlp_core::synth::{FeatureMode, GraphFamily};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Thread count for `sweep` and `analyze`; unset means one per core.
pub const THREADS_ENV: &str = "FLEX_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "flexlp",
    version,
    about = "Counterfactual subgraph co-training for link prediction under structural shift"
)]
#[command(
    after_help = "Exit codes: 0 success, 2 config error, 3 missing upstream artifact, \
4 numeric error, 5 validation error.\nSet FLEX_THREADS to cap the worker threads."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON or TOML run configuration (flags override it)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Artifact directory, read and written by every command
    #[arg(long, global = true)]
    pub dir: Option<PathBuf>,
    /// Root seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Edge list (`u<TAB>v` per line); defaults to <dir>/graph.tsv
    #[arg(long, global = true, value_name = "FILE")]
    pub edges: Option<PathBuf>,
    /// Feature CSV or a mode such as `constant:1` / `degree-onehot:8`
    #[arg(long, global = true, value_name = "FILE|MODE")]
    pub features: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic graph and write graph.tsv + features.csv
    Synth(SynthArgs),
    /// Build a structural-shift split and write split.json
    Split(SplitArgs),
    /// Pre-train the GCN link predictor
    PretrainGnn(GnnArgs),
    /// Pre-train the subgraph generator
    PretrainGgm(GgmArgs),
    /// Co-train both pre-trained models
    FlexTune(FlexArgs),
    /// Hits@K of a GCN checkpoint on the valid and test links
    Eval(EvalArgs),
    /// CN distributions, alignment and degree-bias scans of generated subgraphs
    Analyze(AnalyzeArgs),
    /// Co-training sensitivity over a parameter grid and several seeds
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Split(_) => "split",
            Command::PretrainGnn(_) => "pretrain-gnn",
            Command::PretrainGgm(_) => "pretrain-ggm",
            Command::FlexTune(_) => "flex-tune",
            Command::Eval(_) => "eval",
            Command::Analyze(_) => "analyze",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct SynthArgs {
    /// sbm, ba or er
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    /// Connection probability of neighbouring SBM blocks on a ring
    #[arg(long)]
    pub p_ring: Option<f64>,
    /// Edges per new BA node
    #[arg(long)]
    pub m: Option<usize>,
    /// ER edge probability
    #[arg(long)]
    pub p: Option<f64>,
    /// constant:<d>, degree-onehot:<D>, gaussian:<d> or community:<d>
    #[arg(long, value_parser = parse_core::<FeatureMode>)]
    pub feature_mode: Option<FeatureMode>,
}

#[derive(Debug, Default, Args)]
pub struct SplitArgs {
    /// CN, SP or PA
    #[arg(long, value_parser = parse_heuristic)]
    pub heuristic: Option<Heuristic>,
    /// forward or backward
    #[arg(long, value_parser = parse_direction)]
    pub direction: Option<Direction>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub t2: Option<f64>,
    #[arg(long)]
    pub neg_ratio: Option<f64>,
    #[arg(long)]
    pub min_negatives: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct GnnArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct GgmArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// no_seal_labels, no_lp_loss or no_sivi
    #[arg(long, value_parser = parse_core::<Ablation>)]
    pub ablation: Option<Ablation>,
}

#[derive(Debug, Default, Args)]
pub struct FlexArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Fixed KL target instead of the probed one
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lr_gnn: Option<f64>,
    #[arg(long)]
    pub lr_ggm: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// check-mode or literal-minmax
    #[arg(long, value_parser = parse_update_rule)]
    pub update_rule: Option<UpdateRule>,
    /// no_seal_labels, no_lp_loss or no_sivi
    #[arg(long, value_parser = parse_core::<Ablation>)]
    pub ablation: Option<Ablation>,
}

#[derive(Debug, Default, Args)]
pub struct EvalArgs {
    /// GCN checkpoint; defaults to <dir>/gnn.ckpt
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// observed or full
    #[arg(long, value_parser = parse_adjacency)]
    pub adjacency: Option<EvalAdjacency>,
}

#[derive(Debug, Default, Args)]
pub struct AnalyzeArgs {
    /// Generator checkpoint; defaults to <dir>/ggm.ckpt
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct SweepArgs {
    /// gamma, lr_gnn or alpha
    #[arg(long, value_parser = parse_core::<SweepParam>)]
    pub param: Option<SweepParam>,
    /// Comma-separated values
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

fn parse_core<T>(s: &str) -> std::result::Result<T, String>
where
    T: std::str::FromStr<Err = flexlp_core::Error>,
{
    s.parse().map_err(|e: flexlp_core::Error| e.to_string())
}

fn parse_heuristic(s: &str) -> std::result::Result<Heuristic, String> {
    match s.to_ascii_uppercase().as_str() {
        "CN" => Ok(Heuristic::CommonNeighbors),
        "SP" => Ok(Heuristic::ShortestPath),
        "PA" => Ok(Heuristic::PreferentialAttachment),
        _ => Err(format!("unknown heuristic `{s}` (CN, SP or PA)")),
    }
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    match s {
        "forward" => Ok(Direction::Forward),
        "backward" => Ok(Direction::Backward),
        _ => Err(format!("unknown direction `{s}` (forward or backward)")),
    }
}

fn parse_update_rule(s: &str) -> std::result::Result<UpdateRule, String> {
    match s {
        "check-mode" => Ok(UpdateRule::CheckMode),
        "literal-minmax" => Ok(UpdateRule::LiteralMinmax),
        _ => Err(format!(
            "unknown update rule `{s}` (check-mode or literal-minmax)"
        )),
    }
}

fn parse_adjacency(s: &str) -> std::result::Result<EvalAdjacency, String> {
    match s {
        "observed" => Ok(EvalAdjacency::Observed),
        "full" => Ok(EvalAdjacency::Full),
        _ => Err(format!("unknown adjacency `{s}` (observed or full)")),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl GlobalArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.dir, self.dir.clone());
        set(&mut cfg.seed, self.seed);
        if self.edges.is_some() {
            cfg.edges = self.edges.clone();
        }
        if self.features.is_some() {
            cfg.features = self.features.clone();
        }
    }
}

impl SynthArgs {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(f) = &self.family {
            let same = matches!(
                (f.as_str(), &cfg.synth.graph),
                ("sbm", GraphFamily::Sbm { .. })
                    | ("ba", GraphFamily::BarabasiAlbert { .. })
                    | ("er", GraphFamily::ErdosRenyi { .. })
            );
            if !same {
                let nodes = cfg.synth.graph.num_nodes();
                cfg.synth.graph = match f.as_str() {
                    "sbm" => crate::config::SynthConfig::default().graph,
                    "ba" => GraphFamily::BarabasiAlbert { nodes, m: 2 },
                    "er" => GraphFamily::ErdosRenyi { nodes, p: 0.05 },
                    _ => {
                        return Err(CliError::config(format!(
                            "unknown graph family `{f}` (sbm, ba or er)"
                        )))
                    }
                };
            }
        }
        let misplaced = |flag: &str| {
            CliError::config(format!(
                "--{flag} does not apply to the selected graph family"
            ))
        };
        match &mut cfg.synth.graph {
            GraphFamily::Sbm {
                blocks,
                nodes,
                p_in,
                p_out,
                p_ring,
            } => {
                set(nodes, self.nodes);
                set(blocks, self.blocks);
                set(p_in, self.p_in);
                set(p_out, self.p_out);
                if self.p_ring.is_some() {
                    *p_ring = self.p_ring;
                }
                if self.m.is_some() {
                    return Err(misplaced("m"));
                }
                if self.p.is_some() {
                    return Err(misplaced("p"));
                }
            }
            GraphFamily::BarabasiAlbert { nodes, m } => {
                set(nodes, self.nodes);
                set(m, self.m);
                if self.p.is_some() {
                    return Err(misplaced("p"));
                }
                self.no_sbm_flags().map_err(misplaced)?;
            }
            GraphFamily::ErdosRenyi { nodes, p } => {
                set(nodes, self.nodes);
                set(p, self.p);
                if self.m.is_some() {
                    return Err(misplaced("m"));
                }
                self.no_sbm_flags().map_err(misplaced)?;
            }
        }
        set(&mut cfg.synth.features, self.feature_mode);
        Ok(())
    }

    fn no_sbm_flags(&self) -> std::result::Result<(), &'static str> {
        let flags = [
            ("blocks", self.blocks.is_some()),
            ("p-in", self.p_in.is_some()),
            ("p-out", self.p_out.is_some()),
            ("p-ring", self.p_ring.is_some()),
        ];
        match flags.into_iter().find(|f| f.1) {
            Some((name, _)) => Err(name),
            None => Ok(()),
        }
    }
}

impl SplitArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.split;
        set(&mut s.heuristic, self.heuristic);
        set(&mut s.direction, self.direction);
        if self.t1.is_some() {
            s.t1 = self.t1;
        }
        if self.t2.is_some() {
            s.t2 = self.t2;
        }
        set(&mut s.neg_ratio, self.neg_ratio);
        set(&mut s.min_negatives, self.min_negatives);
    }
}

impl GnnArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let g = &mut cfg.gnn;
        set(&mut g.epochs, self.epochs);
        set(&mut g.patience, self.patience);
        set(&mut g.lr, self.lr);
        set(&mut g.hidden, self.hidden);
        set(&mut g.layers, self.layers);
        set(&mut g.dropout, self.dropout);
    }
}

impl GgmArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let g = &mut cfg.ggm;
        set(&mut g.epochs, self.epochs);
        set(&mut g.patience, self.patience);
        set(&mut g.lr, self.lr);
        if self.ablation.is_some() {
            cfg.ablation = self.ablation;
        }
    }
}

impl FlexArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let f = &mut cfg.flex;
        set(&mut f.alpha, self.alpha);
        set(&mut f.gamma, self.gamma);
        if self.tau.is_some() {
            f.tau = self.tau;
        }
        set(&mut f.lr_gnn, self.lr_gnn);
        set(&mut f.lr_ggm, self.lr_ggm);
        set(&mut f.epochs, self.epochs);
        set(&mut f.patience, self.patience);
        set(&mut f.update_rule, self.update_rule);
        if self.ablation.is_some() {
            cfg.ablation = self.ablation;
        }
    }
}

impl EvalArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.eval.k, self.k);
        set(&mut cfg.eval.adjacency, self.adjacency);
    }
}

impl AnalyzeArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if self.gamma.is_some() {
            cfg.analyze.gamma = self.gamma;
        }
    }
}

impl SweepArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.sweep.param, self.param);
        if self.grid.is_some() {
            cfg.sweep.grid = self.grid.clone();
        }
        set(&mut cfg.sweep.seeds, self.seeds.clone());
    }
}

/// Defaults, then the config file, then global and command flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cli.global.apply(&mut cfg);
    match &cli.command {
        Command::Synth(a) => a.apply(&mut cfg)?,
        Command::Split(a) => a.apply(&mut cfg),
        Command::PretrainGnn(a) => a.apply(&mut cfg),
        Command::PretrainGgm(a) => a.apply(&mut cfg),
        Command::FlexTune(a) => a.apply(&mut cfg),
        Command::Eval(a) => a.apply(&mut cfg),
        Command::Analyze(a) => a.apply(&mut cfg),
        Command::Sweep(a) => a.apply(&mut cfg),
    }
    cfg.validate()?;
    Ok(cfg)
}
