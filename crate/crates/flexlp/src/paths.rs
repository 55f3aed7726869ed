//! Artifact file names inside the run directory.

pub const GRAPH: &str = "graph.tsv";
pub const FEATURES: &str = "features.csv";
pub const SPLIT: &str = "split.json";
pub const SPLIT_REPORT: &str = "split_report.json";
pub const GNN_CKPT: &str = "gnn.ckpt";
pub const GNN_TRACE: &str = "gnn_trace.csv";
pub const GGM_CKPT: &str = "ggm.ckpt";
pub const GGM_TRACE: &str = "ggm_trace.csv";
pub const FLEX_GNN_CKPT: &str = "flex_gnn.ckpt";
pub const FLEX_GGM_CKPT: &str = "flex_ggm.ckpt";
pub const FLEX_TRACE: &str = "flex_trace.csv";
pub const EVAL_CSV: &str = "eval.csv";
pub const ANALYSIS: &str = "analysis.json";
pub const CN_HISTOGRAMS: &str = "cn_histograms.csv";
pub const DEGREE_BIAS: &str = "degree_bias.csv";
pub const GENERATED: &str = "generated.json";
pub const SWEEP: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";

/// The command that writes `file`, for dependency hints.
pub fn producer(file: &str) -> Option<&'static str> {
    Some(match file {
        GRAPH | FEATURES => "synth",
        SPLIT => "split",
        GNN_CKPT => "pretrain-gnn",
        GGM_CKPT => "pretrain-ggm",
        FLEX_GNN_CKPT | FLEX_GGM_CKPT => "flex-tune",
        _ => return None,
    })
}
