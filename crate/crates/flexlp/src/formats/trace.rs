//! CSV traces and report tables.

use flexlp_core::analysis::{DegreeBiasScan, HeuristicHistogram, SweepResult};
use flexlp_core::flex::CotrainRecord;
use flexlp_core::gnn::GnnEpochRecord;
use flexlp_core::sivi::GgmEpochRecord;

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// `seconds[i]` is the wall-clock time since training started when epoch
/// `i` finished.
pub fn gnn_trace_csv(trace: &[GnnEpochRecord], seconds: &[f64]) -> String {
    table(
        &["epoch", "train_loss", "valid_hits", "seconds"],
        trace.iter().enumerate().map(|(i, r)| {
            vec![
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.valid_hits.to_string(),
                seconds.get(i).map_or(String::new(), |s| format!("{s:.3}")),
            ]
        }),
    )
}

pub fn ggm_trace_csv(trace: &[GgmEpochRecord]) -> String {
    table(
        &["epoch", "loss", "kl", "recon_loss"],
        trace.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                r.loss.to_string(),
                r.kl.to_string(),
                r.recon_loss.to_string(),
            ]
        }),
    )
}

pub fn flex_trace_csv(trace: &[CotrainRecord]) -> String {
    table(
        &[
            "epoch",
            "lp_loss",
            "sivi_loss",
            "kl_estimate",
            "penalty",
            "mean_generated_cn",
            "valid_hits",
        ],
        trace.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                r.lp_loss.to_string(),
                r.sivi_loss.to_string(),
                r.kl_estimate.to_string(),
                r.penalty.to_string(),
                r.mean_generated_cn.to_string(),
                r.valid_hits.to_string(),
            ]
        }),
    )
}

/// One row per bucket of every histogram.
pub fn histograms_csv(hists: &[HeuristicHistogram]) -> String {
    table(
        &["heuristic", "source", "lo", "hi", "count"],
        hists.iter().flat_map(|h| {
            h.counts.iter().enumerate().map(move |(i, c)| {
                vec![
                    h.heuristic.short_name().to_string(),
                    format!("{:?}", h.source).to_lowercase(),
                    h.bucket_edges[i].to_string(),
                    h.bucket_edges[i + 1].to_string(),
                    c.to_string(),
                ]
            })
        }),
    )
}

pub fn degree_bias_csv(scans: &[(&str, &DegreeBiasScan)]) -> String {
    table(
        &["source", "nodes", "mean_cn"],
        scans.iter().flat_map(|(name, s)| {
            s.points
                .iter()
                .map(move |p| vec![name.to_string(), p.nodes.to_string(), p.mean_cn.to_string()])
        }),
    )
}

pub fn sweep_csv(r: &SweepResult) -> String {
    table(
        &["param", "value", "mean", "std", "seeds_ok", "seeds_failed"],
        r.points.iter().map(|p| {
            vec![
                r.param.name().to_string(),
                p.value.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
                p.per_seed.len().to_string(),
                p.failures.len().to_string(),
            ]
        }),
    )
}

/// Hits@K per bucket as printed by `eval`.
pub fn eval_csv(checkpoint: &str, k: usize, rows: &[(&str, f64)]) -> String {
    table(
        &["checkpoint", "bucket", "k", "hits"],
        rows.iter().map(|(b, h)| {
            vec![
                checkpoint.to_string(),
                b.to_string(),
                k.to_string(),
                h.to_string(),
            ]
        }),
    )
}
