//! Structural alignment, degree-bias scans and hyperparameter sweeps.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Tensor;
use crate::flex::{self, PipelineConfig};
use crate::gnn::{self, GcnModel, NoHook};
use crate::graph::{Heuristic, LabeledSubgraph};
use crate::math;
use crate::sivi::{self, GeneratedSample, SiviModel};
use crate::split::DatasetSplit;
use crate::{Error, Result};

/// Where a set of heuristic values came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SourceTag {
    Train,
    Valid,
    Test,
    Generated,
}

/// Bucketed heuristic values.
///
/// Bucket `i` covers `[bucket_edges[i], bucket_edges[i + 1])`; the last
/// bucket also holds `+inf` when its upper edge is infinite. CN and SP use
/// unit buckets, PA doubles its bucket width.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeuristicHistogram {
    pub heuristic: Heuristic,
    pub source: SourceTag,
    pub bucket_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Plain mean of the raw values (`0` when empty).
    pub mean: f64,
    pub total: usize,
}

impl HeuristicHistogram {
    pub fn from_values(heuristic: Heuristic, source: SourceTag, values: &[f64]) -> Self {
        let total = values.len();
        if total == 0 {
            return HeuristicHistogram {
                heuristic,
                source,
                bucket_edges: Vec::new(),
                counts: Vec::new(),
                mean: 0.0,
                total,
            };
        }
        let mean = values.iter().sum::<f64>() / total as f64;
        let max_finite = values
            .iter()
            .copied()
            .filter(|x| x.is_finite())
            .fold(0.0, f64::max);
        let has_inf = values.iter().any(|x| x.is_infinite());
        let mut edges = vec![0.0];
        match heuristic {
            Heuristic::PreferentialAttachment => {
                let mut e = 1.0;
                while e <= max_finite {
                    edges.push(e);
                    e *= 2.0;
                }
                edges.push(e);
            }
            _ => {
                let top = math::floor(max_finite) as usize;
                edges.extend((1..=top + 1).map(|k| k as f64));
            }
        }
        if has_inf {
            edges.push(f64::INFINITY);
        }
        let mut counts = vec![0usize; edges.len() - 1];
        for &x in values {
            let i = if x.is_infinite() {
                counts.len() - 1
            } else {
                edges.partition_point(|&e| e <= x) - 1
            };
            counts[i] += 1;
        }
        HeuristicHistogram {
            heuristic,
            source,
            bucket_edges: edges,
            counts,
            mean,
            total,
        }
    }
}

/// A dense 0/1 (or weighted, read as `> 0`) adjacency with an optional
/// target link.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphSample {
    pub adjacency: Tensor,
    pub target: Option<(usize, usize)>,
}

pub fn samples_from_generated(s: &GeneratedSample) -> Vec<SubgraphSample> {
    s.thresholded_adj
        .iter()
        .zip(&s.target_indices)
        .map(|(a, &t)| SubgraphSample {
            adjacency: a.clone(),
            target: Some(t),
        })
        .collect()
}

pub fn samples_from_subgraphs(subs: &[LabeledSubgraph]) -> Vec<SubgraphSample> {
    subs.iter()
        .map(|s| SubgraphSample {
            adjacency: s.dense_adjacency(),
            target: Some(s.target),
        })
        .collect()
}

/// Common neighbours of `u` and `v` in a dense adjacency.
pub fn dense_common_neighbors(a: &Tensor, u: usize, v: usize) -> usize {
    (0..a.rows())
        .filter(|&k| k != u && k != v && a.get(u, k) > 0.0 && a.get(v, k) > 0.0)
        .count()
}

/// CN at the target link of every sample.
pub fn cn_distribution(
    samples: &[SubgraphSample],
    source: SourceTag,
) -> Result<HeuristicHistogram> {
    let values = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (u, v) = s
                .target
                .ok_or_else(|| Error::input(format!("sample {i} has no target link")))?;
            if u >= s.adjacency.rows() || v >= s.adjacency.rows() {
                return Err(Error::input(format!(
                    "sample {i} target outside its adjacency"
                )));
            }
            Ok(dense_common_neighbors(&s.adjacency, u, v) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeuristicHistogram::from_values(
        Heuristic::CommonNeighbors,
        source,
        &values,
    ))
}

/// `train_gap / gen_gap`, or `Exact` when the generated mean hits the
/// validation mean.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Ratio {
    Exact,
    Finite(f64),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignmentReport {
    pub heuristic: Heuristic,
    /// `|mean(generated) − mean(valid)|`.
    pub gen_gap: f64,
    /// `|mean(train) − mean(valid)|`.
    pub train_gap: f64,
    pub ratio: Ratio,
}

/// Compares how close generated and train distributions sit to the
/// validation distribution.
pub fn alignment_report(
    train: &HeuristicHistogram,
    valid: &HeuristicHistogram,
    generated: &HeuristicHistogram,
) -> Result<AlignmentReport> {
    if train.heuristic != valid.heuristic || generated.heuristic != valid.heuristic {
        return Err(Error::input("alignment needs histograms of one heuristic"));
    }
    let gen_gap = math::abs(generated.mean - valid.mean);
    let train_gap = math::abs(train.mean - valid.mean);
    let ratio = if gen_gap == 0.0 {
        Ratio::Exact
    } else {
        Ratio::Finite(train_gap / gen_gap)
    };
    Ok(AlignmentReport {
        heuristic: valid.heuristic,
        gen_gap,
        train_gap,
        ratio,
    })
}

/// Mean CN over all node pairs of a block.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegreePoint {
    pub mean_cn: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegreeBiasScan {
    pub points: Vec<DegreePoint>,
    /// Least-squares slope of `mean_cn` against `nodes`.
    pub slope: f64,
}

/// Mean of CN(i, j) over the pairs `i < j` (`0` below two nodes).
pub fn mean_pairwise_cn(a: &Tensor) -> f64 {
    let n = a.rows();
    if n < 2 {
        return 0.0;
    }
    let b = a.map(|x| if x > 0.0 { 1.0 } else { 0.0 });
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += (0..n)
                .filter(|&k| k != i && k != j)
                .map(|k| b.get(i, k) * b.get(j, k))
                .sum::<f64>();
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Ordinary least-squares slope; `0` when `x` has no spread.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    let sxy: f64 = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    sxy / sxx
}

/// Mean pairwise CN against block size, with the fitted slope.
pub fn degree_bias_scan(samples: &[SubgraphSample]) -> Result<DegreeBiasScan> {
    if samples.is_empty() {
        return Err(Error::input("degree-bias scan needs at least one sample"));
    }
    let points: Vec<DegreePoint> = samples
        .iter()
        .map(|s| DegreePoint {
            mean_cn: mean_pairwise_cn(&s.adjacency),
            nodes: s.adjacency.rows(),
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.nodes as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_cn).collect();
    Ok(DegreeBiasScan {
        slope: least_squares_slope(&xs, &ys),
        points,
    })
}

/// Co-training knob swept by [`run_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepParam {
    Gamma,
    LrGnn,
    Alpha,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::LrGnn => "lr_gnn",
            SweepParam::Alpha => "alpha",
        }
    }

    pub fn apply(self, cfg: &mut PipelineConfig, value: f64) {
        match self {
            SweepParam::Gamma => cfg.flex.gamma = value,
            SweepParam::LrGnn => cfg.flex.lr_gnn = value,
            SweepParam::Alpha => cfg.flex.alpha = value,
        }
    }

    /// The grid usually swept for this parameter.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepParam::Gamma => vec![0.0, 0.25, 0.5, 0.75, 0.9, 0.9999],
            SweepParam::LrGnn => vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            SweepParam::Alpha => vec![0.5, 0.7, 0.95, 1.05],
        }
    }
}

impl core::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepParam::Gamma, SweepParam::LrGnn, SweepParam::Alpha]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub value: f64,
    /// Mean / population std of the successful seeds' test Hits@K.
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<(u64, f64)>,
    pub failures: Vec<(u64, String)>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub param: SweepParam,
    pub grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

/// Both pre-trained models of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Pretrained {
    pub gnn: GcnModel,
    pub ggm: SiviModel,
}

pub fn pretrain_for_seed(
    split: &DatasetSplit,
    base: &PipelineConfig,
    seed: u64,
) -> Result<Pretrained> {
    let cfg = base.with_seed(seed);
    let gnn = gnn::pretrain_gnn(split, &cfg.gnn, &mut NoHook)?.model;
    let ggm = sivi::pretrain_ggm(split, &cfg.ggm)?.model;
    Ok(Pretrained { gnn, ggm })
}

/// Test Hits@K of the validation-selected co-trained GCN at one grid value.
pub fn run_sweep_point(
    pre: &Pretrained,
    split: &DatasetSplit,
    base: &PipelineConfig,
    param: SweepParam,
    value: f64,
    seed: u64,
) -> Result<f64> {
    let mut cfg = base.with_seed(seed);
    param.apply(&mut cfg, value);
    let out = flex::flex_tune(&pre.gnn, &pre.ggm, split, &cfg.flex)?;
    flex::test_hits(&out.gnn, split, cfg.flex.eval_k, cfg.flex.eval_adjacency)
}

/// Folds per-seed outcomes (`outcomes[g][s]` for grid point `g`, seed `s`)
/// into a sweep result.
pub fn aggregate_sweep(
    param: SweepParam,
    grid: &[f64],
    seeds: &[u64],
    outcomes: Vec<Vec<Result<f64>>>,
) -> SweepResult {
    let points = grid
        .iter()
        .zip(outcomes)
        .map(|(&value, runs)| {
            let mut per_seed = Vec::new();
            let mut failures = Vec::new();
            for (&s, r) in seeds.iter().zip(runs) {
                match r {
                    Ok(h) => per_seed.push((s, h)),
                    Err(e) => failures.push((s, e.to_string())),
                }
            }
            let n = per_seed.len().max(1) as f64;
            let mean = per_seed.iter().map(|p| p.1).sum::<f64>() / n;
            let var = per_seed
                .iter()
                .map(|p| (p.1 - mean) * (p.1 - mean))
                .sum::<f64>()
                / n;
            SweepPoint {
                value,
                mean,
                std: math::sqrt(var),
                per_seed,
                failures,
            }
        })
        .collect();
    SweepResult {
        param,
        grid: grid.to_vec(),
        points,
    }
}

/// Pre-trains once per seed, then co-trains at every grid value. Failures
/// are recorded per point and do not stop the sweep.
pub fn run_sweep(
    split: &DatasetSplit,
    base: &PipelineConfig,
    param: SweepParam,
    grid: &[f64],
    seeds: &[u64],
) -> Result<SweepResult> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::config(
            "sweep needs a non-empty grid and at least one seed",
        ));
    }
    let pre: Vec<Result<Pretrained>> = seeds
        .iter()
        .map(|&s| pretrain_for_seed(split, base, s))
        .collect();
    let outcomes = grid
        .iter()
        .map(|&value| {
            seeds
                .iter()
                .zip(&pre)
                .map(|(&s, p)| match p {
                    Ok(p) => run_sweep_point(p, split, base, param, value, s),
                    Err(e) => Err(e.clone()),
                })
                .collect()
        })
        .collect();
    Ok(aggregate_sweep(param, grid, seeds, outcomes))
}
