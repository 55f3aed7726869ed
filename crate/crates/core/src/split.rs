//! Structural-shift dataset splits.
//!
//! Positive links are bucketed into train / valid / test by thresholding a
//! link heuristic computed once on the full source graph. In the forward
//! direction heuristic values grow from train to test; backward reverses
//! that.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use crate::analysis::{HeuristicHistogram, SourceTag};
use crate::graph::{reference, Graph, Heuristic};
use crate::rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    Train,
    Valid,
    Test,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Train, Bucket::Valid, Bucket::Test];

    pub fn name(self) -> &'static str {
        match self {
            Bucket::Train => "train",
            Bucket::Valid => "valid",
            Bucket::Test => "test",
        }
    }
}

/// Half-open heuristic range `[lo, hi)`; `hi` may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    /// Membership; `+inf` (unreachable) belongs to the range whose upper end
    /// is infinite.
    pub fn contains(&self, x: f64) -> bool {
        if x == f64::INFINITY {
            return self.hi == f64::INFINITY;
        }
        x >= self.lo && x < self.hi
    }
}

/// Parameters of one structural-shift split.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SplitSpec {
    pub heuristic: Heuristic,
    pub direction: Direction,
    pub t1: f64,
    pub t2: f64,
    /// Negatives per positive in each bucket.
    #[cfg_attr(feature = "serde", serde(default = "default_neg_ratio"))]
    pub neg_ratio: f64,
    /// Floor on negatives per bucket, so Hits@K stays defined on small
    /// buckets.
    #[cfg_attr(feature = "serde", serde(default = "default_min_negatives"))]
    pub min_negatives: usize,
    pub seed: u64,
}

#[cfg(feature = "serde")]
fn default_neg_ratio() -> f64 {
    1.0
}

#[cfg(feature = "serde")]
fn default_min_negatives() -> usize {
    200
}

/// How the threshold pair was read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThresholdOrder {
    /// Smaller-first for forward, larger-first for backward.
    AsGiven,
    /// The pair arrived in the opposite order and was swapped before use.
    Swapped,
}

/// The three bucket ranges of a spec after orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketRanges {
    pub train: Range,
    pub valid: Range,
    pub test: Range,
    pub order: ThresholdOrder,
}

impl BucketRanges {
    pub fn range(&self, b: Bucket) -> Range {
        match b {
            Bucket::Train => self.train,
            Bucket::Valid => self.valid,
            Bucket::Test => self.test,
        }
    }

    pub fn bucket_of(&self, x: f64) -> Bucket {
        Bucket::ALL
            .into_iter()
            .find(|&b| self.range(b).contains(x))
            .expect("ranges partition [0, inf]")
    }
}

impl SplitSpec {
    /// The standard parameter pairs: forward `(smaller, larger)`,
    /// backward `(larger, smaller)`, except PA which is listed the other way
    /// round and gets reoriented by [`SplitSpec::ranges`].
    pub fn standard(heuristic: Heuristic, direction: Direction, seed: u64) -> Self {
        let (t1, t2) = match (heuristic, direction) {
            (Heuristic::CommonNeighbors, Direction::Forward) => (1.0, 2.0),
            (Heuristic::CommonNeighbors, Direction::Backward) => (2.0, 1.0),
            (Heuristic::ShortestPath, Direction::Forward) => (17.0, 26.0),
            (Heuristic::ShortestPath, Direction::Backward) => (26.0, 17.0),
            (Heuristic::PreferentialAttachment, Direction::Forward) => (100.0, 50.0),
            (Heuristic::PreferentialAttachment, Direction::Backward) => (50.0, 100.0),
        };
        SplitSpec {
            heuristic,
            direction,
            t1,
            t2,
            neg_ratio: 1.0,
            min_negatives: 200,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in [self.t1, self.t2] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::config(format!(
                    "threshold {t} must be finite and >= 0"
                )));
            }
            if self.heuristic.is_integral() && crate::math::floor(t) != t {
                return Err(Error::config(format!(
                    "{} thresholds must be integers, got {t}",
                    self.heuristic.short_name()
                )));
            }
        }
        if self.t1 == self.t2 {
            return Err(Error::config(
                "thresholds must differ (valid bucket would be empty)",
            ));
        }
        if !(self.neg_ratio.is_finite() && self.neg_ratio >= 0.0) {
            return Err(Error::config("neg_ratio must be finite and non-negative"));
        }
        Ok(())
    }

    /// Orients the threshold pair into bucket ranges.
    ///
    /// With `lo < hi` the low range `[0, lo)`, the middle `[lo, hi)` and the
    /// high range `[hi, inf)` go to train / valid / test in forward order and
    /// test / valid / train in backward order.
    pub fn ranges(&self) -> BucketRanges {
        let (lo, hi) = (self.t1.min(self.t2), self.t1.max(self.t2));
        let low = Range { lo: 0.0, hi: lo };
        let mid = Range { lo, hi };
        let high = Range {
            lo: hi,
            hi: f64::INFINITY,
        };
        let canonical = match self.direction {
            Direction::Forward => self.t1 < self.t2,
            Direction::Backward => self.t1 > self.t2,
        };
        let order = if canonical {
            ThresholdOrder::AsGiven
        } else {
            ThresholdOrder::Swapped
        };
        match self.direction {
            Direction::Forward => BucketRanges {
                train: low,
                valid: mid,
                test: high,
                order,
            },
            Direction::Backward => BucketRanges {
                train: high,
                valid: mid,
                test: low,
                order,
            },
        }
    }
}

/// Positive and negative links of the three buckets plus the graph the
/// model is allowed to see during training.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub valid_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub valid_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    /// Same nodes and features as the source graph, train positives only.
    pub observed_graph: Graph,
    pub spec: SplitSpec,
}

impl DatasetSplit {
    pub fn positives(&self, b: Bucket) -> &[(usize, usize)] {
        match b {
            Bucket::Train => &self.train_pos,
            Bucket::Valid => &self.valid_pos,
            Bucket::Test => &self.test_pos,
        }
    }

    pub fn negatives(&self, b: Bucket) -> &[(usize, usize)] {
        match b {
            Bucket::Train => &self.train_neg,
            Bucket::Valid => &self.valid_neg,
            Bucket::Test => &self.test_neg,
        }
    }

    /// Reassembles a split from stored edge lists (e.g. after loading),
    /// rebuilding the observed graph from `g`.
    pub fn from_parts(
        g: &Graph,
        spec: SplitSpec,
        pos: [Vec<(usize, usize)>; 3],
        neg: [Vec<(usize, usize)>; 3],
    ) -> Result<Self> {
        let [train_pos, valid_pos, test_pos] = pos;
        let [train_neg, valid_neg, test_neg] = neg;
        let observed_graph = g.with_edges(&train_pos)?;
        Ok(DatasetSplit {
            train_pos,
            valid_pos,
            test_pos,
            train_neg,
            valid_neg,
            test_neg,
            observed_graph,
            spec,
        })
    }
}

fn norm(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Uniformly samples `count` distinct non-edges `(u, v)`, `u < v`.
pub fn sample_negatives(g: &Graph, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let available = g.non_edge_count();
    if count > available {
        return Err(Error::input(format!(
            "requested {count} negatives but the graph has only {available} non-edges"
        )));
    }
    let mut r = rng::seeded(seed);
    let n = g.num_nodes();
    if count.saturating_mul(2) <= available {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = r.random_range(0..n);
            let v = r.random_range(0..n);
            if u == v || g.has_edge(u, v) {
                continue;
            }
            let e = norm(u, v);
            if seen.insert(e) {
                out.push(e);
            }
        }
        return Ok(out);
    }
    let all: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|&(u, v)| !g.has_edge(u, v))
        .collect();
    Ok(index::sample(&mut r, all.len(), count)
        .into_iter()
        .map(|i| all[i])
        .collect())
}

/// Buckets the edges of `g` by `spec` and samples negatives.
pub fn generate_split(g: &Graph, spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    if g.edge_count() == 0 {
        return Err(Error::input("cannot split a graph without edges"));
    }
    let ranges = spec.ranges();
    let mut pos: [Vec<(usize, usize)>; 3] = Default::default();
    for (u, v) in g.edges() {
        let x = spec.heuristic.evaluate(g, u, v)?;
        pos[ranges.bucket_of(x) as usize].push((u, v));
    }
    for b in Bucket::ALL {
        if pos[b as usize].is_empty() {
            return Err(Error::DegenerateSplit { bucket: b.name() });
        }
    }
    let want = |b: Bucket| {
        let scaled = libm::ceil(spec.neg_ratio * pos[b as usize].len() as f64) as usize;
        scaled.max(spec.min_negatives)
    };
    let counts = Bucket::ALL.map(want);
    let total: usize = counts.iter().sum();
    let mut pool = sample_negatives(g, total, rng::stream_seed(spec.seed, rng::NEGATIVES))?;
    let test_neg = pool.split_off(counts[0] + counts[1]);
    let valid_neg = pool.split_off(counts[0]);
    DatasetSplit::from_parts(g, spec.clone(), pos, [pool, valid_neg, test_neg])
}

/// Outcome of [`verify_split`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitReport {
    pub ranges: BucketRanges,
    /// Positive / negative counts per bucket (train, valid, test).
    pub positive_counts: [usize; 3],
    pub negative_counts: [usize; 3],
    /// Oracle heuristic histograms of the positives per bucket.
    pub histograms: Vec<HeuristicHistogram>,
    pub violations: usize,
    /// Human-readable note on how the thresholds were read.
    pub interpretation: String,
}

/// Re-checks a split with the brute-force oracles.
///
/// Positive membership is recomputed on the full source graph `g`;
/// negatives must be distinct non-edges. Any violation is reported as a
/// validation error listing the offending pairs.
pub fn verify_split(g: &Graph, split: &DatasetSplit) -> Result<SplitReport> {
    split.spec.validate()?;
    let ranges = split.spec.ranges();
    let h = split.spec.heuristic;
    let mut offending = Vec::new();
    let mut histograms = Vec::new();
    let mut seen_pos = BTreeSet::new();
    for b in Bucket::ALL {
        let range = ranges.range(b);
        let mut values = Vec::with_capacity(split.positives(b).len());
        for &(u, v) in split.positives(b) {
            let ok_edge = u != v && g.has_edge(u, v) && seen_pos.insert(norm(u, v));
            let x = if ok_edge {
                reference::evaluate(h, g, u, v)
            } else {
                f64::NAN
            };
            if !ok_edge || !range.contains(x) {
                offending.push((u, v));
            } else {
                values.push(x);
            }
        }
        let tag = match b {
            Bucket::Train => SourceTag::Train,
            Bucket::Valid => SourceTag::Valid,
            Bucket::Test => SourceTag::Test,
        };
        histograms.push(HeuristicHistogram::from_values(h, tag, &values));
    }
    let mut seen_neg = BTreeSet::new();
    let mut empty_negatives = Vec::new();
    for b in Bucket::ALL {
        if split.negatives(b).is_empty() {
            empty_negatives.push(b.name());
        }
        for &(u, v) in split.negatives(b) {
            let bad = u == v
                || u >= g.num_nodes()
                || v >= g.num_nodes()
                || g.has_edge(u, v)
                || !seen_neg.insert(norm(u, v));
            if bad {
                offending.push((u, v));
            }
        }
    }
    let observed_ok = split.observed_graph.edge_count() == split.train_pos.len()
        && split
            .train_pos
            .iter()
            .all(|&(u, v)| split.observed_graph.has_edge(u, v));
    if !empty_negatives.is_empty() || !offending.is_empty() || !observed_ok {
        let mut summary = format!("{} offending links", offending.len());
        if !empty_negatives.is_empty() {
            summary.push_str(&format!(
                "; empty negative set(s): {}",
                empty_negatives.join(", ")
            ));
        }
        if !observed_ok {
            summary.push_str("; observed graph differs from the train positives");
        }
        return Err(Error::Validation { summary, offending });
    }
    let interpretation = match ranges.order {
        ThresholdOrder::AsGiven => format!(
            "{} {:?} ({}, {}) read as given",
            h.short_name(),
            split.spec.direction,
            split.spec.t1,
            split.spec.t2
        ),
        ThresholdOrder::Swapped => format!(
            "{} {:?} ({}, {}) listed larger-first for forward / smaller-first for backward; \
             oriented to train {:?}, valid {:?}, test {:?}",
            h.short_name(),
            split.spec.direction,
            split.spec.t1,
            split.spec.t2,
            ranges.train,
            ranges.valid,
            ranges.test
        ),
    };
    Ok(SplitReport {
        ranges,
        positive_counts: Bucket::ALL.map(|b| split.positives(b).len()),
        negative_counts: Bucket::ALL.map(|b| split.negatives(b).len()),
        histograms,
        violations: 0,
        interpretation,
    })
}
