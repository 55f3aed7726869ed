//! GCN encoder, inner-product link scorer, pre-training and Hits@K.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::autodiff::{AdamConfig, AdamState, BoundParams, Csr, ParamSet, Tape, Tensor, Var};
use crate::graph::{Graph, LinkLabel};
use crate::math;
use crate::rng::{self, Rng};
use crate::split::{sample_negatives, Bucket, DatasetSplit};
use crate::{Error, Result};

/// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
pub fn normalize_adjacency(a: &Csr) -> Result<Csr> {
    if a.rows() != a.cols() {
        return Err(Error::shape(
            "normalize_adjacency",
            format!("{}x{} is not square", a.rows(), a.cols()),
        ));
    }
    let n = a.rows();
    let deg: Vec<f64> = (0..n)
        .map(|r| {
            1.0 + a
                .row(r)
                .filter(|&(c, _)| c != r)
                .map(|(_, v)| v)
                .sum::<f64>()
        })
        .collect();
    let inv: Vec<f64> = deg.iter().map(|&d| 1.0 / math::sqrt(d)).collect();
    let mut trip = Vec::with_capacity(a.nnz() + n);
    for r in 0..n {
        trip.push((r, r, inv[r] * inv[r]));
        for (c, v) in a.row(r) {
            if c != r {
                trip.push((r, c, v * inv[r] * inv[c]));
            }
        }
    }
    Csr::from_triplets(n, n, trip)
}

/// The normalized propagation operator of a graph, ready for the tape.
pub fn propagation_matrix(g: &Graph) -> Result<Arc<Csr>> {
    Ok(Arc::new(normalize_adjacency(&g.adjacency())?))
}

/// How a GCN layer propagates messages.
#[derive(Clone, Copy, Debug)]
pub enum Propagation<'a> {
    /// A constant sparse operator.
    Sparse(&'a Arc<Csr>),
    /// A dense operator recorded on the tape (possibly differentiable).
    Dense(Var),
}

/// Dropout applied between GCN layers during training.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut Rng,
}

/// A stack of GCN layers `H <- Â H W + b`, ReLU between layers and none
/// after the last one. Parameters are stored as `w0, b0, w1, b1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    pub params: ParamSet,
    in_dim: usize,
    hidden: usize,
    layers: usize,
}

impl GcnModel {
    /// Glorot-initialized weights, zero biases.
    pub fn new(in_dim: usize, hidden: usize, layers: usize, rng: &mut Rng) -> Result<Self> {
        if layers == 0 || hidden == 0 || in_dim == 0 {
            return Err(Error::config(
                "GCN needs at least one layer and positive widths",
            ));
        }
        let mut params = ParamSet::new();
        for l in 0..layers {
            let rows = if l == 0 { in_dim } else { hidden };
            params.push_glorot(format!("gcn.w{l}"), rows, hidden, rng);
            params.push(format!("gcn.b{l}"), Tensor::zeros(1, hidden));
        }
        Ok(GcnModel {
            params,
            in_dim,
            hidden,
            layers,
        })
    }

    /// Rebuilds a model from a parameter table, checking that the shapes
    /// chain.
    pub fn from_params(params: ParamSet) -> Result<Self> {
        if params.is_empty() || !params.len().is_multiple_of(2) {
            return Err(Error::input(
                "GCN parameter table must hold weight/bias pairs",
            ));
        }
        let layers = params.len() / 2;
        let in_dim = params.get(0).rows();
        let hidden = params.get(0).cols();
        for l in 0..layers {
            let (w, b) = (params.get(2 * l), params.get(2 * l + 1));
            let rows = if l == 0 { in_dim } else { hidden };
            if w.shape() != [rows, hidden] || b.shape() != [1, hidden] {
                return Err(Error::input(format!(
                    "GCN layer {l} has inconsistent shapes"
                )));
            }
            if params.names()[2 * l] != format!("gcn.w{l}")
                || params.names()[2 * l + 1] != format!("gcn.b{l}")
            {
                return Err(Error::input(format!(
                    "unexpected GCN parameter names at layer {l}"
                )));
            }
        }
        Ok(GcnModel {
            params,
            in_dim,
            hidden,
            layers,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// Records the forward pass on `tape` with parameters `p` (bound from
    /// `self.params`, as leaves or constants).
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        prop: Propagation<'_>,
        x: Var,
        mut dropout: Option<Dropout<'_>>,
    ) -> Result<Var> {
        let mut h = x;
        for l in 0..self.layers {
            if l > 0 {
                h = tape.relu(h)?;
                if let Some(d) = dropout.as_mut() {
                    h = apply_dropout(tape, h, d)?;
                }
            }
            let xw = tape.matmul(h, p.var(2 * l))?;
            let ax = match prop {
                Propagation::Sparse(a) => tape.sparse_matmul(a, xw)?,
                Propagation::Dense(a) => tape.matmul(a, xw)?,
            };
            h = tape.add(ax, p.var(2 * l + 1))?;
        }
        Ok(h)
    }

    /// Inference-mode node embeddings.
    pub fn embed(&self, a_norm: &Arc<Csr>, x: &Tensor) -> Result<Tensor> {
        if x.rows() != a_norm.rows() {
            return Err(Error::shape(
                "gcn_forward",
                format!("{} feature rows for {} nodes", x.rows(), a_norm.rows()),
            ));
        }
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let h = self.forward(&mut tape, &p, Propagation::Sparse(a_norm), xv, None)?;
        Ok(tape.value(h).clone())
    }
}

fn apply_dropout(tape: &mut Tape, h: Var, d: &mut Dropout<'_>) -> Result<Var> {
    if d.rate <= 0.0 {
        return Ok(h);
    }
    let keep = 1.0 - d.rate;
    let [r, c] = tape.value(h).shape();
    let mask: Vec<f64> = (0..r * c)
        .map(|_| {
            if d.rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect();
    let m = tape.constant(Tensor::from_vec(r, c, mask)?);
    tape.mul(h, m)
}

/// Inner-product logit `h_u · h_v`.
pub fn score_link(h: &Tensor, u: usize, v: usize) -> Result<f64> {
    if u >= h.rows() || v >= h.rows() {
        return Err(Error::input(format!(
            "pair ({u}, {v}) outside {} embeddings",
            h.rows()
        )));
    }
    Ok(h.row(u).iter().zip(h.row(v)).map(|(a, b)| a * b).sum())
}

/// Logits of many pairs as a `k x 1` column on the tape.
pub fn score_pairs(tape: &mut Tape, h: Var, pairs: &[(usize, usize)]) -> Result<Var> {
    let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let hu = tape.gather_rows(h, &us)?;
    let hv = tape.gather_rows(h, &vs)?;
    let prod = tape.mul(hu, hv)?;
    tape.row_sums(prod)
}

/// Mean binary cross-entropy of positive (target 1) and negative
/// (target 0) logit columns. Either side may be absent, not both.
pub fn lp_loss(tape: &mut Tape, pos: Option<Var>, neg: Option<Var>) -> Result<Var> {
    let mut parts = Vec::new();
    let mut targets = Vec::new();
    for (side, t) in [(pos, 1.0), (neg, 0.0)] {
        if let Some(v) = side {
            let n = tape.value(v).len();
            if n > 0 {
                parts.push(v);
                targets.extend(core::iter::repeat_n(t, n));
            }
        }
    }
    if parts.is_empty() {
        return Err(Error::input(
            "link-prediction loss needs at least one logit",
        ));
    }
    for &p in &parts {
        let [r, c] = tape.value(p).shape();
        if c != 1 {
            return Err(Error::shape(
                "lp_loss",
                format!("expected a column, got {r}x{c}"),
            ));
        }
    }
    let all = tape.concat_rows(&parts)?;
    let bce = tape.bce_with_logits(all, &Tensor::column(targets))?;
    tape.mean(bce)
}

/// Value-level [`lp_loss`].
pub fn lp_loss_value(pos: &[f64], neg: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let p = (!pos.is_empty()).then(|| tape.constant(Tensor::column(pos.to_vec())));
    let n = (!neg.is_empty()).then(|| tape.constant(Tensor::column(neg.to_vec())));
    let l = lp_loss(&mut tape, p, n)?;
    Ok(tape.value(l).item())
}

/// Fraction of positives scoring strictly above the `k`-th highest
/// negative.
pub fn hits_at_k(pos: &[f64], neg: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::input("k must be at least 1"));
    }
    if neg.len() < k {
        return Err(Error::input(format!(
            "Hits@{k} needs {k} negatives, got {}",
            neg.len()
        )));
    }
    if pos.is_empty() {
        return Err(Error::input("Hits@K needs at least one positive"));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::numeric("NaN score in Hits@K"));
    }
    let mut sorted = neg.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k - 1];
    let hits = pos.iter().filter(|&&s| s > threshold).count();
    Ok(hits as f64 / pos.len() as f64)
}

/// Which adjacency message passing sees when scoring valid / test links.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EvalAdjacency {
    /// Train positives only.
    #[default]
    Observed,
    /// Every positive of the split (parity with full-graph evaluation).
    Full,
}

/// GCN pre-training settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GnnTrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub layers: usize,
    /// Positives per optimizer step; `0` means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub eval_k: usize,
    pub eval_adjacency: EvalAdjacency,
}

impl Default for GnnTrainConfig {
    fn default() -> Self {
        GnnTrainConfig {
            epochs: 1000,
            patience: 20,
            lr: 1e-3,
            dropout: 0.1,
            hidden: 128,
            layers: 2,
            batch_size: 0,
            seed: 0,
            eval_k: 20,
            eval_adjacency: EvalAdjacency::Observed,
        }
    }
}

impl GnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience > self.epochs {
            return Err(Error::config("patience must not exceed epochs"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if self.eval_k == 0 {
            return Err(Error::config("eval_k must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::config(
                "GCN needs at least one layer and a positive width",
            ));
        }
        Ok(())
    }
}

/// One line of the pre-training trace.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GnnEpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_hits: f64,
}

/// Observer for training loops.
pub trait TrainHook {
    /// Called for every link whose score enters a gradient computation.
    fn on_gradient_pair(&mut self, _u: usize, _v: usize, _label: LinkLabel) {}
    fn on_epoch(&mut self, _record: &GnnEpochRecord) {}
}

/// A hook that ignores everything.
pub struct NoHook;

impl TrainHook for NoHook {}

#[derive(Clone, Debug, PartialEq)]
pub struct GnnTrainOutcome {
    pub model: GcnModel,
    pub trace: Vec<GnnEpochRecord>,
    /// `0` when no epoch beat the initialization.
    pub best_epoch: usize,
    pub best_valid_hits: f64,
    pub initial_valid_hits: f64,
    pub epochs_run: usize,
}

/// Message-passing graph for evaluation under `mode`.
pub fn eval_graph(split: &DatasetSplit, mode: EvalAdjacency) -> Result<Graph> {
    match mode {
        EvalAdjacency::Observed => Ok(split.observed_graph.clone()),
        EvalAdjacency::Full => {
            let mut all: Vec<(usize, usize)> = Vec::new();
            for b in Bucket::ALL {
                all.extend_from_slice(split.positives(b));
            }
            split.observed_graph.with_edges(&all)
        }
    }
}

/// Hits@K of `model` on one bucket of `split`.
pub fn evaluate_bucket(
    model: &GcnModel,
    graph: &Graph,
    a_norm: &Arc<Csr>,
    split: &DatasetSplit,
    bucket: Bucket,
    k: usize,
) -> Result<f64> {
    let h = model.embed(a_norm, graph.features())?;
    let pos = split
        .positives(bucket)
        .iter()
        .map(|&(u, v)| score_link(&h, u, v))
        .collect::<Result<Vec<_>>>()?;
    let neg = split
        .negatives(bucket)
        .iter()
        .map(|&(u, v)| score_link(&h, u, v))
        .collect::<Result<Vec<_>>>()?;
    hits_at_k(&pos, &neg, k)
}

/// Pre-trains a GCN link predictor on the observed graph of `split`.
///
/// Each epoch scores the train positives against freshly sampled
/// non-edges of the observed graph; the returned model is the one with the
/// best validation Hits@`eval_k` (the initialization included).
pub fn pretrain_gnn(
    split: &DatasetSplit,
    cfg: &GnnTrainConfig,
    hook: &mut dyn TrainHook,
) -> Result<GnnTrainOutcome> {
    cfg.validate()?;
    let g = &split.observed_graph;
    if split.train_pos.is_empty() {
        return Err(Error::input("no train positives"));
    }
    let mut init = rng::stream(cfg.seed, rng::INIT);
    let mut drop_rng = rng::stream(cfg.seed, rng::DROPOUT);
    let neg_root = rng::stream_seed(cfg.seed, rng::NEGATIVES);
    let mut model = GcnModel::new(g.feature_dim(), cfg.hidden, cfg.layers, &mut init)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.params);
    let a_train = propagation_matrix(g)?;
    let eval_g = eval_graph(split, cfg.eval_adjacency)?;
    let a_eval = propagation_matrix(&eval_g)?;

    let initial = evaluate_bucket(&model, &eval_g, &a_eval, split, Bucket::Valid, cfg.eval_k)?;
    let mut best = (initial, 0usize, model.params.clone());
    let mut trace = Vec::new();
    let mut stale = 0usize;
    let mut epochs_run = 0;
    let batch = if cfg.batch_size == 0 {
        split.train_pos.len()
    } else {
        cfg.batch_size
    };
    for epoch in 1..=cfg.epochs {
        epochs_run = epoch;
        let negs = sample_negatives(g, split.train_pos.len(), neg_root ^ epoch as u64)?;
        let mut loss_sum = 0.0;
        let mut steps = 0;
        for (pos, neg) in split.train_pos.chunks(batch).zip(negs.chunks(batch)) {
            for &(u, v) in pos {
                hook.on_gradient_pair(u, v, LinkLabel::Positive);
            }
            for &(u, v) in neg {
                hook.on_gradient_pair(u, v, LinkLabel::Negative);
            }
            let mut tape = Tape::new();
            let p = model.params.bind(&mut tape);
            let x = tape.constant(g.features().clone());
            let h = model.forward(
                &mut tape,
                &p,
                Propagation::Sparse(&a_train),
                x,
                Some(Dropout {
                    rate: cfg.dropout,
                    rng: &mut drop_rng,
                }),
            )?;
            let sp = score_pairs(&mut tape, h, pos)?;
            let sn = score_pairs(&mut tape, h, neg)?;
            let loss = lp_loss(&mut tape, Some(sp), Some(sn))?;
            let lv = tape.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::numeric(format!(
                    "GNN loss diverged at epoch {epoch}"
                )));
            }
            let grads = p.grads(&tape.backward(loss)?)?;
            adam.step(&mut model.params, &grads)
                .map_err(|e| Error::numeric(format!("GNN epoch {epoch}: {e}")))?;
            loss_sum += lv;
            steps += 1;
        }
        let valid = evaluate_bucket(&model, &eval_g, &a_eval, split, Bucket::Valid, cfg.eval_k)?;
        let record = GnnEpochRecord {
            epoch,
            train_loss: loss_sum / steps as f64,
            valid_hits: valid,
        };
        hook.on_epoch(&record);
        trace.push(record);
        if valid > best.0 {
            best = (valid, epoch, model.params.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.patience {
            break;
        }
    }
    model.params = best.2;
    Ok(GnnTrainOutcome {
        model,
        trace,
        best_epoch: best.1,
        best_valid_hits: best.0,
        initial_valid_hits: initial,
        epochs_run,
    })
}
