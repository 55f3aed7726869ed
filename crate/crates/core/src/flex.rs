//! Adversarial co-training of the link predictor and the generator.
//!
//! For every batch of train-link subgraphs the generator produces
//! thresholded edge probabilities, the GCN scores each block's original
//! link label on the generated adjacency, and the two parameter sets are
//! updated in turn: first the GCN on `α·L_LP`, then the generator on the
//! negated generative loss plus or minus `α·L_LP` depending on the update
//! rule.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::analysis::{self, SourceTag};
use crate::autodiff::{AdamConfig, AdamState, BoundParams, ParamSet, Tape, Tensor, Var};
use crate::gnn::{self, score_pairs, EvalAdjacency, GcnModel, GnnTrainConfig, Propagation};
use crate::graph::{ExtractOptions, LabeledSubgraphBatch, LinkLabel};
use crate::rng::{self, Rng};
use crate::sivi::{
    self, decode_logits, epoch_batches, sivi_elbo, training_subgraphs, BatchContext,
    GgmTrainConfig, NoiseDraws, NoiseSpec, SiviModel,
};
use crate::split::{Bucket, DatasetSplit};
use crate::{Error, Result};

/// `L_GEN = L_SIVI − (KL − τ)²`.
pub fn gen_loss_value(elbo_loss: f64, kl: f64, tau: f64) -> f64 {
    elbo_loss - (kl - tau) * (kl - tau)
}

/// `α·L_LP + L_GEN`.
pub fn flex_objective_value(lp_loss: f64, gen_loss: f64, alpha: f64) -> f64 {
    alpha * lp_loss + gen_loss
}

pub fn gen_loss(tape: &mut Tape, elbo_loss: Var, kl: Var, tau: f64) -> Result<Var> {
    let d = tape.add_scalar(kl, -tau)?;
    let pen = tape.square(d)?;
    tape.sub(elbo_loss, pen)
}

pub fn flex_objective(tape: &mut Tape, lp_loss: Var, gen_loss: Var, alpha: f64) -> Result<Var> {
    let a = tape.scale(lp_loss, alpha)?;
    tape.add(a, gen_loss)
}

/// How the generator treats the link-prediction loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpdateRule {
    /// Ascend `L_GEN`, descend `α·L_LP`.
    #[default]
    CheckMode,
    /// Ascend `α·L_LP + L_GEN` as a whole.
    LiteralMinmax,
}

/// Co-training settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FlexConfig {
    pub alpha: f64,
    /// Absolute KL target; when absent it is the pre-trained generator's KL
    /// plus `tau_offset`.
    pub tau: Option<f64>,
    pub tau_offset: f64,
    pub gamma: f64,
    pub lr_gnn: f64,
    pub lr_ggm: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Subgraphs per batch.
    pub batch_size: usize,
    /// Train links visited per epoch, 0 for all of them. The trace probe
    /// uses a fixed subset of the same size.
    pub links_per_epoch: usize,
    pub update_rule: UpdateRule,
    pub seed: u64,
    /// Fraction of each batch the GCN scores on the original subgraph
    /// instead of the generated one.
    pub mix_ratio: f64,
    pub eval_k: usize,
    pub eval_adjacency: EvalAdjacency,
    pub hops: usize,
    pub max_nodes: usize,
    /// Let the untouched starting models win checkpoint selection.
    pub select_initial: bool,
}

impl Default for FlexConfig {
    fn default() -> Self {
        FlexConfig {
            alpha: 1.05,
            tau: None,
            tau_offset: 1.0,
            gamma: 0.5,
            lr_gnn: 1e-5,
            lr_ggm: 1e-5,
            epochs: 5,
            patience: 3,
            batch_size: 32,
            links_per_epoch: 512,
            update_rule: UpdateRule::CheckMode,
            seed: 0,
            mix_ratio: 0.0,
            eval_k: 20,
            eval_adjacency: EvalAdjacency::Observed,
            hops: 1,
            max_nodes: 1000,
            select_initial: false,
        }
    }
}

impl FlexConfig {
    /// `alpha = 0` is accepted for the ablation without the LP loss.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config("alpha must be finite and non-negative"));
        }
        if let Some(t) = self.tau {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::config("tau must be finite and non-negative"));
            }
        }
        if !self.tau_offset.is_finite() {
            return Err(Error::config("tau_offset must be finite"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(Error::config("mix_ratio must lie in [0, 1]"));
        }
        for lr in [self.lr_gnn, self.lr_ggm] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::config("learning rates must be positive"));
            }
        }
        if self.epochs == 0 || self.patience == 0 || self.patience > self.epochs {
            return Err(Error::config("need 1 <= patience <= epochs"));
        }
        if self.batch_size == 0 || self.eval_k == 0 {
            return Err(Error::config("batch_size and eval_k must be positive"));
        }
        if self.hops == 0 || self.max_nodes < 2 {
            return Err(Error::config("hops >= 1 and max_nodes >= 2 required"));
        }
        Ok(())
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            hops: self.hops,
            max_nodes: self.max_nodes,
            exclude_target: true,
        }
    }
}

/// The resolved per-step objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub alpha: f64,
    pub tau: f64,
    pub gamma: f64,
    pub rule: UpdateRule,
    pub mix_ratio: f64,
}

/// One batch together with its constants and pre-drawn noise; both update
/// steps of a batch see exactly the same inputs.
pub struct StepInputs<'a> {
    pub batch: &'a LabeledSubgraphBatch,
    pub ctx: &'a BatchContext,
    pub draws: &'a NoiseDraws,
}

impl<'a> StepInputs<'a> {
    pub fn new(
        batch: &'a LabeledSubgraphBatch,
        ctx: &'a BatchContext,
        draws: &'a NoiseDraws,
    ) -> Self {
        StepInputs { batch, ctx, draws }
    }
}

/// Loss pieces of one batch on a tape.
pub struct FlexTerms {
    pub lp_loss: Var,
    pub elbo_loss: Var,
    pub kl: Var,
    pub gen_loss: Var,
    /// Thresholded generated probabilities per block (diagonal zero).
    pub generated: Vec<Var>,
}

/// `D^-1/2 (P + I) D^-1/2` for a dense, possibly differentiable, weighted
/// adjacency `P` with zero diagonal.
pub fn normalize_dense(tape: &mut Tape, p: Var) -> Result<Var> {
    let n = tape.value(p).rows();
    let eye = tape.constant(Tensor::identity(n));
    let s = tape.add(p, eye)?;
    let d = tape.row_sums(s)?;
    let ld = tape.log(d)?;
    let ld = tape.scale(ld, -0.5)?;
    let dinv = tape.exp(ld)?;
    let one = tape.constant(Tensor::ones(1, 1));
    let dinv_row = tape.matmul_nt(one, dinv)?;
    let left = tape.mul(s, dinv)?;
    tape.mul(left, dinv_row)
}

fn original_blocks(obj: &Objective, k: usize) -> usize {
    libm::round(obj.mix_ratio * k as f64) as usize
}

/// Records generation, GCN scoring on the generated blocks and every loss
/// term. Parameter sets are bound by the caller, as leaves or constants.
pub fn flex_forward(
    tape: &mut Tape,
    gnn: &GcnModel,
    gp: &BoundParams,
    ggm: &SiviModel,
    sp: &BoundParams,
    inp: &StepInputs<'_>,
    obj: &Objective,
) -> Result<FlexTerms> {
    let terms = sivi_elbo(tape, sp, ggm, inp.ctx, inp.draws)?;
    let logits = decode_logits(tape, terms.h[0], &inp.batch.block_sizes)?;
    let n_orig = original_blocks(obj, inp.batch.num_blocks());
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut generated = Vec::with_capacity(logits.len());
    for (b, (&lg, block)) in logits.iter().zip(&inp.batch.blocks).enumerate() {
        let n = block.num_nodes();
        let probs = tape.sigmoid(lg)?;
        let pv = tape.value(probs);
        let (t0, t1) = block.target;
        let mut mask = Tensor::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let target_pair = (i, j) == (t0, t1) || (i, j) == (t1, t0);
                if i != j && !target_pair && pv.get(i, j) >= obj.gamma {
                    mask.set(i, j, 1.0);
                }
            }
        }
        let m = tape.constant(mask);
        let kept = tape.mul(probs, m)?;
        generated.push(kept);
        let adj = if b < n_orig {
            tape.constant(block.dense_adjacency())
        } else {
            kept
        };
        let a_norm = normalize_dense(tape, adj)?;
        let x = tape.constant(block.features.clone());
        let h = gnn.forward(tape, gp, Propagation::Dense(a_norm), x, None)?;
        let s = score_pairs(tape, h, &[(t0, t1)])?;
        match block.link_label {
            LinkLabel::Positive => pos.push(s),
            LinkLabel::Negative => neg.push(s),
        }
    }
    let pos = if pos.is_empty() {
        None
    } else {
        Some(tape.concat_rows(&pos)?)
    };
    let neg = if neg.is_empty() {
        None
    } else {
        Some(tape.concat_rows(&neg)?)
    };
    let lp_loss = gnn::lp_loss(tape, pos, neg)?;
    let gen = gen_loss(tape, terms.loss, terms.kl, obj.tau)?;
    Ok(FlexTerms {
        lp_loss,
        elbo_loss: terms.loss,
        kl: terms.kl,
        gen_loss: gen,
        generated,
    })
}

/// Scalar values of one batch's terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermValues {
    pub lp_loss: f64,
    pub elbo_loss: f64,
    pub kl: f64,
    pub gen_loss: f64,
    pub objective: f64,
}

fn values(tape: &Tape, t: &FlexTerms, alpha: f64) -> TermValues {
    let lp = tape.value(t.lp_loss).item();
    let gen = tape.value(t.gen_loss).item();
    TermValues {
        lp_loss: lp,
        elbo_loss: tape.value(t.elbo_loss).item(),
        kl: tape.value(t.kl).item(),
        gen_loss: gen,
        objective: flex_objective_value(lp, gen, alpha),
    }
}

/// Evaluates the terms without touching either parameter set.
pub fn evaluate_terms(
    gnn: &GcnModel,
    ggm: &SiviModel,
    inp: &StepInputs<'_>,
    obj: &Objective,
) -> Result<TermValues> {
    let mut tape = Tape::new();
    let gp = gnn.params.bind_frozen(&mut tape);
    let sp = ggm.params.bind_frozen(&mut tape);
    let t = flex_forward(&mut tape, gnn, &gp, ggm, &sp, inp, obj)?;
    Ok(values(&tape, &t, obj.alpha))
}

fn check_finite(v: &TermValues, who: &str) -> Result<()> {
    if !v.lp_loss.is_finite() {
        return Err(Error::numeric(format!(
            "{who}: link-prediction loss is not finite"
        )));
    }
    if !(v.elbo_loss.is_finite() && v.kl.is_finite()) {
        return Err(Error::numeric(format!(
            "{who}: generator loss is not finite"
        )));
    }
    Ok(())
}

/// One GCN descent step on `α·L_LP`; the generator is frozen.
pub fn gnn_step(
    gnn: &mut GcnModel,
    adam: &mut AdamState,
    ggm: &SiviModel,
    inp: &StepInputs<'_>,
    obj: &Objective,
) -> Result<TermValues> {
    let mut tape = Tape::new();
    let gp = gnn.params.bind(&mut tape);
    let sp = ggm.params.bind_frozen(&mut tape);
    let t = flex_forward(&mut tape, gnn, &gp, ggm, &sp, inp, obj)?;
    let v = values(&tape, &t, obj.alpha);
    check_finite(&v, "GNN step")?;
    let loss = tape.scale(t.lp_loss, obj.alpha)?;
    let grads = gp.grads(&tape.backward(loss)?)?;
    adam.step(&mut gnn.params, &grads)
        .map_err(|e| Error::numeric(format!("GNN step: {e}")))?;
    Ok(v)
}

/// The generator's minimization target under `obj.rule`.
pub fn ggm_loss(tape: &mut Tape, t: &FlexTerms, obj: &Objective) -> Result<Var> {
    let neg_gen = tape.scale(t.gen_loss, -1.0)?;
    let sign = match obj.rule {
        UpdateRule::CheckMode => obj.alpha,
        UpdateRule::LiteralMinmax => -obj.alpha,
    };
    let lp = tape.scale(t.lp_loss, sign)?;
    tape.add(neg_gen, lp)
}

/// One generator step: ascent on `L_GEN`, with `α·L_LP` descended
/// (check mode) or ascended (literal min-max); the GCN is frozen.
pub fn ggm_step(
    ggm: &mut SiviModel,
    adam: &mut AdamState,
    gnn: &GcnModel,
    inp: &StepInputs<'_>,
    obj: &Objective,
) -> Result<TermValues> {
    let mut tape = Tape::new();
    let gp = gnn.params.bind_frozen(&mut tape);
    let sp = ggm.params.bind(&mut tape);
    let t = flex_forward(&mut tape, gnn, &gp, ggm, &sp, inp, obj)?;
    let v = values(&tape, &t, obj.alpha);
    check_finite(&v, "generator step")?;
    let loss = ggm_loss(&mut tape, &t, obj)?;
    let grads = sp.grads(&tape.backward(loss)?)?;
    adam.step(&mut ggm.params, &grads)
        .map_err(|e| Error::numeric(format!("generator step: {e}")))?;
    Ok(v)
}

/// One trace line; loss terms come from a fixed-noise probe over a fixed
/// subset of the train subgraphs, taken after the epoch's updates (epoch 0
/// is the starting point).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CotrainRecord {
    pub epoch: usize,
    pub lp_loss: f64,
    pub sivi_loss: f64,
    pub kl_estimate: f64,
    /// `−(KL − τ)²`.
    pub penalty: f64,
    pub mean_generated_cn: f64,
    pub valid_hits: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlexOutcome {
    pub gnn: GcnModel,
    pub ggm: SiviModel,
    pub trace: Vec<CotrainRecord>,
    /// `0` when no epoch beat the starting models.
    pub best_epoch: usize,
    pub best_valid_hits: f64,
    pub initial_valid_hits: f64,
    pub tau: f64,
}

const PROBE: &str = "probe";

struct Probe {
    batches: Vec<LabeledSubgraphBatch>,
    seed: u64,
}

#[derive(Clone, Copy)]
struct ProbeValues {
    lp: f64,
    elbo: f64,
    kl: f64,
    mean_cn: f64,
}

impl Probe {
    fn run(&self, gnn: &GcnModel, ggm: &SiviModel, obj: &Objective) -> Result<ProbeValues> {
        let mut r = rng::seeded(self.seed);
        let (mut lp, mut elbo, mut kl, mut cn_sum, mut blocks) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for batch in &self.batches {
            let ctx = BatchContext::new(ggm, batch)?;
            let draws = NoiseDraws::sample(&ggm.noise(), ctx.nodes(), ggm.noise().num_psi, &mut r);
            let inp = StepInputs::new(batch, &ctx, &draws);
            let mut tape = Tape::new();
            let gp = gnn.params.bind_frozen(&mut tape);
            let sp = ggm.params.bind_frozen(&mut tape);
            let t = flex_forward(&mut tape, gnn, &gp, ggm, &sp, &inp, obj)?;
            let v = values(&tape, &t, obj.alpha);
            lp += v.lp_loss;
            elbo += v.elbo_loss;
            kl += v.kl;
            for (&g, block) in t.generated.iter().zip(&batch.blocks) {
                cn_sum +=
                    analysis::dense_common_neighbors(tape.value(g), block.target.0, block.target.1)
                        as f64;
                blocks += 1;
            }
        }
        let nb = self.batches.len() as f64;
        Ok(ProbeValues {
            lp: lp / nb,
            elbo: elbo / nb,
            kl: kl / nb,
            mean_cn: cn_sum / blocks.max(1) as f64,
        })
    }
}

fn valid_hits(gnn: &GcnModel, split: &DatasetSplit, cfg: &FlexConfig) -> Result<f64> {
    let g = gnn::eval_graph(split, cfg.eval_adjacency)?;
    let a = gnn::propagation_matrix(&g)?;
    gnn::evaluate_bucket(gnn, &g, &a, split, Bucket::Valid, cfg.eval_k)
}

/// Co-trains pre-trained models on the train links of `split`.
///
/// The returned pair is the one with the best validation Hits@K seen,
/// counting the untouched starting models when `select_initial` is set.
pub fn flex_tune(
    gnn: &GcnModel,
    ggm: &SiviModel,
    split: &DatasetSplit,
    cfg: &FlexConfig,
) -> Result<FlexOutcome> {
    cfg.validate()?;
    let subgraphs = training_subgraphs(split, &cfg.extract_options(), cfg.seed)?;
    if subgraphs.is_empty() {
        return Err(Error::input("no train links to co-train on"));
    }
    let probe = Probe {
        batches: epoch_batches(
            &subgraphs,
            cfg.batch_size,
            cfg.links_per_epoch,
            &mut rng::stream(cfg.seed, PROBE),
        )?,
        seed: rng::stream_seed(cfg.seed, PROBE),
    };
    let mut gnn = gnn.clone();
    let mut ggm = ggm.clone();
    let mut obj = Objective {
        alpha: cfg.alpha,
        tau: 0.0,
        gamma: cfg.gamma,
        rule: cfg.update_rule,
        mix_ratio: cfg.mix_ratio,
    };
    let start = probe.run(&gnn, &ggm, &obj)?;
    obj.tau = cfg.tau.unwrap_or(start.kl + cfg.tau_offset);
    let initial = valid_hits(&gnn, split, cfg)?;
    let record = |epoch: usize, p: ProbeValues, hits: f64| CotrainRecord {
        epoch,
        lp_loss: p.lp,
        sivi_loss: p.elbo,
        kl_estimate: p.kl,
        penalty: -(p.kl - obj.tau) * (p.kl - obj.tau),
        mean_generated_cn: p.mean_cn,
        valid_hits: hits,
    };
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    trace.push(record(0, start, initial));

    let mut adam_gnn = AdamState::new(AdamConfig::with_lr(cfg.lr_gnn), &gnn.params);
    let mut adam_ggm = AdamState::new(AdamConfig::with_lr(cfg.lr_ggm), &ggm.params);
    let mut noise = rng::stream(cfg.seed, rng::NOISE);
    let mut shuffle = rng::stream(cfg.seed, rng::SHUFFLE);
    let floor = if cfg.select_initial {
        initial
    } else {
        f64::NEG_INFINITY
    };
    let mut best: (f64, usize, ParamSet, ParamSet) =
        (floor, 0, gnn.params.clone(), ggm.params.clone());
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        for batch in epoch_batches(
            &subgraphs,
            cfg.batch_size,
            cfg.links_per_epoch,
            &mut shuffle,
        )? {
            let ctx = BatchContext::new(&ggm, &batch)?;
            let draws =
                NoiseDraws::sample(&ggm.noise(), ctx.nodes(), ggm.noise().num_psi, &mut noise);
            let inp = StepInputs::new(&batch, &ctx, &draws);
            gnn_step(&mut gnn, &mut adam_gnn, &ggm, &inp, &obj)
                .map_err(|e| Error::numeric(format!("epoch {epoch}: {e}")))?;
            ggm_step(&mut ggm, &mut adam_ggm, &gnn, &inp, &obj)
                .map_err(|e| Error::numeric(format!("epoch {epoch}: {e}")))?;
        }
        let hits = valid_hits(&gnn, split, cfg)?;
        trace.push(record(epoch, probe.run(&gnn, &ggm, &obj)?, hits));
        if hits > best.0 {
            best = (hits, epoch, gnn.params.clone(), ggm.params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    gnn.params = best.2;
    ggm.params = best.3;
    Ok(FlexOutcome {
        gnn,
        ggm,
        trace,
        best_epoch: best.1,
        best_valid_hits: best.0,
        initial_valid_hits: initial,
        tau: obj.tau,
    })
}

/// Single-mechanism ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Ablation {
    /// Zero the label channel of the generator's input.
    NoSealLabels,
    /// `α = 0`.
    NoLpLoss,
    /// One ψ draw, no injected noise.
    NoSivi,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::NoSealLabels, Ablation::NoLpLoss, Ablation::NoSivi];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoSealLabels => "no_seal_labels",
            Ablation::NoLpLoss => "no_lp_loss",
            Ablation::NoSivi => "no_sivi",
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown ablation switch `{s}`")))
    }
}

/// Settings of the whole pre-train / co-train pipeline.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineConfig {
    pub gnn: GnnTrainConfig,
    pub ggm: GgmTrainConfig,
    pub flex: FlexConfig,
}

impl PipelineConfig {
    /// Applies an ablation switch to the generator and co-training settings.
    pub fn ablated(&self, switch: Option<Ablation>) -> PipelineConfig {
        let mut c = self.clone();
        match switch {
            None => {}
            Some(Ablation::NoSealLabels) => c.ggm.use_labels = false,
            Some(Ablation::NoLpLoss) => c.flex.alpha = 0.0,
            Some(Ablation::NoSivi) => c.ggm.noise = NoiseSpec::plain(),
        }
        c
    }

    /// Reseeds every stage from one root seed.
    pub fn with_seed(&self, seed: u64) -> PipelineConfig {
        let mut c = self.clone();
        c.gnn.seed = seed;
        c.ggm.seed = seed;
        c.flex.seed = seed;
        c
    }
}

/// Validation and test Hits@K of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub label: String,
    pub valid_hits: f64,
    pub test_hits: f64,
}

/// Test Hits@K of `gnn` under `cfg`'s evaluation settings.
pub fn test_hits(
    gnn: &GcnModel,
    split: &DatasetSplit,
    k: usize,
    mode: EvalAdjacency,
) -> Result<f64> {
    let g = gnn::eval_graph(split, mode)?;
    let a = gnn::propagation_matrix(&g)?;
    gnn::evaluate_bucket(gnn, &g, &a, split, Bucket::Test, k)
}

/// Pre-trains a generator under `base` with `switch` applied and co-trains
/// it with the given pre-trained GCN.
pub fn ablation_run(
    gnn: &GcnModel,
    split: &DatasetSplit,
    base: &PipelineConfig,
    switch: Option<Ablation>,
) -> Result<(RunMetrics, FlexOutcome)> {
    let cfg = base.ablated(switch);
    let ggm = sivi::pretrain_ggm(split, &cfg.ggm)?;
    let out = flex_tune(gnn, &ggm.model, split, &cfg.flex)?;
    let metrics = RunMetrics {
        label: String::from(switch.map_or("flex", Ablation::name)),
        valid_hits: out.best_valid_hits,
        test_hits: test_hits(&out.gnn, split, cfg.flex.eval_k, cfg.flex.eval_adjacency)?,
    };
    Ok((metrics, out))
}

/// Generates counterfactual subgraphs for the positive links of `bucket`
/// (extracted on the observed graph) with one fixed noise stream.
pub fn generate_for_bucket(
    ggm: &SiviModel,
    split: &DatasetSplit,
    bucket: Bucket,
    gamma: f64,
    opts: &ExtractOptions,
    seed: u64,
) -> Result<sivi::GeneratedSample> {
    let mut sub = rng::stream(seed, rng::SUBSAMPLE);
    let subs = split
        .positives(bucket)
        .iter()
        .map(|&(u, v)| {
            crate::graph::extract_enclosing_subgraph(
                &split.observed_graph,
                &crate::graph::Edge::positive(u, v),
                opts,
                &mut sub,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let batch = crate::graph::make_batch(subs)?;
    let mut r: Rng = rng::stream(seed, rng::NOISE);
    sivi::generate(ggm, &batch, gamma, &mut r)
}

/// CN histogram of generated samples, tagged as generated.
pub fn generated_cn_histogram(
    sample: &sivi::GeneratedSample,
) -> Result<analysis::HeuristicHistogram> {
    analysis::cn_distribution(
        &analysis::samples_from_generated(sample),
        SourceTag::Generated,
    )
}
