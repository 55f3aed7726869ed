//! Semi-implicit variational graph auto-encoder over labeled subgraphs.
//!
//! The encoder is a GCN over `[X ‖ ℓ ‖ ε]`, where `ℓ` is the zero-one label
//! column and `ε` per-node Gaussian noise (one draw per mixing sample ψ).
//! A shared trunk of width [`HIDDEN`] feeds GCN heads for `μ` and `log σ²`
//! of width [`LATENT`]. Decoding is the parameter-free inner product, done
//! block by block so no probability is ever formed between two subgraphs.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{AdamConfig, AdamState, BoundParams, Csr, ParamSet, Tape, Tensor, Var};
use crate::gnn::normalize_adjacency;
use crate::graph::{
    extract_enclosing_subgraph, make_batch, Edge, ExtractOptions, Graph, LabeledSubgraph,
    LabeledSubgraphBatch, LinkLabel,
};
use crate::math;
use crate::rng::{self, Rng};
use crate::split::DatasetSplit;
use crate::{Error, Result};

pub const HIDDEN: usize = 32;
pub const LATENT: usize = 16;
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

/// Randomness injected into the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseSpec {
    /// Noise columns appended to every node's input.
    pub noise_dim: usize,
    /// Mixing draws ψ per forward pass.
    pub num_psi: usize,
    /// Leading noise-only rows discarded after the encoder.
    pub truncation: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            noise_dim: 8,
            num_psi: 3,
            truncation: 0,
        }
    }
}

impl NoiseSpec {
    /// The plain variational encoder: no noise, a single draw.
    pub fn plain() -> Self {
        NoiseSpec {
            noise_dim: 0,
            num_psi: 1,
            truncation: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_psi == 0 {
            return Err(Error::config("num_psi must be at least 1"));
        }
        if self.noise_dim == 0 && self.num_psi > 1 {
            return Err(Error::config(
                "noise_dim 0 with several psi draws makes the mixing layer degenerate",
            ));
        }
        Ok(())
    }
}

/// Encoder weights and input layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SiviModel {
    /// `enc.w`, `mu.w`, `logvar.w`.
    pub params: ParamSet,
    feature_dim: usize,
    noise: NoiseSpec,
    use_labels: bool,
}

impl SiviModel {
    pub fn new(
        feature_dim: usize,
        noise: NoiseSpec,
        use_labels: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        noise.validate()?;
        let mut params = ParamSet::new();
        params.push_glorot("enc.w", feature_dim + 1 + noise.noise_dim, HIDDEN, rng);
        params.push_glorot("mu.w", HIDDEN, LATENT, rng);
        params.push_glorot("logvar.w", HIDDEN, LATENT, rng);
        Ok(SiviModel {
            params,
            feature_dim,
            noise,
            use_labels,
        })
    }

    pub fn from_params(
        params: ParamSet,
        feature_dim: usize,
        noise: NoiseSpec,
        use_labels: bool,
    ) -> Result<Self> {
        noise.validate()?;
        let want = [
            ("enc.w", [feature_dim + 1 + noise.noise_dim, HIDDEN]),
            ("mu.w", [HIDDEN, LATENT]),
            ("logvar.w", [HIDDEN, LATENT]),
        ];
        if params.len() != want.len() {
            return Err(Error::input(
                "encoder parameter table must hold three matrices",
            ));
        }
        for (i, (name, shape)) in want.iter().enumerate() {
            if params.names()[i] != *name || params.get(i).shape() != *shape {
                return Err(Error::input(format!(
                    "encoder parameter {i} should be `{name}` of shape {shape:?}"
                )));
            }
        }
        Ok(SiviModel {
            params,
            feature_dim,
            noise,
            use_labels,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn uses_labels(&self) -> bool {
        self.use_labels
    }
}

/// Pre-drawn noise for one forward pass: per ψ draw, the injected input
/// noise and the reparameterization noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDraws {
    pub psi: Vec<Tensor>,
    pub eps: Vec<Tensor>,
}

fn normal(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Tensor::from_vec(rows, cols, data).expect("sized")
}

impl NoiseDraws {
    /// Draws `draws` ψ samples for `nodes` batch nodes. For each draw the
    /// input noise (`(J + nodes) x noise_dim`) comes first, then the
    /// reparameterization noise (`nodes x LATENT`), both row-major.
    pub fn sample(spec: &NoiseSpec, nodes: usize, draws: usize, rng: &mut Rng) -> Self {
        let mut psi = Vec::with_capacity(draws);
        let mut eps = Vec::with_capacity(draws);
        for _ in 0..draws {
            psi.push(normal(spec.truncation + nodes, spec.noise_dim, rng));
            eps.push(normal(nodes, LATENT, rng));
        }
        NoiseDraws { psi, eps }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }
}

/// Per-batch constants: the padded propagation operator, the deterministic
/// input columns and the reconstruction targets/weights of each block.
pub struct BatchContext {
    pub a_norm: Arc<Csr>,
    base: Tensor,
    truncation: usize,
    nodes: usize,
    block_sizes: Vec<usize>,
    targets: Vec<Tensor>,
    weights: Vec<Tensor>,
}

/// Positive-class weight `non-edges / edges` over the off-diagonal entries.
pub fn positive_weight(n: usize, edges: usize) -> f64 {
    let pairs = n * n.saturating_sub(1) / 2;
    if edges == 0 || pairs == edges {
        1.0
    } else {
        (pairs - edges) as f64 / edges as f64
    }
}

impl BatchContext {
    pub fn new(model: &SiviModel, batch: &LabeledSubgraphBatch) -> Result<Self> {
        let n = batch.total_nodes();
        let j = model.noise.truncation;
        if n == 0 {
            return Err(Error::input("empty batch"));
        }
        let x = batch.features();
        if x.cols() != model.feature_dim {
            return Err(Error::shape(
                "encode_semi_implicit",
                format!(
                    "features have {} columns, encoder expects {}",
                    x.cols(),
                    model.feature_dim
                ),
            ));
        }
        let labels = if model.use_labels {
            batch.label_column()
        } else {
            Tensor::zeros(n, 1)
        };
        let data = Tensor::concat_cols(&[&x, &labels])?;
        let base = Tensor::concat_rows(&[&Tensor::zeros(j, data.cols()), &data])?;
        let trip = batch
            .global_edges()
            .flat_map(|(a, b)| [(a + j, b + j, 1.0), (b + j, a + j, 1.0)]);
        let a = Csr::from_triplets(n + j, n + j, trip)?;
        let mut targets = Vec::with_capacity(batch.num_blocks());
        let mut weights = Vec::with_capacity(batch.num_blocks());
        for b in &batch.blocks {
            let m = b.num_nodes();
            let t = b.dense_adjacency();
            let w_pos = positive_weight(m, b.local_edges.len());
            let mut w = t.map(|x| if x > 0.0 { w_pos } else { 1.0 });
            for i in 0..m {
                w.set(i, i, 0.0);
            }
            targets.push(t);
            weights.push(w);
        }
        Ok(BatchContext {
            a_norm: Arc::new(normalize_adjacency(&a)?),
            base,
            truncation: j,
            nodes: n,
            block_sizes: batch.block_sizes.clone(),
            targets,
            weights,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }
}

/// Encoder outputs on a tape, one entry per ψ draw, truncated rows removed.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub mu: Vec<Var>,
    pub log_var: Vec<Var>,
}

/// Runs the noise-injected encoder once per ψ draw in `draws`.
pub fn encode_semi_implicit(
    tape: &mut Tape,
    p: &BoundParams,
    model: &SiviModel,
    ctx: &BatchContext,
    draws: &NoiseDraws,
) -> Result<Encoded> {
    if draws.is_empty() {
        return Err(Error::input("at least one noise draw is required"));
    }
    let mut mu = Vec::with_capacity(draws.len());
    let mut log_var = Vec::with_capacity(draws.len());
    for psi in &draws.psi {
        let input = if model.noise.noise_dim == 0 {
            ctx.base.clone()
        } else {
            Tensor::concat_cols(&[&ctx.base, psi])?
        };
        let x = tape.constant(input);
        let xw = tape.matmul(x, p.var(0))?;
        let h = tape.sparse_matmul(&ctx.a_norm, xw)?;
        let h = tape.relu(h)?;
        let m = tape.matmul(h, p.var(1))?;
        let m = tape.sparse_matmul(&ctx.a_norm, m)?;
        let s = tape.matmul(h, p.var(2))?;
        let s = tape.sparse_matmul(&ctx.a_norm, s)?;
        let s = tape.clamp(s, LOG_VAR_MIN, LOG_VAR_MAX)?;
        let (m, s) = if ctx.truncation > 0 {
            (
                tape.slice(m, ctx.truncation, ctx.nodes)?,
                tape.slice(s, ctx.truncation, ctx.nodes)?,
            )
        } else {
            (m, s)
        };
        mu.push(m);
        log_var.push(s);
    }
    Ok(Encoded { mu, log_var })
}

/// `h = μ + ε ⊙ exp(0.5 · log σ²)` with the given noise.
pub fn reparameterize(tape: &mut Tape, mu: Var, log_var: Var, eps: &Tensor) -> Result<Var> {
    let half = tape.scale(log_var, 0.5)?;
    let std = tape.exp(half)?;
    let e = tape.constant(eps.clone());
    let noise = tape.mul(e, std)?;
    tape.add(mu, noise)
}

/// Value-level reparameterization drawing fresh noise from `rng`.
pub fn reparameterize_value(mu: &Tensor, log_var: &Tensor, rng: &mut Rng) -> Result<Tensor> {
    if mu.shape() != log_var.shape() {
        return Err(Error::shape(
            "reparameterize",
            "mu and log_var differ in shape",
        ));
    }
    let eps = normal(mu.rows(), mu.cols(), rng);
    let mut out = mu.clone();
    for (k, o) in out.data_mut().iter_mut().enumerate() {
        *o += eps.data()[k] * math::exp(0.5 * log_var.data()[k]);
    }
    Ok(out)
}

/// Per-block logits `h_i h_iᵀ`.
pub fn decode_logits(tape: &mut Tape, h: Var, block_sizes: &[usize]) -> Result<Vec<Var>> {
    let total: usize = block_sizes.iter().sum();
    if total != tape.value(h).rows() {
        return Err(Error::shape(
            "decode_node_aware",
            format!(
                "blocks cover {total} nodes, latent has {}",
                tape.value(h).rows()
            ),
        ));
    }
    let mut out = Vec::with_capacity(block_sizes.len());
    let mut off = 0;
    for &n in block_sizes {
        let hb = tape.slice(h, off, n)?;
        out.push(tape.matmul_nt(hb, hb)?);
        off += n;
    }
    Ok(out)
}

/// Mean over nodes of `0.5 Σ_d (μ² + σ² − 1 − log σ²)`.
pub fn kl_gaussian(tape: &mut Tape, mu: Var, log_var: Var) -> Result<Var> {
    let n = tape.value(mu).rows();
    if n == 0 {
        return Err(Error::shape("kl_gaussian", "no nodes"));
    }
    let m2 = tape.square(mu)?;
    let var = tape.exp(log_var)?;
    let a = tape.add(m2, var)?;
    let a = tape.sub(a, log_var)?;
    let a = tape.add_scalar(a, -1.0)?;
    let s = tape.sum(a)?;
    tape.scale(s, 0.5 / n as f64)
}

pub fn kl_gaussian_value(mu: &Tensor, log_var: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let m = tape.constant(mu.clone());
    let l = tape.constant(log_var.clone());
    let k = kl_gaussian(&mut tape, m, l)?;
    Ok(tape.value(k).item())
}

/// ELBO pieces on a tape.
#[derive(Clone, Debug)]
pub struct ElboTerms {
    /// `recon_loss + kl`; minimizing it maximizes the ELBO.
    pub loss: Var,
    /// ψ-averaged Gaussian KL.
    pub kl: Var,
    /// Weighted BCE summed per node row, averaged over nodes and draws.
    /// The ELBO's reconstruction term is its negation.
    pub recon_loss: Var,
    pub encoded: Encoded,
    /// Latent sample per draw.
    pub h: Vec<Var>,
}

/// Records the semi-implicit ELBO of a batch.
pub fn sivi_elbo(
    tape: &mut Tape,
    p: &BoundParams,
    model: &SiviModel,
    ctx: &BatchContext,
    draws: &NoiseDraws,
) -> Result<ElboTerms> {
    let encoded = encode_semi_implicit(tape, p, model, ctx, draws)?;
    let mut recons = Vec::with_capacity(draws.len());
    let mut kls = Vec::with_capacity(draws.len());
    let mut hs = Vec::with_capacity(draws.len());
    for (d, eps) in draws.eps.iter().enumerate() {
        let (mu, lv) = (encoded.mu[d], encoded.log_var[d]);
        let h = reparameterize(tape, mu, lv, eps)?;
        let logits = decode_logits(tape, h, &ctx.block_sizes)?;
        let mut block_losses = Vec::with_capacity(logits.len());
        for (b, &lg) in logits.iter().enumerate() {
            let bce = tape.bce_with_logits(lg, &ctx.targets[b])?;
            let w = tape.constant(ctx.weights[b].clone());
            let wb = tape.mul(bce, w)?;
            block_losses.push(tape.sum(wb)?);
        }
        let stacked = tape.concat_rows(&block_losses)?;
        let total = tape.sum(stacked)?;
        recons.push(tape.scale(total, 1.0 / ctx.nodes as f64)?);
        kls.push(kl_gaussian(tape, mu, lv)?);
        hs.push(h);
    }
    let recon_loss = mean_of(tape, &recons)?;
    let kl = mean_of(tape, &kls)?;
    let loss = tape.add(recon_loss, kl)?;
    Ok(ElboTerms {
        loss,
        kl,
        recon_loss,
        encoded,
        h: hs,
    })
}

fn mean_of(tape: &mut Tape, xs: &[Var]) -> Result<Var> {
    if xs.len() == 1 {
        return Ok(xs[0]);
    }
    let s = tape.concat_rows(xs)?;
    tape.mean(s)
}

/// Value-level posterior of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSample {
    pub mu: Vec<Tensor>,
    pub log_var: Vec<Tensor>,
    pub psi_draws: Vec<Tensor>,
    pub h: Vec<Tensor>,
    /// `‖μ‖² / Σ σ²` of the first draw; a diagnostic only.
    pub snr: f64,
}

/// Encodes and reparameterizes `batch` with `model.noise().num_psi` draws.
pub fn posterior(
    model: &SiviModel,
    batch: &LabeledSubgraphBatch,
    rng: &mut Rng,
) -> Result<PosteriorSample> {
    let ctx = BatchContext::new(model, batch)?;
    let draws = NoiseDraws::sample(&model.noise, ctx.nodes, model.noise.num_psi, rng);
    let mut tape = Tape::new();
    let p = model.params.bind_frozen(&mut tape);
    let enc = encode_semi_implicit(&mut tape, &p, model, &ctx, &draws)?;
    let mut h = Vec::with_capacity(draws.len());
    for (d, eps) in draws.eps.iter().enumerate() {
        let v = reparameterize(&mut tape, enc.mu[d], enc.log_var[d], eps)?;
        h.push(tape.value(v).clone());
    }
    let mu: Vec<Tensor> = enc.mu.iter().map(|&v| tape.value(v).clone()).collect();
    let log_var: Vec<Tensor> = enc.log_var.iter().map(|&v| tape.value(v).clone()).collect();
    let signal: f64 = mu[0].data().iter().map(|x| x * x).sum();
    let spread: f64 = log_var[0].data().iter().map(|&x| math::exp(x)).sum();
    Ok(PosteriorSample {
        mu,
        log_var,
        psi_draws: draws.psi,
        h,
        snr: signal / spread,
    })
}

/// Generated subgraphs, one dense block per input link.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSample {
    /// Symmetric, zero diagonal, values in `[0, 1]`.
    pub edge_probs: Vec<Tensor>,
    /// 0/1, set where the (thresholded) probability is positive.
    pub thresholded_adj: Vec<Tensor>,
    pub block_sizes: Vec<usize>,
    pub link_labels: Vec<LinkLabel>,
    /// Local endpoints of each block's link.
    pub target_indices: Vec<(usize, usize)>,
    /// Node features carried over from the input subgraphs.
    pub features: Vec<Tensor>,
    /// Global ids of each block's nodes.
    pub node_maps: Vec<Vec<usize>>,
    pub gamma: f64,
    /// Reserved for a Bernoulli–Poisson decoder; never populated.
    pub z_scaled: Option<Tensor>,
    /// Reserved for a Bernoulli–Poisson decoder; never populated.
    pub r_k: Option<Tensor>,
}

fn adjacency_of(p: &Tensor) -> Tensor {
    p.map(|x| if x > 0.0 { 1.0 } else { 0.0 })
}

/// Turns a latent matrix into per-block edge probabilities.
pub fn decode_node_aware(h: &Tensor, batch: &LabeledSubgraphBatch) -> Result<GeneratedSample> {
    if batch.total_nodes() != h.rows() {
        return Err(Error::shape(
            "decode_node_aware",
            format!(
                "blocks cover {} nodes, latent has {}",
                batch.total_nodes(),
                h.rows()
            ),
        ));
    }
    let mut probs = Vec::with_capacity(batch.num_blocks());
    for (&off, &n) in batch.offsets.iter().zip(&batch.block_sizes) {
        let hb = h.slice_rows(off, n)?;
        let mut p = hb.matmul_nt(&hb)?.map(math::sigmoid);
        for i in 0..n {
            p.set(i, i, 0.0);
        }
        probs.push(p);
    }
    Ok(GeneratedSample {
        thresholded_adj: probs.iter().map(adjacency_of).collect(),
        edge_probs: probs,
        block_sizes: batch.block_sizes.clone(),
        link_labels: batch.batch_labels.clone(),
        target_indices: batch.blocks.iter().map(|b| b.target).collect(),
        features: batch.blocks.iter().map(|b| b.features.clone()).collect(),
        node_maps: batch.blocks.iter().map(|b| b.node_map.clone()).collect(),
        gamma: 0.0,
        z_scaled: None,
        r_k: None,
    })
}

/// Zeroes probabilities below `gamma` and rebuilds the adjacency.
pub fn threshold_edges(sample: &GeneratedSample, gamma: f64) -> Result<GeneratedSample> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::input(format!("gamma {gamma} outside [0, 1]")));
    }
    let probs: Vec<Tensor> = sample
        .edge_probs
        .iter()
        .map(|p| p.map(|x| if x >= gamma { x } else { 0.0 }))
        .collect();
    Ok(GeneratedSample {
        thresholded_adj: probs.iter().map(adjacency_of).collect(),
        edge_probs: probs,
        gamma,
        ..sample.clone()
    })
}

impl GeneratedSample {
    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    /// Undirected edges kept in block `b`, `i < j`.
    pub fn block_edges(&self, b: usize) -> Vec<(usize, usize)> {
        let a = &self.thresholded_adj[b];
        let n = a.rows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if a.get(i, j) > 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Total kept undirected edges over all blocks.
    pub fn edge_count(&self) -> usize {
        (0..self.num_blocks())
            .map(|b| self.block_edges(b).len())
            .sum()
    }

    /// Block `b` as a standalone graph with its carried features.
    pub fn block_graph(&self, b: usize) -> Result<Graph> {
        Graph::from_edges(
            self.block_sizes[b],
            &self.block_edges(b),
            self.features[b].clone(),
        )
    }
}

/// Encode, reparameterize (one ψ draw), decode and threshold.
pub fn generate(
    model: &SiviModel,
    batch: &LabeledSubgraphBatch,
    gamma: f64,
    rng: &mut Rng,
) -> Result<GeneratedSample> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::input(format!("gamma {gamma} outside [0, 1]")));
    }
    let ctx = BatchContext::new(model, batch)?;
    let draws = NoiseDraws::sample(&model.noise, ctx.nodes, 1, rng);
    let mut tape = Tape::new();
    let p = model.params.bind_frozen(&mut tape);
    let enc = encode_semi_implicit(&mut tape, &p, model, &ctx, &draws)?;
    let h = reparameterize(&mut tape, enc.mu[0], enc.log_var[0], &draws.eps[0])?;
    let sample = decode_node_aware(tape.value(h), batch)?;
    threshold_edges(&sample, gamma)
}

/// Area under the ROC curve of edge versus non-edge probabilities over the
/// off-diagonal pairs of every block (ties count one half).
pub fn reconstruction_auc(sample: &GeneratedSample, batch: &LabeledSubgraphBatch) -> Result<f64> {
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for (b, block) in batch.blocks.iter().enumerate() {
        let truth = block.dense_adjacency();
        let p = &sample.edge_probs[b];
        for i in 0..block.num_nodes() {
            for j in i + 1..block.num_nodes() {
                scored.push((p.get(i, j), truth.get(i, j) > 0.0));
            }
        }
    }
    let n_pos = scored.iter().filter(|s| s.1).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::input("AUC needs both edges and non-edges"));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // rank-sum with average ranks over ties
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].0 == scored[i].0 {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        rank_sum += avg * scored[i..j].iter().filter(|s| s.1).count() as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// GGM pre-training settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GgmTrainConfig {
    pub epochs: usize,
    /// Epochs without a new best loss before stopping.
    pub patience: usize,
    pub lr: f64,
    /// Subgraphs per batch.
    pub batch_size: usize,
    /// Train links visited per epoch, 0 for all of them.
    pub links_per_epoch: usize,
    pub hops: usize,
    pub max_nodes: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Feed the zero-one labels to the encoder.
    pub use_labels: bool,
}

impl Default for GgmTrainConfig {
    fn default() -> Self {
        GgmTrainConfig {
            epochs: 200,
            patience: 100,
            lr: 1e-2,
            batch_size: 32,
            links_per_epoch: 512,
            hops: 1,
            max_nodes: 1000,
            seed: 0,
            noise: NoiseSpec::default(),
            use_labels: true,
        }
    }
}

impl GgmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
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

/// Enclosing subgraphs of the train links (positives, then negatives) on
/// the observed graph.
pub fn training_subgraphs(
    split: &DatasetSplit,
    opts: &ExtractOptions,
    seed: u64,
) -> Result<Vec<LabeledSubgraph>> {
    let g = &split.observed_graph;
    let mut r = rng::stream(seed, rng::SUBSAMPLE);
    let pos = split.train_pos.iter().map(|&(u, v)| Edge::positive(u, v));
    let neg = split.train_neg.iter().map(|&(u, v)| Edge::negative(u, v));
    pos.chain(neg)
        .map(|e| extract_enclosing_subgraph(g, &e, opts, &mut r))
        .collect()
}

/// Shuffled batches of `subgraphs` for one epoch. A nonzero `limit` keeps
/// only that many subgraphs, taken after the shuffle.
pub fn epoch_batches(
    subgraphs: &[LabeledSubgraph],
    batch_size: usize,
    limit: usize,
    rng: &mut Rng,
) -> Result<Vec<LabeledSubgraphBatch>> {
    let mut order: Vec<usize> = (0..subgraphs.len()).collect();
    order.shuffle(rng);
    if limit > 0 {
        order.truncate(limit);
    }
    order
        .chunks(batch_size.max(1))
        .map(|c| make_batch(c.iter().map(|&i| subgraphs[i].clone()).collect()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GgmEpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub kl: f64,
    pub recon_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GgmTrainOutcome {
    pub model: SiviModel,
    pub trace: Vec<GgmEpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
    /// Epoch-mean KL of the best epoch.
    pub final_kl: f64,
}

/// Pre-trains the encoder by minimizing the negative ELBO over batches of
/// train-link subgraphs; keeps the best-loss epoch.
pub fn pretrain_ggm(split: &DatasetSplit, cfg: &GgmTrainConfig) -> Result<GgmTrainOutcome> {
    cfg.validate()?;
    let subgraphs = training_subgraphs(split, &cfg.extract_options(), cfg.seed)?;
    if subgraphs.is_empty() {
        return Err(Error::input("no train links to pre-train the generator on"));
    }
    let mut init = rng::stream(cfg.seed, rng::INIT);
    let mut noise = rng::stream(cfg.seed, rng::NOISE);
    let mut shuffle = rng::stream(cfg.seed, rng::SHUFFLE);
    let mut model = SiviModel::new(
        split.observed_graph.feature_dim(),
        cfg.noise,
        cfg.use_labels,
        &mut init,
    )?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.params);
    let mut best: Option<(f64, usize, f64, ParamSet)> = None;
    let mut trace = Vec::new();
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let batches = epoch_batches(
            &subgraphs,
            cfg.batch_size,
            cfg.links_per_epoch,
            &mut shuffle,
        )?;
        let (mut loss_sum, mut kl_sum, mut rec_sum) = (0.0, 0.0, 0.0);
        for batch in &batches {
            let ctx = BatchContext::new(&model, batch)?;
            let draws =
                NoiseDraws::sample(&model.noise, ctx.nodes, model.noise.num_psi, &mut noise);
            let mut tape = Tape::new();
            let p = model.params.bind(&mut tape);
            let terms = sivi_elbo(&mut tape, &p, &model, &ctx, &draws)?;
            let lv = tape.value(terms.loss).item();
            if !lv.is_finite() {
                return Err(Error::numeric(format!(
                    "generator loss diverged at epoch {epoch}"
                )));
            }
            let grads = p.grads(&tape.backward(terms.loss)?)?;
            adam.step(&mut model.params, &grads)
                .map_err(|e| Error::numeric(format!("generator epoch {epoch}: {e}")))?;
            loss_sum += lv;
            kl_sum += tape.value(terms.kl).item();
            rec_sum += tape.value(terms.recon_loss).item();
        }
        let nb = batches.len() as f64;
        let rec = GgmEpochRecord {
            epoch,
            loss: loss_sum / nb,
            kl: kl_sum / nb,
            recon_loss: rec_sum / nb,
        };
        trace.push(rec);
        if best.as_ref().is_none_or(|b| rec.loss < b.0) {
            best = Some((rec.loss, epoch, rec.kl, model.params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (best_loss, best_epoch, final_kl, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(GgmTrainOutcome {
        model,
        trace,
        best_epoch,
        best_loss,
        final_kl,
    })
}
