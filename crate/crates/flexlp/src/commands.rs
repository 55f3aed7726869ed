//! The pipeline stages behind each subcommand.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use flexlp_core::analysis::{
    self, aggregate_sweep, alignment_report, degree_bias_scan, pretrain_for_seed, run_sweep_point,
    HeuristicHistogram, SourceTag,
};
use flexlp_core::flex::{self, generate_for_bucket, generated_cn_histogram};
use flexlp_core::gnn::{self, GcnModel, GnnEpochRecord, TrainHook};
use flexlp_core::graph::{extract_enclosing_subgraph, Edge, Graph, Heuristic};
use flexlp_core::rng;
use flexlp_core::sivi::{self, SiviModel};
use flexlp_core::split::{generate_split, verify_split, Bucket, DatasetSplit};
use flexlp_core::synth::{self, GraphFamily};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{Cli, Command};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{self, trace, Checkpoint, GeneratedDump, SplitFile};
use crate::io::{self, FeatureSource};
use crate::manifest::{self, FileHash, Manifest};
use crate::paths;

/// Book-keeping for one command: inputs, outputs, metrics, timing.
pub struct Run {
    command: &'static str,
    cfg: RunConfig,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
    metrics: BTreeMap<String, f64>,
    started: Instant,
    started_unix: u64,
}

impl Run {
    pub fn new(command: &'static str, cfg: RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.dir).map_err(|e| CliError::io(&cfg.dir, e))?;
        Ok(Run {
            command,
            cfg,
            inputs: Vec::new(),
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        })
    }

    pub fn cfg(&self) -> &RunConfig {
        &self.cfg
    }

    fn shown(&self, path: &Path) -> String {
        match path.strip_prefix(&self.cfg.dir) {
            Ok(rel) => rel.to_string_lossy().into_owned(),
            Err(_) => path.to_string_lossy().into_owned(),
        }
    }

    /// Registers an upstream artifact. A missing file is a dependency error;
    /// a file changed since its producer wrote it draws a staleness warning.
    pub fn input(&mut self, path: &Path) -> Result<PathBuf> {
        let shown = self.shown(path);
        if !path.is_file() {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let hint = match paths::producer(name) {
                Some(cmd) => format!("run `flexlp {cmd}` first"),
                None => "no such file".to_string(),
            };
            return Err(CliError::Dependency {
                path: path.to_path_buf(),
                hint,
            });
        }
        for s in manifest::check_staleness(&self.cfg.dir, path, &shown)? {
            warn!(
                "{} changed since `{}` wrote it (recorded sha256 {}, now {}); downstream results may be stale",
                s.path,
                s.producer,
                &s.recorded[..12],
                &s.current[..12]
            );
        }
        self.inputs.push(manifest::hash_entry(path, &shown)?);
        Ok(path.to_path_buf())
    }

    pub fn artifact(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.cfg.dir.join(name);
        self.input(&p)
    }

    fn record_output(&mut self, path: &Path) -> Result<()> {
        let shown = self.shown(path);
        self.outputs.retain(|o| o.path != shown);
        self.outputs.push(manifest::hash_entry(path, &shown)?);
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.cfg.dir.join(name);
        formats::write_text(&p, text)?;
        self.record_output(&p)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<PathBuf> {
        let p = self.cfg.dir.join(name);
        formats::write_json(&p, v)?;
        self.record_output(&p)?;
        Ok(p)
    }

    pub fn write_checkpoint(&mut self, name: &str, ckpt: &Checkpoint) -> Result<PathBuf> {
        let p = self.cfg.dir.join(name);
        ckpt.save(&p)?;
        self.record_output(&p)?;
        Ok(p)
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn finish(self) -> Result<Manifest> {
        let config = serde_json::to_value(&self.cfg)
            .map_err(|e| CliError::Numeric(format!("config is not serializable: {e}")))?;
        let m = Manifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.cfg.seed,
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            metrics: self.metrics,
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = m.save(&self.cfg.dir)?;
        info!("wrote {}", path.display());
        Ok(m)
    }

    /// The source graph, registering the edge list and any feature file.
    pub fn graph(&mut self) -> Result<Graph> {
        let edges = self.input(&self.cfg.edges_path())?;
        let source: FeatureSource = self.cfg.features_source().parse()?;
        if let FeatureSource::File(p) = &source {
            self.input(p)?;
        }
        io::load_graph(&edges, &source, self.cfg.seed)
    }

    /// The graph plus the stored split, re-verified.
    pub fn split(&mut self) -> Result<(Graph, DatasetSplit)> {
        let g = self.graph()?;
        let path = self.artifact(paths::SPLIT)?;
        let (split, _) = SplitFile::load(&path)?.into_split(&g)?;
        Ok((g, split))
    }

    fn gcn(&mut self, path: &Path) -> Result<GcnModel> {
        let p = self.input(path)?;
        Checkpoint::load(&p)?.into_gcn()
    }

    fn sivi(&mut self, path: &Path) -> Result<SiviModel> {
        let p = self.input(path)?;
        Checkpoint::load(&p)?.into_sivi()
    }
}

pub fn execute(cli: &Cli) -> Result<Manifest> {
    let cfg = crate::cli::resolve(cli)?;
    let mut run = Run::new(cli.command.name(), cfg)?;
    match &cli.command {
        Command::Synth(_) => synth(&mut run)?,
        Command::Split(_) => split(&mut run)?,
        Command::PretrainGnn(_) => pretrain_gnn(&mut run)?,
        Command::PretrainGgm(_) => pretrain_ggm(&mut run)?,
        Command::FlexTune(_) => flex_tune(&mut run)?,
        Command::Eval(a) => eval(&mut run, a.checkpoint.clone())?,
        Command::Analyze(a) => analyze(&mut run, a.checkpoint.clone())?,
        Command::Sweep(_) => sweep(&mut run)?,
    }
    run.finish()
}

fn synth(run: &mut Run) -> Result<()> {
    let spec = run.cfg().synth_spec();
    if let GraphFamily::ErdosRenyi { p, .. } = spec.graph {
        if p == 0.0 {
            warn!("ER with p = 0 produces an empty edge list");
        }
    }
    let g = synth::generate(&spec)?;
    if g.edge_count() == 0 {
        warn!("the synthetic graph has no edges");
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    run.write_text(paths::GRAPH, &io::format_edge_list(&edges))?;
    run.write_text(paths::FEATURES, &io::format_features_csv(g.features()))?;
    run.metric("nodes", g.num_nodes() as f64);
    run.metric("edges", g.edge_count() as f64);
    println!(
        "synth: {} nodes, {} edges, {} feature columns",
        g.num_nodes(),
        g.edge_count(),
        g.feature_dim()
    );
    Ok(())
}

fn split(run: &mut Run) -> Result<()> {
    let g = run.graph()?;
    let spec = run.cfg().split_spec();
    let split = generate_split(&g, &spec)?;
    let report = verify_split(&g, &split)?;
    run.write_json(paths::SPLIT, &SplitFile::from_split(&split))?;
    run.write_json(paths::SPLIT_REPORT, &report)?;
    for b in Bucket::ALL {
        let (p, n) = (split.positives(b).len(), split.negatives(b).len());
        run.metric(format!("{}_pos", b.name()), p as f64);
        run.metric(format!("{}_neg", b.name()), n as f64);
        println!("{:<5} {p:>6} positives {n:>6} negatives", b.name());
    }
    println!("{}", report.interpretation);
    Ok(())
}

/// Hits@K of `model` on the valid and test links under the eval settings.
fn eval_hits(run: &Run, model: &GcnModel, split: &DatasetSplit) -> Result<[(Bucket, f64); 2]> {
    let e = &run.cfg().eval;
    let g = gnn::eval_graph(split, e.adjacency)?;
    let a = gnn::propagation_matrix(&g)?;
    let mut out = [(Bucket::Valid, 0.0), (Bucket::Test, 0.0)];
    for (b, h) in &mut out {
        *h = gnn::evaluate_bucket(model, &g, &a, split, *b, e.k)?;
    }
    Ok(out)
}

fn hits_key(b: Bucket, k: usize) -> String {
    format!("{}_hits@{k}", b.name())
}

fn record_hits(run: &mut Run, model: &GcnModel, split: &DatasetSplit) -> Result<()> {
    let k = run.cfg().eval.k;
    for (b, h) in eval_hits(run, model, split)? {
        run.metric(hits_key(b, k), h);
        println!("{} hits@{k} {h}", b.name());
    }
    Ok(())
}

struct Clock {
    start: Instant,
    seconds: Vec<f64>,
}

impl TrainHook for Clock {
    fn on_epoch(&mut self, r: &GnnEpochRecord) {
        self.seconds.push(self.start.elapsed().as_secs_f64());
        log::debug!(
            "epoch {} loss {} valid {}",
            r.epoch,
            r.train_loss,
            r.valid_hits
        );
    }
}

fn pretrain_gnn(run: &mut Run) -> Result<()> {
    let (_, split) = run.split()?;
    let cfg = run.cfg().pipeline().gnn;
    let mut clock = Clock {
        start: Instant::now(),
        seconds: Vec::new(),
    };
    let out = gnn::pretrain_gnn(&split, &cfg, &mut clock)?;
    run.write_checkpoint(paths::GNN_CKPT, &Checkpoint::from_gcn(&out.model))?;
    run.write_text(
        paths::GNN_TRACE,
        &trace::gnn_trace_csv(&out.trace, &clock.seconds),
    )?;
    run.metric("best_epoch", out.best_epoch as f64);
    run.metric("epochs_run", out.epochs_run as f64);
    run.metric("best_valid_hits", out.best_valid_hits);
    run.metric("initial_valid_hits", out.initial_valid_hits);
    record_hits(run, &out.model, &split)
}

fn pretrain_ggm(run: &mut Run) -> Result<()> {
    let (_, split) = run.split()?;
    let cfg = run.cfg().pipeline().ggm;
    let out = sivi::pretrain_ggm(&split, &cfg)?;
    run.write_checkpoint(paths::GGM_CKPT, &Checkpoint::from_sivi(&out.model))?;
    run.write_text(paths::GGM_TRACE, &trace::ggm_trace_csv(&out.trace))?;
    run.metric("best_epoch", out.best_epoch as f64);
    run.metric("best_loss", out.best_loss);
    run.metric("final_kl", out.final_kl);
    println!(
        "generator: best loss {} at epoch {}, KL {}",
        out.best_loss, out.best_epoch, out.final_kl
    );
    Ok(())
}

fn flex_tune(run: &mut Run) -> Result<()> {
    let gnn_path = run.cfg().dir.join(paths::GNN_CKPT);
    let ggm_path = run.cfg().dir.join(paths::GGM_CKPT);
    let gnn = run.gcn(&gnn_path)?;
    let ggm = run.sivi(&ggm_path)?;
    let (_, split) = run.split()?;
    let cfg = run.cfg().pipeline().flex;
    let out = flex::flex_tune(&gnn, &ggm, &split, &cfg)?;
    run.write_checkpoint(paths::FLEX_GNN_CKPT, &Checkpoint::from_gcn(&out.gnn))?;
    run.write_checkpoint(paths::FLEX_GGM_CKPT, &Checkpoint::from_sivi(&out.ggm))?;
    run.write_text(paths::FLEX_TRACE, &trace::flex_trace_csv(&out.trace))?;
    run.metric("tau", out.tau);
    run.metric("best_epoch", out.best_epoch as f64);
    run.metric("best_valid_hits", out.best_valid_hits);
    run.metric("initial_valid_hits", out.initial_valid_hits);
    record_hits(run, &out.gnn, &split)
}

fn eval(run: &mut Run, checkpoint: Option<PathBuf>) -> Result<()> {
    let path = checkpoint.unwrap_or_else(|| run.cfg().dir.join(paths::GNN_CKPT));
    let model = run.gcn(&path)?;
    let (_, split) = run.split()?;
    let k = run.cfg().eval.k;
    let hits = eval_hits(run, &model, &split)?;
    let shown = run.shown(&path);
    let rows: Vec<(&str, f64)> = hits.iter().map(|&(b, h)| (b.name(), h)).collect();
    run.write_text(paths::EVAL_CSV, &trace::eval_csv(&shown, k, &rows))?;
    for (b, h) in hits {
        run.metric(hits_key(b, k), h);
        println!("{} hits@{k} {h}", b.name());
    }
    Ok(())
}

#[derive(Serialize)]
struct AnalysisReport {
    gamma: f64,
    histograms: Vec<HeuristicHistogram>,
    alignment: analysis::AlignmentReport,
    degree_bias_generated: analysis::DegreeBiasScan,
    degree_bias_observed: analysis::DegreeBiasScan,
}

fn observed_cn(g: &Graph, links: &[(usize, usize)], tag: SourceTag) -> Result<HeuristicHistogram> {
    let values = links
        .iter()
        .map(|&(u, v)| Heuristic::CommonNeighbors.evaluate(g, u, v))
        .collect::<flexlp_core::Result<Vec<_>>>()?;
    Ok(HeuristicHistogram::from_values(
        Heuristic::CommonNeighbors,
        tag,
        &values,
    ))
}

fn analyze(run: &mut Run, checkpoint: Option<PathBuf>) -> Result<()> {
    let path = checkpoint.unwrap_or_else(|| run.cfg().dir.join(paths::GGM_CKPT));
    let ggm = run.sivi(&path)?;
    let (_, split) = run.split()?;
    let flex_cfg = run.cfg().pipeline().flex;
    let gamma = run.cfg().analyze.gamma.unwrap_or(flex_cfg.gamma);
    let opts = flex_cfg.extract_options();
    let seed = run.cfg().seed;
    let sample = generate_for_bucket(&ggm, &split, Bucket::Train, gamma, &opts, seed)?;

    let g = &split.observed_graph;
    let generated = generated_cn_histogram(&sample)?;
    let train = observed_cn(g, &split.train_pos, SourceTag::Train)?;
    let valid = observed_cn(g, &split.valid_pos, SourceTag::Valid)?;
    let test = observed_cn(g, &split.test_pos, SourceTag::Test)?;
    let alignment = alignment_report(&train, &valid, &generated)?;

    let mut sub = rng::stream(seed, rng::SUBSAMPLE);
    let observed_subs = split
        .train_pos
        .iter()
        .map(|&(u, v)| extract_enclosing_subgraph(g, &Edge::positive(u, v), &opts, &mut sub))
        .collect::<flexlp_core::Result<Vec<_>>>()?;
    let (gen_samples, obs_samples) = (
        analysis::samples_from_generated(&sample),
        analysis::samples_from_subgraphs(&observed_subs),
    );
    let (gen_scan, obs_scan) = rayon::join(
        || degree_bias_scan(&gen_samples),
        || degree_bias_scan(&obs_samples),
    );
    let (gen_scan, obs_scan) = (gen_scan?, obs_scan?);

    run.write_json(paths::GENERATED, &GeneratedDump::from_sample(&sample))?;
    let histograms = vec![train, valid, test, generated];
    run.write_text(paths::CN_HISTOGRAMS, &trace::histograms_csv(&histograms))?;
    run.write_text(
        paths::DEGREE_BIAS,
        &trace::degree_bias_csv(&[("generated", &gen_scan), ("observed", &obs_scan)]),
    )?;
    for h in &histograms {
        let name = format!("{:?}", h.source).to_lowercase();
        run.metric(format!("mean_cn_{name}"), h.mean);
        println!("mean CN {name:<9} {:.4} over {} links", h.mean, h.total);
    }
    run.metric("train_gap", alignment.train_gap);
    run.metric("gen_gap", alignment.gen_gap);
    run.metric("degree_bias_slope_generated", gen_scan.slope);
    run.metric("degree_bias_slope_observed", obs_scan.slope);
    println!(
        "alignment: train gap {:.4}, generated gap {:.4}",
        alignment.train_gap, alignment.gen_gap
    );
    run.write_json(
        paths::ANALYSIS,
        &AnalysisReport {
            gamma,
            histograms,
            alignment,
            degree_bias_generated: gen_scan,
            degree_bias_observed: obs_scan,
        },
    )?;
    Ok(())
}

fn sweep(run: &mut Run) -> Result<()> {
    let (_, split) = run.split()?;
    let base = run.cfg().pipeline();
    let sw = run.cfg().sweep.clone();
    let grid = sw.grid.clone().unwrap_or_else(|| sw.param.default_grid());
    let pre: Vec<_> = sw
        .seeds
        .par_iter()
        .map(|&s| pretrain_for_seed(&split, &base, s))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..sw.seeds.len()).map(move |s| (g, s)))
        .collect();
    let flat: Vec<_> = jobs
        .par_iter()
        .map(|&(g, s)| match &pre[s] {
            Ok(p) => run_sweep_point(p, &split, &base, sw.param, grid[g], sw.seeds[s]),
            Err(e) => Err(e.clone()),
        })
        .collect();
    let mut flat = flat.into_iter();
    let outcomes = (0..grid.len())
        .map(|_| flat.by_ref().take(sw.seeds.len()).collect())
        .collect();
    let result = aggregate_sweep(sw.param, &grid, &sw.seeds, outcomes);
    run.write_json(paths::SWEEP, &result)?;
    run.write_text(paths::SWEEP_CSV, &trace::sweep_csv(&result))?;
    for p in &result.points {
        for (s, e) in &p.failures {
            warn!("{} = {} seed {s} failed: {e}", sw.param.name(), p.value);
        }
        println!(
            "{} = {:<8} mean {:.4} std {:.4} ({} seeds)",
            sw.param.name(),
            p.value,
            p.mean,
            p.std,
            p.per_seed.len()
        );
    }
    if result.points.iter().all(|p| p.per_seed.is_empty()) {
        return Err(CliError::Numeric("every sweep run failed".into()));
    }
    Ok(())
}
