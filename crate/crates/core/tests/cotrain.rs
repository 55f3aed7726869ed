mod common;

use common::*;
use flexlp_core::autodiff::{AdamConfig, AdamState, Tape, Tensor};
use flexlp_core::flex::{
    ablation_run, evaluate_terms, flex_tune, gen_loss, ggm_step, gnn_step, FlexConfig, Objective,
    StepInputs, UpdateRule,
};
use flexlp_core::gnn::{pretrain_gnn, GcnModel, GnnTrainConfig, NoHook};
use flexlp_core::rng;
use flexlp_core::sivi::{
    pretrain_ggm, BatchContext, GgmTrainConfig, NoiseDraws, NoiseSpec, SiviModel,
};
use flexlp_core::split::{DatasetSplit, Direction};

struct Toy {
    gnn: GcnModel,
    ggm: SiviModel,
    batch: flexlp_core::graph::LabeledSubgraphBatch,
    draws: NoiseDraws,
}

fn toy(seed: u64) -> Toy {
    let mut r = rng::seeded(seed);
    let g = random_graph(&mut r, 16, 0.25, 3);
    let (pos, neg) = some_links(&g, 4);
    let batch = batch_for(&g, &pos, &neg);
    let gnn = GcnModel::new(3, 8, 2, &mut r).unwrap();
    let ggm = SiviModel::new(3, NoiseSpec::default(), true, &mut r).unwrap();
    let draws = NoiseDraws::sample(
        &ggm.noise(),
        batch.total_nodes(),
        ggm.noise().num_psi,
        &mut r,
    );
    Toy {
        gnn,
        ggm,
        batch,
        draws,
    }
}

fn objective(alpha: f64, rule: UpdateRule) -> Objective {
    Objective {
        alpha,
        tau: 2.0,
        gamma: 0.3,
        rule,
        mix_ratio: 0.0,
    }
}

const TINY: f64 = 1e-5;

#[test]
fn generator_ascends_l_gen() {
    for seed in 0..5 {
        let mut t = toy(seed);
        let obj = objective(0.0, UpdateRule::CheckMode);
        let ctx = BatchContext::new(&t.ggm, &t.batch).unwrap();
        let inp = StepInputs::new(&t.batch, &ctx, &t.draws);
        let before = evaluate_terms(&t.gnn, &t.ggm, &inp, &obj).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(TINY), &t.ggm.params);
        ggm_step(&mut t.ggm, &mut adam, &t.gnn, &inp, &obj).unwrap();
        let after = evaluate_terms(&t.gnn, &t.ggm, &inp, &obj).unwrap();
        assert!(
            after.gen_loss >= before.gen_loss,
            "seed {seed}: {} -> {}",
            before.gen_loss,
            after.gen_loss
        );
    }
}

#[test]
fn update_rules_push_the_link_loss_opposite_ways() {
    for seed in 0..5 {
        for (rule, falls) in [
            (UpdateRule::CheckMode, true),
            (UpdateRule::LiteralMinmax, false),
        ] {
            let mut t = toy(seed);
            // a large alpha makes the link term dominate the generator's step
            let obj = objective(1e4, rule);
            let ctx = BatchContext::new(&t.ggm, &t.batch).unwrap();
            let inp = StepInputs::new(&t.batch, &ctx, &t.draws);
            let before = evaluate_terms(&t.gnn, &t.ggm, &inp, &obj).unwrap();
            let mut adam = AdamState::new(AdamConfig::with_lr(TINY), &t.ggm.params);
            ggm_step(&mut t.ggm, &mut adam, &t.gnn, &inp, &obj).unwrap();
            let after = evaluate_terms(&t.gnn, &t.ggm, &inp, &obj).unwrap();
            assert_eq!(
                after.lp_loss < before.lp_loss,
                falls,
                "seed {seed} {rule:?}"
            );
        }
    }
}

#[test]
fn gnn_step_descends_and_leaves_the_generator_alone() {
    let mut t = toy(7);
    let obj = objective(1.05, UpdateRule::CheckMode);
    let ctx = BatchContext::new(&t.ggm, &t.batch).unwrap();
    let inp = StepInputs::new(&t.batch, &ctx, &t.draws);
    let before = evaluate_terms(&t.gnn, &t.ggm, &inp, &obj).unwrap();
    let ggm_before = t.ggm.clone();
    let mut adam = AdamState::new(AdamConfig::with_lr(TINY), &t.gnn.params);
    let seen = gnn_step(&mut t.gnn, &mut adam, &t.ggm, &inp, &obj).unwrap();
    assert_eq!(seen, before);
    let after = evaluate_terms(&t.gnn, &t.ggm, &inp, &obj).unwrap();
    assert!(after.lp_loss < before.lp_loss);
    assert_eq!(after.elbo_loss, before.elbo_loss);
    assert_eq!(t.ggm, ggm_before);

    let gnn_before = t.gnn.clone();
    let mut adam = AdamState::new(AdamConfig::with_lr(TINY), &t.ggm.params);
    ggm_step(&mut t.ggm, &mut adam, &t.gnn, &inp, &obj).unwrap();
    assert_eq!(t.gnn, gnn_before);
    assert_ne!(t.ggm, ggm_before);
}

#[test]
fn penalty_settles_half_a_nat_above_tau() {
    // generator objective on a lone KL with a fixed reconstruction:
    // minimize -(recon + kl - (kl - tau)^2), stationary at kl = tau + 1/2
    let tau = 3.0;
    let mut kl = 0.2;
    for _ in 0..2000 {
        let mut tape = Tape::new();
        let k = tape.leaf(Tensor::scalar(kl));
        let recon = tape.constant(Tensor::scalar(1.7));
        let elbo = tape.add(recon, k).unwrap();
        let g = gen_loss(&mut tape, elbo, k, tau).unwrap();
        let loss = tape.scale(g, -1.0).unwrap();
        kl -= 0.05 * tape.backward(loss).unwrap().wrt(k).unwrap().item();
    }
    assert!((kl - (tau + 0.5)).abs() < 1e-9, "{kl}");
}

fn small_split() -> DatasetSplit {
    cn_split(0, Direction::Backward).1
}

fn quick_gnn(split: &DatasetSplit) -> GcnModel {
    let cfg = GnnTrainConfig {
        epochs: 30,
        patience: 10,
        hidden: 32,
        ..Default::default()
    };
    pretrain_gnn(split, &cfg, &mut NoHook).unwrap().model
}

fn quick_ggm_cfg() -> GgmTrainConfig {
    GgmTrainConfig {
        epochs: 5,
        patience: 5,
        links_per_epoch: 128,
        ..Default::default()
    }
}

fn quick_flex() -> FlexConfig {
    FlexConfig {
        epochs: 2,
        patience: 2,
        links_per_epoch: 64,
        ..Default::default()
    }
}

#[test]
fn ablation_without_switch_is_plain_flex() {
    let split = small_split();
    let gnn = quick_gnn(&split);
    let mut base = pipeline(0);
    base.ggm = quick_ggm_cfg();
    base.flex = quick_flex();
    let (metrics, via_ablation) = ablation_run(&gnn, &split, &base, None).unwrap();
    let ggm = pretrain_ggm(&split, &base.ggm).unwrap().model;
    let direct = flex_tune(&gnn, &ggm, &split, &base.flex).unwrap();
    assert_eq!(via_ablation, direct);
    assert_eq!(metrics.label, "flex");
    assert_eq!(metrics.valid_hits, direct.best_valid_hits);
}

#[test]
fn flex_tune_is_deterministic_and_traces_every_epoch() {
    let split = small_split();
    let gnn = quick_gnn(&split);
    let ggm = pretrain_ggm(&split, &quick_ggm_cfg()).unwrap().model;
    let cfg = quick_flex();
    let a = flex_tune(&gnn, &ggm, &split, &cfg).unwrap();
    let b = flex_tune(&gnn, &ggm, &split, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace.len(), cfg.epochs + 1);
    assert_eq!(a.trace[0].epoch, 0);
    assert!(a.best_epoch >= 1);
    assert_eq!(a.trace[0].valid_hits, a.initial_valid_hits);
    assert!((a.tau - (a.trace[0].kl_estimate + cfg.tau_offset)).abs() < 1e-12);
    for rec in &a.trace {
        assert!(rec.kl_estimate >= 0.0);
        assert!(rec.penalty <= 0.0);
    }
}

#[test]
fn selection_can_keep_the_starting_models() {
    let split = small_split();
    let gnn = quick_gnn(&split);
    let ggm = pretrain_ggm(&split, &quick_ggm_cfg()).unwrap().model;
    let cfg = FlexConfig {
        select_initial: true,
        ..quick_flex()
    };
    let out = flex_tune(&gnn, &ggm, &split, &cfg).unwrap();
    assert!(out.best_valid_hits >= out.initial_valid_hits);
    if out.best_epoch == 0 {
        assert_eq!(out.gnn, gnn);
        assert_eq!(out.ggm, ggm);
    }
}

#[test]
fn explicit_tau_is_used_verbatim() {
    let split = small_split();
    let gnn = quick_gnn(&split);
    let ggm = pretrain_ggm(&split, &quick_ggm_cfg()).unwrap().model;
    let cfg = FlexConfig {
        tau: Some(4.5),
        epochs: 1,
        patience: 1,
        ..quick_flex()
    };
    assert_eq!(flex_tune(&gnn, &ggm, &split, &cfg).unwrap().tau, 4.5);
}

#[test]
fn kl_moves_toward_tau() {
    let split = small_split();
    let gnn = quick_gnn(&split);
    let ggm = pretrain_ggm(&split, &quick_ggm_cfg()).unwrap().model;
    // alpha 0 isolates the generator's own objective
    let cfg = FlexConfig {
        alpha: 0.0,
        lr_ggm: 1e-3,
        epochs: 3,
        patience: 3,
        ..quick_flex()
    };
    let out = flex_tune(&gnn, &ggm, &split, &cfg).unwrap();
    let start = (out.trace[0].kl_estimate - out.tau).abs();
    let end = (out.trace.last().unwrap().kl_estimate - out.tau).abs();
    assert!(end < start, "|KL - tau| {start} -> {end}");
}

#[test]
fn invalid_configs_are_rejected() {
    let split = small_split();
    let gnn = quick_gnn(&split);
    let ggm = SiviModel::new(
        split.observed_graph.feature_dim(),
        NoiseSpec::default(),
        true,
        &mut rng::seeded(0),
    )
    .unwrap();
    let bad = FlexConfig {
        gamma: 2.0,
        ..quick_flex()
    };
    assert!(flex_tune(&gnn, &ggm, &split, &bad).is_err());
}
