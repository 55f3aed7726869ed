mod common;

use common::*;
use flexlp_core::autodiff::Tensor;
use flexlp_core::graph::{extract_enclosing_subgraph, make_batch, Edge, Heuristic};
use flexlp_core::rng;
use flexlp_core::sivi::{
    decode_node_aware, generate, kl_gaussian_value, positive_weight, posterior, pretrain_ggm,
    reconstruction_auc, reparameterize_value, threshold_edges, GgmTrainConfig, NoiseSpec,
    SiviModel,
};
use flexlp_core::split::{generate_split, Direction, SplitSpec};
use flexlp_core::synth::{GraphFamily, SyntheticGraphSpec};
use proptest::prelude::*;

fn small_cfg() -> GgmTrainConfig {
    GgmTrainConfig {
        epochs: 30,
        patience: 30,
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn gaussian_kl_is_non_negative(
        mu in proptest::collection::vec(-5.0f64..5.0, 1..40),
        lv in proptest::collection::vec(-8.0f64..8.0, 40),
    ) {
        let n = mu.len();
        let m = Tensor::from_vec(n, 1, mu).unwrap();
        let l = Tensor::from_vec(n, 1, lv[..n].to_vec()).unwrap();
        prop_assert!(kl_gaussian_value(&m, &l).unwrap() >= 0.0);
        let zero = Tensor::zeros(n, 1);
        prop_assert_eq!(kl_gaussian_value(&zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn thresholding_is_monotone_and_idempotent(seed in any::<u64>(), g1 in 0.0f64..1.0, g2 in 0.0f64..1.0) {
        let mut r = rng::seeded(seed);
        let g = random_graph(&mut r, 10, 0.3, 2);
        let (pos, neg) = some_links(&g, 2);
        let batch = batch_for(&g, &pos, &neg);
        let h = gaussian(&mut r, batch.total_nodes(), 4);
        let s = decode_node_aware(&h, &batch).unwrap();
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let a = threshold_edges(&s, lo).unwrap();
        let b = threshold_edges(&s, hi).unwrap();
        prop_assert!(b.edge_count() <= a.edge_count());
        prop_assert_eq!(&threshold_edges(&a, lo).unwrap(), &a);
        // thresholding twice keeps the stricter cut
        prop_assert_eq!(&threshold_edges(&a, hi).unwrap(), &b);
        for p in &s.edge_probs {
            for i in 0..p.rows() {
                prop_assert_eq!(p.get(i, i), 0.0);
                for j in 0..p.rows() {
                    prop_assert_eq!(p.get(i, j), p.get(j, i));
                }
            }
        }
    }
}

#[test]
fn threshold_rejects_out_of_range() {
    let mut r = rng::seeded(0);
    let g = random_graph(&mut r, 6, 0.5, 2);
    let (pos, _) = some_links(&g, 1);
    let batch = batch_for(&g, &pos, &[]);
    let s = decode_node_aware(&gaussian(&mut r, batch.total_nodes(), 3), &batch).unwrap();
    assert!(threshold_edges(&s, 1.5).is_err());
    assert!(threshold_edges(&s, -0.1).is_err());
}

#[test]
fn positive_weight_examples() {
    assert_eq!(positive_weight(4, 2), 2.0);
    assert_eq!(positive_weight(4, 0), 1.0);
    assert_eq!(positive_weight(3, 3), 1.0);
}

#[test]
fn reparameterization_moments() {
    let mu = Tensor::from_vec(1, 2, vec![0.5, -1.0]).unwrap();
    let lv = Tensor::from_vec(1, 2, vec![0.0, (0.25f64).ln()]).unwrap();
    let mut r = rng::seeded(9);
    let draws = 20_000;
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..draws {
        let h = reparameterize_value(&mu, &lv, &mut r).unwrap();
        for d in 0..2 {
            sum[d] += h.data()[d];
            sq[d] += h.data()[d] * h.data()[d];
        }
    }
    let want_var = [1.0, 0.25];
    for d in 0..2 {
        let mean = sum[d] / draws as f64;
        let var = sq[d] / draws as f64 - mean * mean;
        // about four standard errors
        assert!(
            (mean - mu.data()[d]).abs() < 4.0 * (want_var[d] / draws as f64).sqrt(),
            "mean {mean}"
        );
        assert!((var - want_var[d]).abs() < 0.05 * want_var[d], "var {var}");
    }
}

#[test]
fn pretraining_reconstructs_and_lowers_the_loss() {
    let g = flexlp_core::synth::generate(&SyntheticGraphSpec {
        graph: GraphFamily::Sbm {
            blocks: 2,
            nodes: 120,
            p_in: 0.2,
            p_out: 0.02,
            p_ring: None,
        },
        features: "gaussian:8".parse().unwrap(),
        seed: 0,
    })
    .unwrap();
    let mut spec = SplitSpec::standard(Heuristic::CommonNeighbors, Direction::Forward, 0);
    spec.min_negatives = 50;
    let split = generate_split(&g, &spec).unwrap();
    let cfg = small_cfg();
    let out = pretrain_ggm(&split, &cfg).unwrap();
    let first = out.trace[0].loss;
    assert!(out.best_loss < first, "{first} -> {}", out.best_loss);
    assert!(out.trace[..10].last().unwrap().loss < first);

    // subgraphs of links the generator never trained on, decoded from the
    // posterior mean
    let mut r = rng::seeded(7);
    let subs = split
        .valid_pos
        .iter()
        .take(64)
        .map(|&(u, v)| {
            extract_enclosing_subgraph(
                &split.observed_graph,
                &Edge::positive(u, v),
                &cfg.extract_options(),
                &mut r,
            )
            .unwrap()
        })
        .collect();
    let batch = make_batch(subs).unwrap();
    let post = posterior(&out.model, &batch, &mut r).unwrap();
    let sample = decode_node_aware(&post.mu[0], &batch).unwrap();
    let auc = reconstruction_auc(&sample, &batch).unwrap();
    assert!(auc > 0.8, "AUC {auc}");
}

#[test]
fn pretraining_is_deterministic() {
    let (_, split) = cn_split(1, Direction::Forward);
    let cfg = GgmTrainConfig {
        epochs: 5,
        patience: 5,
        ..Default::default()
    };
    let a = pretrain_ggm(&split, &cfg).unwrap();
    let b = pretrain_ggm(&split, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn psi_draws_change_the_posterior() {
    let mut r = rng::seeded(2);
    let g = random_graph(&mut r, 12, 0.3, 3);
    let (pos, neg) = some_links(&g, 3);
    let batch = batch_for(&g, &pos, &neg);
    let noisy = SiviModel::new(3, NoiseSpec::default(), true, &mut r).unwrap();
    let p = posterior(&noisy, &batch, &mut r).unwrap();
    assert_eq!(p.mu.len(), NoiseSpec::default().num_psi);
    assert_ne!(p.mu[0], p.mu[1]);
    let plain = SiviModel::new(3, NoiseSpec::plain(), true, &mut r).unwrap();
    let q = posterior(&plain, &batch, &mut r).unwrap();
    assert_eq!(q.mu.len(), 1);
    assert!(q.psi_draws[0].is_empty());
}

#[test]
fn truncated_rows_are_dropped() {
    let mut r = rng::seeded(3);
    let g = random_graph(&mut r, 10, 0.3, 2);
    let (pos, neg) = some_links(&g, 2);
    let batch = batch_for(&g, &pos, &neg);
    let noise = NoiseSpec {
        noise_dim: 4,
        num_psi: 2,
        truncation: 5,
    };
    let m = SiviModel::new(2, noise, true, &mut r).unwrap();
    let p = posterior(&m, &batch, &mut r).unwrap();
    assert_eq!(p.mu[0].rows(), batch.total_nodes());
    assert_eq!(p.psi_draws[0].rows(), batch.total_nodes() + 5);
}

#[test]
fn noise_spec_validation() {
    assert!(NoiseSpec {
        noise_dim: 0,
        num_psi: 2,
        truncation: 0
    }
    .validate()
    .is_err());
    assert!(NoiseSpec {
        noise_dim: 3,
        num_psi: 0,
        truncation: 0
    }
    .validate()
    .is_err());
    assert!(NoiseSpec::plain().validate().is_ok());
}

#[test]
fn generation_keeps_blocks_and_carries_inputs() {
    let mut r = rng::seeded(4);
    let g = random_graph(&mut r, 14, 0.25, 3);
    let (pos, neg) = some_links(&g, 3);
    let batch = batch_for(&g, &pos, &neg);
    let m = SiviModel::new(3, NoiseSpec::default(), true, &mut r).unwrap();
    let s = generate(&m, &batch, 0.5, &mut r).unwrap();
    assert_eq!(s.block_sizes, batch.block_sizes);
    assert_eq!(s.link_labels, batch.batch_labels);
    assert_eq!(s.target_indices, vec![(0, 1); batch.num_blocks()]);
    for (b, block) in batch.blocks.iter().enumerate() {
        assert_eq!(s.features[b], block.features);
        assert_eq!(s.node_maps[b], block.node_map);
        assert_eq!(s.edge_probs[b].rows(), block.num_nodes());
        assert!(s.edge_probs[b].data().iter().all(|&p| p == 0.0 || p >= 0.5));
    }
    assert!(s.z_scaled.is_none() && s.r_k.is_none());
}
