use flexlp_core::synth::{generate, FeatureMode, GraphFamily, SyntheticGraphSpec};
use proptest::prelude::*;

fn spec(graph: GraphFamily, features: &str, seed: u64) -> SyntheticGraphSpec {
    SyntheticGraphSpec {
        graph,
        features: features.parse().unwrap(),
        seed,
    }
}

#[test]
fn barabasi_albert_edge_count() {
    let g = generate(&spec(
        GraphFamily::BarabasiAlbert { nodes: 100, m: 2 },
        "constant:1",
        0,
    ))
    .unwrap();
    assert_eq!(g.num_nodes(), 100);
    assert_eq!(g.edge_count(), 197);
}

#[test]
fn sbm_respects_blocks() {
    let g = generate(&spec(
        GraphFamily::Sbm {
            blocks: 4,
            nodes: 80,
            p_in: 0.3,
            p_out: 0.0,
            p_ring: None,
        },
        "community:4",
        1,
    ))
    .unwrap();
    for (u, v) in g.edges() {
        assert_eq!(u * 4 / 80, v * 4 / 80);
    }
    // the community column carries the unit shift on average
    let block_mean = |b: usize, c: usize| {
        (b * 20..(b + 1) * 20)
            .map(|i| g.features().get(i, c))
            .sum::<f64>()
            / 20.0
    };
    for b in 0..4 {
        assert!(block_mean(b, b) > block_mean(b, (b + 1) % 4));
    }
}

#[test]
fn feature_modes_round_trip() {
    for s in [
        "constant:3",
        "degree-onehot:5",
        "gaussian:8",
        "community:16",
    ] {
        let m: FeatureMode = s.parse().unwrap();
        assert_eq!(m.to_string(), s);
    }
    assert!("gaussian".parse::<FeatureMode>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generation_is_seed_deterministic(seed in any::<u64>(), nodes in 10usize..60, p in 0.0f64..0.5) {
        let s = spec(GraphFamily::ErdosRenyi { nodes, p }, "gaussian:3", seed);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.num_nodes(), nodes);
        prop_assert_eq!(a.feature_dim(), 3);
        for (u, v) in a.edges() {
            prop_assert!(u < v && v < nodes);
        }
    }
}
