use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wlrni::graph::{NodeType, TypedGraph};
use wlrni::nn::Matrix;
use wlrni::rni::{init_features, individualization_rate, InitScheme, LemmaParams};

#[test]
fn sampling_is_equivariant_under_relabeling() {
    use NodeType::*;
    let g = TypedGraph::new(vec![LiteralNode, LiteralNode, DisjunctionNode, LiteralNode, DisjunctionNode], [
        (0, 2),
        (1, 2),
        (3, 4),
        (0, 4),
    ])
    .unwrap();
    let mut perm: Vec<usize> = (0..5).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let pg = g.permuted(&perm).unwrap();
    let emb = Matrix::from_fn(2, 6, |i, j| (i as f64 - 0.5) * (j as f64 + 1.0));
    for scheme in [InitScheme::Normal01, InitScheme::UniformPM1, InitScheme::XavierNormal, InitScheme::XavierUniform] {
        let f = init_features(&g, 12, 0.5, scheme, &emb, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let moved = f.permute_rows(&perm);
        // Deterministic columns of the relabeled graph match exactly.
        let fresh = init_features(&pg, 12, 0.5, scheme, &emb, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for v in 0..5 {
            assert_eq!(&moved.values.row(v)[6..], &fresh.values.row(v)[6..]);
        }
        assert_eq!(moved.random_cols, 6);
    }
}

#[test]
fn column_budget_is_floor() {
    let g = TypedGraph::uniform(3, [(0, 1)]).unwrap();
    for d in [1, 7, 10, 64] {
        for fraction in [0.0, 0.125, 0.3, 0.5, 0.875, 1.0] {
            let r = (d as f64 * fraction).floor() as usize;
            let emb = Matrix::zeros(2, d - r);
            let f = init_features(&g, d, fraction, InitScheme::Normal01, &emb, &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap();
            assert_eq!(f.random_cols, r, "d={d} fraction={fraction}");
        }
    }
}

#[test]
fn lemma_rates_clear_the_bound() {
    for (n, delta, trials) in [(3, 0.5, 2000), (5, 0.2, 500), (2, 0.1, 1000)] {
        let p = LemmaParams::new(n, delta).unwrap();
        let est = individualization_rate(&p, trials, 1).unwrap();
        assert!(est.rate >= 1.0 - delta, "n={n}: {est:?}");
        assert!(est.lower >= 1.0 - delta - 0.05, "n={n}: {est:?}");
        assert!(est.lower <= est.rate && est.rate <= est.upper);
    }
}
