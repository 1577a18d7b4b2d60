mod support;

use ndarray::Array2;
use patreid_analytics::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn square_blobs(per_blob: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let corners = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
    let n = per_blob * 4;
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i / per_blob;
        x[[i, 0]] = corners[c][0] + noise.sample(&mut rng);
        x[[i, 1]] = corners[c][1] + noise.sample(&mut rng);
        labels.push(c);
    }
    (x, labels)
}

#[test]
fn inertia_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..100 {
        let n = rng.random_range(5..80);
        let d = rng.random_range(1..6);
        let k = rng.random_range(1..=n.min(6));
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let r = kmeans(x.view(), k, trial).unwrap();
        for w in r.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "trial {trial}: {:?}", r.inertia_history);
        }
    }
}

#[test]
fn recovers_four_square_blobs() {
    let (x, labels) = square_blobs(25, 3);
    let r = kmeans(x.view(), 4, 0).unwrap();
    assert_eq!(adjusted_rand_index(&labels, &r.assignments).unwrap(), 1.0);
    let again = kmeans(x.view(), 4, 0).unwrap();
    assert_eq!(r.assignments, again.assignments);
}

#[test]
fn matches_brute_force_optimum_on_small_instance() {
    let (x, _) = square_blobs(3, 8);
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let best = support::oracles::best_partition_inertia(&rows, 4);
    let r = kmeans(x.view(), 4, 1).unwrap();
    assert!((r.inertia - best).abs() < 1e-9, "{} vs {}", r.inertia, best);
}

#[test]
fn plus_plus_seeds_are_distinct_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..50 {
        // Heavy duplication but at least k distinct rows.
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i % 5) * (j + 1)) as f64);
        let k = rng.random_range(1..=5);
        let r = kmeans(x.view(), k, seed).unwrap();
        for a in 0..k {
            for b in (a + 1)..k {
                assert_ne!(x.row(r.initial_indices[a]), x.row(r.initial_indices[b]));
            }
        }
    }
}
