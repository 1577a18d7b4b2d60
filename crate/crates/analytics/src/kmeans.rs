//! Lloyd's k-means with k-means++ seeding.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{sq_dist, AnalyticsError, Result};

#[derive(Debug, Clone)]
pub struct KMeans {
    pub k: usize,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest final inertia wins.
    pub n_init: usize,
    pub seed: u64,
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 300,
            n_init: 1,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step, first entry from the seeding.
    pub inertia_history: Vec<f64>,
    /// Row indices picked by k-means++ for the winning restart.
    pub initial_indices: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Convenience wrapper: `k` clusters, 300 iterations, one restart.
pub fn kmeans(x: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    KMeans::new(k, seed).fit(x)
}

impl KMeans {
    pub fn fit(&self, x: ArrayView2<f64>) -> Result<KMeansResult> {
        let (n, d) = x.dim();
        if self.k == 0 {
            return Err(AnalyticsError::InvalidParam("k must be at least 1".into()));
        }
        if n < self.k {
            return Err(AnalyticsError::TooFewPoints { n, k: self.k });
        }
        if d == 0 {
            return Err(AnalyticsError::Empty);
        }
        let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
        if let Some(row) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(AnalyticsError::NonFinite { row });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut best: Option<KMeansResult> = None;
        for _ in 0..self.n_init.max(1) {
            let run = self.single_run(&rows, d, &mut rng);
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one restart"))
    }

    fn single_run(&self, rows: &[Vec<f64>], d: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
        let n = rows.len();
        let k = self.k;
        let initial_indices = plus_plus_seeds(rows, k, rng);
        let mut centroids: Vec<Vec<f64>> = initial_indices.iter().map(|&i| rows[i].clone()).collect();

        let mut assignments = vec![usize::MAX; n];
        let mut dists = vec![0.0; n];
        let mut history = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        loop {
            let mut changed = false;
            let mut inertia = 0.0;
            for (i, row) in rows.iter().enumerate() {
                let (c, dist) = nearest(row, &centroids);
                if assignments[i] != c {
                    changed = true;
                    assignments[i] = c;
                }
                dists[i] = dist;
                inertia += dist;
            }
            history.push(inertia);
            if !changed {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            let mut sums = vec![vec![0.0; d]; k];
            let mut counts = vec![0usize; k];
            for (row, &c) in rows.iter().zip(&assignments) {
                counts[c] += 1;
                for (s, v) in sums[c].iter_mut().zip(row) {
                    *s += v;
                }
            }
            let mut taken = vec![false; n];
            for c in 0..k {
                if counts[c] > 0 {
                    centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                } else {
                    // Empty cluster: move it onto the point worst served by its centroid.
                    let far = (0..n)
                        .filter(|&i| !taken[i])
                        .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                        .expect("n >= k");
                    taken[far] = true;
                    dists[far] = 0.0;
                    centroids[c] = rows[far].clone();
                }
            }
        }

        let inertia = *history.last().expect("one assignment step");
        let mut c_arr = Array2::zeros((k, d));
        for (c, cent) in centroids.iter().enumerate() {
            for (j, v) in cent.iter().enumerate() {
                c_arr[[c, j]] = *v;
            }
        }
        KMeansResult {
            assignments,
            centroids: c_arr,
            inertia,
            inertia_history: history,
            initial_indices,
            iterations,
            converged,
        }
    }
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cent) in centroids.iter().enumerate() {
        let dist = sq_dist(row, cent);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

/// k-means++: first seed uniform, later seeds with probability proportional
/// to squared distance from the nearest chosen seed.
fn plus_plus_seeds(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = rows.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut closest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = closest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target just past the accumulated total.
            pick.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // Fewer than k distinct points: fall back to unused indices.
            (0..n).find(|i| !chosen.contains(i)).expect("n >= k")
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(r, &rows[next]));
        }
    }
    chosen
}
