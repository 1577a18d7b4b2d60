//! Naive, from-definition reference implementations used to cross-check the
//! library metrics. Deliberately loop-based and independent of the library's
//! contingency-table and centroid code paths.
#![allow(dead_code)]

use std::collections::HashMap;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// ARI from explicit pair enumeration.
pub fn ari(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len();
    let (mut same_t, mut same_p, mut same_both, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let t = truth[i] == truth[j];
            let p = pred[i] == pred[j];
            pairs += 1.0;
            if t {
                same_t += 1.0;
            }
            if p {
                same_p += 1.0;
            }
            if t && p {
                same_both += 1.0;
            }
        }
    }
    let expected = same_t * same_p / pairs;
    let max = (same_t + same_p) / 2.0;
    if max == expected {
        return 1.0;
    }
    (same_both - expected) / (max - expected)
}

/// MI in nats from empirical joint and marginal probabilities.
pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0 / n;
        *pa.entry(x).or_default() += 1.0 / n;
        *pb.entry(y).or_default() += 1.0 / n;
    }
    let mut keys: Vec<_> = joint.keys().copied().collect();
    keys.sort();
    keys.iter()
        .map(|k| {
            let p = joint[k];
            p * (p / (pa[&k.0] * pb[&k.1])).ln()
        })
        .sum()
}

pub fn entropy(a: &[usize]) -> f64 {
    mutual_information(a, a)
}

pub fn silhouette(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = x.len();
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort();
    clusters.dedup();
    let mut total = 0.0;
    for i in 0..n {
        let own: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if own.is_empty() {
            continue; // singleton contributes 0
        }
        let a = own.iter().map(|&j| dist(&x[i], &x[j])).sum::<f64>() / own.len() as f64;
        let mut b = f64::INFINITY;
        for &c in &clusters {
            if c == labels[i] {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let m = members.iter().map(|&j| dist(&x[i], &x[j])).sum::<f64>() / members.len() as f64;
            b = b.min(m);
        }
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

fn centroid(x: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let d = x[0].len();
    let mut c = vec![0.0; d];
    for &i in idx {
        for j in 0..d {
            c[j] += x[i][j];
        }
    }
    c.iter().map(|v| v / idx.len() as f64).collect()
}

pub fn davies_bouldin(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort();
    clusters.dedup();
    let members: Vec<Vec<usize>> = clusters
        .iter()
        .map(|&c| (0..x.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    let cents: Vec<Vec<f64>> = members.iter().map(|m| centroid(x, m)).collect();
    let spread: Vec<f64> = members
        .iter()
        .zip(&cents)
        .map(|(m, c)| m.iter().map(|&i| dist(&x[i], c)).sum::<f64>() / m.len() as f64)
        .collect();
    let k = clusters.len();
    let mut sum = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i != j {
                worst = worst.max((spread[i] + spread[j]) / dist(&cents[i], &cents[j]));
            }
        }
        sum += worst;
    }
    sum / k as f64
}

/// CH via total scatter minus within scatter.
pub fn calinski_harabasz(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = x.len();
    let all: Vec<usize> = (0..n).collect();
    let mean = centroid(x, &all);
    let total: f64 = x.iter().map(|r| dist(r, &mean).powi(2)).sum();
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort();
    clusters.dedup();
    let mut within = 0.0;
    for &c in &clusters {
        let m: Vec<usize> = all.iter().copied().filter(|&i| labels[i] == c).collect();
        let cent = centroid(x, &m);
        within += m.iter().map(|&i| dist(&x[i], &cent).powi(2)).sum::<f64>();
    }
    let k = clusters.len() as f64;
    ((total - within) / (k - 1.0)) / (within / (n as f64 - k))
}

/// Minimum within-cluster sum of squares over every partition of `x` into at
/// most `k` non-empty clusters (restricted-growth-string enumeration).
pub fn best_partition_inertia(x: &[Vec<f64>], k: usize) -> f64 {
    let n = x.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    fn sse(x: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
        let mut total = 0.0;
        for c in 0..k {
            let m: Vec<usize> = (0..x.len()).filter(|&i| labels[i] == c).collect();
            if m.is_empty() {
                continue;
            }
            let cent = centroid(x, &m);
            total += m.iter().map(|&i| dist(&x[i], &cent).powi(2)).sum::<f64>();
        }
        total
    }
    fn rec(i: usize, used: usize, k: usize, x: &[Vec<f64>], labels: &mut Vec<usize>, best: &mut f64) {
        if i == x.len() {
            *best = best.min(sse(x, labels, k));
            return;
        }
        for c in 0..(used + 1).min(k) {
            labels[i] = c;
            rec(i + 1, used.max(c + 1), k, x, labels, best);
        }
    }
    rec(0, 0, k, x, &mut labels, &mut best);
    best
}
