//! Partition-comparison (ARI, MI) and internal cluster-quality metrics
//! (silhouette, Davies-Bouldin, Calinski-Harabasz).

use std::collections::BTreeMap;

use ndarray::ArrayView2;

use crate::{sq_dist, AnalyticsError, Result};

/// Maps arbitrary label ids onto `0..n_distinct` in ascending id order.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    // Re-number in sorted order so the mapping is independent of first appearance.
    for (rank, v) in ids.values_mut().enumerate() {
        *v = rank;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

struct Contingency {
    table: Vec<Vec<u64>>,
    rows: Vec<u64>,
    cols: Vec<u64>,
    n: u64,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(AnalyticsError::LengthMismatch {
            what: "predicted labels",
            got: b.len(),
            expected: a.len(),
        });
    }
    if a.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let (da, ka) = densify(a);
    let (db, kb) = densify(b);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&i, &j) in da.iter().zip(&db) {
        table[i][j] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        table,
        rows,
        cols,
        n: a.len() as u64,
    })
}

fn comb2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index with the permutation-model (hypergeometric) correction.
pub fn adjusted_rand_index(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let c = contingency(labels_true, labels_pred)?;
    let index: f64 = c.table.iter().flatten().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = c.rows.iter().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = c.cols.iter().map(|&v| comb2(v)).sum();
    let total = comb2(c.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max_index = (sum_rows + sum_cols) / 2.0;
    if max_index == expected {
        // Both partitions trivial (all-in-one or all singletons) and identical in shape.
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// Shannon entropy of a labeling, in nats.
pub fn entropy(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let (dense, k) = densify(labels);
    let mut counts = vec![0u64; k];
    for l in dense {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information between two labelings, in nats (not normalized).
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let n = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += nij / n * ((n * nij) / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
        }
    }
    Ok(mi.max(0.0))
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
pub fn normalized_mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    let mi = mutual_information(a, b)?;
    let norm = (entropy(a) + entropy(b)) / 2.0;
    if norm == 0.0 {
        return Ok(1.0);
    }
    Ok((mi / norm).clamp(0.0, 1.0))
}

fn check_points(x: ArrayView2<f64>, labels: &[usize], metric: &'static str) -> Result<(Vec<usize>, usize)> {
    if x.nrows() != labels.len() {
        return Err(AnalyticsError::LengthMismatch {
            what: "labels",
            got: labels.len(),
            expected: x.nrows(),
        });
    }
    let (dense, k) = densify(labels);
    if k < 2 {
        return Err(AnalyticsError::Undefined {
            metric,
            reason: "fewer than two clusters".into(),
        });
    }
    Ok((dense, k))
}

fn centroids(rows: &[Vec<f64>], labels: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = rows.first().map_or(0, |r| r.len());
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= c as f64;
        }
    }
    (sums, counts)
}

/// Per-point silhouette coefficients. Points in singleton clusters score 0.
pub fn silhouette_samples(x: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<f64>> {
    let (dense, k) = check_points(x, labels, "silhouette")?;
    let n = x.nrows();
    if k >= n {
        return Err(AnalyticsError::Undefined {
            metric: "silhouette",
            reason: format!("{k} clusters for {n} points (need 2 <= k <= N-1)"),
        });
    }
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let mut counts = vec![0usize; k];
    for &l in &dense {
        counts[l] += 1;
    }
    let mut out = Vec::with_capacity(n);
    let mut per_cluster = vec![0.0; k];
    for i in 0..n {
        per_cluster.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            if i != j {
                per_cluster[dense[j]] += sq_dist(&rows[i], &rows[j]).sqrt();
            }
        }
        let own = dense[i];
        if counts[own] <= 1 {
            out.push(0.0);
            continue;
        }
        let a = per_cluster[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| per_cluster[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette coefficient over all points.
pub fn silhouette_score(x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    let s = silhouette_samples(x, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Davies-Bouldin index (lower is better).
pub fn davies_bouldin(x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    let (dense, k) = check_points(x, labels, "davies_bouldin")?;
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let (cents, counts) = centroids(&rows, &dense, k);
    let mut scatter = vec![0.0; k];
    for (r, &l) in rows.iter().zip(&dense) {
        scatter[l] += sq_dist(r, &cents[l]).sqrt();
    }
    for (s, &c) in scatter.iter_mut().zip(&counts) {
        *s /= c as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = sq_dist(&cents[i], &cents[j]).sqrt();
            let spread = scatter[i] + scatter[j];
            let ratio = if sep > 0.0 {
                spread / sep
            } else if spread == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Calinski-Harabasz index: between/within dispersion ratio scaled by (N−k)/(k−1).
pub fn calinski_harabasz(x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    let (dense, k) = check_points(x, labels, "calinski_harabasz")?;
    let n = x.nrows();
    if n <= k {
        return Err(AnalyticsError::Undefined {
            metric: "calinski_harabasz",
            reason: format!("N = {n} must exceed k = {k}"),
        });
    }
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let (cents, counts) = centroids(&rows, &dense, k);
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let between: f64 = cents.iter().zip(&counts).map(|(c, &m)| m as f64 * sq_dist(c, &mean)).sum();
    let within: f64 = rows.iter().zip(&dense).map(|(r, &l)| sq_dist(r, &cents[l])).sum();
    if within == 0.0 {
        return Ok(1.0);
    }
    Ok(between * (n - k) as f64 / (within * (k - 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ari_perfect_and_permuted() {
        let a = [0, 0, 1, 1, 2, 2];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert!((adjusted_rand_index(&a, &[5, 5, 3, 3, 9, 9]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mi_of_identical_is_entropy() {
        let a = [0, 1, 1, 2, 2, 2, 3];
        assert!((mutual_information(&a, &a).unwrap() - entropy(&a)).abs() < 1e-12);
        assert!((normalized_mutual_information(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_metrics_are_undefined() {
        let x = array![[0.0], [1.0], [2.0]];
        assert!(matches!(silhouette_score(x.view(), &[0, 0, 0]), Err(AnalyticsError::Undefined { .. })));
        assert!(davies_bouldin(x.view(), &[1, 1, 1]).is_err());
        assert!(calinski_harabasz(x.view(), &[2, 2, 2]).is_err());
    }

    #[test]
    fn two_tight_clusters() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let l = [0, 0, 1, 1];
        let s = silhouette_score(x.view(), &l).unwrap();
        assert!(s > 0.85);
        let db = davies_bouldin(x.view(), &l).unwrap();
        assert!((db - 0.1).abs() < 1e-12);
        // between = 4 * 25 = 100, within = 4 * 0.25 = 1 -> 100 * 2 / 1.
        assert!((calinski_harabasz(x.view(), &l).unwrap() - 200.0).abs() < 1e-9);
    }
}
