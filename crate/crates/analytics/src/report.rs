use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};

use crate::metrics::{
    adjusted_rand_index, calinski_harabasz, davies_bouldin, mutual_information, normalized_mutual_information,
    silhouette_score,
};
use crate::{AnalyticsError, Result};

/// The five clustering metrics for one embedding matrix, plus the partition
/// they were computed from. Internal indices are `None` when undefined (fewer
/// than two distinct clusters, or as many clusters as points).
#[derive(Debug, Clone)]
pub struct ClusterReport {
    pub assignments: Vec<usize>,
    /// `k × D`; rows of clusters without members are zero.
    pub centroids: Array2<f64>,
    pub adjusted_rand: f64,
    /// Raw mutual information in nats.
    pub mutual_information: f64,
    pub normalized_mutual_information: f64,
    pub silhouette: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub calinski_harabasz: Option<f64>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(AnalyticsError::Undefined { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scores a partition of the rows of `x` against the true labels.
pub fn clustering_report(
    x: ArrayView2<f64>,
    assignments: &[usize],
    true_labels: &[usize],
    k: usize,
) -> Result<ClusterReport> {
    let n = x.nrows();
    if n == 0 {
        return Err(AnalyticsError::Empty);
    }
    for (what, len) in [("assignments", assignments.len()), ("true labels", true_labels.len())] {
        if len != n {
            return Err(AnalyticsError::LengthMismatch { what, got: len, expected: n });
        }
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
        return Err(AnalyticsError::InvalidParam(format!("assignment {bad} outside 0..{k}")));
    }

    let d = x.ncols();
    let mut centroids = Array2::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (row, &a) in x.outer_iter().zip(assignments) {
        counts[a] += 1;
        let mut c = centroids.row_mut(a);
        c += &row;
    }
    for (mut c, &m) in centroids.outer_iter_mut().zip(&counts) {
        if m > 0 {
            c.mapv_inplace(|v| v / m as f64);
        }
    }

    Ok(ClusterReport {
        assignments: assignments.to_vec(),
        centroids,
        adjusted_rand: adjusted_rand_index(true_labels, assignments)?,
        mutual_information: mutual_information(true_labels, assignments)?,
        normalized_mutual_information: normalized_mutual_information(true_labels, assignments)?,
        silhouette: defined(silhouette_score(x, assignments))?,
        davies_bouldin: defined(davies_bouldin(x, assignments))?,
        calinski_harabasz: defined(calinski_harabasz(x, assignments))?,
    })
}

/// Column-wise z-scoring; constant columns become zero.
pub fn standardize(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows().max(1) as f64;
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(x.ncols()));
    let mut out = &x - &mean.view().insert_axis(Axis(0));
    for mut col in out.axis_iter_mut(Axis(1)) {
        let sd = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if sd > 0.0 {
            col.mapv_inplace(|v| v / sd);
        } else {
            col.fill(0.0);
        }
    }
    out
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.6}"),
        Some(v) if v.is_infinite() => "inf".to_string(),
        _ => "NaN".to_string(),
    }
}

/// Writes the clustering table: one row per encoder, columns
/// `encoder,AdjRand,MutInfo,Silhouette,daviesBouldin,calinskiHarabasz`.
pub fn write_cluster_table<W: Write>(rows: &[(String, &ClusterReport)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["encoder", "AdjRand", "MutInfo", "Silhouette", "daviesBouldin", "calinskiHarabasz"])?;
    for (name, r) in rows {
        w.write_record([
            name.clone(),
            fmt_metric(Some(r.adjusted_rand)),
            fmt_metric(Some(r.mutual_information)),
            fmt_metric(r.silhouette),
            fmt_metric(r.davies_bouldin),
            fmt_metric(r.calinski_harabasz),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_assignment_gives_unit_ari() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]];
        let r = clustering_report(x.view(), &[1, 1, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((r.adjusted_rand - 1.0).abs() < 1e-12);
        assert!(r.silhouette.unwrap() > 0.9);
    }

    #[test]
    fn single_cluster_flags_internal_metrics() {
        let x = array![[0.0], [1.0], [2.0]];
        let r = clustering_report(x.view(), &[0, 0, 0], &[0, 1, 1], 2).unwrap();
        assert!(r.silhouette.is_none() && r.davies_bouldin.is_none() && r.calinski_harabasz.is_none());
        assert!(r.adjusted_rand.is_finite());
    }

    #[test]
    fn table_header_matches_schema() {
        let x = array![[0.0], [1.0], [5.0], [6.0]];
        let r = clustering_report(x.view(), &[0, 0, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        let mut buf = Vec::new();
        write_cluster_table(&[("lama".into(), &r)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("encoder,AdjRand,MutInfo,Silhouette,daviesBouldin,calinskiHarabasz\n"));
        assert!(text.contains("lama,1.000000,"));
    }

    #[test]
    fn standardize_zero_mean_unit_sd() {
        let x = array![[1.0, 3.0], [3.0, 3.0]];
        let z = standardize(x.view());
        assert_eq!(z, array![[-1.0, 0.0], [1.0, 0.0]]);
    }
}
