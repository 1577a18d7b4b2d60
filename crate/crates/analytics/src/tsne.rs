//! Exact (O(N²)) t-SNE, adequate for test-set sized embedding matrices.

use ndarray::{Array2, ArrayView2};

use crate::pca::{pca_fit, pca_project};
use crate::{sq_dist, AnalyticsError, Result};

#[derive(Debug, Clone)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    /// Rows are first reduced to at most this many principal components.
    pub pca_dims: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            pca_dims: 50,
        }
    }
}

/// Conditional affinities for one row, tuned to the target entropy.
fn row_affinities(dists: &[f64], self_idx: usize, target_entropy: f64, out: &mut [f64]) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut beta = 1.0;
    for _ in 0..100 {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (j, &d) in dists.iter().enumerate() {
            let p = if j == self_idx { 0.0 } else { (-d * beta).exp() };
            out[j] = p;
            sum += p;
            weighted += d * p;
        }
        if sum <= 0.0 {
            // Beta too large for this row's spacing.
            hi = beta;
            beta = if lo.is_finite() { (lo + hi) / 2.0 } else { beta / 2.0 };
            continue;
        }
        let entropy = sum.ln() + beta * weighted / sum;
        for p in out.iter_mut() {
            *p /= sum;
        }
        let diff = entropy - target_entropy;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
        }
    }
}

/// Embeds rows of `x` in two dimensions.
///
/// Initialization is PCA-based and the optimizer is deterministic, so `seed`
/// only matters for tie-breaking in degenerate inputs; it is accepted for
/// interface uniformity with other projection methods.
pub fn tsne(x: ArrayView2<f64>, params: &TsneParams, _seed: u64) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(AnalyticsError::Empty);
    }
    if params.perplexity <= 0.0 {
        return Err(AnalyticsError::InvalidParam("perplexity must be positive".into()));
    }
    if n < 3 || d == 0 {
        let dims = n.min(d).min(2);
        let mut out = Array2::zeros((n, 2));
        if dims > 0 {
            let p = pca_project(x, dims)?;
            out.slice_mut(ndarray::s![.., ..dims]).assign(&p.points);
        }
        return Ok(out);
    }

    let reduced_dims = params.pca_dims.min(n).min(d);
    let data = if reduced_dims < d {
        pca_fit(x, reduced_dims)?.transform(x)
    } else {
        x.to_owned()
    };
    let rows: Vec<Vec<f64>> = data.outer_iter().map(|r| r.to_vec()).collect();

    let perplexity = params.perplexity.min((n - 1) as f64 / 3.0).max(1.0);
    let target_entropy = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut dist_row = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            dist_row[j] = sq_dist(&rows[i], &rows[j]);
        }
        row_affinities(&dist_row, i, target_entropy, &mut p[i * n..(i + 1) * n]);
    }
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
    }

    let init = pca_project(data.view(), 2)?.points;
    let std0 = {
        let col = init.column(0);
        let mean = col.sum() / n as f64;
        (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let scale = if std0 > 0.0 { 1e-4 / std0 } else { 1.0 };
    let mut y: Vec<[f64; 2]> = init.outer_iter().map(|r| [r[0] * scale, r[1] * scale]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let lr = (n as f64 / params.early_exaggeration / 4.0).max(50.0);
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0f64; 2]; n];

    for it in 0..params.iterations {
        let exaggeration = if it < params.exaggeration_iterations {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < params.exaggeration_iterations { 0.5 } else { 0.8 };
        let mut sum_num = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = if i == j {
                    0.0
                } else {
                    let dx = y[i][0] - y[j][0];
                    let dy = y[i][1] - y[j][1];
                    1.0 / (1.0 + dx * dx + dy * dy)
                };
                num[i * n + j] = v;
                sum_num += v;
            }
        }
        for i in 0..n {
            let mut g = [0.0, 0.0];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j] / sum_num;
                let coeff = 4.0 * (exaggeration * joint[i * n + j] - q) * num[i * n + j];
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = g;
        }
        for i in 0..n {
            for a in 0..2 {
                let same_sign = (grad[i][a] > 0.0) == (update[i][a] > 0.0);
                gains[i][a] = if same_sign { gains[i][a] * 0.8 } else { gains[i][a] + 0.2 };
                gains[i][a] = gains[i][a].max(0.01);
                update[i][a] = momentum * update[i][a] - lr * gains[i][a] * grad[i][a];
                y[i][a] += update[i][a];
            }
        }
    }

    let mut out = Array2::zeros((n, 2));
    let (mx, my) = (
        y.iter().map(|p| p[0]).sum::<f64>() / n as f64,
        y.iter().map(|p| p[1]).sum::<f64>() / n as f64,
    );
    for (i, p) in y.iter().enumerate() {
        out[[i, 0]] = p[0] - mx;
        out[[i, 1]] = p[1] - my;
    }
    if let Some(row) = out.outer_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(AnalyticsError::NonFinite { row });
    }
    Ok(out)
}
