//! Principal component analysis.
//!
//! Embedding matrices are often much wider than they are tall (tens of
//! thousands of features, a few hundred samples), so the decomposition runs on
//! whichever of the covariance (D×D) or Gram (N×N) matrices is smaller.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::projection::{Projection, ProjectionMethod};
use crate::{AnalyticsError, Result};

/// Fitted principal axes.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `dims × D`, one orthonormal component per row, ordered by descending
    /// explained variance.
    pub components: Array2<f64>,
    /// Variance along each component (sample variance, N−1 denominator).
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    /// Projects rows of `x` onto the fitted components.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let centered = &x - &self.mean.view().insert_axis(Axis(0));
        centered.dot(&self.components.t())
    }
}

fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    for (row, r) in x.outer_iter().enumerate() {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(AnalyticsError::NonFinite { row });
        }
    }
    Ok(())
}

/// Sorted (descending) eigenpairs of a symmetric matrix.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Orthogonalizes `v` against the rows of `basis[..count]` and normalizes it.
/// Returns false when nothing is left after projection.
fn orthonormalize_against(v: &mut Array1<f64>, basis: &Array2<f64>, count: usize) -> bool {
    for _ in 0..2 {
        for j in 0..count {
            let b = basis.row(j);
            let proj = v.dot(&b);
            v.scaled_add(-proj, &b);
        }
    }
    let norm = v.dot(v).sqrt();
    if norm < 1e-10 {
        return false;
    }
    v.mapv_inplace(|x| x / norm);
    true
}

/// Fits `dims` principal components to the rows of `x`.
pub fn pca_fit(x: ArrayView2<f64>, dims: usize) -> Result<Pca> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(AnalyticsError::Empty);
    }
    let max = n.min(d);
    if dims == 0 || dims > max {
        return Err(AnalyticsError::DimsTooLarge { dims, max });
    }
    check_finite(x)?;

    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let denom = (n.max(2) - 1) as f64;
    let total_variance: f64 = centered.iter().map(|v| v * v).sum::<f64>() / denom;

    let mut components = Array2::<f64>::zeros((dims, d));
    let mut variances = Vec::with_capacity(dims);

    if d <= n {
        let cov = centered.t().dot(&centered) / denom;
        let m = DMatrix::from_fn(d, d, |r, c| cov[[r, c]]);
        let (values, vectors) = sorted_eigen(m);
        for i in 0..dims {
            for j in 0..d {
                components[[i, j]] = vectors[(j, i)];
            }
            variances.push(values[i]);
        }
    } else {
        let gram = centered.dot(&centered.t()) / denom;
        let m = DMatrix::from_fn(n, n, |r, c| gram[[r, c]]);
        let (values, vectors) = sorted_eigen(m);
        let largest = values.first().copied().unwrap_or(0.0);
        for i in 0..dims {
            let lambda = values[i];
            let mut v = Array1::<f64>::zeros(d);
            if lambda > 1e-12 * largest.max(1e-300) {
                let u = Array1::from_iter((0..n).map(|r| vectors[(r, i)]));
                v = centered.t().dot(&u);
            }
            if !orthonormalize_against(&mut v, &components, i) {
                // Zero-variance direction: complete the basis with a unit axis.
                let mut axis = 0;
                loop {
                    let mut e = Array1::<f64>::zeros(d);
                    e[axis] = 1.0;
                    if orthonormalize_against(&mut e, &components, i) {
                        v = e;
                        break;
                    }
                    axis += 1;
                }
            }
            components.row_mut(i).assign(&v);
            variances.push(lambda);
        }
    }

    // Deterministic sign: the largest-magnitude loading of each component is positive.
    for mut row in components.outer_iter_mut() {
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }

    let ratios = variances
        .iter()
        .map(|v| if total_variance > 0.0 { v / total_variance } else { 0.0 })
        .collect();
    Ok(Pca {
        mean,
        components,
        explained_variance: variances,
        explained_variance_ratio: ratios,
    })
}

/// Mean-centered projection of `x` onto its top `dims` principal components.
pub fn pca_project(x: ArrayView2<f64>, dims: usize) -> Result<Projection> {
    let pca = pca_fit(x, dims)?;
    let points = pca.transform(x);
    Ok(Projection {
        points,
        method: ProjectionMethod::Pca,
        explained_variance_ratio: Some(pca.explained_variance_ratio),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn collinear_points_have_one_component() {
        let x = array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [-1.0, -2.0, -3.0], [0.5, 1.0, 1.5]];
        let pca = pca_fit(x.view(), 1).unwrap();
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_sample_has_balanced_ratios() {
        let x = gaussian(1000, 2, 3);
        let pca = pca_fit(x.view(), 2).unwrap();
        let r = &pca.explained_variance_ratio;
        // Sampling error of the eigenvalue spread for N=1000 is a few percent.
        assert!((r[0] - r[1]).abs() < 0.15, "{r:?}");
        assert!((r[0] + r[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isometric_embedding_preserves_distances() {
        // 2D points embedded in 10D through a random orthonormal pair.
        let pts = gaussian(40, 2, 11);
        let basis = pca_fit(gaussian(30, 10, 5).view(), 2).unwrap().components;
        let embedded = pts.dot(&basis) + 3.0;
        let proj = pca_project(embedded.view(), 2).unwrap().points;
        for i in 0..40 {
            for j in 0..40 {
                let a = crate::sq_dist(pts.row(i).as_slice().unwrap(), pts.row(j).as_slice().unwrap()).sqrt();
                let p = proj.row(i).to_vec();
                let q = proj.row(j).to_vec();
                let b = crate::sq_dist(&p, &q).sqrt();
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn wide_matrix_uses_orthonormal_components() {
        let x = gaussian(12, 50, 2);
        let pca = pca_fit(x.view(), 5).unwrap();
        let g = pca.components.dot(&pca.components.t());
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() < 1e-9);
            }
        }
        for w in pca.explained_variance.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn wide_and_tall_paths_agree() {
        let x = gaussian(20, 20, 8);
        let tall = pca_fit(x.view(), 3).unwrap();
        let wide = pca_fit(x.slice(ndarray::s![..19, ..]).view(), 3).unwrap();
        assert_eq!(tall.components.dim(), (3, 20));
        assert_eq!(wide.components.dim(), (3, 20));
        // Same data through both routes: a 21-column copy forces the Gram path.
        let mut padded = Array2::<f64>::zeros((20, 21));
        padded.slice_mut(ndarray::s![.., ..20]).assign(&x);
        let gram_route = pca_fit(padded.view(), 3).unwrap();
        for i in 0..3 {
            assert!((gram_route.explained_variance[i] - tall.explained_variance[i]).abs() < 1e-9);
            let dot: f64 = (0..20).map(|j| gram_route.components[[i, j]] * tall.components[[i, j]]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_dims_rejected() {
        let x = gaussian(3, 5, 0);
        assert!(matches!(pca_fit(x.view(), 4), Err(AnalyticsError::DimsTooLarge { dims: 4, max: 3 })));
    }
}
