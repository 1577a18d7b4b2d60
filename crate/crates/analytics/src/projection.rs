//! Two-dimensional projections of embedding matrices for scatter plots.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::pca::pca_project;
use crate::tsne::{tsne, TsneParams};
use crate::{AnalyticsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionMethod {
    Pca,
    Tsne,
    Umap,
}

impl ProjectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProjectionMethod::Pca => "pca",
            ProjectionMethod::Tsne => "tsne",
            ProjectionMethod::Umap => "umap",
        }
    }
}

impl fmt::Display for ProjectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectionMethod {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(ProjectionMethod::Pca),
            "tsne" | "t-sne" => Ok(ProjectionMethod::Tsne),
            "umap" => Ok(ProjectionMethod::Umap),
            other => Err(AnalyticsError::InvalidParam(format!(
                "unknown projection method `{other}` (expected pca, tsne or umap)"
            ))),
        }
    }
}

/// Projected points, `N × dims`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub points: Array2<f64>,
    pub method: ProjectionMethod,
    /// Only PCA reports explained variance.
    pub explained_variance_ratio: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct ProjectionParams {
    pub tsne: TsneParams,
}

/// An external 2D embedding implementation (e.g. a UMAP binding).
pub trait Embedder2d {
    fn method(&self) -> ProjectionMethod;
    fn embed(&self, x: ArrayView2<f64>, seed: u64) -> Result<Array2<f64>>;
}

/// Projects rows of `x` to two dimensions with a built-in method.
///
/// PCA and exact t-SNE are built in. UMAP must be supplied through
/// [`project2d_with`].
pub fn project2d(
    x: ArrayView2<f64>,
    method: ProjectionMethod,
    params: &ProjectionParams,
    seed: u64,
) -> Result<Projection> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(AnalyticsError::Empty);
    }
    match method {
        ProjectionMethod::Pca => {
            let dims = n.min(d).min(2);
            let mut proj = pca_project(x, dims)?;
            if dims < 2 {
                let mut padded = Array2::zeros((n, 2));
                padded.slice_mut(ndarray::s![.., ..dims]).assign(&proj.points);
                proj.points = padded;
                if let Some(r) = proj.explained_variance_ratio.as_mut() {
                    r.resize(2, 0.0);
                }
            }
            Ok(proj)
        }
        ProjectionMethod::Tsne => Ok(Projection {
            points: tsne(x, &params.tsne, seed)?,
            method,
            explained_variance_ratio: None,
        }),
        ProjectionMethod::Umap => Err(AnalyticsError::UnavailableMethod("umap".into())),
    }
}

/// Projects rows of `x` with a caller-supplied embedder.
pub fn project2d_with(x: ArrayView2<f64>, embedder: &dyn Embedder2d, seed: u64) -> Result<Projection> {
    let points = embedder.embed(x, seed)?;
    if points.dim() != (x.nrows(), 2) {
        return Err(AnalyticsError::LengthMismatch {
            what: "projection rows",
            got: points.nrows(),
            expected: x.nrows(),
        });
    }
    if let Some(row) = points.outer_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(AnalyticsError::NonFinite { row });
    }
    Ok(Projection {
        points,
        method: embedder.method(),
        explained_variance_ratio: None,
    })
}
