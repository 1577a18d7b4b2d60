//! Embedding analytics: PCA and neighbor-embedding projections, k-means with
//! k-means++ seeding, and the five clustering-quality metrics (adjusted Rand
//! index, mutual information, silhouette, Davies-Bouldin, Calinski-Harabasz).
//!
//! Embedding matrices are `ndarray` arrays with one sample per row. All
//! distances are Euclidean and every reduction runs in a fixed order, so
//! results are bit-reproducible for a fixed seed.

mod error;
pub mod kmeans;
pub mod metrics;
pub mod pca;
pub mod projection;
pub mod report;
pub mod tsne;

pub use error::{AnalyticsError, Result};
pub use kmeans::{kmeans, KMeans, KMeansResult};
pub use metrics::{
    adjusted_rand_index, calinski_harabasz, davies_bouldin, entropy, mutual_information,
    normalized_mutual_information, silhouette_samples, silhouette_score,
};
pub use pca::{pca_fit, pca_project, Pca};
pub use projection::{project2d, project2d_with, Embedder2d, Projection, ProjectionMethod, ProjectionParams};
pub use report::{clustering_report, standardize, write_cluster_table, ClusterReport};

/// Squared Euclidean distance between two equally long slices.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
