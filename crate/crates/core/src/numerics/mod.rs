//! Dense linear algebra: eigensolver, principal components, k-means.

mod eigen;
mod kmeans;
mod pca;

pub use eigen::{sym_eig, sym_eig_lowest, sym_eig_lowest_by, EigenDecomposition, PartialEigen, SymmetricMatrix};
pub use kmeans::{kmeans, KMeansResult};
pub use pca::pca_components;
pub(crate) use pca::covariance;
