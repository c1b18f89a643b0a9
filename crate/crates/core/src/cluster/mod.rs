//! K-Means clustering and the Adjusted Mutual Information score.

mod contingency;
mod kmeans;

pub use contingency::{
    adjusted_mutual_info, adjusted_mutual_info_with, ami_from_table, build_contingency, entropy,
    expected_mutual_information, mutual_information, AmiNormalizer, ContingencyTable,
};
pub use kmeans::{kmeans_fit, Clustering, KMeansParams, DISTANCE, SEEDING};
