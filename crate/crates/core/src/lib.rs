//! Evaluation harness for bioacoustic embedding spaces.
//!
//! Embeddings from any feature extractor are loaded from BEMB/CSV files,
//! aligned to curated annotations and scored two ways: K-Means clustering
//! against the ground truth (Adjusted Mutual Information) and a kNN
//! classifier (balanced macro accuracy). Both scores are computed in the
//! original space and in a 300-d UMAP reduction; a 2-d UMAP reduction feeds
//! the scatter plots.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod curation;
pub mod error;
pub mod io;
pub mod knn;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod umap;
pub mod harness;

pub use error::{Error, Result};
pub use model::{AnnotationEvent, AnnotationTable, EmbeddingSet, LabelVector, ModelRegistry, RegistryEntry, Training};
