//! UMAP: exact kNN graph → smooth-kNN calibration → fuzzy union graph →
//! initial layout → cross-entropy SGD.

mod curve;
mod graph;
mod init;
mod optimize;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use curve::{fit_ab, fit_grid, low_dim_similarity, rmse, target_curve, CurveFit};
pub use graph::{
    exact_knn_graph, fuzzy_simplicial_set, fuzzy_union, membership, smooth_knn_calibrate, FuzzyGraph, KnnGraph,
};
pub use init::{initialize_layout, random_box, random_layout, spectral_layout, InitMethod, InitialLayout, MAX_SPECTRAL_COMPONENTS};
pub use optimize::{attractive_coefficient, optimize_layout, repulsive_coefficient};

use crate::error::{Error, Result};

/// Sizes above this use the shorter epoch budget.
pub const LARGE_DATASET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    pub n_components: usize,
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    /// Curve coefficients; fitted from `min_dist`/`spread` when absent.
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Defaults to 500 for up to 10 000 points, 200 above.
    pub n_epochs: Option<usize>,
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    pub repulsion_strength: f64,
    pub seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            n_components: 2,
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            a: None,
            b: None,
            n_epochs: None,
            learning_rate: 1.0,
            negative_sample_rate: 5,
            repulsion_strength: 1.0,
            seed: 0,
        }
    }
}

impl LayoutParams {
    pub fn with_components(n_components: usize, seed: u64) -> Self {
        Self { n_components, seed, ..Self::default() }
    }

    pub fn epochs_for(&self, n: usize) -> usize {
        self.n_epochs.unwrap_or(if n <= LARGE_DATASET { 500 } else { 200 })
    }

    pub fn curve(&self) -> Result<(f64, f64)> {
        match (self.a, self.b) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Ok((a, b)),
            (None, None) => fit_ab(self.min_dist, self.spread).map(|f| (f.a, f.b)),
            _ => Err(Error::InvalidConfig("a and b must both be given and positive, or both omitted".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UmapOutput {
    pub embedding: Array2<f64>,
    pub init: InitMethod,
    pub a: f64,
    pub b: f64,
    pub n_epochs: usize,
}

pub fn umap(x: ArrayView2<'_, f64>, params: &LayoutParams) -> Result<UmapOutput> {
    let n = x.nrows();
    if n <= params.n_neighbors {
        return Err(Error::KTooLarge { k: params.n_neighbors, n });
    }
    if params.n_components == 0 {
        return Err(Error::InvalidConfig("n_components must be positive".into()));
    }
    if let Some(row) = crate::model::first_non_finite_row(x) {
        return Err(Error::NonFiniteInput { row });
    }
    let (a, b) = params.curve()?;
    let knn = exact_knn_graph(x, params.n_neighbors)?;
    let fg = fuzzy_simplicial_set(&knn);
    let start = initialize_layout(&fg, params.n_components, params.seed);
    let embedding = optimize_layout(&fg, &start.coords, params, a, b)?;
    Ok(UmapOutput { embedding, init: start.method, a, b, n_epochs: params.epochs_for(n) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_shape_and_determinism() {
        let x = Array2::from_shape_fn((40, 6), |(i, j)| ((i * 17 + j * 5) % 13) as f64 + (i / 20) as f64 * 30.0);
        let p = LayoutParams { n_epochs: Some(50), ..LayoutParams::with_components(2, 4) };
        let first = umap(x.view(), &p).unwrap();
        assert_eq!(first.embedding.dim(), (40, 2));
        assert_eq!(first.embedding, umap(x.view(), &p).unwrap().embedding);
        assert!(first.embedding.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn too_few_points() {
        let x = Array2::<f64>::zeros((10, 3));
        assert!(matches!(umap(x.view(), &LayoutParams::default()), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn partial_curve_override_rejected() {
        let p = LayoutParams { a: Some(1.0), ..LayoutParams::default() };
        assert!(p.curve().is_err());
    }
}
