use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::select_k_smallest;

/// Exact k-nearest-neighbor graph, self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub n_neighbors: usize,
    /// `N×k` neighbor rows, ordered by ascending distance (lower index on ties).
    pub indices: Array2<usize>,
    pub distances: Array2<f64>,
}

impl KnnGraph {
    pub fn n_vertices(&self) -> usize {
        self.indices.nrows()
    }
}

pub fn exact_knn_graph(x: ArrayView2<'_, f64>, k: usize) -> Result<KnnGraph> {
    let n = x.nrows();
    if k == 0 {
        return Err(Error::InvalidConfig("n_neighbors must be positive".into()));
    }
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = x.row(i);
            let candidates = x
                .rows()
                .into_iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
                .collect();
            select_k_smallest(candidates, k)
        })
        .collect();

    let mut indices = Array2::zeros((n, k));
    let mut distances = Array2::zeros((n, k));
    for (i, row) in rows.iter().enumerate() {
        for (slot, &(sq, j)) in row.iter().enumerate() {
            indices[[i, slot]] = j;
            distances[[i, slot]] = sq.sqrt();
        }
    }
    Ok(KnnGraph { n_neighbors: k, indices, distances })
}

const SMOOTH_K_ITERATIONS: usize = 64;
const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const MIN_SIGMA_SCALE: f64 = 1e-3;

fn membership_sum(distances: &[f64], rho: f64, sigma: f64) -> f64 {
    distances.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum()
}

/// Local connectivity `rho` (smallest strictly positive distance) and the
/// bandwidth `sigma` for which the row's memberships sum to `log2(k)`.
pub fn smooth_knn_calibrate(distances: &[f64], k: usize) -> (f64, f64) {
    let rho = distances.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let target = (k as f64).log2();

    let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
    for _ in 0..SMOOTH_K_ITERATIONS {
        let sum = membership_sum(distances, rho, mid);
        if (sum - target).abs() < SMOOTH_K_TOLERANCE {
            break;
        }
        if sum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }

    let mean = if distances.is_empty() { 0.0 } else { distances.iter().sum::<f64>() / distances.len() as f64 };
    let sigma = mid.max(MIN_SIGMA_SCALE * mean).max(f64::MIN_POSITIVE);
    (rho, sigma)
}

/// Membership of a neighbor at `distance` for a point with `(rho, sigma)`.
pub fn membership(distance: f64, rho: f64, sigma: f64) -> f64 {
    (-(distance - rho).max(0.0) / sigma).exp()
}

/// Probabilistic t-conorm `a + b − a·b`.
pub fn fuzzy_union(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Symmetric sparse membership graph in CSR form, plus per-point calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FuzzyGraph {
    /// Builds a graph from undirected `(i, j, w)` edges with `i < j`; each is
    /// stored in both directions with the identical value.
    pub fn from_undirected(n: usize, edges: &[(usize, usize, f64)], rho: Vec<f64>, sigma: Vec<f64>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            debug_assert!(i < j);
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            for (j, w) in row {
                indices.push(j);
                weights.push(w);
            }
            indptr.push(indices.len());
        }
        Self { indptr, indices, weights, rho, sigma }
    }

    pub fn n_vertices(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_stored(&self) -> usize {
        self.weights.len()
    }

    /// `(column, weight)` pairs of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()].iter().copied().zip(self.weights[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, w)| w)
    }

    /// Every stored entry `(i, j, w)` in row-major order (both directions).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_vertices()).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n_vertices()).map(|i| self.row(i).map(|(_, w)| w).sum()).collect()
    }
}

/// Directed memberships from each point's calibrated kernel, symmetrized with
/// the fuzzy union. Zero (underflowed) weights are not stored.
pub fn fuzzy_simplicial_set(g: &KnnGraph) -> FuzzyGraph {
    let n = g.n_vertices();
    let calibration: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| smooth_knn_calibrate(g.distances.row(i).as_slice().expect("row-major"), g.n_neighbors))
        .collect();

    // directed entries keyed by the unordered pair; `forward` is i<j direction
    let mut directed: Vec<(usize, usize, bool, f64)> = Vec::with_capacity(n * g.n_neighbors);
    for (i, &(rho, sigma)) in calibration.iter().enumerate() {
        for slot in 0..g.n_neighbors {
            let j = g.indices[[i, slot]];
            let w = membership(g.distances[[i, slot]], rho, sigma);
            directed.push((i.min(j), i.max(j), i < j, w));
        }
    }
    directed.sort_unstable_by_key(|&(lo, hi, forward, _)| (lo, hi, forward));

    let mut edges = Vec::with_capacity(directed.len());
    let mut idx = 0;
    while idx < directed.len() {
        let (lo, hi, _, _) = directed[idx];
        let (mut fwd, mut bwd) = (0.0, 0.0);
        while idx < directed.len() && directed[idx].0 == lo && directed[idx].1 == hi {
            if directed[idx].2 {
                fwd = directed[idx].3;
            } else {
                bwd = directed[idx].3;
            }
            idx += 1;
        }
        let w = fuzzy_union(fwd, bwd);
        if w > 0.0 {
            edges.push((lo, hi, w.min(1.0)));
        }
    }

    let (rho, sigma) = calibration.into_iter().unzip();
    FuzzyGraph::from_undirected(n, &edges, rho, sigma)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn knn_graph_on_a_line() {
        let g = exact_knn_graph(array![[0.0], [1.0], [3.0]].view(), 1).unwrap();
        assert_eq!(g.indices.column(0).to_vec(), [1, 0, 1]);
        assert_eq!(g.distances.column(0).to_vec(), [1.0, 1.0, 2.0]);
    }

    #[test]
    fn duplicates_prefer_lower_index() {
        let g = exact_knn_graph(array![[0.0], [0.0], [0.0], [5.0]].view(), 2).unwrap();
        assert_eq!(g.indices.row(0).to_vec(), [1, 2]);
        assert_eq!(g.indices.row(2).to_vec(), [0, 1]);
        assert_eq!(g.distances.row(0).to_vec(), [0.0, 0.0]);
        assert!(matches!(exact_knn_graph(array![[0.0], [1.0]].view(), 2), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn calibration_closed_form() {
        // 1 + x + x² = log2(3) with x = exp(-1/σ)
        let (rho, sigma) = smooth_knn_calibrate(&[1.0, 2.0, 3.0], 3);
        assert_eq!(rho, 1.0);
        let c = 3f64.log2() - 1.0;
        let x = (-1.0 + (1.0 + 4.0 * c).sqrt()) / 2.0;
        let expected = -1.0 / x.ln();
        assert!((sigma - expected).abs() < 1e-4, "{sigma} vs {expected}");
        // the rounded figure usually quoted for this case
        assert!((expected - 1.1333).abs() < 5e-4);
    }

    #[test]
    fn equal_distances_hit_the_clamp() {
        let (rho, sigma) = smooth_knn_calibrate(&[2.0; 5], 5);
        assert_eq!(rho, 2.0);
        assert!((sigma - 2e-3).abs() < 1e-15);
        assert_eq!(membership(2.0, rho, sigma), 1.0);
    }

    #[test]
    fn rho_skips_zero_distances() {
        let (rho, sigma) = smooth_knn_calibrate(&[0.0, 0.0, 5.0], 3);
        assert_eq!(rho, 5.0);
        assert_eq!(membership(0.0, rho, sigma), 1.0);
        assert_eq!(membership(5.0, rho, sigma), 1.0);
        let (rho, sigma) = smooth_knn_calibrate(&[0.0, 0.0], 2);
        assert_eq!(rho, 0.0);
        assert!(sigma > 0.0);
    }

    #[test]
    fn union_examples() {
        assert_eq!(fuzzy_union(0.5, 0.0), 0.5);
        assert_eq!(fuzzy_union(1.0, 1.0), 1.0);
        assert!((fuzzy_union(0.5, 0.4) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn fuzzy_graph_is_symmetric() {
        let x = ndarray::Array2::from_shape_fn((40, 3), |(i, j)| ((i * 37 + j * 11) % 29) as f64 * 0.3);
        let fg = fuzzy_simplicial_set(&exact_knn_graph(x.view(), 5).unwrap());
        for (i, j, w) in fg.entries() {
            assert_ne!(i, j);
            assert!(w > 0.0 && w <= 1.0);
            assert_eq!(fg.get(j, i).to_bits(), w.to_bits());
        }
    }
}
