use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::FuzzyGraph;
use crate::error::{Error, Result};
use crate::rng;

/// Highest target dimension that still gets a spectral start.
pub const MAX_SPECTRAL_COMPONENTS: usize = 10;
const DENSE_EIGEN_LIMIT: usize = 600;
const SUBSPACE_MAX_ITER: usize = 3000;
const SUBSPACE_TOL: f64 = 1e-7;
const INIT_STREAM: u64 = 0x1217;
const JITTER: f64 = 1e-4;
const BOX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "reason")]
pub enum InitMethod {
    Spectral,
    Random,
    /// Spectral was attempted and failed; random coordinates were used instead.
    RandomFallback(String),
}

#[derive(Debug, Clone)]
pub struct InitialLayout {
    pub coords: Array2<f64>,
    pub method: InitMethod,
}

/// Half-width of the random box: `10·√(2/d)`, so the expected distance
/// between two random points is the same as in the 2-d `[−10, 10]²` box.
/// A fixed `[−10, 10]` box leaves points ~`8·√d` apart in `d` dimensions,
/// where the attractive gradient is too weak to move them.
pub fn random_box(n_components: usize) -> f64 {
    BOX * (2.0 / n_components.max(2) as f64).sqrt()
}

pub fn random_layout(n: usize, n_components: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng::stream(seed, INIT_STREAM);
    let half = random_box(n_components);
    Array2::from_shape_simple_fn((n, n_components), || rng.random_range(-half..half))
}

/// Spectral start from the normalized Laplacian for low target dimensions,
/// seeded uniform random (see [`random_box`]) otherwise or when the
/// eigensolve fails.
pub fn initialize_layout(fg: &FuzzyGraph, n_components: usize, seed: u64) -> InitialLayout {
    let n = fg.n_vertices();
    if n_components > MAX_SPECTRAL_COMPONENTS {
        return InitialLayout { coords: random_layout(n, n_components, seed), method: InitMethod::Random };
    }
    match spectral_layout(fg, n_components, seed) {
        Ok(coords) => InitialLayout { coords, method: InitMethod::Spectral },
        Err(e) => InitialLayout {
            coords: random_layout(n, n_components, seed),
            method: InitMethod::RandomFallback(e.to_string()),
        },
    }
}

pub fn spectral_layout(fg: &FuzzyGraph, n_components: usize, seed: u64) -> Result<Array2<f64>> {
    let n = fg.n_vertices();
    let vectors = if n <= DENSE_EIGEN_LIMIT {
        dense_eigenvectors(fg, n_components)?
    } else {
        subspace_eigenvectors(fg, n_components, seed)?
    };

    let max_abs = vectors.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max_abs > 0.0) || !max_abs.is_finite() {
        return Err(Error::SpectralFailure("degenerate eigenvectors".into()));
    }
    let scale = BOX / max_abs;
    let mut rng = rng::stream(seed, INIT_STREAM);
    Ok(vectors.mapv(|v| v * scale + rng.random_range(-JITTER..JITTER)))
}

struct Normalized {
    inv_sqrt_degree: Vec<f64>,
    /// unit vector ∝ D^{1/2}·1, the trivial eigenvector of the Laplacian
    trivial: Vec<f64>,
}

fn normalize(fg: &FuzzyGraph) -> Result<Normalized> {
    let degrees = fg.degrees();
    if degrees.iter().any(|&d| d <= 0.0) {
        return Err(Error::SpectralFailure("graph has isolated vertices".into()));
    }
    let inv_sqrt_degree = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut trivial: Vec<f64> = degrees.iter().map(|d| d.sqrt()).collect();
    normalize_vec(&mut trivial);
    Ok(Normalized { inv_sqrt_degree, trivial })
}

fn normalize_vec(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_component(v: &mut [f64], basis: &[f64]) {
    let c = dot(v, basis);
    v.iter_mut().zip(basis).for_each(|(x, b)| *x -= c * b);
}

/// Largest-magnitude entry positive, so eigenvector signs are reproducible.
fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best });
    if pivot.1 < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Accepts candidate vectors in order, keeping those with a substantial
/// component orthogonal to the trivial vector and to earlier picks.
fn orthogonal_picks(candidates: impl Iterator<Item = Vec<f64>>, trivial: &[f64], want: usize) -> Vec<Vec<f64>> {
    let mut picked: Vec<Vec<f64>> = Vec::with_capacity(want);
    for mut v in candidates {
        remove_component(&mut v, trivial);
        for p in &picked {
            remove_component(&mut v, p);
        }
        if normalize_vec(&mut v) > 1e-6 {
            fix_sign(&mut v);
            picked.push(v);
            if picked.len() == want {
                break;
            }
        }
    }
    picked
}

fn to_columns(vectors: Vec<Vec<f64>>, n: usize) -> Array2<f64> {
    let k = vectors.len();
    Array2::from_shape_fn((n, k), |(i, c)| vectors[c][i])
}

fn dense_eigenvectors(fg: &FuzzyGraph, n_components: usize) -> Result<Array2<f64>> {
    let n = fg.n_vertices();
    if n_components + 1 >= n {
        return Err(Error::SpectralFailure(format!("{n} points cannot hold {n_components} nontrivial eigenvectors")));
    }
    let norm = normalize(fg)?;
    let mut laplacian = DMatrix::<f64>::identity(n, n);
    for (i, j, w) in fg.entries() {
        laplacian[(i, j)] -= w * norm.inv_sqrt_degree[i] * norm.inv_sqrt_degree[j];
    }
    let eig = SymmetricEigen::try_new(laplacian, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::SpectralFailure("dense eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let candidates = order.into_iter().map(|c| eig.eigenvectors.column(c).iter().copied().collect());
    let picked = orthogonal_picks(candidates, &norm.trivial, n_components);
    if picked.len() < n_components {
        return Err(Error::SpectralFailure("not enough nontrivial eigenvectors".into()));
    }
    Ok(to_columns(picked, n))
}

/// `y = ½(I + D^{-1/2} W D^{-1/2}) x`; its top eigenvectors are the bottom
/// eigenvectors of the normalized Laplacian.
fn apply_shifted(fg: &FuzzyGraph, inv_sqrt_degree: &[f64], x: &[f64]) -> Vec<f64> {
    (0..fg.n_vertices())
        .map(|i| {
            let s: f64 = fg.row(i).map(|(j, w)| w * inv_sqrt_degree[j] * x[j]).sum();
            0.5 * (x[i] + inv_sqrt_degree[i] * s)
        })
        .collect()
}

fn orthonormalize(block: &mut [Vec<f64>], trivial: &[f64]) {
    for c in 0..block.len() {
        let (done, rest) = block.split_at_mut(c);
        let v = &mut rest[0];
        remove_component(v, trivial);
        for p in done.iter() {
            remove_component(v, p);
        }
        normalize_vec(v);
    }
}

fn subspace_eigenvectors(fg: &FuzzyGraph, n_components: usize, seed: u64) -> Result<Array2<f64>> {
    let n = fg.n_vertices();
    let norm = normalize(fg)?;
    let block_size = n_components + 4;
    let mut rng = rng::stream(seed, INIT_STREAM + 1);
    let mut block: Vec<Vec<f64>> =
        (0..block_size).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    orthonormalize(&mut block, &norm.trivial);

    for iter in 0..SUBSPACE_MAX_ITER {
        let mut images: Vec<Vec<f64>> = block.iter().map(|v| apply_shifted(fg, &norm.inv_sqrt_degree, v)).collect();

        if iter % 10 == 9 {
            // Rayleigh–Ritz on the current block
            let h = DMatrix::from_fn(block_size, block_size, |r, c| dot(&block[r], &images[c]));
            let h = (&h + h.transpose()) * 0.5;
            let eig = SymmetricEigen::new(h);
            let mut order: Vec<usize> = (0..block_size).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let rotate = |vs: &[Vec<f64>], c: usize| -> Vec<f64> {
                (0..n).map(|i| (0..block_size).map(|r| vs[r][i] * eig.eigenvectors[(r, c)]).sum()).collect()
            };
            let ritz: Vec<Vec<f64>> = order.iter().map(|&c| rotate(&block, c)).collect();
            let ritz_images: Vec<Vec<f64>> = order.iter().map(|&c| rotate(&images, c)).collect();
            let converged = (0..n_components).all(|c| {
                let theta = eig.eigenvalues[order[c]];
                let residual: f64 =
                    ritz_images[c].iter().zip(&ritz[c]).map(|(y, x)| (y - theta * x).powi(2)).sum::<f64>().sqrt();
                residual < SUBSPACE_TOL
            });
            if converged {
                let picked = orthogonal_picks(ritz.into_iter().take(n_components), &norm.trivial, n_components);
                if picked.len() < n_components {
                    return Err(Error::SpectralFailure("not enough nontrivial eigenvectors".into()));
                }
                return Ok(to_columns(picked, n));
            }
            images = ritz_images;
        }
        orthonormalize(&mut images, &norm.trivial);
        block = images;
    }
    Err(Error::SpectralFailure(format!("subspace iteration did not converge in {SUBSPACE_MAX_ITER} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cliques() -> FuzzyGraph {
        FuzzyGraph::from_undirected(4, &[(0, 1, 1.0), (2, 3, 1.0)], vec![0.0; 4], vec![1.0; 4])
    }

    #[test]
    fn disconnected_cliques_get_opposite_signs() {
        let coords = spectral_layout(&two_cliques(), 1, 0).unwrap();
        let v = coords.column(0);
        assert!(v[0].signum() == v[1].signum());
        assert!(v[2].signum() == v[3].signum());
        assert!(v[0].signum() != v[2].signum());
    }

    #[test]
    fn random_path_above_ten_components() {
        let fg = two_cliques();
        let init = initialize_layout(&fg, 300, 5);
        assert_eq!(init.method, InitMethod::Random);
        assert_eq!(init.coords.dim(), (4, 300));
        let half = random_box(300);
        assert!((half - 10.0 / 150f64.sqrt()).abs() < 1e-12);
        assert!(init.coords.iter().all(|v| (-half..half).contains(v)));
        assert_eq!(random_box(2), 10.0);
    }

    #[test]
    fn same_seed_same_layout() {
        let fg = ring(50);
        let a = initialize_layout(&fg, 2, 11);
        let b = initialize_layout(&fg, 2, 11);
        assert_eq!(a.method, InitMethod::Spectral);
        assert_eq!(a.coords, b.coords);
        assert_eq!(a.coords.dim(), (50, 2));
    }

    #[test]
    fn too_small_graph_falls_back() {
        let fg = FuzzyGraph::from_undirected(2, &[(0, 1, 1.0)], vec![0.0; 2], vec![1.0; 2]);
        let init = initialize_layout(&fg, 2, 0);
        assert!(matches!(init.method, InitMethod::RandomFallback(_)));
    }

    fn ring(n: usize) -> FuzzyGraph {
        let edges: Vec<_> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 1.0)).collect();
        FuzzyGraph::from_undirected(n, &edges, vec![0.0; n], vec![1.0; n])
    }

    #[test]
    fn subspace_iteration_agrees_with_dense() {
        // ring Laplacian: bottom nontrivial eigenvalue is doubly degenerate, so
        // compare spanned subspaces instead of vectors
        let fg = ring(40);
        let dense = dense_eigenvectors(&fg, 2).unwrap();
        let iterative = subspace_eigenvectors(&fg, 2, 3).unwrap();
        for c in 0..2 {
            let v = iterative.column(c);
            let projected: f64 = (0..2).map(|d| dense.column(d).dot(&v).powi(2)).sum();
            assert!((projected - 1.0).abs() < 1e-6, "projection {projected}");
        }
    }
}
