//! K-Means with k-means++ seeding and Lloyd iterations.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const SEEDING: &str = "k-means++";
pub const DISTANCE: &str = "sqeuclidean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub n_init: usize,
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid displacement (Euclidean).
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { n_init: 10, max_iter: 300, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Index of the winning restart.
    pub restart: usize,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub warning: Option<String>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn write_csv(&self, event_ids: &[String], path: impl AsRef<Path>) -> Result<()> {
        if event_ids.len() != self.assignments.len() {
            return Err(Error::LengthMismatch { left: event_ids.len(), right: self.assignments.len() });
        }
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["event_id", "cluster"])?;
        for (id, c) in event_ids.iter().zip(&self.assignments) {
            writer.write_record([id.as_str(), &c.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Runs `n_init` seeded restarts and keeps the one with the lowest inertia
/// (lowest restart index on ties).
pub fn kmeans_fit(x: ArrayView2<'_, f64>, k: usize, seed: u64, params: &KMeansParams) -> Result<Clustering> {
    let n = x.nrows();
    if k == 0 || params.n_init == 0 || params.max_iter == 0 || !(params.tol > 0.0) {
        return Err(Error::InvalidConfig("k, n_init, max_iter and tol must be positive".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if let Some(row) = crate::model::first_non_finite_row(x) {
        return Err(Error::NonFiniteInput { row });
    }

    let runs: Vec<Clustering> = (0..params.n_init)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r as u64);
            let mut run = lloyd(x, k, &mut rng, params);
            run.seed = seed;
            run.restart = r;
            run
        })
        .collect();

    let mut best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("n_init >= 1");

    if k > 1 && x.rows().into_iter().all(|row| row == x.row(0)) {
        best.warning = Some("all points are identical; centroids are duplicates".into());
    }
    Ok(best)
}

fn kmeans_plus_plus(x: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, bool) {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut closest: Vec<f64> = x.rows().into_iter().map(|p| sq_dist(p, x.row(first))).collect();
    let mut exhausted = false;

    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target ≥ acc; fall back to the last positive weight
            pick.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            exhausted = true;
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, p) in x.rows().into_iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(p, x.row(pick)));
        }
    }
    (centroids, exhausted)
}

/// Nearest centroid per point (lowest index on ties) and its squared distance.
fn assign(x: ArrayView2<'_, f64>, centroids: &Array2<f64>) -> Vec<(usize, f64)> {
    (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let p = x.row(i);
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.rows().into_iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

fn lloyd(x: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng, params: &KMeansParams) -> Clustering {
    let (n, dim) = x.dim();
    let (mut centroids, exhausted) = kmeans_plus_plus(x, k, rng);
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        let assigned = assign(x, &centroids);
        trace.push(assigned.iter().map(|&(_, d)| d).sum());

        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assigned.iter().enumerate() {
            let mut row = sums.row_mut(c);
            row += &x.row(i);
            counts[c] += 1;
        }

        // empty clusters take the points farthest from their current centroid
        let mut far: Vec<usize> = Vec::new();
        if counts.contains(&0) {
            far.extend(0..n);
            far.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
        }
        let mut far = far.into_iter();

        let mut shift = 0.0f64;
        for (c, &count) in counts.iter().enumerate() {
            let updated = if count > 0 {
                sums.row(c).mapv(|s| s / count as f64)
            } else {
                x.row(far.next().unwrap_or(0)).to_owned()
            };
            shift = shift.max(sq_dist(updated.view(), centroids.row(c)).sqrt());
            centroids.row_mut(c).assign(&updated);
        }
        iterations += 1;
        if shift < params.tol {
            break;
        }
    }

    let assigned = assign(x, &centroids);
    let inertia = assigned.iter().map(|&(_, d)| d).sum();
    trace.push(inertia);
    Clustering {
        assignments: assigned.into_iter().map(|(c, _)| c).collect(),
        centroids,
        inertia,
        iterations,
        seed: 0,
        restart: 0,
        inertia_trace: trace,
        warning: exhausted.then(|| "fewer distinct points than clusters".to_owned()),
    }
}
