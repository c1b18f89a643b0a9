use ndarray::Array2;
use rand::Rng;

use super::graph::FuzzyGraph;
use super::LayoutParams;
use crate::error::{Error, Result};
use crate::rng;

const GRADIENT_CLIP: f64 = 4.0;
const OPTIMIZE_STREAM: u64 = 0x0971;

fn clip(v: f64) -> f64 {
    v.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}

/// Attractive coefficient for squared distance `d2` (zero at `d2 = 0`).
pub fn attractive_coefficient(d2: f64, a: f64, b: f64) -> f64 {
    if d2 > 0.0 {
        -2.0 * a * b * d2.powf(b - 1.0) / (1.0 + a * d2.powf(b))
    } else {
        0.0
    }
}

pub fn repulsive_coefficient(d2: f64, a: f64, b: f64, repulsion_strength: f64) -> f64 {
    if d2 > 0.0 {
        2.0 * repulsion_strength * b / ((0.001 + d2) * (1.0 + a * d2.powf(b)))
    } else {
        0.0
    }
}

struct EdgeSchedule {
    head: Vec<usize>,
    tail: Vec<usize>,
    epochs_per_sample: Vec<f64>,
    next_sample: Vec<f64>,
    epochs_per_negative: Vec<f64>,
    next_negative: Vec<f64>,
}

impl EdgeSchedule {
    /// Every stored entry becomes a directed edge sampled once every
    /// `w_max / w` epochs; edges that would never fire within `n_epochs` are
    /// dropped.
    fn new(fg: &FuzzyGraph, n_epochs: usize, negative_sample_rate: f64) -> Self {
        let w_max = fg.entries().map(|(_, _, w)| w).fold(0.0, f64::max);
        let mut s = EdgeSchedule {
            head: Vec::new(),
            tail: Vec::new(),
            epochs_per_sample: Vec::new(),
            next_sample: Vec::new(),
            epochs_per_negative: Vec::new(),
            next_negative: Vec::new(),
        };
        for (i, j, w) in fg.entries() {
            let eps = w_max / w;
            if eps > n_epochs as f64 {
                continue;
            }
            s.head.push(i);
            s.tail.push(j);
            s.epochs_per_sample.push(eps);
            s.next_sample.push(eps);
            s.epochs_per_negative.push(eps / negative_sample_rate);
            s.next_negative.push(eps / negative_sample_rate);
        }
        s
    }
}

fn sq_dist(coords: &[f64], dim: usize, i: usize, j: usize) -> f64 {
    let (a, b) = (&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim]);
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sequential cross-entropy SGD over the fuzzy graph. Deterministic for a
/// fixed seed.
pub fn optimize_layout(fg: &FuzzyGraph, init: &Array2<f64>, params: &LayoutParams, a: f64, b: f64) -> Result<Array2<f64>> {
    let (n, dim) = init.dim();
    if n != fg.n_vertices() {
        return Err(Error::LengthMismatch { left: n, right: fg.n_vertices() });
    }
    let n_epochs = params.epochs_for(n);
    if n_epochs == 0 {
        return Err(Error::InvalidConfig("n_epochs must be at least 1".into()));
    }
    let mut coords: Vec<f64> = init.iter().copied().collect();
    let mut schedule = EdgeSchedule::new(fg, n_epochs, params.negative_sample_rate as f64);
    let mut rng = rng::stream(params.seed, OPTIMIZE_STREAM);

    for epoch in 0..n_epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
        let now = epoch as f64;
        for e in 0..schedule.head.len() {
            if schedule.next_sample[e] > now {
                continue;
            }
            let (j, k) = (schedule.head[e], schedule.tail[e]);

            let coeff = attractive_coefficient(sq_dist(&coords, dim, j, k), a, b);
            for d in 0..dim {
                let grad = clip(coeff * (coords[j * dim + d] - coords[k * dim + d]));
                coords[j * dim + d] += grad * alpha;
                coords[k * dim + d] -= grad * alpha;
            }
            schedule.next_sample[e] += schedule.epochs_per_sample[e];

            let n_negative =
                ((now - schedule.next_negative[e]) / schedule.epochs_per_negative[e]).floor().max(0.0) as usize;
            for _ in 0..n_negative {
                let other = rng.random_range(0..n);
                if other == j {
                    continue;
                }
                let coeff = repulsive_coefficient(sq_dist(&coords, dim, j, other), a, b, params.repulsion_strength);
                if coeff > 0.0 {
                    for d in 0..dim {
                        let grad = clip(coeff * (coords[j * dim + d] - coords[other * dim + d]));
                        coords[j * dim + d] += grad * alpha;
                    }
                }
            }
            schedule.next_negative[e] += n_negative as f64 * schedule.epochs_per_negative[e];
        }

        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoordinate { epoch, point: pos / dim.max(1) });
        }
    }
    Ok(Array2::from_shape_vec((n, dim), coords).expect("shape preserved"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strong_edge_pulls_pair_together() {
        let fg = FuzzyGraph::from_undirected(2, &[(0, 1, 1.0)], vec![0.0; 2], vec![1.0; 2]);
        let init = ndarray::array![[-3.0, 0.0], [3.0, 1.0]];
        let params = LayoutParams { n_components: 2, seed: 0, ..LayoutParams::default() };
        let out = optimize_layout(&fg, &init, &params, 1.577, 0.895).unwrap();
        let before = ((init[[0, 0]] - init[[1, 0]]).powi(2) + (init[[0, 1]] - init[[1, 1]]).powi(2)).sqrt();
        let after = ((out[[0, 0]] - out[[1, 0]]).powi(2) + (out[[0, 1]] - out[[1, 1]]).powi(2)).sqrt();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn coefficient_signs() {
        assert!(attractive_coefficient(1.0, 1.5, 0.9) < 0.0);
        assert!(repulsive_coefficient(1.0, 1.5, 0.9, 1.0) > 0.0);
        assert_eq!(attractive_coefficient(0.0, 1.5, 0.9), 0.0);
    }
}
