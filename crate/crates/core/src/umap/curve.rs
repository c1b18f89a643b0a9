use crate::error::{Error, Result};

const GRID_POINTS: usize = 300;
const MAX_ITER: usize = 500;

/// Fitted coefficients of the low-dimensional similarity `1 / (1 + a·x^{2b})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square residual against the target curve on the fit grid.
    pub rmse: f64,
}

pub fn low_dim_similarity(x: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * x.powf(2.0 * b))
}

/// Target: 1 up to `min_dist`, then exponential decay with scale `spread`.
pub fn target_curve(x: f64, min_dist: f64, spread: f64) -> f64 {
    if x <= min_dist {
        1.0
    } else {
        (-(x - min_dist) / spread).exp()
    }
}

pub fn fit_grid(spread: f64) -> Vec<f64> {
    let step = 3.0 * spread / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| i as f64 * step).collect()
}

fn residuals(xs: &[f64], ys: &[f64], a: f64, b: f64) -> Vec<f64> {
    xs.iter().zip(ys).map(|(&x, &y)| low_dim_similarity(x, a, b) - y).collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn rmse(min_dist: f64, spread: f64, a: f64, b: f64) -> f64 {
    let xs = fit_grid(spread);
    let ys: Vec<f64> = xs.iter().map(|&x| target_curve(x, min_dist, spread)).collect();
    (cost(&residuals(&xs, &ys, a, b)) / xs.len() as f64).sqrt()
}

/// Least-squares fit of `(a, b)` on 300 evenly spaced points over
/// `[0, 3·spread]`, Levenberg–Marquardt from `a = b = 1`.
pub fn fit_ab(min_dist: f64, spread: f64) -> Result<CurveFit> {
    if !(spread > 0.0) || !(min_dist >= 0.0) {
        return Err(Error::InvalidConfig(format!("need spread > 0 and min_dist >= 0, got {spread}, {min_dist}")));
    }
    let xs = fit_grid(spread);
    let ys: Vec<f64> = xs.iter().map(|&x| target_curve(x, min_dist, spread)).collect();

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut r = residuals(&xs, &ys, a, b);
    let initial_cost = cost(&r);
    let mut current = initial_cost;
    let mut lambda = 1e-3;

    for _ in 0..MAX_ITER {
        // normal equations JᵀJ δ = −Jᵀr
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &ri) in xs.iter().zip(&r) {
            if x == 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let denom = (1.0 + a * p).powi(2);
            let da = -p / denom;
            let db = -2.0 * a * p * x.ln() / denom;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * ri;
            gb += db * ri;
        }

        let mut improved = false;
        while lambda < 1e12 {
            let (ma, mb) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = ma * mb - jab * jab;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(mb * ga - jab * gb) / det;
            let step_b = -(ma * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 && na.is_finite() && nb.is_finite() {
                let trial = residuals(&xs, &ys, na, nb);
                let trial_cost = cost(&trial);
                if trial_cost < current {
                    let rel = (current - trial_cost) / current.max(f64::MIN_POSITIVE);
                    (a, b, r, current) = (na, nb, trial, trial_cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    if !current.is_finite() || (initial_cost > 0.0 && current >= initial_cost) {
        return Err(Error::FitDiverged);
    }
    Ok(CurveFit { a, b, rmse: (current / xs.len() as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from scipy.optimize.curve_fit on the same 300-point grid.
    const SCIPY_FITS: [(f64, f64, f64, f64); 3] = [
        (0.0, 1.93280839734315, 0.7904949732233831, 0.024159539707626743),
        (0.1, 1.5769434602697652, 0.8950608778515733, 0.01619005024349704),
        (0.5, 0.5830300203414425, 1.3341669924314914, 0.020716423085911227),
    ];

    #[test]
    fn matches_reference_least_squares() {
        for (min_dist, a, b, rmse) in SCIPY_FITS {
            let fit = fit_ab(min_dist, 1.0).unwrap();
            assert!((fit.a - a).abs() < 1e-4, "a({min_dist}) = {} vs {a}", fit.a);
            assert!((fit.b - b).abs() < 1e-4, "b({min_dist}) = {} vs {b}", fit.b);
            assert!((fit.rmse - rmse).abs() < 1e-6);
        }
    }

    #[test]
    fn a_decreases_with_min_dist() {
        assert!(fit_ab(0.5, 1.0).unwrap().a < fit_ab(0.0, 1.0).unwrap().a);
    }

    #[test]
    fn similarity_is_one_at_zero() {
        let fit = fit_ab(0.1, 1.0).unwrap();
        assert_eq!(low_dim_similarity(0.0, fit.a, fit.b), 1.0);
    }

    #[test]
    fn bad_spread() {
        assert!(fit_ab(0.1, 0.0).is_err());
    }
}
