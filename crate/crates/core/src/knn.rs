//! Exact k-nearest-neighbor classification and balanced macro accuracy.

use std::cmp::Ordering;
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }

    /// Ranking key: squared distance for Euclidean, `1 − cos` for cosine.
    fn key(self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b.iter()) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na.sqrt() * nb.sqrt())
                }
            }
        }
    }

    fn key_to_distance(self, key: f64) -> f64 {
        match self {
            Metric::Euclidean => key.sqrt(),
            Metric::Cosine => key,
        }
    }
}

fn by_key_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest `(key, index)` pairs, ascending; ties go to the lower index.
pub(crate) fn select_k_smallest(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, by_key_then_index);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_key_then_index);
    candidates
}

/// `(distance, train row)` of the `k` nearest training rows to `query`.
pub fn nearest_neighbors(
    train: ArrayView2<'_, f64>,
    query: ArrayView1<'_, f64>,
    k: usize,
    metric: Metric,
) -> Vec<(f64, usize)> {
    let candidates = train
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| (metric.key(query, row), i))
        .collect();
    select_k_smallest(candidates, k)
        .into_iter()
        .map(|(key, i)| (metric.key_to_distance(key), i))
        .collect()
}

/// Majority vote; ties go to the smaller summed neighbor distance, then the
/// lower class index.
fn vote(neighbors: &[(f64, usize)], train_y: &[usize]) -> usize {
    let mut tally: Vec<(usize, usize, f64)> = Vec::new();
    for &(d, i) in neighbors {
        let class = train_y[i];
        match tally.iter_mut().find(|t| t.0 == class) {
            Some(t) => {
                t.1 += 1;
                t.2 += d;
            }
            None => tally.push((class, 1, d)),
        }
    }
    tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
        .map(|t| t.0)
        .expect("k >= 1")
}

pub fn knn_predict(
    train_x: ArrayView2<'_, f64>,
    train_y: &[usize],
    query_x: ArrayView2<'_, f64>,
    k: usize,
    metric: Metric,
) -> Result<Vec<usize>> {
    if train_x.nrows() != train_y.len() {
        return Err(Error::LengthMismatch { left: train_x.nrows(), right: train_y.len() });
    }
    if train_x.ncols() != query_x.ncols() {
        return Err(Error::DimMismatch { left: train_x.ncols(), right: query_x.ncols() });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if k > train_x.nrows() {
        return Err(Error::KExceedsTrain { k, n: train_x.nrows() });
    }
    Ok((0..query_x.nrows())
        .into_par_iter()
        .map(|q| vote(&nearest_neighbors(train_x, query_x.row(q), k, metric), train_y))
        .collect())
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.n_classes()).map(|c| self.counts[c][c]).sum();
        correct as f64 / self.total() as f64
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let bad = if t >= n_classes { Some(t) } else if p >= n_classes { Some(p) } else { None };
        if let Some(class) = bad {
            return Err(Error::UnknownClass { class, n_classes });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Unweighted mean of per-class recall.
pub fn balanced_macro_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let n_classes = cm.n_classes();
    if n_classes == 0 {
        return Err(Error::InvalidConfig("empty confusion matrix".into()));
    }
    let mut recall_sum = 0.0;
    for (c, row) in cm.counts.iter().enumerate() {
        let support: u64 = row.iter().sum();
        if support == 0 {
            return Err(Error::EmptyClass { class: c });
        }
        recall_sum += row[c] as f64 / support as f64;
    }
    Ok(recall_sum / n_classes as f64)
}

/// `event_id,true_label,predicted_label` with class names.
pub fn write_predictions_csv(
    event_ids: &[String],
    y_true: &[usize],
    y_pred: &[usize],
    class_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    if event_ids.len() != y_true.len() || y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: event_ids.len(), right: y_pred.len() });
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["event_id", "true_label", "predicted_label"])?;
    for ((id, &t), &p) in event_ids.iter().zip(y_true).zip(y_pred) {
        writer.write_record([id.as_str(), class_names[t].as_str(), class_names[p].as_str()])?;
    }
    writer.flush()?;
    Ok(())
}
