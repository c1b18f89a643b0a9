//! Domain types shared by every stage of the evaluation pipeline.

use std::collections::{BTreeMap, HashSet};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `N×D` block of embeddings produced by one feature extractor, one row
/// per annotated sound event.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    model_name: String,
    data: Array2<f32>,
    event_ids: Vec<String>,
}

impl EmbeddingSet {
    /// Validates the row count, finiteness and id uniqueness.
    pub fn new(model_name: impl Into<String>, data: Array2<f32>, event_ids: Vec<String>) -> Result<Self> {
        let (count, dim) = data.dim();
        if event_ids.len() != count {
            return Err(Error::IdCountMismatch { expected: count, found: event_ids.len() });
        }
        if count > 0 && dim == 0 {
            return Err(Error::InvariantViolation("dim must be positive when count > 0".into()));
        }
        if let Some(row) = first_non_finite_row(data.view()) {
            return Err(Error::NonFiniteValue { row });
        }
        let mut seen = HashSet::with_capacity(count);
        for id in &event_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvariantViolation(format!("duplicate event id {id:?}")));
            }
        }
        Ok(Self { model_name: model_name.into(), data, event_ids })
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> ArrayView2<'_, f32> {
        self.data.view()
    }

    pub fn event_ids(&self) -> &[String] {
        &self.event_ids
    }

    /// Embeddings widened to 64-bit for metric computations.
    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }

    /// Same ids, new model name and matrix (e.g. a reduced copy).
    pub fn with_data(&self, model_name: impl Into<String>, data: Array2<f32>) -> Result<Self> {
        Self::new(model_name, data, self.event_ids.clone())
    }
}

pub(crate) fn first_non_finite_row<T: Copy + Into<f64>>(data: ArrayView2<'_, T>) -> Option<usize> {
    data.rows()
        .into_iter()
        .position(|row| row.iter().any(|&v| !v.into().is_finite()))
}

/// One labeled sound event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub event_id: String,
    pub file: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

impl AnnotationEvent {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Strict temporal overlap within the same file; touching endpoints do not count.
    pub fn overlaps(&self, other: &AnnotationEvent) -> bool {
        self.file == other.file && self.start_s < other.end_s && other.start_s < self.end_s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationTable {
    rows: Vec<AnnotationEvent>,
}

impl AnnotationTable {
    pub fn new(rows: Vec<AnnotationEvent>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for ev in &rows {
            if !(ev.start_s >= 0.0) || !ev.start_s.is_finite() || !ev.end_s.is_finite() {
                return Err(Error::InvariantViolation(format!(
                    "event {:?}: times must be finite with start_s >= 0",
                    ev.event_id
                )));
            }
            if ev.end_s <= ev.start_s {
                return Err(Error::InvariantViolation(format!(
                    "event {:?}: end_s ({}) must exceed start_s ({})",
                    ev.event_id, ev.end_s, ev.start_s
                )));
            }
            if !seen.insert(ev.event_id.as_str()) {
                return Err(Error::InvariantViolation(format!("duplicate event id {:?}", ev.event_id)));
            }
        }
        Ok(Self { rows })
    }

    /// Subsets of a valid table stay valid, so no re-validation.
    pub(crate) fn from_valid_rows(rows: Vec<AnnotationEvent>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[AnnotationEvent] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Occurrence count per label, ordered by label.
    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for ev in &self.rows {
            *counts.entry(ev.label.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Labels as class indices; class names are sorted so the mapping does not
    /// depend on row order.
    pub fn label_vector(&self) -> LabelVector {
        LabelVector::from_names(self.rows.iter().map(|ev| ev.label.as_str()))
    }
}

/// Class indices plus the ordered index→name mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let n_classes = class_names.len();
        if let Some(&class) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::UnknownClass { class, n_classes });
        }
        Ok(Self { labels, class_names })
    }

    /// Builds indices from textual labels, classes sorted by name.
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let names: Vec<&str> = names.into_iter().collect();
        let mut classes: Vec<&str> = names.clone();
        classes.sort_unstable();
        classes.dedup();
        let labels = names
            .iter()
            .map(|n| classes.binary_search(n).expect("class collected above"))
            .collect();
        Self { labels, class_names: classes.into_iter().map(str::to_owned).collect() }
    }

    /// Indices with synthetic names `"0".."C-1"`; C is one past the largest index.
    pub fn from_indices(labels: Vec<usize>) -> Self {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self { labels, class_names }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels at the given positions, same class universe.
    pub fn select(&self, rows: &[usize]) -> LabelVector {
        LabelVector {
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Training {
    #[serde(rename = "ssl")]
    Ssl,
    #[serde(rename = "supl")]
    Supl,
    #[serde(rename = "ssl+ft")]
    SslFt,
}

impl Training {
    pub fn as_str(self) -> &'static str {
        match self {
            Training::Ssl => "ssl",
            Training::Supl => "supl",
            Training::SslFt => "ssl+ft",
        }
    }

    /// Paradigm used for category rows: fine-tuned ssl models count as ssl.
    pub fn paradigm(self) -> Training {
        match self {
            Training::SslFt => Training::Ssl,
            other => other,
        }
    }
}

pub const BIRD_TAG: &str = "birds";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    pub abbrev: String,
    pub training: Training,
    pub dimension: usize,
    pub domains: Vec<String>,
    pub is_bird_trained: bool,
}

impl RegistryEntry {
    pub fn new(
        name: impl Into<String>,
        abbrev: impl Into<String>,
        training: Training,
        dimension: usize,
        domains: Vec<String>,
    ) -> Self {
        let is_bird_trained = domains.iter().any(|d| d == BIRD_TAG);
        Self { name: name.into(), abbrev: abbrev.into(), training, dimension, domains, is_bird_trained }
    }
}

/// Per-extractor metadata driving the category aggregation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelRegistry {
    entries: Vec<RegistryEntry>,
}

impl ModelRegistry {
    pub fn new(entries: Vec<RegistryEntry>) -> Result<Self> {
        let mut names = HashSet::new();
        let mut abbrevs = HashSet::new();
        for e in &entries {
            if !names.insert(e.name.as_str()) {
                return Err(Error::InvariantViolation(format!("duplicate model name {:?}", e.name)));
            }
            if !abbrevs.insert(e.abbrev.as_str()) {
                return Err(Error::InvariantViolation(format!("duplicate abbrev {:?}", e.abbrev)));
            }
            if e.dimension == 0 {
                return Err(Error::InvariantViolation(format!("model {:?}: dimension must be positive", e.name)));
            }
            if e.is_bird_trained != e.domains.iter().any(|d| d == BIRD_TAG) {
                return Err(Error::InvariantViolation(format!(
                    "model {:?}: is_bird_trained disagrees with domains {:?}",
                    e.name, e.domains
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    /// Lookup by full name or abbreviation.
    pub fn get(&self, name: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.name == name || e.abbrev == name)
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn embedding_set_rejects_nan_with_row() {
        let data = array![[0.0f32, 1.0], [f32::NAN, 0.0], [1.0, 1.0]];
        let ids = vec!["a".into(), "b".into(), "c".into()];
        assert!(matches!(EmbeddingSet::new("m", data, ids), Err(Error::NonFiniteValue { row: 1 })));
    }

    #[test]
    fn embedding_set_rejects_duplicate_ids() {
        let data = array![[0.0f32], [1.0]];
        let err = EmbeddingSet::new("m", data, vec!["a".into(), "a".into()]).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
    }

    #[test]
    fn annotation_zero_duration_is_rejected() {
        let ev = AnnotationEvent {
            event_id: "e".into(),
            file: "f.wav".into(),
            start_s: 1.0,
            end_s: 1.0,
            label: "A".into(),
        };
        assert!(matches!(AnnotationTable::new(vec![ev]), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn label_vector_sorts_classes() {
        let lv = LabelVector::from_names(["b", "a", "b", "c"]);
        assert_eq!(lv.class_names(), ["a", "b", "c"]);
        assert_eq!(lv.labels(), [1, 0, 1, 2]);
    }

    #[test]
    fn bird_flag_follows_domains() {
        let birdnet = RegistryEntry::new("BirdNET", "brdnet", Training::Supl, 1024, vec!["birds".into()]);
        assert!(birdnet.is_bird_trained);
        let whale = RegistryEntry::new("Google_Whale", "g_whale", Training::Supl, 1280, vec!["whales".into()]);
        assert!(!whale.is_bird_trained);

        let mut bad = whale.clone();
        bad.is_bird_trained = true;
        assert!(ModelRegistry::new(vec![bad]).is_err());
        assert!(ModelRegistry::new(vec![birdnet.clone(), birdnet]).is_err());
    }

    #[test]
    fn ssl_ft_is_ssl_paradigm() {
        assert_eq!(Training::SslFt.paradigm(), Training::Ssl);
        assert_eq!(Training::Supl.paradigm(), Training::Supl);
    }
}
