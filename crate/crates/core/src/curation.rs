//! Reduction of raw annotation tables to evaluation sets, and the seeded
//! stratified train/val/test split.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotationTable, LabelVector};
use crate::rng;

pub const DEFAULT_MIN_ANNOTATIONS: usize = 150;
pub const DEFAULT_RATIOS: SplitRatios = SplitRatios { train: 0.65, val: 0.15, test: 0.20 };

/// Keeps events whose label occurs strictly more than `threshold` times.
pub fn filter_min_annotations(table: &AnnotationTable, threshold: usize) -> Result<AnnotationTable> {
    let counts = table.class_counts();
    let rows: Vec<_> = table
        .rows()
        .iter()
        .filter(|ev| counts[ev.label.as_str()] > threshold)
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(AnnotationTable::from_valid_rows(rows))
}

/// Drops every event that strictly overlaps another event in the same file.
/// Both sides of an overlap are removed; touching endpoints are kept.
pub fn remove_overlaps(table: &AnnotationTable) -> AnnotationTable {
    let rows = table.rows();
    let mut by_file: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, ev) in rows.iter().enumerate() {
        by_file.entry(ev.file.as_str()).or_default().push(i);
    }

    let mut overlapping = vec![false; rows.len()];
    for members in by_file.values_mut() {
        members.sort_by(|&a, &b| rows[a].start_s.total_cmp(&rows[b].start_s));
        for (pos, &i) in members.iter().enumerate() {
            for &j in &members[pos + 1..] {
                if rows[j].start_s >= rows[i].end_s {
                    break;
                }
                overlapping[i] = true;
                overlapping[j] = true;
            }
        }
    }

    AnnotationTable::from_valid_rows(
        rows.iter()
            .zip(&overlapping)
            .filter(|(_, &o)| !o)
            .map(|(ev, _)| ev.clone())
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("split ratios must be in [0,1] and sum to 1, got {parts:?}")));
        }
        Ok(())
    }

    /// Per-class part sizes: floor, floor, remainder to test.
    pub fn part_sizes(&self, n: usize) -> (usize, usize, usize) {
        // 1e-9 absorbs binary representation error, e.g. 0.65 * 20 = 13 - ulp
        let train = (self.train * n as f64 + 1e-9).floor() as usize;
        let val = ((self.val * n as f64 + 1e-9).floor() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        DEFAULT_RATIOS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub assignment: Vec<Part>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl SplitAssignment {
    pub fn indices(&self, part: Part) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == part)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn write_csv(&self, event_ids: &[String], path: impl AsRef<Path>) -> Result<()> {
        if event_ids.len() != self.assignment.len() {
            return Err(Error::LengthMismatch { left: event_ids.len(), right: self.assignment.len() });
        }
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["event_id", "part"])?;
        for (id, part) in event_ids.iter().zip(&self.assignment) {
            writer.write_record([id.as_str(), &part.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Per class: shuffle members with the class's own seeded stream, then cut
/// into train/val/test by [`SplitRatios::part_sizes`].
pub fn stratified_split(labels: &LabelVector, ratios: SplitRatios, seed: u64) -> Result<SplitAssignment> {
    ratios.validate()?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.n_classes()];
    for (i, &c) in labels.labels().iter().enumerate() {
        members[c].push(i);
    }

    let mut assignment = vec![Part::Test; labels.len()];
    for (class, rows) in members.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 3 {
            return Err(Error::TooFewMembers { class, count: rows.len() });
        }
        let mut rng = rng::stream(seed, class as u64);
        rows.shuffle(&mut rng);
        let (n_train, n_val, _) = ratios.part_sizes(rows.len());
        for (pos, &row) in rows.iter().enumerate() {
            assignment[row] = if pos < n_train {
                Part::Train
            } else if pos < n_train + n_val {
                Part::Val
            } else {
                Part::Test
            };
        }
    }
    Ok(SplitAssignment { assignment, seed, ratios })
}
