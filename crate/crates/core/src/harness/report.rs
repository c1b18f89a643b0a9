use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{AmiNormalizer, KMeansParams};
use crate::curation::SplitRatios;
use crate::error::{Error, Result};
use crate::knn::Metric;
use crate::model::{ModelRegistry, Training};
use crate::umap::InitMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Original,
    Umap300,
}

impl Space {
    pub fn as_str(self) -> &'static str {
        match self {
            Space::Original => "original",
            Space::Umap300 => "umap300",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnEcho {
    pub k: usize,
    pub metric: Metric,
    pub weighting: String,
    pub tie_break: String,
    pub fit_on: String,
    pub scored_on: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansEcho {
    #[serde(flatten)]
    pub params: KMeansParams,
    pub k: usize,
    pub seeding: String,
    pub distance: String,
    pub empty_cluster: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmapEcho {
    pub n_components: usize,
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub a: f64,
    pub b: f64,
    pub n_epochs: usize,
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    pub repulsion_strength: f64,
    pub gradient_clip: f64,
    pub knn_graph: String,
    pub init: InitMethod,
    /// Half-width of the uniform box used when `init` is random.
    pub random_init_half_width: f64,
    pub mode: String,
    pub fitted_on: String,
}

/// Every setting behind a score, including the defaults chosen where the
/// evaluation protocol leaves them open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub seed: u64,
    pub model_seed: u64,
    pub split: SplitRatios,
    pub knn: KnnEcho,
    pub kmeans: KMeansEcho,
    pub ami_normalizer: AmiNormalizer,
    pub umap: UmapEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub space: Space,
    pub training: Training,
    pub is_bird_trained: bool,
    pub dim: usize,
    pub ami: f64,
    pub balanced_macro_accuracy: f64,
    pub kmeans_inertia: f64,
    pub kmeans_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kmeans_warning: Option<String>,
    pub params_echo: ParamsEcho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "supl")]
    Supl,
    #[serde(rename = "ssl")]
    Ssl,
    #[serde(rename = "bird")]
    Bird,
    #[serde(rename = "non-bird")]
    NonBird,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Supl, Category::Ssl, Category::Bird, Category::NonBird];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Supl => "supl",
            Category::Ssl => "ssl",
            Category::Bird => "bird",
            Category::NonBird => "non-bird",
        }
    }

    fn contains(self, training: Training, is_bird_trained: bool) -> bool {
        match self {
            Category::Supl => training.paradigm() == Training::Supl,
            Category::Ssl => training.paradigm() == Training::Ssl,
            Category::Bird => is_bird_trained,
            Category::NonBird => !is_bird_trained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub members: Vec<String>,
    pub classification_original: Option<f64>,
    pub classification_umap: Option<f64>,
    pub clustering_original: Option<f64>,
    pub clustering_umap: Option<f64>,
}

impl CategoryRow {
    pub fn values(&self) -> [Option<f64>; 4] {
        [self.classification_original, self.classification_umap, self.clustering_original, self.clustering_umap]
    }
}

/// Category × space × task means; categories without members are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryTable {
    pub rows: Vec<CategoryRow>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Averages per-model scores by category. Category membership comes only from
/// the registry; a model may sit in several categories (e.g. supl and bird).
pub fn aggregate_by_category(metrics: &[ModelMetrics], registry: &ModelRegistry) -> Result<CategoryTable> {
    let mut models: Vec<&str> = Vec::new();
    for m in metrics {
        if registry.get(&m.model).is_none() {
            return Err(Error::RegistryMiss(m.model.clone()));
        }
        if !models.contains(&m.model.as_str()) {
            models.push(&m.model);
        }
    }

    let mut rows = Vec::new();
    for category in Category::ALL {
        let members: Vec<&str> = models
            .iter()
            .copied()
            .filter(|name| {
                let entry = registry.get(name).expect("checked above");
                category.contains(entry.training, entry.is_bird_trained)
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let collect = |space: Space, pick: fn(&ModelMetrics) -> f64| -> Option<f64> {
            let values: Vec<f64> = members
                .iter()
                .filter_map(|name| metrics.iter().find(|m| m.model == *name && m.space == space).map(pick))
                .collect();
            mean(&values)
        };
        rows.push(CategoryRow {
            category,
            members: members.iter().map(|s| s.to_string()).collect(),
            classification_original: collect(Space::Original, |m| m.balanced_macro_accuracy),
            classification_umap: collect(Space::Umap300, |m| m.balanced_macro_accuracy),
            clustering_original: collect(Space::Original, |m| m.ami),
            clustering_umap: collect(Space::Umap300, |m| m.ami),
        });
    }
    Ok(CategoryTable { rows })
}

fn fmt3(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"))
}

/// `"bird | 0.712 | 0.723 | 0.426 | 0.479"`: classification (original, UMAP)
/// then clustering (original, UMAP), three decimals.
pub fn format_category_row(row: &CategoryRow) -> String {
    let mut line = row.category.as_str().to_owned();
    for v in row.values() {
        line.push_str(" | ");
        line.push_str(&fmt3(v));
    }
    line
}

/// Markdown table; within each task the best displayed value across all
/// categories and both spaces is bold, including ties.
pub fn render_category_markdown(table: &CategoryTable) -> String {
    let best = |cols: [usize; 2]| -> Option<String> {
        table
            .rows
            .iter()
            .flat_map(|r| cols.map(|c| r.values()[c]))
            .flatten()
            .max_by(f64::total_cmp)
            .map(|v| format!("{v:.3}"))
    };
    let best_classification = best([0, 1]);
    let best_clustering = best([2, 3]);

    let mut out = String::new();
    out.push_str("| category | classification original | classification UMAP | clustering original | clustering UMAP |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in &table.rows {
        let _ = write!(out, "| {} ", row.category.as_str());
        for (c, v) in row.values().into_iter().enumerate() {
            let text = fmt3(v);
            let best = if c < 2 { &best_classification } else { &best_clustering };
            if v.is_some() && best.as_deref() == Some(text.as_str()) {
                let _ = write!(out, "| **{text}** ");
            } else {
                let _ = write!(out, "| {text} ");
            }
        }
        out.push_str("|\n");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_events: usize,
    pub class_names: Vec<String>,
    pub class_counts: BTreeMap<String, usize>,
    pub split_sizes: BTreeMap<String, usize>,
}

/// Relative file names of per-model artifacts in the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub curated_annotations: String,
    pub split: String,
    pub reduced: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tool: String,
    pub version: String,
    pub dataset: DatasetSummary,
    pub models: Vec<ModelMetrics>,
    pub categories: CategoryTable,
    pub artifacts: Artifacts,
}

/// A category cell: space, metric picker, stored value, column name.
type Cell<'a> = (Space, fn(&ModelMetrics) -> f64, Option<f64>, &'a str);

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    /// AMI of each model's original space (the gallery ordering key), falling
    /// back to any space if the original is missing.
    pub fn model_ami(&self, model: &str) -> Option<f64> {
        let of_model = || self.models.iter().filter(move |m| m.model == model);
        of_model().find(|m| m.space == Space::Original).or_else(|| of_model().next()).map(|m| m.ami)
    }

    /// Recomputes every category mean from the per-model section and reports
    /// cells that differ by more than `tol`.
    pub fn check_consistency(&self, tol: f64) -> Vec<String> {
        let mut problems = Vec::new();
        for row in &self.categories.rows {
            let cells: [Cell; 4] = [
                (Space::Original, |m| m.balanced_macro_accuracy, row.classification_original, "classification_original"),
                (Space::Umap300, |m| m.balanced_macro_accuracy, row.classification_umap, "classification_umap"),
                (Space::Original, |m| m.ami, row.clustering_original, "clustering_original"),
                (Space::Umap300, |m| m.ami, row.clustering_umap, "clustering_umap"),
            ];
            for (space, pick, stored, name) in cells {
                let values: Vec<f64> = row
                    .members
                    .iter()
                    .filter_map(|model| self.models.iter().find(|m| &m.model == model && m.space == space).map(pick))
                    .collect();
                let recomputed = mean(&values);
                let ok = match (stored, recomputed) {
                    (Some(a), Some(b)) => (a - b).abs() <= tol,
                    (None, None) => true,
                    _ => false,
                };
                if !ok {
                    problems.push(format!("{} {name}: stored {stored:?}, recomputed {recomputed:?}", row.category.as_str()));
                }
            }
        }
        problems
    }
}

pub fn write_per_model_csv(metrics: &[ModelMetrics], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "space", "training", "is_bird_trained", "ami", "balanced_macro_accuracy"])?;
    for m in metrics {
        w.write_record([
            m.model.as_str(),
            m.space.as_str(),
            m.training.as_str(),
            &m.is_bird_trained.to_string(),
            &m.ami.to_string(),
            &m.balanced_macro_accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full-precision means; members joined with `;`.
pub fn write_category_csv(table: &CategoryTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "category",
        "classification_original",
        "classification_umap",
        "clustering_original",
        "clustering_umap",
        "members",
    ])?;
    for row in &table.rows {
        let mut record = vec![row.category.as_str().to_owned()];
        record.extend(row.values().iter().map(|v| v.map_or_else(String::new, |v| v.to_string())));
        record.push(row.members.join(";"));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
