//! The full protocol: curate, align, reduce, cluster, classify, aggregate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::config::EvalConfig;
use super::report::*;
use super::svg::{render_gallery, render_scatter_svg, GalleryPanel};
use crate::cluster::{adjusted_mutual_info_with, kmeans_fit, Clustering, DISTANCE, SEEDING};
use crate::curation::{filter_min_annotations, remove_overlaps, stratified_split, Part, SplitAssignment};
use crate::error::{Error, Result};
use crate::io;
use crate::knn::{balanced_macro_accuracy, confusion, knn_predict, write_predictions_csv};
use crate::model::{AnnotationTable, EmbeddingSet, LabelVector, ModelRegistry, RegistryEntry};
use crate::rng::derive_seed;
use crate::umap::{random_box, umap, UmapOutput};

pub const CURATED_FILE: &str = "curated_annotations.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const REPORT_FILE: &str = "report.json";
pub const GALLERY_FILE: &str = "gallery.svg";

const UMAP2_SEED_TAG: &str = "umap2";

/// File-system-safe form of a model name.
pub fn file_stem(model: &str) -> String {
    model.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn reduced_file(model: &str, kind: &str) -> String {
    format!("{}.{kind}.bemb", file_stem(model))
}

pub fn scatter_file(model: &str) -> String {
    format!("scatter_{}.svg", file_stem(model))
}

/// Predictions and cluster assignments for one space.
#[derive(Debug, Clone)]
pub struct SpaceResult {
    pub space: Space,
    pub clustering: Clustering,
    pub test_rows: Vec<usize>,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ModelRun {
    pub model: String,
    pub umap300: EmbeddingSet,
    pub umap2: Option<Array2<f64>>,
    pub spaces: Vec<SpaceResult>,
}

/// Everything a run produced, so outputs can be written without recomputation.
#[derive(Debug, Clone)]
pub struct EvaluationRun {
    pub report: EvaluationReport,
    pub curated: AnnotationTable,
    pub labels: LabelVector,
    pub split: SplitAssignment,
    pub models: Vec<ModelRun>,
}

/// Class filter, then optional overlap removal; no re-filtering afterwards.
pub fn curate(table: &AnnotationTable, min_annotations: usize, drop_overlaps: bool) -> Result<AnnotationTable> {
    let filtered = filter_min_annotations(table, min_annotations)?;
    let curated = if drop_overlaps { remove_overlaps(&filtered) } else { filtered };
    if curated.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(curated)
}

/// Reorders embedding rows to follow `curated`. Fails with the number of
/// ids that cannot be matched in either direction: curated events without
/// an embedding, and embedding rows whose id is unknown to the annotations.
pub fn align(set: &EmbeddingSet, raw: &AnnotationTable, curated: &AnnotationTable) -> Result<Array2<f64>> {
    let row_of: HashMap<&str, usize> = set.event_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let known: HashSet<&str> = raw.rows().iter().map(|e| e.event_id.as_str()).collect();

    let unannotated = set.event_ids().iter().filter(|id| !known.contains(id.as_str())).count();
    let mut rows = Vec::with_capacity(curated.len());
    let mut missing = 0;
    for ev in curated.rows() {
        match row_of.get(ev.event_id.as_str()) {
            Some(&r) => rows.push(r),
            None => missing += 1,
        }
    }
    if missing + unannotated > 0 {
        return Err(Error::MissingEvents { count: missing + unannotated });
    }
    Ok(set.data().select(Axis(0), &rows).mapv(f64::from))
}

fn echo(config: &EvalConfig, model_seed: u64, k: usize, umap: &UmapOutput) -> ParamsEcho {
    let layout = config.umap.layout_for(config.umap.eval_dims, model_seed);
    ParamsEcho {
        seed: config.seed,
        model_seed,
        split: config.split,
        knn: KnnEcho {
            k: config.knn_k,
            metric: config.knn_metric,
            weighting: "uniform".into(),
            tie_break: "distance then lower train index; votes: smaller summed distance then lower class index".into(),
            fit_on: "train".into(),
            scored_on: "test".into(),
        },
        kmeans: KMeansEcho {
            params: config.kmeans.clone(),
            k,
            seeding: SEEDING.into(),
            distance: DISTANCE.into(),
            empty_cluster: "reseed to farthest point".into(),
        },
        ami_normalizer: config.ami_normalizer,
        umap: UmapEcho {
            n_components: layout.n_components,
            n_neighbors: layout.n_neighbors,
            min_dist: layout.min_dist,
            spread: layout.spread,
            a: umap.a,
            b: umap.b,
            n_epochs: umap.n_epochs,
            learning_rate: layout.learning_rate,
            negative_sample_rate: layout.negative_sample_rate,
            repulsion_strength: layout.repulsion_strength,
            gradient_clip: 4.0,
            knn_graph: "exact".into(),
            init: umap.init.clone(),
            random_init_half_width: random_box(layout.n_components),
            mode: "sequential".into(),
            fitted_on: "all curated events".into(),
        },
    }
}

struct Shared<'a> {
    config: &'a EvalConfig,
    raw: &'a AnnotationTable,
    curated: &'a AnnotationTable,
    labels: &'a LabelVector,
    split: &'a SplitAssignment,
}

fn evaluate_space(
    shared: &Shared<'_>,
    x: &Array2<f64>,
    space: Space,
    model_seed: u64,
) -> Result<(SpaceResult, f64, f64)> {
    let config = shared.config;
    let y = shared.labels.labels();
    let clustering = kmeans_fit(x.view(), shared.labels.n_classes(), model_seed, &config.kmeans)?;
    let ami = adjusted_mutual_info_with(y, &clustering.assignments, config.ami_normalizer)?;

    let train = shared.split.indices(Part::Train);
    let test = shared.split.indices(Part::Test);
    let train_y: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let test_y: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let predictions = knn_predict(
        x.select(Axis(0), &train).view(),
        &train_y,
        x.select(Axis(0), &test).view(),
        config.knn_k,
        config.knn_metric,
    )?;
    let bma = balanced_macro_accuracy(&confusion(&test_y, &predictions, shared.labels.n_classes())?)?;
    Ok((SpaceResult { space, clustering, test_rows: test, predictions }, ami, bma))
}

fn evaluate_model(
    shared: &Shared<'_>,
    set: &EmbeddingSet,
    entry: &RegistryEntry,
) -> Result<(ModelRun, Vec<ModelMetrics>)> {
    let config = shared.config;
    let model_seed = derive_seed(config.seed, &entry.name);
    let original = align(set, shared.raw, shared.curated)?;

    let reduced = umap(original.view(), &config.umap.layout_for(config.umap.eval_dims, model_seed))?;
    // The reduced space is stored as f32; evaluate exactly what is written.
    let reduced32 = reduced.embedding.mapv(|v| v as f32);
    let reduced64 = reduced32.mapv(f64::from);
    let ids: Vec<String> = shared.curated.rows().iter().map(|e| e.event_id.clone()).collect();
    let umap300 = EmbeddingSet::new(format!("{}+umap300", entry.name), reduced32, ids)?;

    let umap2 = if config.umap.visualize {
        let seed = derive_seed(model_seed, UMAP2_SEED_TAG);
        Some(umap(original.view(), &config.umap.layout_for(2, seed))?.embedding)
    } else {
        None
    };

    let params_echo = echo(config, model_seed, shared.labels.n_classes(), &reduced);
    let mut spaces = Vec::new();
    let mut metrics = Vec::new();
    for (space, x) in [(Space::Original, &original), (Space::Umap300, &reduced64)] {
        let (result, ami, bma) = evaluate_space(shared, x, space, model_seed)?;
        metrics.push(ModelMetrics {
            model: entry.name.clone(),
            space,
            training: entry.training,
            is_bird_trained: entry.is_bird_trained,
            dim: x.ncols(),
            ami,
            balanced_macro_accuracy: bma,
            kmeans_inertia: result.clustering.inertia,
            kmeans_iterations: result.clustering.iterations,
            kmeans_warning: result.clustering.warning.clone(),
            params_echo: params_echo.clone(),
        });
        spaces.push(result);
    }
    Ok((ModelRun { model: entry.name.clone(), umap300, umap2, spaces }, metrics))
}

fn lookup<'r>(registry: &'r ModelRegistry, set: &EmbeddingSet) -> Result<&'r RegistryEntry> {
    let entry = registry.get(set.model_name()).ok_or_else(|| Error::RegistryMiss(set.model_name().to_owned()))?;
    if entry.dimension != set.dim() {
        return Err(Error::DimensionMismatch { expected: entry.dimension, found: set.dim() });
    }
    Ok(entry)
}

/// Runs every model on the current rayon pool; results are merged in config
/// order, so the report does not depend on the thread count.
pub fn evaluate(config: &EvalConfig) -> Result<EvaluationRun> {
    config.validate()?;
    let registry = io::load_registry(&config.registry)?;
    let sets = config.embeddings.iter().map(io::load_embeddings).collect::<Result<Vec<_>>>()?;
    let entries = sets.iter().map(|s| lookup(&registry, s)).collect::<Result<Vec<_>>>()?;
    let mut seen = HashSet::new();
    for entry in &entries {
        if !seen.insert(entry.name.as_str()) {
            return Err(Error::InvalidConfig(format!("model {:?} listed twice", entry.name)));
        }
    }

    let raw = io::load_annotations(&config.annotations)?;
    let curated = curate(&raw, config.curation.min_annotations, config.curation.drop_overlaps)?;
    let labels = curated.label_vector();
    let split = stratified_split(&labels, config.split, config.seed)?;

    let shared = Shared { config, raw: &raw, curated: &curated, labels: &labels, split: &split };
    let results: Vec<(ModelRun, Vec<ModelMetrics>)> = sets
        .par_iter()
        .zip(entries.par_iter())
        .map(|(set, entry)| evaluate_model(&shared, set, entry))
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(results.len());
    let mut metrics = Vec::new();
    let mut artifacts = Artifacts {
        curated_annotations: CURATED_FILE.into(),
        split: SPLIT_FILE.into(),
        reduced: BTreeMap::new(),
    };
    for (run, m) in results {
        let files = artifacts.reduced.entry(run.model.clone()).or_default();
        files.insert("umap300".into(), reduced_file(&run.model, "umap300"));
        if run.umap2.is_some() {
            files.insert("umap2".into(), reduced_file(&run.model, "umap2"));
        }
        metrics.extend(m);
        runs.push(run);
    }

    let categories = aggregate_by_category(&metrics, &registry)?;
    let dataset = DatasetSummary {
        n_events: curated.len(),
        class_names: labels.class_names().to_vec(),
        class_counts: curated.class_counts().into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        split_sizes: [Part::Train, Part::Val, Part::Test]
            .into_iter()
            .map(|p| (p.to_string(), split.indices(p).len()))
            .collect(),
    };
    let report = EvaluationReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        dataset,
        models: metrics,
        categories,
        artifacts,
    };
    Ok(EvaluationRun { report, curated, labels, split, models: runs })
}

pub fn run_evaluation(config: &EvalConfig) -> Result<EvaluationReport> {
    Ok(evaluate(config)?.report)
}

/// `per_model.csv`, `category_table.csv` and `category_table.md`.
pub fn write_tables(report: &EvaluationReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    write_per_model_csv(&report.models, out.join("per_model.csv"))?;
    write_category_csv(&report.categories, out.join("category_table.csv"))?;
    fs::write(out.join("category_table.md"), render_category_markdown(&report.categories))?;
    Ok(())
}

/// Per-model scatter plots and the gallery, from `(model, 2-d coords)` pairs.
pub fn write_plots(report: &EvaluationReport, layouts: &[(String, Array2<f64>)], labels: &LabelVector, out: &Path) -> Result<()> {
    if layouts.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(out)?;
    let mut panels = Vec::with_capacity(layouts.len());
    for (model, coords) in layouts {
        let ami = report.model_ami(model).ok_or_else(|| Error::RegistryMiss(model.clone()))?;
        fs::write(out.join(scatter_file(model)), render_scatter_svg(coords.view(), labels, model)?)?;
        panels.push(GalleryPanel { model, ami, coords: coords.view(), labels });
    }
    fs::write(out.join(GALLERY_FILE), render_gallery(&panels)?)?;
    Ok(())
}

/// Writes the report, tables, plots and all intermediate artifacts.
pub fn write_outputs(run: &EvaluationRun, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let report = &run.report;
    fs::write(out.join(REPORT_FILE), report.to_json()?)?;
    write_tables(report, out)?;

    io::save_annotations(&run.curated, out.join(CURATED_FILE))?;
    let ids: Vec<String> = run.curated.rows().iter().map(|e| e.event_id.clone()).collect();
    run.split.write_csv(&ids, out.join(SPLIT_FILE))?;

    let mut layouts = Vec::new();
    for m in &run.models {
        io::save_embeddings(&m.umap300, out.join(reduced_file(&m.model, "umap300")))?;
        if let Some(coords) = &m.umap2 {
            let set = EmbeddingSet::new(format!("{}+umap2", m.model), coords.mapv(|v| v as f32), ids.clone())?;
            io::save_embeddings(&set, out.join(reduced_file(&m.model, "umap2")))?;
            layouts.push((m.model.clone(), coords.clone()));
        }
        for s in &m.spaces {
            let tag = format!("{}_{}", file_stem(&m.model), s.space.as_str());
            s.clustering.write_csv(&ids, out.join(format!("clusters_{tag}.csv")))?;
            let test_ids: Vec<String> = s.test_rows.iter().map(|&i| ids[i].clone()).collect();
            let truth: Vec<usize> = s.test_rows.iter().map(|&i| run.labels.labels()[i]).collect();
            write_predictions_csv(
                &test_ids,
                &truth,
                &s.predictions,
                run.labels.class_names(),
                out.join(format!("predictions_{tag}.csv")),
            )?;
        }
    }
    write_plots(report, &layouts, &run.labels, out)
}

/// Rebuilds tables and plots from a saved `report.json` and the artifacts
/// next to it. Plots need the stored 2-d reductions; models without one are
/// skipped.
pub fn render_saved_report(report_path: &Path, out: &Path) -> Result<EvaluationReport> {
    let report = EvaluationReport::load(report_path)?;
    let dir = report_path.parent().unwrap_or(Path::new(""));
    write_tables(&report, out)?;

    let curated_path = dir.join(&report.artifacts.curated_annotations);
    if !curated_path.exists() {
        return Ok(report);
    }
    let curated = io::load_annotations(&curated_path)?;
    let labels = curated.label_vector();
    let mut layouts = Vec::new();
    for (model, files) in &report.artifacts.reduced {
        let Some(file) = files.get("umap2") else { continue };
        let set = io::load_embeddings(dir.join(file))?;
        let coords = align(&set, &curated, &curated)?;
        layouts.push((model.clone(), coords));
    }
    write_plots(&report, &layouts, &labels, out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AnnotationEvent;

    fn table(ids: &[&str]) -> AnnotationTable {
        AnnotationTable::new(
            ids.iter()
                .enumerate()
                .map(|(i, id)| AnnotationEvent {
                    event_id: id.to_string(),
                    file: "f".into(),
                    start_s: i as f64,
                    end_s: i as f64 + 0.5,
                    label: "a".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn align_reorders_to_annotation_order() {
        let set = EmbeddingSet::new("m", ndarray::array![[1.0f32], [2.0], [3.0]], vec!["c".into(), "a".into(), "b".into()])
            .unwrap();
        let raw = table(&["a", "b", "c"]);
        let x = align(&set, &raw, &raw).unwrap();
        assert_eq!(x.column(0).to_vec(), [2.0, 3.0, 1.0]);
    }

    #[test]
    fn dropped_events_may_keep_embeddings() {
        let set = EmbeddingSet::new("m", ndarray::array![[1.0f32], [2.0]], vec!["a".into(), "b".into()]).unwrap();
        let x = align(&set, &table(&["a", "b"]), &table(&["b"])).unwrap();
        assert_eq!(x.column(0).to_vec(), [2.0]);
    }

    #[test]
    fn missing_counts_both_directions() {
        let set = EmbeddingSet::new("m", ndarray::array![[1.0f32], [2.0]], vec!["a".into(), "zz".into()]).unwrap();
        let raw = table(&["a", "b", "c"]);
        assert!(matches!(align(&set, &raw, &raw), Err(Error::MissingEvents { count: 3 })));
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem("Google Whale/v1"), "Google_Whale_v1");
        assert_eq!(reduced_file("BirdNET", "umap2"), "BirdNET.umap2.bemb");
    }
}
