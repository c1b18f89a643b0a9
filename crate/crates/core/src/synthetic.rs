//! Seeded synthetic datasets: Gaussian blobs and a three-model "zoo" with a
//! known difficulty ordering (clean > noisy > label-shuffled).

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::EvalConfig;
use crate::io;
use crate::model::{AnnotationEvent, AnnotationTable, EmbeddingSet, ModelRegistry, RegistryEntry, Training};
use crate::rng;

/// `n_per` points around each row of `centers` with isotropic noise `sigma`.
/// Points are grouped by blob; labels are blob indices.
pub fn gaussian_blobs(centers: &Array2<f64>, n_per: usize, sigma: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let (k, d) = centers.dim();
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut rng = rng::stream(seed, 0);
    let x = Array2::from_shape_fn((k * n_per, d), |(i, j)| centers[[i / n_per, j]] + normal.sample(&mut rng));
    let labels = (0..k * n_per).map(|i| i / n_per).collect();
    (x, labels)
}

/// `k` centers in `d` dimensions: scaled unit vectors `scale·e_c`, so any
/// two are `scale·√2` apart. Requires `k <= d`.
pub fn orthogonal_centers(k: usize, d: usize, scale: f64) -> Array2<f64> {
    assert!(k <= d, "need at least as many dimensions as centers");
    Array2::from_shape_fn((k, d), |(c, j)| if c == j { scale } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Noise on the one-hot class features of the clean model.
    pub clean_noise: f64,
    /// Extra noise added for the noisy model.
    pub strong_noise: f64,
    pub seed: u64,
}

impl Default for ZooSpec {
    fn default() -> Self {
        Self { n_classes: 4, per_class: 160, dim: 16, clean_noise: 0.05, strong_noise: 0.5, seed: 7 }
    }
}

pub const ZOO_MODELS: [&str; 3] = ["clean", "noisy", "shuffled"];

fn zoo_registry(dim: usize) -> ModelRegistry {
    ModelRegistry::new(vec![
        RegistryEntry::new("clean", "cln", Training::Supl, dim, vec!["birds".into()]),
        RegistryEntry::new("noisy", "nsy", Training::Ssl, dim, vec!["general".into()]),
        RegistryEntry::new("shuffled", "shf", Training::SslFt, dim, vec!["general".into()]),
    ])
    .expect("static registry is valid")
}

fn zoo_annotations(spec: &ZooSpec) -> AnnotationTable {
    let rows = (0..spec.n_classes * spec.per_class)
        .map(|i| {
            let slot = (i % 50) as f64;
            AnnotationEvent {
                event_id: format!("ev{i:05}"),
                file: format!("rec_{:03}.wav", i / 50),
                start_s: 2.0 * slot,
                end_s: 2.0 * slot + 1.0,
                label: format!("class_{}", i % spec.n_classes),
            }
        })
        .collect();
    AnnotationTable::new(rows).expect("generated events are valid")
}

/// Writes annotations, a registry, one BEMB file per zoo model and a
/// `config.json`, and returns the loaded config.
pub fn write_zoo(dir: &Path, spec: &ZooSpec) -> Result<EvalConfig> {
    fs::create_dir_all(dir)?;
    let annotations = zoo_annotations(spec);
    let n = annotations.len();
    let labels: Vec<usize> = (0..n).map(|i| i % spec.n_classes).collect();
    let ids: Vec<String> = annotations.rows().iter().map(|e| e.event_id.clone()).collect();

    let small = Normal::new(0.0, spec.clean_noise).expect("valid noise");
    let large = Normal::new(0.0, spec.strong_noise).expect("valid noise");
    let mut rng = rng::stream(spec.seed, 1);
    let clean = Array2::from_shape_fn((n, spec.dim), |(i, j)| {
        f64::from(u8::from(j == labels[i] % spec.dim)) + small.sample(&mut rng)
    });
    let noisy = clean.mapv(|v| v + large.sample(&mut rng));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let shuffled = clean.select(ndarray::Axis(0), &order);

    let mut paths = Vec::new();
    for (name, x) in ZOO_MODELS.iter().zip([clean, noisy, shuffled]) {
        let path = dir.join(format!("{name}.bemb"));
        io::save_embeddings(&EmbeddingSet::new(*name, x.mapv(|v| v as f32), ids.clone())?, &path)?;
        paths.push(PathBuf::from(format!("{name}.bemb")));
    }
    io::save_annotations(&annotations, dir.join("annotations.csv"))?;
    io::save_registry(&zoo_registry(spec.dim), dir.join("registry.json"))?;

    let mut config = EvalConfig::new(paths, "annotations.csv".into(), "registry.json".into(), spec.seed);
    config.curation.min_annotations = spec.per_class.saturating_sub(1).min(150);
    let config_path = dir.join("config.json");
    fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
    EvalConfig::load(&config_path)
}
