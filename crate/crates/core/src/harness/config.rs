use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{AmiNormalizer, KMeansParams};
use crate::curation::{SplitRatios, DEFAULT_MIN_ANNOTATIONS};
use crate::error::{Error, Result};
use crate::knn::{Metric, DEFAULT_K};
use crate::umap::LayoutParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub min_annotations: usize,
    pub drop_overlaps: bool,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self { min_annotations: DEFAULT_MIN_ANNOTATIONS, drop_overlaps: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapConfig {
    /// Target dimension of the reduced evaluation space.
    pub eval_dims: usize,
    /// Also compute a 2-d layout per model for the scatter plots.
    pub visualize: bool,
    #[serde(flatten)]
    pub layout: LayoutParams,
}

impl Default for UmapConfig {
    fn default() -> Self {
        Self { eval_dims: 300, visualize: true, layout: LayoutParams::default() }
    }
}

impl UmapConfig {
    pub fn layout_for(&self, n_components: usize, seed: u64) -> LayoutParams {
        LayoutParams { n_components, seed, ..self.layout.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub embeddings: Vec<PathBuf>,
    pub annotations: PathBuf,
    pub registry: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
    #[serde(default)]
    pub knn_metric: Metric,
    #[serde(default)]
    pub ami_normalizer: AmiNormalizer,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub umap: UmapConfig,
    #[serde(default)]
    pub kmeans: KMeansParams,
    #[serde(default)]
    pub curation: CurationConfig,
}

fn default_knn_k() -> usize {
    DEFAULT_K
}

impl EvalConfig {
    pub fn new(embeddings: Vec<PathBuf>, annotations: PathBuf, registry: PathBuf, seed: u64) -> Self {
        Self {
            embeddings,
            annotations,
            registry,
            seed,
            knn_k: DEFAULT_K,
            knn_metric: Metric::default(),
            ami_normalizer: AmiNormalizer::default(),
            split: SplitRatios::default(),
            umap: UmapConfig::default(),
            kmeans: KMeansParams::default(),
            curation: CurationConfig::default(),
        }
    }

    /// Parses a JSON config; relative paths are taken relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config: EvalConfig = serde_json::from_slice(&fs::read(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.embeddings.iter_mut().for_each(resolve);
        resolve(&mut config.annotations);
        resolve(&mut config.registry);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embeddings.is_empty() {
            return Err(Error::InvalidConfig("at least one embedding file is required".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidConfig("knn_k must be positive".into()));
        }
        if self.umap.eval_dims == 0 {
            return Err(Error::InvalidConfig("umap.eval_dims must be positive".into()));
        }
        self.split.validate()
    }
}
