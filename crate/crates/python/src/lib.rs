//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use embeval::cluster::{self, AmiNormalizer, KMeansParams};
use embeval::curation::{self, Part, SplitRatios};
use embeval::knn::{self, Metric};
use embeval::umap::{self as reduction, LayoutParams};
use embeval::{harness, io, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::IoFailure(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("all rows must have the same length"));
    }
    Ok(Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).expect("checked shape"))
}

fn rows<T: Copy>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn normalizer(name: &str) -> PyResult<AmiNormalizer> {
    match name {
        "arithmetic" => Ok(AmiNormalizer::Arithmetic),
        "max" => Ok(AmiNormalizer::Max),
        _ => Err(PyValueError::new_err(format!("unknown normalizer {name:?}"))),
    }
}

fn metric(name: &str) -> PyResult<Metric> {
    match name {
        "euclidean" => Ok(Metric::Euclidean),
        "cosine" => Ok(Metric::Cosine),
        _ => Err(PyValueError::new_err(format!("unknown metric {name:?}"))),
    }
}

#[pyfunction]
#[pyo3(signature = (labels_true, labels_pred, normalizer = "arithmetic"))]
fn adjusted_mutual_info(labels_true: Vec<usize>, labels_pred: Vec<usize>, normalizer: &str) -> PyResult<f64> {
    cluster::adjusted_mutual_info_with(&labels_true, &labels_pred, self::normalizer(normalizer)?).map_err(to_py)
}

#[pyfunction]
fn mutual_information(labels_true: Vec<usize>, labels_pred: Vec<usize>) -> PyResult<f64> {
    let ct = cluster::build_contingency(&labels_true, &labels_pred).map_err(to_py)?;
    Ok(cluster::mutual_information(&ct))
}

#[pyfunction]
fn expected_mutual_information(labels_true: Vec<usize>, labels_pred: Vec<usize>) -> PyResult<f64> {
    let ct = cluster::build_contingency(&labels_true, &labels_pred).map_err(to_py)?;
    Ok(cluster::expected_mutual_information(&ct))
}

#[pyclass(name = "Clustering", frozen, get_all)]
struct PyClustering {
    assignments: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    iterations: usize,
    seed: u64,
    warning: Option<String>,
}

#[pyfunction]
#[pyo3(signature = (x, k, seed = 0, n_init = 10, max_iter = 300, tol = 1e-4))]
fn kmeans(x: Vec<Vec<f64>>, k: usize, seed: u64, n_init: usize, max_iter: usize, tol: f64) -> PyResult<PyClustering> {
    let x = matrix(x)?;
    let c = cluster::kmeans_fit(x.view(), k, seed, &KMeansParams { n_init, max_iter, tol }).map_err(to_py)?;
    Ok(PyClustering {
        centroids: rows(&c.centroids),
        assignments: c.assignments,
        inertia: c.inertia,
        iterations: c.iterations,
        seed: c.seed,
        warning: c.warning,
    })
}

#[pyfunction]
#[pyo3(signature = (train_x, train_y, query_x, k = knn::DEFAULT_K, metric = "euclidean"))]
fn knn_predict(
    train_x: Vec<Vec<f64>>,
    train_y: Vec<usize>,
    query_x: Vec<Vec<f64>>,
    k: usize,
    metric: &str,
) -> PyResult<Vec<usize>> {
    let (train, query) = (matrix(train_x)?, matrix(query_x)?);
    knn::knn_predict(train.view(), &train_y, query.view(), k, self::metric(metric)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (y_true, y_pred, n_classes = None))]
fn balanced_macro_accuracy(y_true: Vec<usize>, y_pred: Vec<usize>, n_classes: Option<usize>) -> PyResult<f64> {
    let n = n_classes.unwrap_or_else(|| y_true.iter().chain(&y_pred).max().map_or(0, |m| m + 1));
    let cm = knn::confusion(&y_true, &y_pred, n).map_err(to_py)?;
    knn::balanced_macro_accuracy(&cm).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, n_components = 2, n_neighbors = 15, min_dist = 0.1, spread = 1.0, n_epochs = None, seed = 0))]
fn umap(
    x: Vec<Vec<f64>>,
    n_components: usize,
    n_neighbors: usize,
    min_dist: f64,
    spread: f64,
    n_epochs: Option<usize>,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let x = matrix(x)?;
    let params = LayoutParams { n_neighbors, min_dist, spread, n_epochs, ..LayoutParams::with_components(n_components, seed) };
    let out = reduction::umap(x.view(), &params).map_err(to_py)?;
    Ok(rows(&out.embedding))
}

/// Returns `(a, b, rmse)` of the fitted low-dimensional similarity curve.
#[pyfunction]
#[pyo3(signature = (min_dist, spread = 1.0))]
fn fit_ab(min_dist: f64, spread: f64) -> PyResult<(f64, f64, f64)> {
    let f = reduction::fit_ab(min_dist, spread).map_err(to_py)?;
    Ok((f.a, f.b, f.rmse))
}

/// One of `"train"`, `"val"`, `"test"` per label.
#[pyfunction]
#[pyo3(signature = (labels, seed = 0, ratios = (0.65, 0.15, 0.20)))]
fn stratified_split(labels: Vec<usize>, seed: u64, ratios: (f64, f64, f64)) -> PyResult<Vec<&'static str>> {
    let labels = embeval::LabelVector::from_indices(labels);
    let ratios = SplitRatios::new(ratios.0, ratios.1, ratios.2).map_err(to_py)?;
    let split = curation::stratified_split(&labels, ratios, seed).map_err(to_py)?;
    Ok(split
        .assignment
        .iter()
        .map(|p| match p {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        })
        .collect())
}

#[pyclass(name = "AnnotationTable", frozen)]
struct PyAnnotationTable {
    inner: embeval::AnnotationTable,
}

#[pymethods]
impl PyAnnotationTable {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: io::load_annotations(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_annotations(&self.inner, path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(event_id, file, start_s, end_s, label)` tuples.
    fn rows(&self) -> Vec<(String, String, f64, f64, String)> {
        self.inner
            .rows()
            .iter()
            .map(|e| (e.event_id.clone(), e.file.clone(), e.start_s, e.end_s, e.label.clone()))
            .collect()
    }

    /// `(labels, class_names)` with classes in sorted order.
    fn labels(&self) -> (Vec<usize>, Vec<String>) {
        let lv = self.inner.label_vector();
        (lv.labels().to_vec(), lv.class_names().to_vec())
    }

    #[pyo3(signature = (threshold = curation::DEFAULT_MIN_ANNOTATIONS))]
    fn filter_min_annotations(&self, threshold: usize) -> PyResult<Self> {
        Ok(Self { inner: curation::filter_min_annotations(&self.inner, threshold).map_err(to_py)? })
    }

    fn remove_overlaps(&self) -> Self {
        Self { inner: curation::remove_overlaps(&self.inner) }
    }
}

#[pyclass(name = "EmbeddingSet", frozen)]
struct PyEmbeddingSet {
    inner: embeval::EmbeddingSet,
}

#[pymethods]
impl PyEmbeddingSet {
    #[new]
    fn new(model_name: String, data: Vec<Vec<f64>>, event_ids: Vec<String>) -> PyResult<Self> {
        let data = matrix(data)?.mapv(|v| v as f32);
        Ok(Self { inner: embeval::EmbeddingSet::new(model_name, data, event_ids).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: io::load_embeddings(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_embeddings(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    #[getter]
    fn event_ids(&self) -> Vec<String> {
        self.inner.event_ids().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.to_f64())
    }
}

/// Runs the full protocol from a JSON config; writes all outputs when
/// `out_dir` is given. Returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir = None, seed = None))]
fn run_evaluation(py: Python<'_>, config_path: PathBuf, out_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<String> {
    let mut config = harness::EvalConfig::load(&config_path).map_err(to_py)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    py.detach(|| {
        let run = harness::evaluate(&config)?;
        if let Some(out) = &out_dir {
            harness::write_outputs(&run, out)?;
        }
        run.report.to_json()
    })
    .map_err(to_py)
}

#[pymodule]
fn embeval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(adjusted_mutual_info, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(expected_mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(knn_predict, m)?)?;
    m.add_function(wrap_pyfunction!(balanced_macro_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(umap, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ab, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(run_evaluation, m)?)?;
    m.add_class::<PyClustering>()?;
    m.add_class::<PyAnnotationTable>()?;
    m.add_class::<PyEmbeddingSet>()?;
    Ok(())
}
