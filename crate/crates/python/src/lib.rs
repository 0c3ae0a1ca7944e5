//! Python bindings: datasets, the propagation operator, metrics, splits and training.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lgae::data::{generate_synthetic, load_dataset, planted_partition, save_dataset};
use lgae::experiment::RunConfig;
use lgae::linkpred::{split_edges, EdgeSplit};
use lgae::seed::{derive_seed, INIT, NOISE, SPLIT};
use lgae::training::{train as train_model, TrainConfig, TrainInputs};
use lgae::{DenseMatrix, Error, GraphDataset, ModelConfig, Variant};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Shape { .. } | Error::MalformedDataset(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn variant(name: &str) -> PyResult<Variant> {
    name.parse().map_err(py_err)
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

#[pyclass(name = "Graph", module = "lgae_py", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: GraphDataset,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (num_nodes, edges, features=None, name="graph"))]
    fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Option<Vec<Vec<f64>>>,
        name: &str,
    ) -> PyResult<Self> {
        let features = features
            .map(|f| DenseMatrix::from_rows(&f))
            .transpose()
            .map_err(py_err)?;
        let inner = GraphDataset::new(name, num_nodes, edges, features).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Loads a dataset directory (edges.txt, optional features.txt, manifest.txt).
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_dataset(&dir).map_err(py_err)?,
        })
    }

    /// `kind` is one of erdos_renyi, path, star, complete.
    #[staticmethod]
    #[pyo3(signature = (kind, n, p=0.1, feature_dim=0, seed=0))]
    fn synthetic(kind: &str, n: usize, p: f64, feature_dim: usize, seed: u64) -> PyResult<Self> {
        let kind = kind.parse().map_err(py_err)?;
        Ok(Self {
            inner: generate_synthetic(kind, n, p, feature_dim, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, communities, p_in, p_out, feature_dim, seed=0))]
    fn planted(
        n: usize,
        communities: usize,
        p_in: f64,
        p_out: f64,
        feature_dim: usize,
        seed: u64,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: planted_partition(n, communities, p_in, p_out, feature_dim, seed)
                .map_err(py_err)?,
        })
    }

    /// Writes the canonical files and manifest; returns the manifest text.
    fn save(&self, dir: PathBuf) -> PyResult<String> {
        Ok(save_dataset(&self.inner, &dir).map_err(py_err)?.to_text())
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn features(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.features().map(rows)
    }

    /// Dense `D̃^{-1/2}(A + I)D̃^{-1/2}`.
    fn operator(&self) -> PyResult<Vec<Vec<f64>>> {
        let a = lgae::adjacency_from_edges(&self.inner).map_err(py_err)?;
        Ok(rows(&lgae::normalized_operator(&a).map_err(py_err)?.to_dense()))
    }

    /// `S^k X`, or `S^k` itself when `featureless`.
    #[pyo3(signature = (k, featureless=false))]
    fn propagate(&self, k: usize, featureless: bool) -> PyResult<Vec<Vec<f64>>> {
        let a = lgae::adjacency_from_edges(&self.inner).map_err(py_err)?;
        let s = lgae::normalized_operator(&a).map_err(py_err)?;
        let x = if featureless {
            lgae::identity_features(self.inner.num_nodes())
        } else {
            self.inner
                .features()
                .cloned()
                .ok_or_else(|| PyValueError::new_err("graph has no features"))?
        };
        Ok(rows(&lgae::propagate(&s, &x, k).map_err(py_err)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(name={:?}, num_nodes={}, num_edges={}, feature_dim={})",
            self.inner.name,
            self.inner.num_nodes(),
            self.inner.num_edges(),
            self.inner.feature_dim()
        )
    }
}

#[pyclass(name = "Split", module = "lgae_py", skip_from_py_object)]
#[derive(Clone)]
struct PySplit {
    inner: EdgeSplit,
}

#[pymethods]
impl PySplit {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn train_edges(&self) -> Vec<(usize, usize)> {
        self.inner.train_edges.clone()
    }

    #[getter]
    fn val_edges(&self) -> Vec<(usize, usize)> {
        self.inner.val_edges.clone()
    }

    #[getter]
    fn val_negatives(&self) -> Vec<(usize, usize)> {
        self.inner.val_negatives.clone()
    }

    #[getter]
    fn test_edges(&self) -> Vec<(usize, usize)> {
        self.inner.test_edges.clone()
    }

    #[getter]
    fn test_negatives(&self) -> Vec<(usize, usize)> {
        self.inner.test_negatives.clone()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// Holds out `val_frac` and `test_frac` of the edges with matching sampled non-edges.
#[pyfunction]
#[pyo3(signature = (graph, val_frac=0.05, test_frac=0.10, seed=0))]
fn split(graph: &PyGraph, val_frac: f64, test_frac: f64, seed: u64) -> PyResult<PySplit> {
    Ok(PySplit {
        inner: split_edges(&graph.inner, val_frac, test_frac, seed).map_err(py_err)?,
    })
}

#[pyfunction]
fn auc(pos: Vec<f64>, neg: Vec<f64>) -> PyResult<f64> {
    lgae::linkpred::auc(&pos, &neg).map_err(py_err)
}

#[pyfunction]
fn average_precision(pos: Vec<f64>, neg: Vec<f64>) -> PyResult<f64> {
    lgae::linkpred::average_precision(&pos, &neg).map_err(py_err)
}

#[pyfunction]
#[pyo3(name = "derive_seed")]
fn py_derive_seed(master: u64, label: &str) -> u64 {
    derive_seed(master, label)
}

/// Trainable parameters of `variant` with the default architecture.
#[pyfunction]
fn param_count(variant_name: &str, input_dim: usize, k: usize) -> PyResult<usize> {
    let cfg = ModelConfig::new(variant(variant_name)?, input_dim, k, 0).map_err(py_err)?;
    lgae::models::param_count(&cfg).map_err(py_err)
}

#[pyclass(name = "TrainResult", module = "lgae_py")]
struct PyTrainResult {
    #[pyo3(get)]
    report_json: String,
    #[pyo3(get)]
    test_auc: Option<f64>,
    #[pyo3(get)]
    test_ap: Option<f64>,
    #[pyo3(get)]
    embedding: Vec<Vec<f64>>,
}

/// Trains one model. Split, init and noise seeds are derived from
/// `split_seed` and `seed` the same way the CLI derives them.
#[pyfunction]
#[pyo3(signature = (
    graph, variant="lgae", k=2, featureless=false, epochs=200, lr=0.01,
    seed=0, split_seed=0, val_frac=0.05, test_frac=0.10
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    graph: &PyGraph,
    variant: &str,
    k: usize,
    featureless: bool,
    epochs: usize,
    lr: f64,
    seed: u64,
    split_seed: u64,
    val_frac: f64,
    test_frac: f64,
) -> PyResult<PyTrainResult> {
    let v = self::variant(variant)?;
    let dataset = graph.inner.clone();
    let outcome = py
        .detach(move || -> lgae::Result<_> {
            let split = split_edges(&dataset, val_frac, test_frac, derive_seed(split_seed, SPLIT))?;
            let inputs = TrainInputs::prepare(&dataset, &split, v, k, featureless, None)?;
            let model = inputs.model_config(derive_seed(seed, INIT))?;
            let cfg = TrainConfig {
                epochs,
                learning_rate: lr,
                seed: derive_seed(seed, NOISE),
                ..TrainConfig::default()
            };
            let outcome = train_model(&inputs, &model, &cfg)?;
            let embedding = inputs.embed(&outcome.params)?;
            Ok((outcome.report, embedding))
        })
        .map_err(py_err)?;
    let (report, embedding) = outcome;
    Ok(PyTrainResult {
        report_json: report.to_json().map_err(py_err)?,
        test_auc: report.final_test.as_ref().map(|m| m.auc),
        test_ap: report.final_test.as_ref().map(|m| m.ap),
        embedding: rows(&embedding),
    })
}

/// Runs the full multi-seed experiment the `train` subcommand runs. `options`
/// uses the config-file keys (dataset, variant, k, seeds, out, ...). Returns
/// the aggregate as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, options: Vec<(String, String)>) -> PyResult<String> {
    let mut cfg = RunConfig::default();
    for (key, value) in &options {
        cfg.set(key, value).map_err(py_err)?;
    }
    let aggregate = cfg.out.join("aggregate.json");
    py.detach(move || lgae::experiment::run_train(&cfg))
        .map_err(py_err)?;
    std::fs::read_to_string(aggregate).map_err(|e| py_err(e.into()))
}

#[pymodule]
fn lgae_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(py_derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
