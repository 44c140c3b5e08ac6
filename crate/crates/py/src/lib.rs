//! Python bindings: configs, synthetic data, models, training and reports.

use std::path::PathBuf;

use blm_probe::data::{
    generate_synthetic as generate, manifest_path, split_dataset, store_path_for, write_manifest, write_store,
    DataType, CONTEXT_LEN,
};
use blm_probe::harness::{
    error_analysis as errors_of, evaluate as evaluate_model, learning_curve as curve, multi_run as run_seeds, prepare,
    sweep_reshape as sweep, train as train_model, Corpus as CoreCorpus, RunReport, TrainConfig,
};
use blm_probe::model::{
    build_model, load_checkpoint, parameter_report as report_of, save_checkpoint, Model as CoreModel, ModelKind,
    ModelSpec, Reshape, EMBED_DIM,
};
use blm_probe::tensor::Tensor;
use blm_probe::Error;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(blm_probe, BlmError, PyException, "Base class of every blm_probe error.");
create_exception!(blm_probe, ConfigError, BlmError, "Invalid configuration or arguments.");
create_exception!(blm_probe, DataError, BlmError, "Missing, malformed or inconsistent data files.");
create_exception!(blm_probe, NumericError, BlmError, "Non-finite values or shape mismatches.");

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        2 => ConfigError::new_err(msg),
        3 => DataError::new_err(msg),
        _ => NumericError::new_err(msg),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn spec_for(model: &str, reshape: Option<&str>) -> PyResult<ModelSpec> {
    let kind: ModelKind = parse(model)?;
    let reshape = match reshape {
        Some(r) => Some(parse::<Reshape>(r)?),
        None => kind.is_2d().then_some(Reshape { rows: 48, cols: 16 }),
    };
    ModelSpec::new(kind, reshape).map_err(err)
}

/// Settings of a training run. Unset arguments keep the defaults.
#[pyclass(name = "TrainConfig", module = "blm_probe", from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (
        model, reshape=None, *, epochs=None, lr=None, batch=None, seeds=None,
        train_type=None, test_type=None, restricted=false, train_size=None, split_seed=None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        model: &str,
        reshape: Option<&str>,
        epochs: Option<usize>,
        lr: Option<f64>,
        batch: Option<usize>,
        seeds: Option<Vec<u64>>,
        train_type: Option<&str>,
        test_type: Option<&str>,
        restricted: bool,
        train_size: Option<usize>,
        split_seed: Option<u64>,
    ) -> PyResult<Self> {
        let spec = spec_for(model, reshape)?;
        let mut c = TrainConfig::new(spec.kind);
        c.reshape = spec.reshape;
        c.epochs = epochs;
        c.lr = lr.unwrap_or(c.lr);
        c.batch = batch.unwrap_or(c.batch);
        c.seeds = seeds.unwrap_or(c.seeds);
        if let Some(t) = train_type {
            c.train_type = parse(t)?;
        }
        if let Some(t) = test_type {
            c.test_type = parse(t)?;
        }
        c.restricted = restricted;
        c.train_size = train_size;
        c.split_seed = split_seed.unwrap_or(c.split_seed);
        c.validate().map_err(err)?;
        Ok(PyTrainConfig { inner: c })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyTrainConfig { inner: TrainConfig::from_toml(text).map_err(err)? })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.inner.model.name()
    }

    #[getter]
    fn reshape(&self) -> Option<String> {
        self.inner.reshape.map(|r| r.to_string())
    }

    /// Epochs after the policy is applied.
    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs()
    }

    #[getter]
    fn lr(&self) -> f64 {
        self.inner.lr
    }

    #[getter]
    fn batch(&self) -> usize {
        self.inner.batch
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[getter]
    fn train_type(&self) -> &'static str {
        self.inner.train_type.name()
    }

    #[getter]
    fn test_type(&self) -> &'static str {
        self.inner.test_type.name()
    }

    /// Train+dev budget, if any.
    #[getter]
    fn budget(&self) -> Option<usize> {
        self.inner.budget()
    }

    fn __repr__(&self) -> String {
        format!("TrainConfig({})", blm_probe::harness::run_stem(&self.inner))
    }
}

/// Episodes and embeddings for each data type.
#[pyclass(name = "Corpus", module = "blm_probe", frozen)]
struct PyCorpus {
    inner: CoreCorpus,
}

#[pymethods]
impl PyCorpus {
    /// Read every `type_*.jsonl` manifest and its store from a directory.
    #[staticmethod]
    fn load(py: Python<'_>, dir: PathBuf) -> PyResult<Self> {
        let inner = py.detach(|| CoreCorpus::load(&dir)).map_err(err)?;
        Ok(PyCorpus { inner })
    }

    /// Synthetic data of every type, `episodes` each.
    #[staticmethod]
    #[pyo3(signature = (episodes, seed=0))]
    fn synthetic(py: Python<'_>, episodes: usize, seed: u64) -> PyResult<Self> {
        let inner = py.detach(|| CoreCorpus::synthetic(seed, episodes)).map_err(err)?;
        Ok(PyCorpus { inner })
    }

    fn types(&self) -> Vec<&'static str> {
        self.inner.types().into_iter().map(DataType::name).collect()
    }

    fn episodes(&self, data_type: &str) -> PyResult<usize> {
        Ok(self.inner.get(parse(data_type)?).map_err(err)?.episodes.len())
    }
}

/// A model with its parameters.
#[pyclass(name = "Model", module = "blm_probe", frozen)]
struct PyModel {
    inner: CoreModel<f32>,
    config: String,
}

#[pymethods]
impl PyModel {
    /// Freshly initialised model; 2D kinds default to the 48x16 grid.
    #[staticmethod]
    #[pyo3(signature = (model, reshape=None, seed=0))]
    fn build(model: &str, reshape: Option<&str>, seed: u64) -> PyResult<Self> {
        let spec = spec_for(model, reshape)?;
        let inner = build_model(&spec, seed).map_err(err)?;
        let mut c = TrainConfig::new(spec.kind);
        c.reshape = spec.reshape;
        Ok(PyModel { inner, config: c.to_toml() })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ck = load_checkpoint(&path).map_err(err)?;
        Ok(PyModel { inner: ck.model, config: ck.config })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&path, &self.inner, &self.config).map_err(err)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.spec().label()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// Configuration the model was trained with, as TOML.
    #[getter]
    fn config(&self) -> &str {
        &self.config
    }

    /// Predicted answer embeddings for `[B][7][768]` nested lists.
    fn predict(&self, py: Python<'_>, context: Vec<Vec<Vec<f32>>>) -> PyResult<Vec<Vec<f32>>> {
        let batch = context.len();
        let mut flat = Vec::with_capacity(batch * CONTEXT_LEN * EMBED_DIM);
        for (i, ep) in context.iter().enumerate() {
            if ep.len() != CONTEXT_LEN || ep.iter().any(|row| row.len() != EMBED_DIM) {
                return Err(ConfigError::new_err(format!("episode {i} is not {CONTEXT_LEN} x {EMBED_DIM}")));
            }
            flat.extend(ep.iter().flatten());
        }
        let x = Tensor::new(vec![batch, CONTEXT_LEN, EMBED_DIM], flat).map_err(err)?;
        let out = py.detach(|| self.inner.predict(x)).map_err(err)?;
        Ok(out.data().chunks(EMBED_DIM).map(<[f32]>::to_vec).collect())
    }

    /// Score on the test split of one data type.
    #[pyo3(signature = (corpus, data_type="I", split_seed=0))]
    fn evaluate(&self, py: Python<'_>, corpus: &PyCorpus, data_type: &str, split_seed: u64) -> PyResult<Py<PyAny>> {
        let set = corpus.inner.get(parse(data_type)?).map_err(err)?;
        let e = py
            .detach(|| {
                let split = split_dataset(&set.episodes, split_seed)?;
                evaluate_model(&self.inner, &split.test, &set.store)
            })
            .map_err(err)?;
        let text = serde_json::json!({ "f1": e.f1(), "n": e.n, "errors": e.error_fractions() }).to_string();
        json_to_py(py, &text)
    }

    fn __repr__(&self) -> String {
        format!("Model({}, {} params)", self.inner.spec().label(), self.inner.param_count())
    }
}

/// Write synthetic manifests and stores to `data_dir`; returns the manifest paths.
#[pyfunction]
#[pyo3(signature = (data_dir, episodes, seed=0, types=None))]
fn generate_synthetic(
    py: Python<'_>,
    data_dir: PathBuf,
    episodes: usize,
    seed: u64,
    types: Option<Vec<String>>,
) -> PyResult<Vec<PathBuf>> {
    let types: Vec<DataType> = match types {
        Some(ts) => ts.iter().map(|t| parse(t)).collect::<PyResult<_>>()?,
        None => DataType::ALL.to_vec(),
    };
    py.detach(|| {
        std::fs::create_dir_all(&data_dir).map_err(|e| Error::io(&data_dir, e))?;
        types
            .into_iter()
            .map(|t| {
                let (eps, store) = generate(seed, episodes, t)?;
                let m = manifest_path(&data_dir, t);
                write_manifest(&m, &eps)?;
                write_store(&store_path_for(&m), &store)?;
                Ok(m)
            })
            .collect::<blm_probe::Result<Vec<_>>>()
    })
    .map_err(err)
}

/// Layer table of a model: `{"total": int, "rows": [{label, depth, output_shape, params}]}`.
#[pyfunction]
#[pyo3(signature = (model, reshape=None))]
fn parameter_report(py: Python<'_>, model: &str, reshape: Option<&str>) -> PyResult<Py<PyAny>> {
    let r = report_of(&spec_for(model, reshape)?).map_err(err)?;
    let text = serde_json::json!({ "total": r.total, "rows": r.rows }).to_string();
    json_to_py(py, &text)
}

/// The layer table rendered as text, shapes shown for `batch`.
#[pyfunction]
#[pyo3(signature = (model, reshape=None, batch=100))]
fn inspect_model(model: &str, reshape: Option<&str>, batch: usize) -> PyResult<String> {
    Ok(report_of(&spec_for(model, reshape)?).map_err(err)?.render(batch))
}

/// Train one seed; returns the best-dev model and the per-epoch log.
#[pyfunction]
fn train(py: Python<'_>, config: &PyTrainConfig, corpus: &PyCorpus, seed: u64) -> PyResult<(PyModel, Py<PyAny>)> {
    let c = &config.inner;
    let outcome = py
        .detach(|| {
            let p = prepare(c, &corpus.inner)?;
            train_model(c, seed, &p.split, p.train_store)
        })
        .map_err(err)?;
    let log = serde_json::to_string(&outcome.log).expect("epoch logs serialize");
    Ok((PyModel { inner: outcome.model, config: c.to_toml() }, json_to_py(py, &log)?))
}

/// Train and test every seed of the config; returns the report as a dict.
#[pyfunction]
fn multi_run(py: Python<'_>, config: &PyTrainConfig, corpus: &PyCorpus) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| run_seeds(&config.inner, &corpus.inner)).map_err(err)?;
    json_to_py(py, &r.to_json())
}

fn pairs_of(corpus: &CoreCorpus, pairs: Option<Vec<(String, String)>>) -> PyResult<Vec<(DataType, DataType)>> {
    match pairs {
        Some(ps) => ps.iter().map(|(a, b)| Ok((parse(a)?, parse(b)?))).collect(),
        None => Ok(corpus.pairs()),
    }
}

/// F1 for every grid and (train, test) pair, as CSV.
#[pyfunction]
#[pyo3(signature = (config, corpus, pairs=None))]
fn sweep_reshape(
    py: Python<'_>,
    config: &PyTrainConfig,
    corpus: &PyCorpus,
    pairs: Option<Vec<(String, String)>>,
) -> PyResult<String> {
    let pairs = pairs_of(&corpus.inner, pairs)?;
    let t = py.detach(|| sweep(&config.inner, &corpus.inner, &pairs)).map_err(err)?;
    Ok(t.to_csv())
}

/// Mean and std F1 per train+dev budget, as CSV.
#[pyfunction]
#[pyo3(signature = (config, corpus, sizes, pairs=None))]
fn learning_curve(
    py: Python<'_>,
    config: &PyTrainConfig,
    corpus: &PyCorpus,
    sizes: Vec<usize>,
    pairs: Option<Vec<(String, String)>>,
) -> PyResult<String> {
    let pairs = pairs_of(&corpus.inner, pairs)?;
    let c = py.detach(|| curve(&config.inner, &corpus.inner, &pairs, &sizes)).map_err(err)?;
    Ok(c.to_csv())
}

/// Error-type table over reports (dicts from `multi_run`) sharing a test set, as CSV.
#[pyfunction]
fn error_analysis(py: Python<'_>, reports: Vec<Bound<'_, PyAny>>) -> PyResult<String> {
    let json = py.import("json")?;
    let reports = reports
        .iter()
        .map(|r| {
            let text: String = json.call_method1("dumps", (r,))?.extract()?;
            RunReport::from_json(&text).map_err(err)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(errors_of(&reports).map_err(err)?.to_csv())
}

#[pymodule]
#[pyo3(name = "blm_probe")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("BlmError", py.get_type::<BlmError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericError", py.get_type::<NumericError>())?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(parameter_report, m)?)?;
    m.add_function(wrap_pyfunction!(inspect_model, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(multi_run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_reshape, m)?)?;
    m.add_function(wrap_pyfunction!(learning_curve, m)?)?;
    m.add_function(wrap_pyfunction!(error_analysis, m)?)?;
    Ok(())
}
