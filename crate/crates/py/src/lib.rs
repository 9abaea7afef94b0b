//! Python bindings. Vectors are passed either as a dense list of floats or
//! as a `{index: value}` dict with 1-based indices.

use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use avm::data::{Dataset as CoreDataset, Task};
use avm::harness::{run_batch, run_stream, MetricsTrace, RunOptions};
use avm::{
    Algorithm, AvmError, Coverage as CoreCoverage, Geometry, KernelSpec, Learner as CoreLearner,
    LearnerConfig, LossKind, LossSpec, MulticlassLearner as CoreMulticlass, OutputMode,
    SnapshotHeader, SparseVector, YMax,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn to_py(e: AvmError) -> PyErr {
    match e {
        AvmError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn vector(obj: &Bound<'_, PyAny>) -> PyResult<Arc<SparseVector>> {
    let v = if let Ok(d) = obj.cast::<PyDict>() {
        let mut pairs = Vec::with_capacity(d.len());
        for (k, v) in d.iter() {
            pairs.push((k.extract::<u32>()?, v.extract::<f64>()?));
        }
        pairs.sort_by_key(|p| p.0);
        SparseVector::from_pairs(&pairs).map_err(to_py)?
    } else {
        SparseVector::from_dense(&obj.extract::<Vec<f64>>()?)
    };
    Ok(Arc::new(v))
}

fn vector_dict<'py>(py: Python<'py>, v: &SparseVector) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (i, x) in v.iter() {
        d.set_item(i, x)?;
    }
    Ok(d)
}

#[allow(clippy::too_many_arguments)]
fn config(
    gamma: f64,
    lambda: f64,
    delta: f64,
    loss: &str,
    algorithm: &str,
    geometry: &str,
    dim: usize,
    beta: f64,
    rho: f64,
    output: &str,
    seed: u64,
    tau: f64,
    epsilon: f64,
    y_max: Option<f64>,
) -> PyResult<LearnerConfig> {
    let kind: LossKind = loss.parse().map_err(to_py)?;
    let loss = match kind {
        LossKind::SmoothHinge => LossSpec::smooth_hinge(tau).map_err(to_py)?,
        LossKind::EpsInsensitive => LossSpec::eps_insensitive(epsilon).map_err(to_py)?,
        other => LossSpec::new(other),
    };
    let mut cfg = LearnerConfig::new(KernelSpec::gaussian(gamma).map_err(to_py)?, lambda, delta);
    cfg.loss = loss;
    cfg.algorithm = algorithm.parse::<Algorithm>().map_err(to_py)?;
    cfg.geometry = geometry.parse::<Geometry>().map_err(to_py)?;
    cfg.dim = dim;
    cfg.beta = beta;
    cfg.rho = rho;
    cfg.output = output.parse::<OutputMode>().map_err(to_py)?;
    cfg.seed = seed;
    cfg.y_max = y_max.map_or(YMax::Tracked, YMax::Fixed);
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Gaussian kernel `exp(-gamma * ||x - x'||^2)`.
#[pyclass(module = "avm_py", frozen)]
struct Kernel {
    inner: KernelSpec,
}

#[pymethods]
impl Kernel {
    #[new]
    fn new(gamma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: KernelSpec::gaussian(gamma).map_err(to_py)?,
        })
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn __call__(&self, x: &Bound<'_, PyAny>, y: &Bound<'_, PyAny>) -> PyResult<f64> {
        Ok(self.inner.eval(&*vector(x)?, &*vector(y)?))
    }

    /// Feature-space diameter of a cell with input-space diameter `delta`.
    fn delta_phi(&self, delta: f64) -> PyResult<f64> {
        self.inner.delta_phi(delta).map_err(to_py)
    }
}

#[pyfunction]
fn delta_phi(gamma: f64, delta: f64) -> PyResult<f64> {
    KernelSpec::gaussian(gamma)
        .and_then(|k| k.delta_phi(delta))
        .map_err(to_py)
}

#[pyclass(module = "avm_py")]
struct Coverage {
    inner: CoreCoverage,
}

#[pymethods]
impl Coverage {
    #[new]
    #[pyo3(signature = (delta, dim, geometry = "sphere"))]
    fn new(delta: f64, dim: usize, geometry: &str) -> PyResult<Self> {
        let g = geometry.parse::<Geometry>().map_err(to_py)?;
        Ok(Self {
            inner: CoreCoverage::new(g, delta, dim).map_err(to_py)?,
        })
    }

    /// Returns `(cell_index, is_new)`; cell indices start at 1.
    fn assign(&mut self, x: &Bound<'_, PyAny>) -> PyResult<(usize, bool)> {
        let a = self.inner.assign(&vector(x)?);
        Ok((a.cell_index, a.is_new))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn cores<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .cores()
            .iter()
            .map(|c| vector_dict(py, c))
            .collect()
    }
}

#[pyclass(module = "avm_py")]
struct Learner {
    inner: CoreLearner,
}

#[pymethods]
impl Learner {
    #[new]
    #[pyo3(signature = (
        gamma, lam, delta, *, loss = "hinge", algorithm = "avm", geometry = "sphere", dim = 1,
        beta = 0.0, rho = 1.0, output = "final", seed = 0, tau = 0.5, epsilon = 0.1,
        y_max = None, horizon = None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        gamma: f64,
        lam: f64,
        delta: f64,
        loss: &str,
        algorithm: &str,
        geometry: &str,
        dim: usize,
        beta: f64,
        rho: f64,
        output: &str,
        seed: u64,
        tau: f64,
        epsilon: f64,
        y_max: Option<f64>,
        horizon: Option<u64>,
    ) -> PyResult<Self> {
        let cfg = config(
            gamma, lam, delta, loss, algorithm, geometry, dim, beta, rho, output, seed, tau,
            epsilon, y_max,
        )?;
        Ok(Self {
            inner: CoreLearner::new(cfg, horizon).map_err(to_py)?,
        })
    }

    /// One predict-then-update step. Returns `(score, alpha, approximated)`.
    fn step(&mut self, x: &Bound<'_, PyAny>, y: f64) -> PyResult<(f64, f64, bool)> {
        let s = self.inner.step(&vector(x)?, y).map_err(to_py)?;
        Ok((s.score, s.alpha, s.approximated))
    }

    fn predict(&self, x: &Bound<'_, PyAny>) -> PyResult<f64> {
        Ok(self.inner.predict(&*vector(x)?))
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps()
    }

    #[getter]
    fn model_size(&self) -> usize {
        self.inner.model_size()
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.cells()
    }

    #[getter]
    fn norm(&self) -> f64 {
        self.inner.model().norm()
    }

    /// `(point, coefficient)` pairs of the configured output model.
    fn terms<'py>(&self, py: Python<'py>) -> PyResult<Vec<(Bound<'py, PyDict>, f64)>> {
        self.inner
            .output_model()
            .terms()
            .map(|(p, c)| Ok((vector_dict(py, p)?, c)))
            .collect()
    }

    /// Writes the output model as a text snapshot.
    fn save(&self, path: &str) -> PyResult<()> {
        let cfg = self.inner.config();
        let header = SnapshotHeader {
            geometry: cfg.geometry,
            delta: cfg.delta,
            dim: cfg.dim,
        };
        let file = File::create(path)?;
        self.inner
            .output_model()
            .write_snapshot(BufWriter::new(file), &header)
            .map_err(to_py)
    }
}

#[pyclass(module = "avm_py")]
struct MulticlassLearner {
    inner: CoreMulticlass,
}

#[pymethods]
impl MulticlassLearner {
    #[new]
    #[pyo3(signature = (
        classes, gamma, lam, delta, *, loss = "hinge", geometry = "sphere", dim = 1,
        beta = 0.0, rho = 1.0, output = "final", seed = 0, horizon = None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        classes: usize,
        gamma: f64,
        lam: f64,
        delta: f64,
        loss: &str,
        geometry: &str,
        dim: usize,
        beta: f64,
        rho: f64,
        output: &str,
        seed: u64,
        horizon: Option<u64>,
    ) -> PyResult<Self> {
        let cfg = config(
            gamma, lam, delta, loss, "avm", geometry, dim, beta, rho, output, seed, 0.5, 0.1, None,
        )?;
        Ok(Self {
            inner: CoreMulticlass::new(cfg, classes, horizon).map_err(to_py)?,
        })
    }

    /// One step on class `y` (1-based). Returns the class predicted first.
    fn step(&mut self, x: &Bound<'_, PyAny>, y: usize) -> PyResult<usize> {
        Ok(self.inner.step(&vector(x)?, y).map_err(to_py)?.predicted)
    }

    fn predict(&self, x: &Bound<'_, PyAny>) -> PyResult<usize> {
        Ok(self.inner.predict(&*vector(x)?))
    }

    fn scores(&self, x: &Bound<'_, PyAny>) -> PyResult<Vec<f64>> {
        Ok(self.inner.model().scores(&*vector(x)?))
    }

    #[getter]
    fn model_size(&self) -> usize {
        self.inner.model_size()
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.cells()
    }
}

#[pyclass(module = "avm_py", frozen)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn task(&self) -> String {
        self.inner.task.to_string()
    }

    #[getter]
    fn labels(&self) -> Vec<f64> {
        self.inner.labels.clone()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.inner.class_names.clone()
    }

    /// Loads another file with this dataset's class mapping (e.g. a test split).
    fn companion(&self, path: &str) -> PyResult<Dataset> {
        Ok(Dataset {
            inner: self.inner.load_companion(path).map_err(to_py)?,
        })
    }

    fn shuffled(&self, seed: u64) -> Dataset {
        Dataset {
            inner: self.inner.shuffle(seed),
        }
    }

    fn normalized(&self) -> Dataset {
        Dataset {
            inner: avm::normalize_minmax(&self.inner).0,
        }
    }
}

#[pyfunction]
#[pyo3(signature = (path, task = "binary"))]
fn load_libsvm(path: &str, task: &str) -> PyResult<Dataset> {
    let task: Task = task.parse().map_err(to_py)?;
    Ok(Dataset {
        inner: CoreDataset::load(path, task).map_err(to_py)?,
    })
}

fn trace_list<'py>(py: Python<'py>, trace: &MetricsTrace) -> PyResult<Bound<'py, PyList>> {
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf).map_err(to_py)?;
    let json = py.import("json")?;
    let out = PyList::empty(py);
    for line in String::from_utf8_lossy(&buf).lines() {
        out.append(json.call_method1("loads", (line,))?)?;
    }
    Ok(out)
}

/// Runs the online protocol over `train`; returns the trace records as dicts.
#[pyfunction]
#[pyo3(signature = (
    train, gamma, lam, delta, *, loss = "hinge", algorithm = "avm", geometry = "sphere",
    dim = None, beta = 0.0, rho = 1.0, output = "final", seed = 0, tau = 0.5, epsilon = 0.1,
    y_max = None, checkpoint_every = None
))]
#[allow(clippy::too_many_arguments)]
fn run_online<'py>(
    py: Python<'py>,
    train: &Dataset,
    gamma: f64,
    lam: f64,
    delta: f64,
    loss: &str,
    algorithm: &str,
    geometry: &str,
    dim: Option<usize>,
    beta: f64,
    rho: f64,
    output: &str,
    seed: u64,
    tau: f64,
    epsilon: f64,
    y_max: Option<f64>,
    checkpoint_every: Option<u64>,
) -> PyResult<Bound<'py, PyList>> {
    let dim = dim.unwrap_or(train.inner.dim.max(1));
    let cfg = config(
        gamma, lam, delta, loss, algorithm, geometry, dim, beta, rho, output, seed, tau, epsilon,
        y_max,
    )?;
    let report = py
        .detach(|| run_stream(&cfg, &train.inner, RunOptions { checkpoint_every }))
        .map_err(to_py)?;
    trace_list(py, &report.trace)
}

/// Runs the batch protocol (`iters` uniform draws, default 5 × len(train))
/// and scores on `test`; returns the trace records as dicts.
#[pyfunction]
#[pyo3(signature = (
    train, test, gamma, lam, delta, *, iters = None, loss = "hinge", algorithm = "avm",
    geometry = "sphere", dim = None, beta = 0.0, rho = 1.0, output = "final", seed = 0,
    tau = 0.5, epsilon = 0.1, y_max = None, checkpoint_every = None
))]
#[allow(clippy::too_many_arguments)]
fn run_batch_py<'py>(
    py: Python<'py>,
    train: &Dataset,
    test: &Dataset,
    gamma: f64,
    lam: f64,
    delta: f64,
    iters: Option<u64>,
    loss: &str,
    algorithm: &str,
    geometry: &str,
    dim: Option<usize>,
    beta: f64,
    rho: f64,
    output: &str,
    seed: u64,
    tau: f64,
    epsilon: f64,
    y_max: Option<f64>,
    checkpoint_every: Option<u64>,
) -> PyResult<Bound<'py, PyList>> {
    let dim = dim.unwrap_or(train.inner.dim.max(test.inner.dim).max(1));
    let cfg = config(
        gamma, lam, delta, loss, algorithm, geometry, dim, beta, rho, output, seed, tau, epsilon,
        y_max,
    )?;
    let iters = iters.unwrap_or(5 * train.inner.len() as u64);
    let report = py
        .detach(|| {
            run_batch(
                &cfg,
                &train.inner,
                &test.inner,
                iters,
                RunOptions { checkpoint_every },
            )
        })
        .map_err(to_py)?;
    trace_list(py, &report.trace)
}

#[pymodule]
fn avm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<Coverage>()?;
    m.add_class::<Learner>()?;
    m.add_class::<MulticlassLearner>()?;
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(delta_phi, m)?)?;
    m.add_function(wrap_pyfunction!(load_libsvm, m)?)?;
    m.add_function(wrap_pyfunction!(run_online, m)?)?;
    let batch = wrap_pyfunction!(run_batch_py, m)?;
    m.add("run_batch", batch)?;
    Ok(())
}
