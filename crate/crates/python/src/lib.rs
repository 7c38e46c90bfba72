use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use nodaldtn_core::dtn::{index_and_kernel, CanonicalSystem};
use nodaldtn_core::exact1d::{circle_report as exact_circle, even_circle_report, exact_dtn_1d, interval_report_for, OneDPartition};
use nodaldtn_core::mesh::{rectangle_grid, Mesh};
use nodaldtn_core::partition::{
    build_neighbor_graph, cut_from_weights, cut_report, is_bipartite, is_valid_cut, Partition, PartitionDocument,
    WeightAssignment,
};
use nodaldtn_core::pipeline::{run_verify, MeshSource, PartitionSource, RunConfig, WeightSource, DEFAULT_ALIGN};
use nodaldtn_core::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Serializes through JSON into plain Python objects.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Mesh", module = "nodaldtn")]
struct PyMesh {
    inner: Mesh,
}

#[pymethods]
impl PyMesh {
    #[staticmethod]
    fn rectangle(a: f64, b: f64, nx: usize, ny: usize) -> PyResult<Self> {
        Ok(PyMesh { inner: rectangle_grid(a, b, nx, ny).map_err(to_py)? })
    }

    #[staticmethod]
    fn circle(n: usize) -> PyResult<Self> {
        Ok(PyMesh { inner: Mesh::circle(n).map_err(to_py)? })
    }

    #[staticmethod]
    fn interval(length: f64, n: usize) -> PyResult<Self> {
        Ok(PyMesh { inner: Mesh::interval(length, n).map_err(to_py)? })
    }

    /// Reads the text mesh format; returns the mesh and the regions block if present.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<(Self, Option<Vec<usize>>)> {
        let (inner, regions) = Mesh::read(&path).map_err(to_py)?;
        Ok((PyMesh { inner }, regions))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.nodes().iter().map(|p| (p[0], p[1])).collect()
    }

    #[getter]
    fn cells(&self) -> Vec<Vec<usize>> {
        (0..self.inner.n_cells()).map(|c| self.inner.cell(c).to_vec()).collect()
    }

    fn max_edge_length(&self) -> f64 {
        self.inner.max_edge_length()
    }

    fn to_text(&self) -> String {
        self.inner.to_text(None)
    }

    fn __repr__(&self) -> String {
        format!("Mesh(dim={}, nodes={}, cells={})", self.inner.dim(), self.inner.n_nodes(), self.inner.n_cells())
    }
}

#[pyclass(name = "Partition", module = "nodaldtn")]
struct PyPartition {
    inner: Partition,
    weights: Option<WeightAssignment>,
}

#[pymethods]
impl PyPartition {
    /// Combinatorial partition on `k` subdomains with one segment per pair.
    #[staticmethod]
    fn from_graph(k: usize, pairs: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyPartition {
            inner: Partition::abstract_graph(k, &pairs).map_err(to_py)?,
            weights: None,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (inner, weights) = PartitionDocument::parse(text).map_err(to_py)?;
        Ok(PyPartition { inner, weights })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&PartitionDocument::from_partition(&self.inner, self.weights.as_ref()))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn n_segments(&self) -> usize {
        self.inner.n_segments()
    }

    #[getter]
    fn segments(&self) -> Vec<(usize, usize)> {
        self.inner.segments.iter().map(|s| (s.left, s.right)).collect()
    }

    fn is_bipartite(&self) -> bool {
        is_bipartite(&build_neighbor_graph(&self.inner)).is_some()
    }

    /// Orientation witness for a cut, or `None` when the cut is not valid.
    fn is_valid_cut(&self, members: Vec<usize>) -> Option<Vec<i8>> {
        is_valid_cut(&self.inner, &members)
    }

    fn cut_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &cut_report(&self.inner))
    }

    fn minimal_cut(&self) -> Vec<usize> {
        cut_report(&self.inner).minimal.members
    }

    /// Cut induced by the document's weights, if it had any.
    fn weight_cut(&self) -> Option<Vec<usize>> {
        self.weights.as_ref().map(|w| cut_from_weights(w).members)
    }

    fn __repr__(&self) -> String {
        format!("Partition(k={}, segments={})", self.inner.k(), self.inner.n_segments())
    }
}

/// Closed-form report for the circle split into `k` equal arcs.
#[pyfunction]
#[pyo3(signature = (k, even = false))]
fn circle_report<'py>(py: Python<'py>, k: usize, even: bool) -> PyResult<Bound<'py, PyAny>> {
    if even && k.is_multiple_of(2) {
        to_object(py, &even_circle_report(k).map_err(to_py)?)
    } else {
        to_object(py, &exact_circle(k).map_err(to_py)?)
    }
}

/// Closed-form report for an interval, split evenly into `k` pieces or at `points`.
#[pyfunction]
#[pyo3(signature = (length, k = None, points = None))]
fn interval_report<'py>(py: Python<'py>, length: f64, k: Option<usize>, points: Option<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    let p = match (k, points) {
        (Some(k), None) => OneDPartition::interval_equipartition(k, length),
        (None, Some(points)) => OneDPartition::interval(length, points),
        _ => return Err(PyValueError::new_err("give either k or points")),
    }
    .map_err(to_py)?;
    to_object(py, &interval_report_for(&p).map_err(to_py)?)
}

/// Exact DN matrix of the circle equipartition at `λ* = (k/2)²`, with its
/// eigenvalues, Morse index and kernel dimension.
#[pyfunction]
fn circle_dtn<'py>(py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyAny>> {
    let p = OneDPartition::circle_equipartition(k).map_err(to_py)?;
    let d = exact_dtn_1d(&p, (k as f64 / 2.0).powi(2)).map_err(to_py)?;
    let ik = index_and_kernel(&d.operator);
    let matrix: Vec<Vec<f64>> = d.operator.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
    to_object(
        py,
        &serde_json::json!({
            "matrix": matrix,
            "eigenvalues": d.operator.eigenvalues,
            "morse": ik.morse,
            "kernel_dim": ik.kernel_dim,
        }),
    )
}

/// Sorted eigenvalues of the canonical matrix built from symmetric couplings.
#[pyfunction]
fn canonical_eigenvalues(alpha: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let k = alpha.len();
    if alpha.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("alpha must be square"));
    }
    let a = nalgebra::DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { alpha[i][j] });
    Ok(CanonicalSystem::from_alpha(a, nalgebra::DVector::zeros(k)).eigenvalues())
}

/// Full verification run; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (
    shape = None, h = None, mesh = None, align = DEFAULT_ALIGN,
    eig = None, partition = None, equipartition = None,
    weights = "all", seed = 1, flow = true, out = None,
))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    shape: Option<&str>,
    h: Option<f64>,
    mesh: Option<PathBuf>,
    align: usize,
    eig: Option<usize>,
    partition: Option<PathBuf>,
    equipartition: Option<usize>,
    weights: &str,
    seed: u64,
    flow: bool,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let source = MeshSource::from_args(mesh.as_deref(), shape, h, align).map_err(to_py)?;
    let part = match (eig, partition, equipartition) {
        (Some(index), None, None) => PartitionSource::Eigenfunction { index, mode: None },
        (None, Some(path), None) => PartitionSource::Document(path),
        (None, None, Some(k)) => PartitionSource::Equipartition(k),
        _ => return Err(PyValueError::new_err("give exactly one of eig, partition, equipartition")),
    };
    let mut cfg = RunConfig::new(source, part);
    cfg.weights = WeightSource::parse(weights);
    cfg.seed = seed;
    cfg.run_flow = flow;
    cfg.out = out;
    cfg.validate().map_err(to_py)?;
    let outcome = py.detach(|| run_verify(&cfg)).map_err(to_py)?;
    to_object(py, &outcome.report)
}

#[pymodule]
fn nodaldtn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyPartition>()?;
    m.add_function(wrap_pyfunction!(circle_report, m)?)?;
    m.add_function(wrap_pyfunction!(interval_report, m)?)?;
    m.add_function(wrap_pyfunction!(circle_dtn, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
