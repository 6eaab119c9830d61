//! Python bindings. Matrices cross the boundary as lists of row lists.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spconv::analysis;
use spconv::bench;
use spconv::reference;
use spconv::verify::{run_sweep, VerifyOptions};
use spconv::{Error, Grid, Kernel, Layout};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn grid(rows: Vec<Vec<f64>>) -> PyResult<Grid> {
    Grid::from_rows(&rows).map_err(to_py)
}

fn kernel(rows: Vec<Vec<f64>>) -> PyResult<Kernel> {
    Kernel::from_rows(&rows).map_err(to_py)
}

fn layout(name: &str) -> PyResult<Layout> {
    name.parse().map_err(|e: String| PyValueError::new_err(e))
}

#[pyclass(name = "ConvSpec", module = "spconv", frozen, eq, hash, from_py_object)]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PyConvSpec(spconv::ConvSpec);

#[pymethods]
impl PyConvSpec {
    #[new]
    #[pyo3(signature = (m, n, k, s = 1, p = 0))]
    fn new(m: usize, n: usize, k: usize, s: usize, p: usize) -> PyResult<Self> {
        spconv::ConvSpec::new(m, n, k, s, p)
            .map(PyConvSpec)
            .map_err(to_py)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }
    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }
    #[getter]
    fn s(&self) -> usize {
        self.0.s()
    }
    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }
    #[getter]
    fn m_out(&self) -> usize {
        self.0.m_out()
    }
    #[getter]
    fn n_out(&self) -> usize {
        self.0.n_out()
    }

    fn output_shape(&self) -> (usize, usize) {
        (self.0.m_out(), self.0.n_out())
    }

    fn dense_count(&self) -> usize {
        self.0.dense_mults()
    }

    fn __repr__(&self) -> String {
        let s = &self.0;
        format!(
            "ConvSpec(m={}, n={}, k={}, s={}, p={})",
            s.m(),
            s.n(),
            s.k(),
            s.s(),
            s.p()
        )
    }
}

#[pyclass(name = "Transform", module = "spconv", frozen)]
struct PyTransform(spconv::Transform);

#[pymethods]
impl PyTransform {
    /// Builds `T = C P` for `kernel` (k x k rows) and `spec`.
    #[staticmethod]
    #[pyo3(signature = (kernel, spec, layout = "csr"))]
    fn build(
        py: Python<'_>,
        kernel: Vec<Vec<f64>>,
        spec: PyConvSpec,
        layout: &str,
    ) -> PyResult<Self> {
        let k = self::kernel(kernel)?;
        let layout = self::layout(layout)?;
        py.detach(|| spconv::Transform::build(&k, &spec.0, layout))
            .map(PyTransform)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        spconv::Transform::load(path)
            .map(PyTransform)
            .map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }

    fn convolve(&self, py: Python<'_>, input: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let input = grid(input)?;
        let out = py.detach(|| self.0.convolve(&input)).map_err(to_py)?;
        Ok(out.to_rows())
    }

    #[getter]
    fn spec(&self) -> PyConvSpec {
        PyConvSpec(*self.0.spec())
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.0.nnz()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.0.matrix().shape()
    }

    #[getter]
    fn layout(&self) -> &'static str {
        self.0.layout().as_str()
    }

    /// Stored entries as `(row, col, value)` in storage order.
    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.0.matrix().iter().collect()
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        self.0.matrix().to_dense().to_rows()
    }

    fn __repr__(&self) -> String {
        let (rows, cols) = self.0.matrix().shape();
        format!(
            "Transform({}, {rows}x{cols}, nnz={}, layout={})",
            self.spec().__repr__(),
            self.0.nnz(),
            self.layout()
        )
    }
}

#[pyfunction]
fn direct_conv(
    input: Vec<Vec<f64>>,
    kernel: Vec<Vec<f64>>,
    spec: PyConvSpec,
) -> PyResult<Vec<Vec<f64>>> {
    reference::direct_conv(&grid(input)?, &self::kernel(kernel)?, &spec.0)
        .map(|g| g.to_rows())
        .map_err(to_py)
}

#[pyfunction]
fn im2col_conv(
    input: Vec<Vec<f64>>,
    kernel: Vec<Vec<f64>>,
    spec: PyConvSpec,
) -> PyResult<Vec<Vec<f64>>> {
    reference::im2col_conv(&grid(input)?, &self::kernel(kernel)?, &spec.0)
        .map(|g| g.to_rows())
        .map_err(to_py)
}

#[pyfunction]
fn nnz_bound(spec: PyConvSpec) -> u64 {
    analysis::nnz_bound(&spec.0)
}

#[pyfunction]
fn nnz_oracle(spec: PyConvSpec) -> u64 {
    analysis::nnz_oracle(&spec.0)
}

#[pyfunction]
fn savings_ratio(spec: PyConvSpec) -> f64 {
    analysis::NnzReport::new(spec.0).savings_ratio
}

/// Seeded standard-normal `(input, kernel)` pair, identical to the CLI's.
#[pyfunction]
#[pyo3(signature = (spec, seed = 42, stream = 0))]
fn generate_case(spec: PyConvSpec, seed: u64, stream: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (input, kernel) = bench::generate_case(&spec.0, seed, stream);
    (input.to_rows(), kernel.to_grid().to_rows())
}

#[pyfunction]
#[pyo3(signature = (max_dim = 6, seeds = 1, seed = 0))]
fn verify<'py>(
    py: Python<'py>,
    max_dim: usize,
    seeds: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = VerifyOptions {
        max_dim,
        seeds,
        base_seed: seed,
    };
    let report = py.detach(|| run_sweep(&opts)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("ok", report.is_ok())?;
    d.set_item("specs", report.specs)?;
    d.set_item("cases", report.cases)?;
    d.set_item("max_dev_sparse", report.max_dev_sparse)?;
    d.set_item("max_dev_im2col", report.max_dev_im2col)?;
    d.set_item("max_dev_layouts", report.max_dev_layouts)?;
    d.set_item("failures", report.failures)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "spconv")]
fn spconv_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConvSpec>()?;
    m.add_class::<PyTransform>()?;
    m.add_function(wrap_pyfunction!(direct_conv, m)?)?;
    m.add_function(wrap_pyfunction!(im2col_conv, m)?)?;
    m.add_function(wrap_pyfunction!(nnz_bound, m)?)?;
    m.add_function(wrap_pyfunction!(nnz_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(savings_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(generate_case, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
