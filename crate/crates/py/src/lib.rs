#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use certmin::benchmarks::{self, Function, ProblemOptions, RanaSyntax};
use certmin::cooperation::Mode;
use certmin::runner::{self, RunConfig, RunError};
use certmin::IntervalBox;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err(e: RunError) -> PyErr {
    match e {
        RunError::Config(_) => value_err(e),
        RunError::Data(_) => PyIOError::new_err(e.to_string()),
    }
}

fn to_box(bounds: Vec<(f64, f64)>) -> PyResult<IntervalBox> {
    if bounds.iter().any(|&(lo, hi)| !(lo <= hi)) {
        return Err(value_err("every bound needs lo <= hi"));
    }
    Ok(IntervalBox::from_bounds(&bounds))
}

/// Closed interval with outward-rounded arithmetic.
#[pyclass(name = "Interval", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyInterval(certmin::Interval);

#[pymethods]
impl PyInterval {
    #[new]
    #[pyo3(signature = (lo, hi=None))]
    fn new(lo: f64, hi: Option<f64>) -> PyResult<Self> {
        let hi = hi.unwrap_or(lo);
        if !(lo <= hi) {
            return Err(value_err(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(PyInterval(certmin::Interval::new(lo, hi)))
    }

    #[getter]
    fn lo(&self) -> f64 {
        self.0.lo()
    }

    #[getter]
    fn hi(&self) -> f64 {
        self.0.hi()
    }

    fn width(&self) -> f64 {
        self.0.width()
    }

    fn mid(&self) -> f64 {
        self.0.mid()
    }

    fn contains(&self, x: f64) -> bool {
        self.0.contains(x)
    }

    fn __contains__(&self, x: f64) -> bool {
        self.0.contains(x)
    }

    fn __add__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyInterval(self.0 + operand(o)?))
    }

    fn __radd__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyInterval(operand(o)? + self.0))
    }

    fn __sub__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyInterval(self.0 - operand(o)?))
    }

    fn __rsub__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyInterval(operand(o)? - self.0))
    }

    fn __mul__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyInterval(self.0 * operand(o)?))
    }

    fn __rmul__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyInterval(operand(o)? * self.0))
    }

    fn __truediv__(&self, o: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyInterval(self.0 / operand(o)?))
    }

    fn __neg__(&self) -> Self {
        PyInterval(-self.0)
    }

    fn __pow__(&self, k: i32, _modulo: Option<i32>) -> Self {
        PyInterval(self.0.powi(k))
    }

    fn __eq__(&self, o: &Self) -> bool {
        self.0 == o.0
    }

    fn sin(&self) -> Self {
        PyInterval(self.0.sin())
    }

    fn cos(&self) -> Self {
        PyInterval(self.0.cos())
    }

    fn exp(&self) -> Self {
        PyInterval(self.0.exp())
    }

    fn abs(&self) -> Self {
        PyInterval(self.0.abs())
    }

    fn sqrt(&self) -> PyResult<Self> {
        self.0.sqrt().map(PyInterval).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Interval({:e}, {:e})", self.0.lo(), self.0.hi())
    }
}

fn operand(o: &Bound<'_, PyAny>) -> PyResult<certmin::Interval> {
    if let Ok(i) = o.extract::<PyInterval>() {
        return Ok(i.0);
    }
    let x: f64 = o.extract()?;
    Ok(certmin::Interval::point(x))
}

/// One benchmark problem: objective, constraints and domain.
#[pyclass(name = "Problem", frozen)]
pub struct PyProblem(certmin::Problem);

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (function, n, rana_syntax="original"))]
    fn new(function: &str, n: usize, rana_syntax: &str) -> PyResult<Self> {
        let f: Function = function.parse().map_err(value_err)?;
        let opts = ProblemOptions {
            rana_syntax: rana_syntax.parse().map_err(value_err)?,
            ..Default::default()
        };
        benchmarks::make_problem(f, n, &opts)
            .map(PyProblem)
            .map_err(value_err)
    }

    #[getter]
    fn name(&self) -> &str {
        self.0.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Domain as a list of `(lo, hi)` pairs.
    #[getter]
    fn domain(&self) -> Vec<(f64, f64)> {
        self.0
            .domain()
            .components()
            .iter()
            .map(|c| (c.lo(), c.hi()))
            .collect()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_dim(x.len())?;
        Ok(self.0.eval(&x))
    }

    /// Natural interval extension of the objective over a box.
    fn enclose(&self, bounds: Vec<(f64, f64)>) -> PyResult<PyInterval> {
        self.check_dim(bounds.len())?;
        let b = to_box(bounds)?;
        self.0
            .tape()
            .natural_extension(&b)
            .map(PyInterval)
            .map_err(value_err)
    }

    /// Enclosure of each partial derivative over a box.
    fn gradient(&self, bounds: Vec<(f64, f64)>) -> PyResult<Vec<PyInterval>> {
        self.check_dim(bounds.len())?;
        let b = to_box(bounds)?;
        let g = self.0.tape().gradient_enclosure(&b).map_err(value_err)?;
        Ok(g.components.into_iter().map(PyInterval).collect())
    }

    fn certified_feasible(&self, x: Vec<f64>) -> PyResult<bool> {
        self.check_dim(x.len())?;
        Ok(self.0.certified_feasible(&x))
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, n={})", self.0.name(), self.0.dim())
    }
}

impl PyProblem {
    fn check_dim(&self, len: usize) -> PyResult<()> {
        if len != self.0.dim() {
            return Err(value_err(format!(
                "expected {} coordinates, got {len}",
                self.0.dim()
            )));
        }
        Ok(())
    }
}

/// Runs the solver and returns the result as a dict.
#[pyfunction]
#[pyo3(signature = (
    function, n, *, mode="hybrid", epsilon=1e-6, np=None, w=None, cr=None, seed=0,
    rana_syntax="original", time_limit=None, shekel_data=None
))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    function: &str,
    n: usize,
    mode: &str,
    epsilon: f64,
    np: Option<usize>,
    w: Option<f64>,
    cr: Option<f64>,
    seed: u64,
    rana_syntax: &str,
    time_limit: Option<f64>,
    shekel_data: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = RunConfig::new(function, n);
    cfg.mode = mode.parse::<Mode>().map_err(run_err)?;
    cfg.epsilon = epsilon;
    cfg.np = np;
    cfg.w = w;
    cfg.cr = cr;
    cfg.seed = seed;
    cfg.rana_syntax = rana_syntax.parse::<RanaSyntax>().map_err(value_err)?;
    cfg.time_limit_seconds = time_limit;
    cfg.shekel_data = shekel_data;
    let r = py.detach(|| runner::run(&cfg)).map_err(run_err)?;
    let text = serde_json::to_string(&r).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Recorded certified minima, one dict per `(function, n)`.
#[pyfunction]
fn reference_minima(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    benchmarks::reference_minima()
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("function", r.function.as_str())?;
            d.set_item("n", r.n)?;
            d.set_item("value", r.value)?;
            d.set_item("solution", r.solution.clone())?;
            Ok(d)
        })
        .collect()
}

/// Closed-form conjectured minimum for the functions that have one.
#[pyfunction]
fn putative_minimum(function: &str, n: usize) -> PyResult<f64> {
    let f: Function = function.parse().map_err(value_err)?;
    benchmarks::putative_minimum(f, n).map_err(value_err)
}

#[pymodule]
fn pycertmin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInterval>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(reference_minima, m)?)?;
    m.add_function(wrap_pyfunction!(putative_minimum, m)?)?;
    Ok(())
}
