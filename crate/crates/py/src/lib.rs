//! Python bindings: scenarios, command runs and reports, demo presets, and
//! expression objectives with their symbolic partials.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use tvc_core::app::{self, Command, Outcome, Overrides};
use tvc_core::euler::BoundaryMode;
use tvc_core::objective::{eval_checked, partial_slot, ExprObjective, Objective, ObjectiveKind};
use tvc_core::report::Report;
use tvc_core::scenario::{parse_scenario, Scenario};

create_exception!(tvckit, TvcError, PyException);

fn err(e: tvc_core::Error) -> PyErr {
    TvcError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// A scenario as read from JSON. Defaults are filled in by `resolved()` or
/// when it runs.
#[pyclass(name = "Scenario", module = "tvckit")]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_scenario(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| err(e.into()))?;
        Self::from_json(&text)
    }

    /// One of the scenarios shipped with the toolkit, by file name.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: app::fixture(name).map_err(err)?,
        })
    }

    /// Validated copy with every default filled in.
    fn resolved(&self) -> PyResult<Self> {
        let l = self.inner.clone().load().map_err(err)?;
        Ok(Self { inner: l.scenario })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("scenarios serialize")
    }

    #[pyo3(signature = (command, tmax=None, eps_grid=None, seed=None, tolerance=None, boundary=None))]
    fn run(
        &self,
        command: &str,
        tmax: Option<usize>,
        eps_grid: Option<Vec<f64>>,
        seed: Option<u64>,
        tolerance: Option<f64>,
        boundary: Option<&str>,
    ) -> PyResult<PyReport> {
        let command: Command = command.parse().map_err(err)?;
        if command == Command::Demo {
            return Err(TvcError::new_err("use run_demo() for demos"));
        }
        let boundary = boundary.map(str::parse::<BoundaryMode>).transpose().map_err(err)?;
        let overrides = Overrides {
            tmax,
            eps_grid,
            seed,
            tolerance,
            boundary,
        };
        Ok(app::run(command, Some(self.inner.clone()), None, &overrides).into())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({})",
            self.inner.description.as_deref().unwrap_or("no description")
        )
    }
}

/// Outcome of one command: the JSON report, its exit code and the CSV
/// table when the command has one.
#[pyclass(name = "Report", module = "tvckit")]
struct PyReport {
    report: Report,
    csv: Option<String>,
}

impl From<Outcome> for PyReport {
    fn from(o: Outcome) -> Self {
        Self {
            report: o.report,
            csv: o.csv,
        }
    }
}

#[pymethods]
impl PyReport {
    #[getter]
    fn exit_code(&self) -> i32 {
        self.report.exit_code
    }

    #[getter]
    fn passed(&self) -> bool {
        self.report.exit_code == 0
    }

    #[getter]
    fn command(&self) -> &str {
        &self.report.command
    }

    #[getter]
    fn error(&self) -> Option<&str> {
        self.report.error.as_deref()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.report.warnings.clone()
    }

    #[getter]
    fn csv(&self) -> Option<&str> {
        self.csv.as_deref()
    }

    /// `(name, verdict, tolerance, passed)` per verdict.
    #[getter]
    fn verdicts(&self) -> Vec<(String, String, Option<f64>, bool)> {
        self.report
            .verdicts
            .iter()
            .map(|v| (v.name.clone(), v.verdict.clone(), v.tolerance, v.passed))
            .collect()
    }

    fn to_json(&self) -> String {
        self.report.to_json()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.report.to_json())
    }

    /// The `results` object alone.
    fn results<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.report.results.to_string())
    }

    fn __repr__(&self) -> String {
        format!("Report(command={:?}, exit_code={})", self.report.command, self.report.exit_code)
    }
}

#[pyfunction]
#[pyo3(signature = (name, seed=None))]
fn run_demo(name: &str, seed: Option<u64>) -> PyReport {
    let overrides = Overrides {
        seed,
        ..Overrides::default()
    };
    app::run(Command::Demo, None, Some(name), &overrides).into()
}

#[pyfunction]
fn demos() -> Vec<&'static str> {
    app::DEMOS.to_vec()
}

#[pyfunction]
fn fixtures() -> Vec<&'static str> {
    app::FIXTURES.iter().map(|(n, _)| *n).collect()
}

/// `(rows checked, max relative gap)` of the household Euler identity on
/// seeded random positive-consumption paths.
#[pyfunction]
#[pyo3(signature = (seed=0, paths=20, horizon=30, discount=0.9))]
fn household_identity(seed: u64, paths: usize, horizon: usize, discount: f64) -> PyResult<(usize, f64)> {
    let s = app::household_identity_suite(seed, paths, horizon, discount).map_err(err)?;
    Ok((s.rows_checked, s.max_relative_gap))
}

/// An objective written in the expression language. Slots are `y0..yn`
/// and `t` is time; `constants` maps each extra name to one value per state.
#[pyclass(name = "Expression", module = "tvckit")]
struct PyExpression {
    inner: ExprObjective,
}

#[pymethods]
impl PyExpression {
    #[new]
    #[pyo3(signature = (source, order, constants=None, continuous=false))]
    fn new(source: &str, order: usize, constants: Option<BTreeMap<String, Vec<f64>>>, continuous: bool) -> PyResult<Self> {
        let kind = if continuous {
            ObjectiveKind::Continuous
        } else {
            ObjectiveKind::Discrete
        };
        let inner = ExprObjective::new(source, order, kind, &constants.unwrap_or_default()).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn source(&self) -> &str {
        self.inner.source()
    }

    #[pyo3(signature = (slots, t=0.0, state=0))]
    fn eval(&self, slots: Vec<f64>, t: f64, state: usize) -> PyResult<f64> {
        eval_checked(&self.inner, &slots, t, state).map_err(err)
    }

    /// Partials in every slot.
    #[pyo3(signature = (slots, t=0.0, state=0))]
    fn gradient(&self, slots: Vec<f64>, t: f64, state: usize) -> PyResult<Vec<f64>> {
        (0..=self.inner.order())
            .map(|k| partial_slot(&self.inner, k, 0, &slots, t, state).map_err(err))
            .collect()
    }

    /// The symbolic partial in slot `k`, printed.
    fn partial_source(&self, k: usize) -> PyResult<String> {
        if k > self.inner.order() {
            return Err(TvcError::new_err(format!("slot {k} exceeds the order {}", self.inner.order())));
        }
        Ok(self.inner.partial_expr(k).to_string())
    }

    fn __repr__(&self) -> String {
        format!("Expression({:?}, order={})", self.inner.source(), self.inner.order())
    }
}

#[pymodule]
fn tvckit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TvcError", m.py().get_type::<TvcError>())?;
    m.add("__version__", tvc_core::report::VERSION)?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyExpression>()?;
    m.add_function(wrap_pyfunction!(run_demo, m)?)?;
    m.add_function(wrap_pyfunction!(demos, m)?)?;
    m.add_function(wrap_pyfunction!(fixtures, m)?)?;
    m.add_function(wrap_pyfunction!(household_identity, m)?)?;
    Ok(())
}
