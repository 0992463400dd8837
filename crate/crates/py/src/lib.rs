//! Python bindings: scenarios, closed-loop runs, the studies and the LP solver.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use microclimate::comfort::min_ventilation;
use microclimate::dynamics::steady_state;
use microclimate::error::Error;
use microclimate::harness::{
    compare_controllers, horizon_study, rolling_run, uncertainty_study, ControllerKind, DisturbanceSpec, RunOptions,
    RunResult,
};
use microclimate::lp::{solve_lp, LinearProgram};
use microclimate::model::DayType;
use microclimate::scenario::{export_run, resolve_scenario, Metrics};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Numeric(_) | Error::Solver(_) => PyRuntimeError::new_err(e.to_string()),
        Error::Cycle { ref source, .. } if matches!(**source, Error::Numeric(_) | Error::Solver(_)) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// A room, its comfort targets, forecast and initial state.
#[pyclass(name = "Scenario", module = "microclimate_py", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: microclimate::scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Built-in name (tc1, tc2, tc2_svs) or path to a JSON config.
    #[new]
    #[pyo3(signature = (name, day = "cold"))]
    fn new(name: &str, day: &str) -> PyResult<Self> {
        Ok(Self {
            inner: resolve_scenario(name, parse::<DayType>(day)?).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn day(&self) -> String {
        self.inner.day_type.to_string()
    }

    #[getter]
    fn w_max(&self) -> f64 {
        self.inner.params.w_max
    }

    #[setter]
    fn set_w_max(&mut self, watts: f64) -> PyResult<()> {
        let mut params = self.inner.params.clone();
        params.w_max = watts;
        params.validate().map_err(py_err)?;
        self.inner.params = params;
        Ok(())
    }

    #[getter]
    fn t_comf(&self) -> f64 {
        self.inner.comfort.t_comf
    }

    #[setter]
    fn set_t_comf(&mut self, celsius: f64) -> PyResult<()> {
        let mut comfort = self.inner.comfort.clone();
        comfort.t_comf = celsius;
        comfort.validate().map_err(py_err)?;
        self.inner.comfort = comfort;
        Ok(())
    }

    /// Room parameters as a dict.
    fn params(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.inner.params)
    }

    /// Forecast as (times [s], outside temperatures [°C], occupancy).
    fn forecast(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let e = &self.inner.exo;
        (e.times().to_vec(), e.outside_temperatures().to_vec(), e.occupancy().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Scenario('{}')", self.inner.name)
    }
}

/// Outcome of one closed-loop day.
#[pyclass(name = "RunResult", module = "microclimate_py")]
struct PyRunResult {
    inner: RunResult,
    comfort: microclimate::model::ComfortSpec,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn controller(&self) -> String {
        self.inner.controller.to_string()
    }

    #[getter]
    fn total_kwh(&self) -> f64 {
        self.inner.energy.total / 1000.0
    }

    /// Comfort penalty [K·h].
    #[getter]
    fn penalty(&self) -> f64 {
        self.inner.penalty
    }

    #[getter]
    fn max_co2_ppm(&self) -> f64 {
        self.inner.max_co2_ppm
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.trajectory.t.clone()
    }

    #[getter]
    fn temperatures(&self) -> Vec<f64> {
        self.inner.trajectory.states.iter().map(|s| s.t).collect()
    }

    #[getter]
    fn co2_ppm(&self) -> Vec<f64> {
        self.inner.trajectory.states.iter().map(|s| s.co2_ppm()).collect()
    }

    #[getter]
    fn power(&self) -> Vec<f64> {
        self.inner.trajectory.applied_w.clone()
    }

    #[getter]
    fn ventilation(&self) -> Vec<f64> {
        self.inner.trajectory.applied_q.clone()
    }

    /// The metrics.json content as a dict.
    fn metrics(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &Metrics::from_result(&self.inner))
    }

    /// Writes trajectory.csv, metrics.json and timings.json into `out`.
    fn export(&self, out: PathBuf) -> PyResult<()> {
        export_run(&self.inner, &out, &self.comfort).map(|_| ()).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult({}, {}, total={:.3} kWh, penalty={:.4} K·h)",
            self.inner.scenario,
            self.inner.controller,
            self.total_kwh(),
            self.inner.penalty
        )
    }
}

fn options(replan: f64, seed: Option<u64>) -> RunOptions {
    RunOptions {
        replan_interval: replan,
        disturbance: seed.map(DisturbanceSpec::with_seed),
        ..RunOptions::default()
    }
}

/// Runs one controller ("mpc", "lmpc", "onoff") over the scenario's day.
///
/// A seed turns on the default measurement and forecast disturbance.
#[pyfunction]
#[pyo3(signature = (scenario, controller = "mpc", replan = 3600.0, seed = None))]
fn simulate(py: Python<'_>, scenario: &PyScenario, controller: &str, replan: f64, seed: Option<u64>) -> PyResult<PyRunResult> {
    let kind: ControllerKind = parse(controller)?;
    let opts = options(replan, seed);
    let sc = scenario.inner.clone();
    let inner = py.detach(|| rolling_run(&sc, kind, &opts)).map_err(py_err)?;
    Ok(PyRunResult {
        inner,
        comfort: sc.comfort,
    })
}

/// All three controllers; returns a list of row dicts.
#[pyfunction]
#[pyo3(signature = (scenario, replan = 3600.0))]
fn compare(py: Python<'_>, scenario: &PyScenario, replan: f64) -> PyResult<Py<PyAny>> {
    let sc = scenario.inner.clone();
    let (rows, _) = py
        .detach(|| compare_controllers(&sc, &ControllerKind::ALL, &options(replan, None)))
        .map_err(py_err)?;
    json_to_py(py, &rows)
}

/// Closed-loop MPC with fixed planning windows [h]; returns a list of row dicts.
#[pyfunction]
fn horizon(py: Python<'_>, scenario: &PyScenario, horizons: Vec<usize>) -> PyResult<Py<PyAny>> {
    let sc = scenario.inner.clone();
    let rows = py
        .detach(|| horizon_study(&sc, &horizons, &RunOptions::default()))
        .map_err(py_err)?;
    json_to_py(py, &rows)
}

/// MPC and LMPC over seeds 0..seeds; returns the per-controller summaries.
#[pyfunction]
#[pyo3(signature = (scenario, seeds = 20, replan = 360.0))]
fn uncertainty(py: Python<'_>, scenario: &PyScenario, seeds: u64, replan: f64) -> PyResult<Py<PyAny>> {
    let sc = scenario.inner.clone();
    let (_, summary) = py
        .detach(|| {
            uncertainty_study(
                &sc,
                &[ControllerKind::Mpc, ControllerKind::Lmpc],
                seeds,
                &DisturbanceSpec::default(),
                &options(replan, None),
            )
        })
        .map_err(py_err)?;
    json_to_py(py, &summary)
}

/// Ventilation flow [kg/s] holding CO₂ at the scenario's cap for `n_oc` people.
#[pyfunction]
fn minimum_ventilation(scenario: &PyScenario, n_oc: f64) -> f64 {
    min_ventilation(n_oc, &scenario.inner.comfort)
}

/// Equilibrium (T, T⋆, CO₂ ppm) under constant inputs.
#[pyfunction]
fn equilibrium(scenario: &PyScenario, w: f64, q: f64, t_out: f64, n_oc: f64) -> PyResult<(f64, f64, f64)> {
    let s = steady_state(w, q, t_out, n_oc, &scenario.inner.params, &scenario.inner.comfort).map_err(py_err)?;
    Ok((s.t, s.t_star, s.co2_ppm()))
}

/// Minimizes c·x subject to A_ub x <= b_ub, A_eq x = b_eq and bounds.
///
/// `bounds` holds one (lower, upper) pair per variable, None meaning
/// unbounded; the default is x >= 0. Returns a dict with status, x,
/// objective and iterations.
#[pyfunction]
#[pyo3(signature = (c, a_ub = None, b_ub = None, a_eq = None, b_eq = None, bounds = None))]
fn linprog<'py>(
    py: Python<'py>,
    c: Vec<f64>,
    a_ub: Option<Vec<Vec<f64>>>,
    b_ub: Option<Vec<f64>>,
    a_eq: Option<Vec<Vec<f64>>>,
    b_eq: Option<Vec<f64>>,
    bounds: Option<Vec<(Option<f64>, Option<f64>)>>,
) -> PyResult<Bound<'py, PyDict>> {
    let n = c.len();
    let mut lp = LinearProgram::new(c);
    let rows = |a: Option<Vec<Vec<f64>>>, b: Option<Vec<f64>>, what: &str| -> PyResult<Vec<(Vec<f64>, f64)>> {
        let (a, b) = (a.unwrap_or_default(), b.unwrap_or_default());
        if a.len() != b.len() {
            return Err(PyValueError::new_err(format!("{what}: {} rows but {} right-hand sides", a.len(), b.len())));
        }
        Ok(a.into_iter().zip(b).collect())
    };
    for (row, rhs) in rows(a_ub, b_ub, "inequalities")? {
        lp.add_ub(row, rhs);
    }
    for (row, rhs) in rows(a_eq, b_eq, "equalities")? {
        lp.add_eq(row, rhs);
    }
    if let Some(bounds) = bounds {
        if bounds.len() != n {
            return Err(PyValueError::new_err(format!("{} bounds for {n} variables", bounds.len())));
        }
        for (j, (lo, hi)) in bounds.into_iter().enumerate() {
            lp.lb[j] = lo.unwrap_or(f64::NEG_INFINITY);
            lp.ub[j] = hi.unwrap_or(f64::INFINITY);
        }
    }
    let sol = solve_lp(&lp).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("status", format!("{:?}", sol.status).to_lowercase())?;
    out.set_item("x", sol.x)?;
    out.set_item("objective", sol.objective)?;
    out.set_item("iterations", sol.iterations)?;
    Ok(out)
}

#[pymodule]
fn microclimate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(horizon, m)?)?;
    m.add_function(wrap_pyfunction!(uncertainty, m)?)?;
    m.add_function(wrap_pyfunction!(minimum_ventilation, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(linprog, m)?)?;
    Ok(())
}
