//! Python bindings: instances, rosters, evaluation, search, generation and
//! the exhaustive oracle. Structured results cross the boundary as plain
//! dicts and lists decoded from the same JSON the CLI and service emit.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::Serialize;

use nsp_core::constraints::{self, Report};
use nsp_core::generator::{self, GeneratorConfig, ScenarioKind};
use nsp_core::oracle as core_oracle;
use nsp_core::search::{self, CellDirectives, SearchConfig, Strategy, TimeModel};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts a JSON string or any JSON-serializable Python object.
fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_str()?.to_owned());
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// A validated rostering instance.
#[pyclass(module = "nsp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Instance {
    inner: nsp_core::Instance,
}

#[pymethods]
impl Instance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        nsp_core::Instance::from_json(text).map(|inner| Instance { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| value_error(format!("{path}: {e}")))?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn nurse_count(&self) -> usize {
        self.inner.nurse_count()
    }

    #[getter]
    fn horizon_days(&self) -> i32 {
        self.inner.horizon_days()
    }

    #[getter]
    fn nurse_ids(&self) -> Vec<String> {
        (0..self.inner.nurse_count()).map(|n| self.inner.nurse_id(n).to_string()).collect()
    }

    /// Stable content hash of the canonical document.
    fn hash(&self) -> String {
        core_oracle::instance_hash(&self.inner)
    }

    /// Shift codes allowed in a cell, or `None` outside the horizon.
    fn domain(&self, nurse: &str, day: i32) -> Option<Vec<String>> {
        self.inner.cell_domain_codes(nurse, day).map(|v| v.into_iter().map(String::from).collect())
    }

    fn __repr__(&self) -> String {
        format!("Instance(nurses={}, days={})", self.inner.nurse_count(), self.inner.horizon_days())
    }
}

/// A complete assignment over an instance's window.
#[pyclass(module = "nsp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Roster {
    inner: nsp_core::Roster,
}

#[pymethods]
impl Roster {
    #[staticmethod]
    fn from_json(text: &str, instance: &Instance) -> PyResult<Self> {
        nsp_core::Roster::from_json(text, &instance.inner).map(|inner| Roster { inner }).map_err(value_error)
    }

    /// Builds a roster from `{nurse_id: [code per decision day]}`.
    #[staticmethod]
    fn from_rows(rows: std::collections::BTreeMap<String, Vec<String>>, instance: &Instance) -> PyResult<Self> {
        let inst = &instance.inner;
        let mut core = std::collections::BTreeMap::new();
        for (nurse, codes) in &rows {
            let n = inst.nurse_index(nurse).ok_or_else(|| value_error(format!("unknown nurse {nurse}")))?;
            for (d, code) in codes.iter().enumerate() {
                let s = inst.shift_index(code).ok_or_else(|| value_error(format!("unknown shift {code}")))?;
                core.insert((n, inst.first_day() + d as i32), s);
            }
        }
        inst.complete(&core).map(|inner| Roster { inner }).map_err(value_error)
    }

    fn to_json(&self, instance: &Instance) -> String {
        self.inner.to_json(&instance.inner)
    }

    /// The shift code of one cell.
    fn get(&self, instance: &Instance, nurse: &str, day: i32) -> PyResult<String> {
        let inst = &instance.inner;
        let n = inst.nurse_index(nurse).ok_or_else(|| value_error(format!("unknown nurse {nurse}")))?;
        let s = self.inner.try_get(n, day).ok_or_else(|| value_error(format!("day {day} outside the window")))?;
        Ok(inst.shift_code(s).to_string())
    }

    fn render(&self, instance: &Instance) -> String {
        self.inner.render(&instance.inner)
    }

    fn __eq__(&self, other: &Roster) -> bool {
        self.inner == other.inner
    }
}

/// Violation report of `roster` as a dict with `feasible`, `violations`
/// and `penalty_vector`.
#[pyfunction]
#[pyo3(signature = (roster, instance, soften=false))]
fn evaluate<'py>(py: Python<'py>, roster: &Roster, instance: &Instance, soften: bool) -> PyResult<Bound<'py, PyAny>> {
    let eval = constraints::evaluate(&roster.inner, &instance.inner, soften);
    to_py(py, &Report::new(&eval, &instance.inner))
}

/// Runs one search. `strategy` takes names such as `LNPS-10`, `MP-High`
/// or `MP+IS-Low`; `directives` is a dict or JSON string with `fixed`,
/// `prioritized` and `cleared` cell lists. Returns a dict with the final
/// status, the best roster (or `None`), its penalty vector and the
/// incumbent records.
#[pyfunction]
#[pyo3(signature = (instance, strategy="LNPS-10", time_limit=60.0, seed=0, soften=false, evals_per_second=None, directives=None))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    instance: &Instance,
    strategy: &str,
    time_limit: f64,
    seed: u64,
    soften: bool,
    evals_per_second: Option<u64>,
    directives: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let strategy: Strategy = strategy.parse().map_err(value_error)?;
    let mut cfg = SearchConfig::new(strategy, time_limit, seed);
    cfg.soften_hard = soften;
    if let Some(rate) = evals_per_second {
        cfg.time_model = TimeModel::Iterations { per_second: rate };
    }
    let directives: CellDirectives = match directives {
        Some(d) => serde_json::from_str(&json_text(d)?).map_err(value_error)?,
        None => CellDirectives::default(),
    };
    let inst = instance.inner.clone();
    let (trace, out) = py.detach(|| search::solve_collect(&inst, &cfg, &directives)).map_err(value_error)?;

    let records: Vec<_> = trace.iter().map(|i| i.record(format!("incumbent-{}", i.sequence))).collect();
    let summary = serde_json::json!({
        "status": out.status,
        "penalty_vector": out.best.as_ref().map(|b| &b.penalties),
        "hard_weight": out.best.as_ref().map(|b| b.hard_weight),
        "modification_rate": out.best.as_ref().and_then(|b| b.modification_rate()),
        "iterations": out.iterations,
        "automatic_restarts": out.automatic_restarts,
        "elapsed_seconds": out.elapsed_seconds,
        "incumbents": records,
    });
    let dict = to_py(py, &summary)?;
    let best = out.best.map(|b| Roster { inner: b.roster });
    dict.set_item("roster", best)?;
    Ok(dict)
}

/// Seeded instance generator.
#[pyfunction]
#[pyo3(signature = (nurses, seed=0, days=28, density=0.10, past_days=7, compact=false))]
fn generate(nurses: usize, seed: u64, days: u32, density: f64, past_days: u32, compact: bool) -> PyResult<Instance> {
    let mut cfg = GeneratorConfig::new(nurses, seed);
    cfg.horizon_days = days;
    cfg.request_density = density;
    cfg.past_days = past_days;
    cfg.compact = compact;
    generator::generate(&cfg).map(|inner| Instance { inner }).map_err(value_error)
}

/// Derives a rescheduling scenario. Returns the edited instance and its
/// directives as a dict.
#[pyfunction]
#[pyo3(signature = (instance, initial, kind, seed=0, extra_density=0.05))]
fn make_scenario<'py>(
    py: Python<'py>,
    instance: &Instance,
    initial: &Roster,
    kind: &str,
    seed: u64,
    extra_density: f64,
) -> PyResult<(Instance, Bound<'py, PyAny>)> {
    let kind: ScenarioKind = kind.parse().map_err(value_error)?;
    let (inner, directives) =
        generator::make_scenario(&instance.inner, &initial.inner, kind, seed, extra_density).map_err(value_error)?;
    Ok((Instance { inner }, to_py(py, &directives)?))
}

/// Exhaustive optimum of a small instance: a dict with `optimum`,
/// `hard_weight`, `feasible`, `optimal_count`, `explored` and up to `cap`
/// witness rosters under `rosters`.
#[pyfunction]
#[pyo3(signature = (instance, soften=false, cap=3))]
fn oracle<'py>(py: Python<'py>, instance: &Instance, soften: bool, cap: usize) -> PyResult<Bound<'py, PyAny>> {
    let inst = instance.inner.clone();
    let result = py.detach(|| core_oracle::enumerate_optimal(&inst, soften, cap)).map_err(value_error)?;
    let dict = to_py(
        py,
        &serde_json::json!({
            "optimum": result.optimum,
            "hard_weight": result.hard_weight,
            "feasible": result.feasible,
            "optimal_count": result.optimal_count,
            "explored": result.explored,
        }),
    )?;
    let rosters: Vec<Roster> = result.optimal_rosters.into_iter().map(|inner| Roster { inner }).collect();
    dict.set_item("rosters", rosters)?;
    Ok(dict)
}

#[pymodule]
pub fn nsp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Roster>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(make_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add("MAX_SPACE", core_oracle::MAX_SPACE)?;
    Ok(())
}
