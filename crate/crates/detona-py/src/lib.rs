//! Python bindings. Structured arguments cross the boundary as JSON so the
//! core stays free of Python types; `core` holds the interpreter-free part.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

pub mod core {
    use std::path::Path;

    use detona::cli::{execute, load_config, Command};
    use detona::endstates::{endstate_eigenvalues, solve_right_state};
    use detona::evans::{evans_on_points, EvansOptions};
    use detona::evans::contour::winding_number;
    use detona::profile::{solve_profile, ProfileOptions};
    use detona::spectral::build_system;
    use detona::{DetonaError, ModelParams, Result, State};
    use num_complex::Complex64 as C64;
    use serde_json::{json, Value};

    fn parse<T: serde::de::DeserializeOwned>(key: &str, v: &Value) -> Result<T> {
        serde_json::from_value(v.clone()).map_err(|e| DetonaError::Config { key: key.into(), msg: e.to_string() })
    }

    fn params_of(v: &Value) -> Result<ModelParams> {
        let p: ModelParams = parse("params", v)?;
        p.validate()?;
        Ok(p)
    }

    pub fn run(command: &str, config: &Path, out: &Path, threads: Option<usize>) -> Result<Value> {
        let env: Vec<(String, String)> = std::env::vars().collect();
        let cmd: Command = serde_json::from_value(json!(command.to_lowercase()))
            .map_err(|_| DetonaError::Config { key: "command".into(), msg: format!("unknown command `{command}`") })?;
        let cfg = load_config(config, &env)?;
        execute(cmd, &cfg, out, threads)
    }

    pub fn endstates(params: &Value, left: &Value, z_plus: f64) -> Result<Value> {
        let p = params_of(params)?;
        let l: State = parse("left", left)?;
        let pair = solve_right_state(&l, p.qheat, z_plus, &p)?;
        let ev = endstate_eigenvalues(&pair, &p)?;
        Ok(json!({ "pair": pair, "eigenvalues": ev }))
    }

    /// Evans function of the profile joining `left` to its burned state.
    pub fn evans(params: &Value, left: &Value, z_plus: f64, lambdas: &[C64]) -> Result<Vec<(C64, f64)>> {
        let p = params_of(params)?;
        let l: State = parse("left", left)?;
        let pair = solve_right_state(&l, p.qheat, z_plus, &p)?;
        let prof = solve_profile(&pair, &p, &ProfileOptions::default(), None)?;
        let sys = build_system(&prof)?;
        let out = evans_on_points(&sys, lambdas, &EvansOptions::default())?;
        Ok(out.into_iter().map(|s| (s.d, s.conditioning)).collect())
    }

    pub fn winding(values: &[C64]) -> Result<i64> {
        winding_number(values)
    }
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let json = PyModule::import(py, "json")?;
    Ok(json.call_method1("loads", (v.to_string(),))?.unbind())
}

fn from_py(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let json = PyModule::import(py, "json")?;
    let s: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&s).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn err(e: detona::DetonaError) -> PyErr {
    match e {
        detona::DetonaError::Config { .. } => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(format!("{}: {}", e.kind(), e)),
    }
}

/// Run a CLI command; returns the command's JSON summary as Python objects.
#[pyfunction]
#[pyo3(signature = (command, config, out, threads=None))]
fn run(py: Python<'_>, command: &str, config: &str, out: &str, threads: Option<usize>) -> PyResult<Py<PyAny>> {
    let v = py
        .detach(|| core::run(command, config.as_ref(), out.as_ref(), threads))
        .map_err(err)?;
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (params, left, z_plus=1.0))]
fn endstates(py: Python<'_>, params: &Bound<'_, PyAny>, left: &Bound<'_, PyAny>, z_plus: f64) -> PyResult<Py<PyAny>> {
    let (p, l) = (from_py(py, params)?, from_py(py, left)?);
    let v = core::endstates(&p, &l, z_plus).map_err(err)?;
    to_py(py, &v)
}

/// Returns a list of (D(lambda), conditioning) pairs.
#[pyfunction]
#[pyo3(signature = (params, left, lambdas, z_plus=1.0))]
fn evans(
    py: Python<'_>,
    params: &Bound<'_, PyAny>,
    left: &Bound<'_, PyAny>,
    lambdas: Vec<num_complex::Complex64>,
    z_plus: f64,
) -> PyResult<Vec<(num_complex::Complex64, f64)>> {
    let (p, l) = (from_py(py, params)?, from_py(py, left)?);
    py.detach(|| core::evans(&p, &l, z_plus, &lambdas)).map_err(err)
}

#[pyfunction]
fn winding(values: Vec<num_complex::Complex64>) -> PyResult<i64> {
    core::winding(&values).map_err(err)
}

#[pymodule]
#[pyo3(name = "detona")]
fn detona_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(endstates, m)?)?;
    m.add_function(wrap_pyfunction!(evans, m)?)?;
    m.add_function(wrap_pyfunction!(winding, m)?)?;
    Ok(())
}
