//! Python module `gca`: frame grammar, cardinal axes, suite generation and
//! single-query solving over a scene file.

use std::sync::Arc;

use gca_core::bench::{generate_suite as generate, SuiteConfig};
use gca_core::constraint::{parse_frame_spec, render_frame_spec, FrameSpec};
use gca_core::geometry::{derive_cardinal_axes, Cardinal, Vec3};
use gca_core::orchestrator::{run_query, AgentConfig, AnswerFormat, QueryContext};
use gca_core::toolbox::SceneSpec;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Triple = (f64, f64, f64);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn triple(v: Vec3) -> Triple {
    (v.x, v.y, v.z)
}

/// Parses a reference-frame formalization into its JSON form.
#[pyfunction]
fn parse_frame(text: &str) -> PyResult<String> {
    let spec = parse_frame_spec(text).map_err(value_err)?;
    serde_json::to_string(&spec).map_err(value_err)
}

/// Canonical text of a frame given in JSON form.
#[pyfunction]
fn render_frame(spec_json: &str) -> PyResult<String> {
    let spec: FrameSpec = serde_json::from_str(spec_json).map_err(value_err)?;
    Ok(render_frame_spec(&spec))
}

/// World vectors `(north, east, south, west)` from one known direction.
#[pyfunction]
fn cardinal_axes(known: &str, anchor: Triple, down: Triple) -> PyResult<(Triple, Triple, Triple, Triple)> {
    let known: Cardinal = known.parse().map_err(PyValueError::new_err)?;
    let a = Vec3::new(anchor.0, anchor.1, anchor.2);
    let d = Vec3::new(down.0, down.1, down.2);
    let m = derive_cardinal_axes(known, &a, &d).map_err(value_err)?;
    Ok((triple(m.north), triple(m.east), triple(m.south), triple(m.west)))
}

/// Suite JSON with `per_category` questions in every category.
#[pyfunction]
fn generate_suite(seed: u64, per_category: usize) -> PyResult<String> {
    let suite = generate(seed, &SuiteConfig::uniform(per_category)).map_err(value_err)?;
    Ok(suite.to_json())
}

/// Runs one query with the scripted planner. Returns `(answer, option,
/// trace_jsonl)`; `answer` is `None` when the run failed.
#[pyfunction]
#[pyo3(signature = (scene_json, query, options=None))]
fn solve(scene_json: &str, query: &str, options: Option<Vec<String>>) -> PyResult<(Option<String>, Option<String>, String)> {
    let scene = SceneSpec::from_json(scene_json).map_err(value_err)?;
    let format = options.map_or(AnswerFormat::Free, AnswerFormat::Mcq);
    let ctx = QueryContext::with_scene(query, Arc::new(scene), format).map_err(value_err)?;
    let trace = run_query(&ctx, &AgentConfig::default()).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let (text, option) = match &trace.answer {
        Some(a) if trace.succeeded() => (Some(a.text.clone()), a.option.clone()),
        _ => (None, None),
    };
    Ok((text, option, trace.to_jsonl()))
}

#[pymodule]
fn gca(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_frame, m)?)?;
    m.add_function(wrap_pyfunction!(render_frame, m)?)?;
    m.add_function(wrap_pyfunction!(cardinal_axes, m)?)?;
    m.add_function(wrap_pyfunction!(generate_suite, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
