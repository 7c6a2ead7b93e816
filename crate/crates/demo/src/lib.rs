//! Browser demo: learning curves on the bundled fixtures, a violation
//! explorer for hand-edited networks, and a sampler preview.
//!
//! Each operation has a plain Rust entry point returning JSON (or CSV) text
//! and a thin `wasm_bindgen` wrapper.

use qcbn::datagen::{fixture_by_name, Fixture};
use qcbn::eval::avg_neg_log_likelihood;
use qcbn::io::{parse_constraints, parse_network};
use qcbn::learning::{learn, random_init, Algorithm, LearnConfig, RunTrace};
use qcbn::InequalitySystem;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("unknown fixture `{0}` (expected structure1 or structure2)")]
    UnknownFixture(String),
    #[error("{0} must be between {1} and {2}")]
    OutOfRange(&'static str, usize, usize),
    #[error(transparent)]
    Qcbn(#[from] qcbn::Error),
}

pub type Result<T> = std::result::Result<T, DemoError>;

/// Most violated inequalities listed by the explorer.
pub const MAX_LISTED: usize = 40;

fn fixture(name: &str) -> Result<Fixture> {
    fixture_by_name(name).ok_or_else(|| DemoError::UnknownFixture(name.to_string()))
}

fn check_range(what: &'static str, value: usize, lo: usize, hi: usize) -> Result<()> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(DemoError::OutOfRange(what, lo, hi))
    }
}

fn curve(trace: &RunTrace) -> Value {
    json!({
        "train": trace.rows.iter().map(|r| r.train_nll_per_case).collect::<Vec<_>>(),
        "test": trace.rows.iter().map(|r| r.test_nll_per_case).collect::<Vec<_>>(),
        "violation": trace.rows.iter().map(|r| r.violation).collect::<Vec<_>>(),
    })
}

/// The fixture's network and constraint files, as shown in the editor.
pub fn fixture_files(name: &str) -> Result<String> {
    let f = fixture(name)?;
    Ok(json!({
        "network": f.network_json,
        "constraints": f.constraints_json,
        "hidden": f.hidden,
        "target": f.target,
    })
    .to_string())
}

/// Runs em and em-qc from the same random start and returns their curves
/// together with the generating network's scores.
pub fn learning_curves(name: &str, train_count: usize, iterations: usize, weight: f64, seed: u64) -> Result<String> {
    check_range("train_count", train_count, 10, 5000)?;
    check_range("iterations", iterations, 1, 300)?;
    let f = fixture(name)?;
    let train = f.sample(train_count, seed);
    let test = f.sample(2000, seed.wrapping_add(1));
    let init = random_init(f.network.shared_structure(), seed);
    let mut curves = serde_json::Map::new();
    let mut iters = Vec::new();
    for alg in [Algorithm::Em, Algorithm::EmQc] {
        let cfg = LearnConfig {
            iterations,
            penalty_weight: weight,
            seed,
            ..LearnConfig::new(alg)
        };
        cfg.validate()?;
        let (_, trace) = learn(&init, &train, Some(&f.constraints), &cfg, Some(&test)).map_err(|e| e.error)?;
        iters = trace.rows.iter().map(|r| r.iteration).collect();
        curves.insert(alg.as_str().to_string(), curve(&trace));
    }
    Ok(json!({
        "iterations": iters,
        "curves": curves,
        "baseline": {
            "train": avg_neg_log_likelihood(&f.network, &train)?,
            "test": avg_neg_log_likelihood(&f.network, &test)?,
        },
    })
    .to_string())
}

/// Violation audit of an edited network under an edited constraint set.
pub fn violation_explorer(network_json: &str, constraints_json: &str) -> Result<String> {
    let net = parse_network(network_json, "network")?;
    let cs = parse_constraints(constraints_json, "constraints", net.structure())?;
    let report = InequalitySystem::new(net.structure(), &cs)?.audit(&net);
    let listed: Vec<Value> = report
        .violated
        .iter()
        .take(MAX_LISTED)
        .map(|r| {
            json!({
                "child": r.child,
                "parent": r.parent,
                "sign": r.sign.to_string(),
                "m": r.m,
                "i": r.i,
                "j": r.j,
                "context": r.context.iter().map(|(v, s)| format!("{v}={s}")).collect::<Vec<_>>(),
                "slack": r.slack,
                "partial": r.partial,
            })
        })
        .collect();
    Ok(json!({
        "total": report.total,
        "inequalities": report.inequality_count,
        "violated_count": report.violated.len(),
        "essentially_zero": report.is_essentially_zero(),
        "violated": listed,
    })
    .to_string())
}

/// CSV preview of forward samples, with the fixture's hidden variables
/// left out unless `show_hidden`.
pub fn sample_preview(name: &str, count: usize, seed: u64, show_hidden: bool) -> Result<String> {
    check_range("count", count, 1, 1000)?;
    let f = fixture(name)?;
    let data = if show_hidden {
        qcbn::datagen::forward_sample(&f.network, &qcbn::datagen::SamplingSpec::new(count, seed))?
    } else {
        f.sample(count, seed)
    };
    Ok(data.to_csv(f.network.structure()))
}

fn js(e: DemoError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = fixtureFiles)]
pub fn fixture_files_js(name: &str) -> std::result::Result<String, JsError> {
    fixture_files(name).map_err(js)
}

#[wasm_bindgen(js_name = learningCurves)]
pub fn learning_curves_js(
    name: &str,
    train_count: u32,
    iterations: u32,
    weight: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    learning_curves(name, train_count as usize, iterations as usize, weight, seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = violationExplorer)]
pub fn violation_explorer_js(network_json: &str, constraints_json: &str) -> std::result::Result<String, JsError> {
    violation_explorer(network_json, constraints_json).map_err(js)
}

#[wasm_bindgen(js_name = samplePreview)]
pub fn sample_preview_js(name: &str, count: u32, seed: u32, show_hidden: bool) -> std::result::Result<String, JsError> {
    sample_preview(name, count as usize, seed as u64, show_hidden).map_err(js)
}
