//! Browser bindings: three operations, each returning a JSON string.
//!
//! The plain functions are callable and tested natively; the `wasm_bindgen`
//! wrappers only convert errors to JS strings.

use std::sync::Arc;

use pavlab::finite_vn::io;
use pavlab::free_model::{conjugation_paving_experiment, sample, EnsembleKind, EnsembleSpec};
use pavlab::paving::{pave_search, paving_number_exact, SearchConfig, EXHAUSTIVE_MAX_DIM};
use pavlab::{MasaFrame, Strategy};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest dimension the page offers; keeps a search under a second.
pub const MAX_DEMO_DIM: usize = 96;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Paves a zero-diagonal Haar element and returns the report, the partition
/// and the entry moduli with rows and columns grouped by block.
pub fn pave_random(dim: usize, eps: f64, strategy: &str, seed: u64) -> Result<String, String> {
    if !(2..=MAX_DEMO_DIM).contains(&dim) {
        return Err(format!("dimension must lie in 2..={MAX_DEMO_DIM}"));
    }
    let strategy: Strategy = strategy.parse().map_err(err)?;
    if strategy == Strategy::Exhaustive && dim > EXHAUSTIVE_MAX_DIM {
        return Err(format!("exhaustive search needs dim <= {EXHAUSTIVE_MAX_DIM}"));
    }
    let x = sample(&EnsembleSpec::new(EnsembleKind::ZeroDiagHaar, dim, seed)).map_err(err)?;
    let frame = Arc::new(MasaFrame::diagonal(dim));
    let (part, report) = pave_search(&x, frame, eps, &SearchConfig::new(strategy, 200, seed)).map_err(err)?;
    let order: Vec<usize> = part.blocks().concat();
    let moduli: Vec<Vec<f64>> = order.iter().map(|&i| order.iter().map(|&j| x[(i, j)].norm()).collect()).collect();
    Ok(json!({
        "report": report,
        "partition": part,
        "block_sizes": part.block_sizes(),
        "order": order,
        "moduli": moduli,
    })
    .to_string())
}

/// Compression of a zero-diagonal Haar element by `n` roots-of-unity blocks,
/// against `(sqrt(n - 1) + 1) / n`.
pub fn conjugation(n: usize, dim: usize, seed: u64) -> Result<String, String> {
    if !(2..=MAX_DEMO_DIM).contains(&dim) {
        return Err(format!("dimension must lie in 2..={MAX_DEMO_DIM}"));
    }
    let r = conjugation_paving_experiment(n, dim, seed).map_err(err)?;
    serde_json::to_string(&r).map_err(err)
}

/// Exact paving number of a matrix given in the JSON file format.
pub fn exact(matrix_json: &str, eps: f64) -> Result<String, String> {
    let x = io::from_json(matrix_json).map_err(err)?;
    let dim = x.dim();
    let ex = paving_number_exact(&x, eps, Arc::new(MasaFrame::diagonal(dim)), dim).map_err(err)?;
    serde_json::to_string(&ex).map_err(err)
}

#[wasm_bindgen(js_name = paveRandom)]
pub fn pave_random_js(dim: usize, eps: f64, strategy: &str, seed: u32) -> Result<String, JsValue> {
    pave_random(dim, eps, strategy, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = conjugation)]
pub fn conjugation_js(n: usize, dim: usize, seed: u32) -> Result<String, JsValue> {
    conjugation(n, dim, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = exactPaving)]
pub fn exact_js(matrix_json: &str, eps: f64) -> Result<String, JsValue> {
    exact(matrix_json, eps).map_err(|e| JsValue::from_str(&e))
}
