//! Browser bindings. Each entry point returns a JSON string for the page.

use fraclab::constants::{one_plane_solution, FracParams};
use fraclab::diagnostics::{self, ExtendedSystem};
use fraclab::eigen::lowest_eigenpairs;
use fraclab::extension::SlabGrid;
use fraclab::form::StiffnessForm;
use fraclab::grid::{BoxGrid, ThinDomain};
use fraclab::shape_opt::{self, OptimizerConfig, Schedule};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(e: fraclab::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn line_coords(grid: &BoxGrid) -> Vec<f64> {
    (0..grid.node_count()).map(|i| grid.coords(i)[0]).collect()
}

/// Lowest `m` eigenpairs of the interval (a, b) inside (−2, 2).
pub fn interval_eigenpairs(s: f64, a: f64, b: f64, cells: usize, m: usize) -> fraclab::Result<serde_json::Value> {
    let params = FracParams::new(1, s, 1.0)?;
    let grid = BoxGrid::new(1, -2.0, 2.0, cells)?;
    let dom = ThinDomain::interval(grid.clone(), a, b);
    let form = StiffnessForm::assemble(&dom, &params)?;
    let bundle = lowest_eigenpairs(&form, m)?;
    let fields: Vec<Vec<f64>> = (0..bundle.m()).map(|i| bundle.full_field(i)).collect();
    Ok(json!({ "x": line_coords(&grid), "lambdas": bundle.lambdas(), "fields": fields }))
}

#[wasm_bindgen(js_name = intervalEigenpairs)]
pub fn interval_eigenpairs_js(s: f64, a: f64, b: f64, cells: usize, m: usize) -> Result<String, JsError> {
    interval_eigenpairs(s, a, b, cells, m).map(|v| v.to_string()).map_err(js)
}

/// Half-plane profile c·U on a (t, y) raster and its normalized Weiss
/// density over a range of radii.
pub fn plane_profile(s: f64, cells: usize) -> fraclab::Result<serde_json::Value> {
    let params = FracParams::new(1, s, 1.0)?;
    let c = params.slope_const();
    let slab = SlabGrid::graded(BoxGrid::new(1, -2.0, 2.0, cells)?, 64, 4.0, &params)?;
    let sys = ExtendedSystem::one_plane(&slab, [0.0, 0.0], [1.0, 0.0], c, s)?;
    let radii: Vec<f64> = (0..7).map(|k| 0.1 + 0.05 * k as f64).collect();
    let density: Vec<f64> = radii
        .iter()
        .map(|&r| diagnostics::weiss_energy(&sys, [0.0, 0.0], r, &params).map(|v| v.density(&params)))
        .collect::<fraclab::Result<_>>()?;
    let (nt, ny) = (121, 60);
    let raster: Vec<Vec<f64>> = (0..ny)
        .map(|j| {
            let y = 1.0 - j as f64 / (ny - 1) as f64;
            (0..nt).map(|i| c * one_plane_solution(-1.0 + 2.0 * i as f64 / (nt - 1) as f64, y, s)).collect()
        })
        .collect();
    Ok(json!({ "radii": radii, "density": density, "raster": raster, "t_range": [-1.0, 1.0], "y_range": [0.0, 1.0] }))
}

#[wasm_bindgen(js_name = planeProfile)]
pub fn plane_profile_js(s: f64, cells: usize) -> Result<String, JsError> {
    plane_profile(s, cells).map(|v| v.to_string()).map_err(js)
}

/// Annealed pixel search on a line, polished greedily.
pub fn optimize_line(s: f64, lambda: f64, cells: usize, m: usize, seed: u64) -> fraclab::Result<serde_json::Value> {
    let params = FracParams::new(1, s, lambda)?;
    let grid = BoxGrid::new(1, -2.0, 2.0, cells)?;
    let cfg = OptimizerConfig {
        m,
        schedule: Schedule::Anneal { t0: 0.1, cooling: 0.99, steps: 300 },
        seed,
        ..Default::default()
    };
    let trace = shape_opt::optimize(&grid, &cfg, &params, None)?;
    let objective: Vec<f64> = trace.records.iter().filter(|r| r.accepted).map(|r| r.objective).collect();
    Ok(json!({
        "x": line_coords(&grid),
        "mask": trace.best.mask(),
        "objective": objective,
        "best_objective": trace.best_objective,
        "lambdas": trace.best_lambdas,
        "measure": trace.best.measure(),
    }))
}

#[wasm_bindgen(js_name = optimizeLine)]
pub fn optimize_line_js(s: f64, lambda: f64, cells: usize, m: usize, seed: u32) -> Result<String, JsError> {
    optimize_line(s, lambda, cells, m, seed.into()).map(|v| v.to_string()).map_err(js)
}
