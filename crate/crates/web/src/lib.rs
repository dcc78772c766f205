//! Browser bindings: solve a manufactured case and return a renderable
//! field, run the average/jump comparison, and check the Laplacian oracle.
//!
//! Every export returns a JSON string; the plain functions are used by the
//! native tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use compsurf::assembly::{assemble, Discretization, Stabilizer};
use compsurf::manufactured::{make_case, metric_laplacian, CASE_NAMES, ORACLE_STEP};
use compsurf::mesh::MeshMode;
use compsurf::polygon::Point;
use compsurf::random::{rng, uniform};
use compsurf::solve::{error_norms, kirchhoff_residual, solve_system};
use compsurf::study::{run_dg_equivalence, DgEquivalenceRow, RunConfig};
use compsurf::vtk::sample_field;

/// Smallest mesh size and largest number of unknowns accepted by
/// [`solve_summary`].
pub const MIN_H: f64 = 0.02;
pub const MAX_DOFS: usize = 60_000;

#[derive(Debug, Serialize)]
pub struct FieldSummary {
    pub case: String,
    pub p: usize,
    pub h: f64,
    pub dof_count: usize,
    pub l2_error: f64,
    pub energy_error: f64,
    pub kirchhoff_max: f64,
    /// Flattened `x y z` of every triangle vertex.
    pub points: Vec<f32>,
    pub u: Vec<f32>,
    pub grad_magnitude: Vec<f32>,
}

fn stabilizer(name: &str) -> Result<Stabilizer, String> {
    match name {
        "jump" => Ok(Stabilizer::Jump),
        "gradvar" => Ok(Stabilizer::Gradvar),
        "none" => Ok(Stabilizer::None),
        _ => Err(format!("unknown stabilizer `{name}`")),
    }
}

pub fn solve_summary(case: &str, p: usize, h: f64, stab: &str) -> Result<FieldSummary, String> {
    let e = |e: compsurf::Error| e.to_string();
    if !(h >= MIN_H) {
        return Err(format!("h = {h} is below the browser limit of {MIN_H}"));
    }
    let mc = make_case(case).map_err(e)?;
    let cfg = RunConfig {
        case: case.into(),
        p,
        levels: vec![h],
        mesh_mode: MeshMode::Cut,
        stabilizer: stabilizer(stab)?,
        ..Default::default()
    };
    cfg.validate().map_err(e)?;
    let disc: Discretization = cfg.discretization(&mc, h).map_err(e)?;
    if disc.ndofs() > MAX_DOFS {
        return Err(format!("{} unknowns exceed the browser limit of {MAX_DOFS}; use a larger h", disc.ndofs()));
    }
    let sys = assemble(&disc, &cfg.problem(&mc)).map_err(e)?;
    let (u, _) = solve_system(&sys.a, &sys.b).map_err(e)?;
    let exact = mc.exact_fn();
    let norms = error_norms(&disc, &u, &exact).map_err(e)?;
    let mut kirchhoff_max = 0.0f64;
    for j in 0..disc.surface.interfaces().len() {
        kirchhoff_max = kirchhoff_max.max(kirchhoff_residual(&disc, &u, j).map_err(e)?);
    }
    let field = sample_field(&disc, &u).map_err(e)?;
    Ok(FieldSummary {
        case: case.into(),
        p,
        h,
        dof_count: disc.ndofs(),
        l2_error: norms.l2,
        energy_error: norms.energy,
        kirchhoff_max,
        points: field.points.iter().flatten().map(|v| *v as f32).collect(),
        u: field.u.iter().map(|v| *v as f32).collect(),
        grad_magnitude: field.grad_magnitude.iter().map(|v| *v as f32).collect(),
    })
}

pub fn dg_rows(p: usize, h: f64, beta: f64) -> Result<Vec<DgEquivalenceRow>, String> {
    let cfg = RunConfig {
        p,
        levels: vec![h],
        beta,
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    run_dg_equivalence(&cfg).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct OracleRow {
    pub case: String,
    pub points: usize,
    pub max_discrepancy: f64,
}

/// Extension-formula Laplacian against the finite-difference metric
/// Laplacian at `n` random points of every case.
pub fn oracle_rows(n: usize, seed: u64) -> Result<Vec<OracleRow>, String> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for name in CASE_NAMES {
        let case = make_case(name).map_err(|e| e.to_string())?;
        let patches = case.surface.patches();
        let mut worst = 0.0f64;
        let mut k = 0;
        while k < n {
            let i = ((uniform(&mut r) * patches.len() as f64) as usize).min(patches.len() - 1);
            let (lo, hi) = patches[i].domain.bounds();
            let x = Point::new(
                lo[0] + uniform(&mut r) * (hi[0] - lo[0]),
                lo[1] + uniform(&mut r) * (hi[1] - lo[1]),
            );
            if !patches[i].domain.contains(&x) {
                continue;
            }
            let fd = metric_laplacian(|y| case.exact[i].value(y), &patches[i].map, &x, ORACLE_STEP);
            worst = worst.max((case.laplacian(i, &x) - fd).abs());
            k += 1;
        }
        out.push(OracleRow {
            case: name.into(),
            points: n,
            max_discrepancy: worst,
        });
    }
    Ok(out)
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn case_names() -> String {
    serde_json::to_string(&CASE_NAMES).unwrap_or_default()
}

#[wasm_bindgen]
pub fn solve(case: &str, p: usize, h: f64, stabilizer: &str) -> Result<String, JsValue> {
    to_js(solve_summary(case, p, h, stabilizer))
}

#[wasm_bindgen]
pub fn dg_equivalence(p: usize, h: f64, beta: f64) -> Result<String, JsValue> {
    to_js(dg_rows(p, h, beta))
}

#[wasm_bindgen]
pub fn laplacian_oracle(n: usize, seed: u32) -> Result<String, JsValue> {
    to_js(oracle_rows(n, seed as u64))
}
