//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::Instant;

use compsurf::assembly::{
    assemble, assemble_stab_gradvar, assemble_stab_jump, Discretization, ProblemData, Stabilizer,
};
use compsurf::manufactured::{make_case, metric_laplacian, CASE_NAMES, ORACLE_STEP};
use compsurf::mesh::{MeshMode, MeshOptions};
use compsurf::polygon::Point;
use compsurf::random::{rng, uniform};
use compsurf::solve::{dense_lambda_min, largest_eigenvalue, solve_system, Factorization};
use compsurf::study::{fitted_slope, run_condition_study, run_convergence, run_dg_equivalence, RunConfig};
use compsurf::Error;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn config(case: &str, p: usize, levels: &[f64], mode: MeshMode, stabilizer: Stabilizer) -> RunConfig {
    RunConfig {
        case: case.into(),
        p,
        levels: levels.to_vec(),
        mesh_mode: mode,
        stabilizer,
        ..Default::default()
    }
}

const CYL: &str = "intersecting_cylinders";

/// Refinement levels of the cylinder convergence runs, coarsest first.
fn cylinder_levels(p: usize) -> &'static [f64] {
    if p == 1 {
        &[0.4, 0.2, 0.1]
    } else {
        &[0.5, 0.25, 0.125]
    }
}

const CONDITION_LEVELS: [f64; 3] = [0.1, 0.05, 0.025];
const CUT_OFFSETS: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];

fn coarse_h(case: &str) -> f64 {
    if case == CYL {
        0.5
    } else {
        0.25
    }
}

fn modes(case: &str) -> Vec<MeshMode> {
    if case == CYL {
        vec![MeshMode::Cut]
    } else {
        vec![MeshMode::Matching, MeshMode::Cut]
    }
}

fn patch_test() -> Outcome {
    let c = 1.7;
    let mut worst = 0.0f64;
    let mut runs = 0;
    for name in CASE_NAMES {
        let case = make_case(name).map_err(|e| e.to_string())?;
        for mode in modes(name) {
            for p in [1, 2] {
                for stabilizer in [Stabilizer::Jump, Stabilizer::Gradvar] {
                    let cfg = config(name, p, &[coarse_h(name)], mode, stabilizer);
                    let disc = cfg.discretization(&case, coarse_h(name)).map_err(|e| e.to_string())?;
                    let mut prob = ProblemData::constant(c);
                    prob.stabilizer = stabilizer;
                    let sys = assemble(&disc, &prob).map_err(|e| e.to_string())?;
                    let (u, _) = solve_system(&sys.a, &sys.b).map_err(|e| e.to_string())?;
                    worst = u.iter().map(|v| (v - c).abs()).fold(worst, f64::max);
                    runs += 1;
                }
            }
        }
    }
    check(worst < 1e-9, format!("max nodal error {worst:.2e} over {runs} runs (tol 1e-9)"))
}

fn dg_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for p in [1, 2] {
        let cfg = RunConfig {
            p,
            levels: vec![0.25],
            ..Default::default()
        };
        for row in run_dg_equivalence(&cfg).map_err(|e| e.to_string())? {
            worst = worst.max(row.discrepancy.max());
        }
    }
    check(worst < 1e-11, format!("max relative discrepancy {worst:.2e} (tol 1e-11)"))
}

struct Convergence {
    stabilizer: Stabilizer,
    p: usize,
    l2: f64,
    energy: f64,
    kirchhoff: Vec<f64>,
}

fn cylinder_convergence(stabilizer: Stabilizer, p: usize) -> Result<Convergence, String> {
    let r = run_convergence(&config(CYL, p, cylinder_levels(p), MeshMode::Cut, stabilizer)).map_err(|e| e.to_string())?;
    Ok(Convergence {
        stabilizer,
        p,
        l2: r.l2_slope.unwrap_or(f64::NAN),
        energy: r.energy_slope.unwrap_or(f64::NAN),
        kirchhoff: r.levels.iter().map(|l| l.kirchhoff_residuals.iter().copied().fold(0.0, f64::max)).collect(),
    })
}

fn slopes(runs: &[Convergence], stabilizer: Stabilizer, energy: bool) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs.iter().filter(|r| r.stabilizer == stabilizer) {
        let (s, target) = if energy { (r.energy, r.p as f64) } else { (r.l2, r.p as f64 + 1.0) };
        ok &= (s - target).abs() <= 0.3;
        parts.push(format!("p={} slope {s:.3} (target {target} +- 0.3)", r.p));
    }
    check(ok && !parts.is_empty(), format!("{stabilizer:?}: {}", parts.join(", ")))
}

struct ConditionRun {
    stabilizer: Stabilizer,
    offset: f64,
    slope: f64,
}

fn cylinder_condition(stabilizer: Stabilizer, offset: f64) -> Result<ConditionRun, String> {
    let mut cfg = config(CYL, 1, &CONDITION_LEVELS, MeshMode::Cut, stabilizer);
    cfg.cut_offset = [offset, offset];
    let r = run_condition_study(&cfg).map_err(|e| e.to_string())?;
    Ok(ConditionRun {
        stabilizer,
        offset,
        slope: r.condition_slope.unwrap_or(f64::NAN),
    })
}

/// Smallest eigenvalue of an SPD matrix, or `None` when it is not SPD.
fn lambda_min(a: &compsurf::sparse::CsrMatrix) -> Result<Option<f64>, String> {
    match Factorization::new(a) {
        Ok(f) => Ok(Some(1.0 / largest_eigenvalue(a.n, 7, |x| f.solve(x)).map_err(|e| e.to_string())?)),
        Err(Error::Indefinite(_)) => Ok(None),
        Err(e) => Err(e.to_string()),
    }
}

/// `lambda_min` on a cut square whose first row and column of cells keep
/// only a `1e-3 h` sliver inside the domain.
fn sliver_lambda_min(gamma: f64) -> Result<Option<f64>, String> {
    let mut cfg = config("flat_square", 1, &[0.1], MeshMode::Cut, Stabilizer::Jump);
    cfg.cut_offset = [0.999, 0.999];
    cfg.gamma = vec![gamma; 2];
    let case = cfg.case().map_err(|e| e.to_string())?;
    let disc = cfg.discretization(&case, 0.1).map_err(|e| e.to_string())?;
    let sys = assemble(&disc, &cfg.problem(&case)).map_err(|e| e.to_string())?;
    lambda_min(&sys.a)
}

fn condition(runs: &[ConditionRun], stabilizer: Stabilizer) -> Outcome {
    let mine: Vec<&ConditionRun> = runs.iter().filter(|r| r.stabilizer == stabilizer).collect();
    let in_range = mine.iter().all(|r| (-2.5..=-1.6).contains(&r.slope));
    let lo = mine.iter().map(|r| r.slope).fold(f64::INFINITY, f64::min);
    let hi = mine.iter().map(|r| r.slope).fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let list: Vec<String> = mine.iter().map(|r| format!("{:.1}:{:.2}", r.offset, r.slope)).collect();
    check(
        in_range && spread < 0.3 && mine.len() == CUT_OFFSETS.len(),
        format!(
            "{stabilizer:?}: slopes by offset [{}] in [-2.5, -1.6], spread {spread:.3} (< 0.3)",
            list.join(", ")
        ),
    )
}

fn sliver_control() -> Outcome {
    let stab = sliver_lambda_min(1e-2)?.ok_or("stabilized sliver system is not SPD")?;
    let bare = sliver_lambda_min(0.0)?;
    let collapsed = bare.map_or(true, |l| l < 1e-2 * stab);
    let bare_txt = bare.map_or("not SPD".to_string(), |l| format!("{l:.3e}"));
    check(
        collapsed,
        format!("sliver cut: lambda_min {stab:.3e} with gamma=1e-2, {bare_txt} with gamma=0"),
    )
}

fn coercivity() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for name in CASE_NAMES {
        let case = make_case(name).map_err(|e| e.to_string())?;
        let mode = if name == CYL { MeshMode::Cut } else { MeshMode::Matching };
        for p in [1, 2] {
            let h = if name == CYL { 0.8 } else { 0.25 };
            let cfg = config(name, p, &[h], mode, Stabilizer::Jump);
            let disc = cfg.discretization(&case, h).map_err(|e| e.to_string())?;
            let mut mins = Vec::new();
            for beta in [10.0, 100.0, 1000.0] {
                let sys = assemble(&disc, &case.problem(beta, cfg.gamma.clone(), Stabilizer::Jump))
                    .map_err(|e| e.to_string())?;
                mins.push(if sys.a.n <= 1500 {
                    dense_lambda_min(&sys.a)
                } else {
                    lambda_min(&sys.a)?.unwrap_or(f64::NEG_INFINITY)
                });
            }
            ok &= mins[1] > 0.0 && mins[0] <= mins[1] && mins[1] <= mins[2];
            detail.push(format!("{name}/p{p} {:.2e}", mins[1]));
        }
    }
    // penalty too small: some case loses definiteness
    let mut negative = Vec::new();
    for name in ["flat_square", "flat_two_patch", "flat_triple_junction"] {
        let case = make_case(name).map_err(|e| e.to_string())?;
        let disc = Discretization::new(case.surface.clone(), MeshOptions::matching(0.25), 1).map_err(|e| e.to_string())?;
        let sys = assemble(&disc, &case.problem(0.01, vec![1e-2; 2], Stabilizer::Jump)).map_err(|e| e.to_string())?;
        let l = dense_lambda_min(&sys.a);
        if l <= 0.0 {
            negative.push(format!("{name} {l:.2e}"));
        }
    }
    ok &= !negative.is_empty();
    check(
        ok,
        format!(
            "lambda_min at beta=100: {}; monotone in beta; beta=0.01 indefinite on [{}]",
            detail.join(", "),
            negative.join(", ")
        ),
    )
}

fn kirchhoff(cylinders: &[Convergence]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    for r in cylinders {
        ok &= decreasing(&r.kirchhoff) && r.kirchhoff.len() >= 3;
        parts.push(format!("cyl {:?} p{} {:.2e}->{:.2e}", r.stabilizer, r.p, r.kirchhoff[0], r.kirchhoff[r.kirchhoff.len() - 1]));
    }
    for p in [1, 2] {
        let cfg = config("flat_triple_junction", p, &[0.2, 0.1, 0.05], MeshMode::Cut, Stabilizer::Jump);
        let r = run_convergence(&cfg).map_err(|e| e.to_string())?;
        let k: Vec<f64> = r.levels.iter().map(|l| l.kirchhoff_residuals.iter().copied().fold(0.0, f64::max)).collect();
        ok &= decreasing(&k);
        parts.push(format!("junction p{p} {:.2e}->{:.2e}", k[0], k[2]));
    }
    check(ok, parts.join(", "))
}

fn stabilization(gradvar_ok: bool) -> Outcome {
    // annihilation of global polynomials on every geometry
    let mut worst = 0.0f64;
    for name in CASE_NAMES {
        let case = make_case(name).map_err(|e| e.to_string())?;
        for p in [1, 2] {
            let disc = Discretization::new(case.surface.clone(), MeshOptions::cut(coarse_h(name)), p).map_err(|e| e.to_string())?;
            let s_jump = assemble_stab_jump(&disc, &[1.0, 1.0]).map_err(|e| e.to_string())?;
            let s_grad = assemble_stab_gradvar(&disc).map_err(|e| e.to_string())?;
            let mut v = vec![0.0; disc.ndofs()];
            for (i, s) in disc.space.patches.iter().enumerate() {
                for d in 0..s.ndofs {
                    let mut x = s.node_coords(&disc.meshes[i], d);
                    // periodic patches only carry polynomials of the axial coordinate
                    if disc.meshes[i].periodic {
                        x[0] = 0.0;
                    }
                    v[s.offset + d] = if p == 1 {
                        0.7 * x[0] - 0.4 * x[1] + 0.2 * x[0] * x[1] + 1.0
                    } else {
                        0.3 * x[0] * x[0] - 0.5 * x[0] * x[1] * x[1] + 0.2 * x[1] * x[1] + x[0]
                    };
                }
            }
            let scale = v.iter().map(|a| a * a).fold(1.0, f64::max);
            worst = worst.max(s_jump.bilinear(&v, &v).abs() / scale).max(s_grad.bilinear(&v, &v).abs() / scale);
        }
    }
    // rate of the interpolant's stabilization seminorm
    let mut rates = Vec::new();
    let mut rate_ok = true;
    for (name, p, levels) in [
        ("flat_square", 1, &[0.2, 0.1, 0.05][..]),
        ("flat_square", 2, &[0.2, 0.1, 0.05][..]),
        (CYL, 1, &[0.4, 0.2, 0.1][..]),
    ] {
        for stabilizer in [Stabilizer::Jump, Stabilizer::Gradvar] {
            let cfg = config(name, p, levels, MeshMode::Cut, stabilizer);
            let case = cfg.case().map_err(|e| e.to_string())?;
            let mut norms = Vec::new();
            for &h in levels {
                let disc = cfg.discretization(&case, h).map_err(|e| e.to_string())?;
                let sys = assemble(&disc, &cfg.problem(&case)).map_err(|e| e.to_string())?;
                let pi = disc.space.interpolate(&disc.surface, &disc.meshes, |i, x| case.exact[i].value(x));
                norms.push(compsurf::solve::seminorm(&sys.parts.stabilization, &pi));
            }
            let rate = fitted_slope(levels, &norms).unwrap_or(f64::NAN);
            rate_ok &= rate >= p as f64;
            rates.push(format!("{name}/p{p}/{stabilizer:?} {rate:.2}"));
        }
    }
    check(
        worst < 1e-12 && rate_ok && gradvar_ok,
        format!(
            "polynomial energy {worst:.1e} (tol 1e-12); |pi_h u|_s rates [{}] (>= p); gradvar passes 3-5: {gradvar_ok}",
            rates.join(", ")
        ),
    )
}

fn oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut r = rng(2024);
    for name in CASE_NAMES {
        let case = make_case(name).map_err(|e| e.to_string())?;
        let patches = case.surface.patches();
        let mut n = 0;
        while n < 100 {
            let i = (uniform(&mut r) * patches.len() as f64) as usize % patches.len();
            let (lo, hi) = patches[i].domain.bounds();
            let x = Point::new(lo[0] + uniform(&mut r) * (hi[0] - lo[0]), lo[1] + uniform(&mut r) * (hi[1] - lo[1]));
            if !patches[i].domain.contains(&x) {
                continue;
            }
            let ext = case.laplacian(i, &x);
            let fd = metric_laplacian(|y| case.exact[i].value(y), &patches[i].map, &x, ORACLE_STEP);
            worst = worst.max((ext - fd).abs());
            n += 1;
        }
    }
    check(worst < 1e-5, format!("max |extension - metric| {worst:.2e} over 100 points per case (tol 1e-5)"))
}

fn main() {
    let start = Instant::now();
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let s = t.elapsed().as_secs_f64();
        match o {
            Ok(d) => Ok(format!("{d} [{s:.1} s]")),
            Err(d) => Err(format!("{d} [{s:.1} s]")),
        }
    };

    let stabilizers = [Stabilizer::Jump, Stabilizer::Gradvar];
    let c1 = timed(&patch_test);
    let c2 = timed(&dg_equivalence);
    let c6 = timed(&coercivity);
    let c9 = timed(&oracle);
    let cyl: Result<Vec<Convergence>, String> = stabilizers
        .iter()
        .flat_map(|&s| [1, 2].map(move |p| (s, p)))
        .map(|(s, p)| cylinder_convergence(s, p))
        .collect();
    let cond: Result<Vec<ConditionRun>, String> = stabilizers
        .iter()
        .flat_map(|&s| CUT_OFFSETS.map(move |o| (s, o)))
        .map(|(s, o)| cylinder_condition(s, o))
        .collect();
    let sliver = timed(&sliver_control);

    let with_runs = |r: &Result<Vec<Convergence>, String>, f: &dyn Fn(&[Convergence]) -> Outcome| match r {
        Ok(v) => f(v),
        Err(e) => Err(format!("study failed: {e}")),
    };
    let c3_jump = with_runs(&cyl, &|v| slopes(v, Stabilizer::Jump, false));
    let c3_grad = with_runs(&cyl, &|v| slopes(v, Stabilizer::Gradvar, false));
    let c4_jump = with_runs(&cyl, &|v| slopes(v, Stabilizer::Jump, true));
    let c4_grad = with_runs(&cyl, &|v| slopes(v, Stabilizer::Gradvar, true));
    let cond_of = |s| match &cond {
        Ok(v) => condition(v, s),
        Err(e) => Err(format!("study failed: {e}")),
    };
    let c5_jump = cond_of(Stabilizer::Jump);
    let c5_grad = cond_of(Stabilizer::Gradvar);
    let c7 = timed(&|| with_runs(&cyl, &kirchhoff));
    let gradvar_ok = [&c3_grad, &c4_grad, &c5_grad].iter().all(|o| o.is_ok());
    let c8 = timed(&|| stabilization(gradvar_ok));

    let both = |a: &Outcome, b: &Outcome, extra: Option<&Outcome>| -> Outcome {
        let parts: Vec<&Outcome> = [Some(a), Some(b), extra].into_iter().flatten().collect();
        let text: Vec<&str> = parts.iter().map(|o| o.as_ref().map_or_else(|e| e.as_str(), |d| d.as_str())).collect();
        check(parts.iter().all(|o| o.is_ok()), text.join("; "))
    };
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "patch test", c1),
        (2, "average/jump equivalence", c2),
        (3, "L2 convergence on intersecting cylinders", both(&c3_jump, &c3_grad, None)),
        (4, "energy convergence on intersecting cylinders", both(&c4_jump, &c4_grad, None)),
        (5, "condition number scaling", both(&c5_jump, &c5_grad, Some(&sliver))),
        (6, "coercivity", c6),
        (7, "Kirchhoff residual", c7),
        (8, "stabilization properties", c8),
        (9, "Laplacian oracle agreement", c9),
    ];
    let mut failed = 0;
    for (n, name, o) in &results {
        match o {
            Ok(d) => println!("PASS criterion {n} ({name}): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1} s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
