//! Run configurations, single solves, refinement and condition studies.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble, flat_dg_equivalence, AssembledSystem, DgDiscrepancy, Discretization, ProblemData, QuadOrders, Stabilizer,
    DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_GRADVAR_WEIGHT,
};
use crate::error::{Error, Result};
use crate::manufactured::{make_case, ManufacturedCase};
use crate::mesh::{MeshMode, MeshOptions};
use crate::solve::{
    condition_number, error_norms, jump_residual, kirchhoff_residual, seminorm, solve_system, SolveReport,
};

/// Version tag written in the first line of every CSV table.
pub const CSV_SCHEMA: &str = "# compsurf-table v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: String,
    pub p: usize,
    /// Mesh sizes, coarsest first.
    pub levels: Vec<f64>,
    pub mesh_mode: MeshMode,
    /// Grid shift of cut meshes in units of `h`.
    pub cut_offset: [f64; 2],
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub stabilizer: Stabilizer,
    pub gradvar_weight: f64,
    /// Average weights per interface; empty keeps `1/m`.
    pub weights: Vec<Vec<f64>>,
    pub output_dir: PathBuf,
    pub quad_orders: Option<QuadOrders>,
    pub seed: u64,
    /// Estimate condition numbers at every level.
    pub condition: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: "flat_square".into(),
            p: 1,
            levels: vec![0.2, 0.1, 0.05],
            mesh_mode: MeshMode::Cut,
            cut_offset: [1.0 / 3.0, 1.0 / 3.0],
            beta: DEFAULT_BETA,
            gamma: vec![DEFAULT_GAMMA; 2],
            stabilizer: Stabilizer::Jump,
            gradvar_weight: DEFAULT_GRADVAR_WEIGHT,
            weights: Vec::new(),
            output_dir: PathBuf::from("out"),
            quad_orders: None,
            seed: 0,
            condition: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        crate::space::check_degree(self.p)?;
        if self.levels.is_empty() || self.levels.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidParameter("levels must be a non-empty list of positive h".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must be positive", self.beta)));
        }
        if self.gamma.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidParameter("gamma_k must be >= 0".into()));
        }
        Ok(())
    }

    pub fn mesh_options(&self, h: f64) -> MeshOptions {
        MeshOptions {
            mode: self.mesh_mode,
            h,
            offset: match self.mesh_mode {
                MeshMode::Cut => self.cut_offset,
                _ => [0.0; 2],
            },
        }
    }

    /// The manufactured case with the configured average weights.
    pub fn case(&self) -> Result<ManufacturedCase> {
        let mut case = make_case(&self.case)?;
        if !case.fitted && self.mesh_mode != MeshMode::Cut {
            return Err(Error::InvalidParameter(format!(
                "case {} has curved patch boundaries and needs cut meshes",
                self.case
            )));
        }
        for (j, w) in self.weights.iter().enumerate() {
            case.surface.set_weights(j, w.clone())?;
        }
        Ok(case)
    }

    pub fn problem(&self, case: &ManufacturedCase) -> ProblemData {
        let mut prob = case.problem(self.beta, self.gamma.clone(), self.stabilizer);
        prob.gradvar_weight = self.gradvar_weight;
        prob
    }

    pub fn discretization(&self, case: &ManufacturedCase, h: f64) -> Result<Discretization> {
        let mut disc = Discretization::new(case.surface.clone(), self.mesh_options(h), self.p)?;
        if let Some(o) = self.quad_orders {
            disc.orders = o;
        }
        Ok(disc)
    }
}

/// Everything produced by one solve.
pub struct LevelResult {
    pub report: SolveReport,
    pub disc: Discretization,
    pub system: AssembledSystem,
    pub u: Vec<f64>,
    /// Nodal interpolant of the exact solution.
    pub interpolant: Vec<f64>,
}

pub fn solve_level(config: &RunConfig, h: f64) -> Result<LevelResult> {
    config.validate()?;
    let start = Instant::now();
    let case = config.case()?;
    let disc = config.discretization(&case, h)?;
    let system = assemble(&disc, &config.problem(&case))?;
    let (u, factorization) = solve_system(&system.a, &system.b)?;
    let exact = case.exact_fn();
    let norms = error_norms(&disc, &u, &exact)?;
    let interpolant = disc.space.interpolate(&disc.surface, &disc.meshes, |i, x| case.exact[i].value(x));
    let diff: Vec<f64> = interpolant.iter().zip(&u).map(|(a, b)| a - b).collect();
    let stab_energy = seminorm(&system.parts.stabilization, &diff);
    let nj = disc.surface.interfaces().len();
    let kirchhoff_residuals = (0..nj).map(|j| kirchhoff_residual(&disc, &u, j)).collect::<Result<_>>()?;
    let jump_residuals = (0..nj).map(|j| jump_residual(&disc, &u, j)).collect::<Result<_>>()?;
    let condition = if config.condition {
        Some(condition_number(&system.a, Some(&factorization), config.seed)?)
    } else {
        None
    };
    let report = SolveReport {
        case: config.case.clone(),
        p: config.p,
        h,
        dof_count: disc.ndofs(),
        l2_error: norms.l2,
        energy_error: norms.energy,
        stab_energy,
        condition_number: condition,
        kirchhoff_residuals,
        jump_residuals,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(LevelResult {
        report,
        disc,
        system,
        u,
        interpolant,
    })
}

/// Least-squares slope of `log y` against `log x` over the last
/// `min(3, n)` points; `None` unless all of them are positive.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    let k = n.min(3);
    let positive = |v: &[f64]| v.iter().all(|t| *t > 0.0 && t.is_finite());
    if k < 2 || !positive(&x[n - k..n]) || !positive(&y[n - k..n]) {
        return None;
    }
    let lx: Vec<f64> = x[n - k..n].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y[n - k..n].iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k as f64;
    let my = ly.iter().sum::<f64>() / k as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: RunConfig,
    pub levels: Vec<SolveReport>,
    pub l2_slope: Option<f64>,
    pub energy_slope: Option<f64>,
    pub condition_slope: Option<f64>,
}

impl StudyReport {
    fn refit(&mut self) {
        let hs: Vec<f64> = self.levels.iter().map(|r| r.h).collect();
        let l2: Vec<f64> = self.levels.iter().map(|r| r.l2_error).collect();
        let en: Vec<f64> = self.levels.iter().map(|r| r.energy_error).collect();
        self.l2_slope = fitted_slope(&hs, &l2);
        self.energy_slope = fitted_slope(&hs, &en);
        let cond: Option<Vec<f64>> = self.levels.iter().map(|r| r.condition_number).collect();
        self.condition_slope = cond.and_then(|c| fitted_slope(&hs, &c));
    }
}

/// Solves every level in order, handing each report to `on_level` as soon
/// as it is available.
pub fn run_convergence_with(
    config: &RunConfig,
    mut on_level: impl FnMut(&SolveReport) -> Result<()>,
) -> Result<StudyReport> {
    if config.levels.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a refinement study needs at least 3 levels, got {}",
            config.levels.len()
        )));
    }
    let mut report = StudyReport {
        config: config.clone(),
        ..Default::default()
    };
    for &h in &config.levels {
        let level = solve_level(config, h)?;
        on_level(&level.report)?;
        report.levels.push(level.report);
    }
    report.refit();
    Ok(report)
}

pub fn run_convergence(config: &RunConfig) -> Result<StudyReport> {
    run_convergence_with(config, |_| Ok(()))
}

/// Condition numbers of the assembled matrices over the levels.
pub fn run_condition_study(config: &RunConfig) -> Result<StudyReport> {
    let mut c = config.clone();
    c.condition = true;
    if c.levels.len() < 2 {
        return Err(Error::InvalidParameter("a condition study needs at least 2 levels".into()));
    }
    let mut report = StudyReport {
        config: c.clone(),
        ..Default::default()
    };
    for &h in &c.levels {
        let case = c.case()?;
        let disc = c.discretization(&case, h)?;
        let system = assemble(&disc, &c.problem(&case))?;
        let start = Instant::now();
        let cond = condition_number(&system.a, None, c.seed)?;
        report.levels.push(SolveReport {
            case: c.case.clone(),
            p: c.p,
            h,
            dof_count: disc.ndofs(),
            condition_number: Some(cond),
            wall_time: start.elapsed().as_secs_f64(),
            ..Default::default()
        });
    }
    report.refit();
    Ok(report)
}

/// CSV header of the convergence table.
pub fn csv_header() -> String {
    format!("{CSV_SCHEMA}\nh,dofs,l2_error,energy_error,cond,kirchhoff_max,stab_energy,wall_time\n")
}

pub fn csv_row(r: &SolveReport) -> String {
    let kmax = r.kirchhoff_residuals.iter().copied().fold(0.0, f64::max);
    let cond = r.condition_number.map(|c| format!("{c:.10e}")).unwrap_or_default();
    format!(
        "{:.10e},{},{:.10e},{:.10e},{},{:.10e},{:.10e},{:.3}\n",
        r.h, r.dof_count, r.l2_error, r.energy_error, cond, kmax, r.stab_energy, r.wall_time
    )
}

pub fn write_csv(levels: &[SolveReport], mut w: impl Write) -> std::io::Result<()> {
    w.write_all(csv_header().as_bytes())?;
    for r in levels {
        w.write_all(csv_row(r).as_bytes())?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgEquivalenceRow {
    pub mesh_mode: MeshMode,
    pub h: f64,
    pub discrepancy: DgDiscrepancy,
}

pub const DG_ALPHAS: [[f64; 2]; 3] = [[0.5, 0.5], [1.0, 0.0], [0.3, 0.7]];

/// Average/jump comparison on the split square for the standard weights
/// and both fitted mesh modes, at the coarsest configured level.
pub fn run_dg_equivalence(config: &RunConfig) -> Result<Vec<DgEquivalenceRow>> {
    let h = config.levels[0];
    let mut rows = Vec::new();
    for mode in [MeshMode::Matching, MeshMode::Nonmatching] {
        let opts = MeshOptions {
            mode,
            h,
            offset: [0.0; 2],
        };
        let disc = Discretization::new(crate::geometry::builders::split_square()?, opts, config.p)?;
        for alpha in DG_ALPHAS {
            rows.push(DgEquivalenceRow {
                mesh_mode: mode,
                h,
                discrepancy: flat_dg_equivalence(&disc, alpha, config.beta)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((fitted_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_slope(&h[..1], &e[..1]).is_none());
        assert!(fitted_slope(&h, &[1.0, 0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn config_round_trip() {
        let c = RunConfig {
            case: "flat_two_patch".into(),
            weights: vec![vec![0.3, 0.7]],
            quad_orders: Some(QuadOrders::for_degree(2)),
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&s).unwrap(), c);
        assert!(RunConfig::from_json(r#"{"p": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn too_few_levels() {
        let c = RunConfig {
            levels: vec![0.25, 0.125],
            ..Default::default()
        };
        assert!(matches!(run_convergence(&c), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn quadratic_reproduced_on_square() {
        // Q2 reproduces x^2 + y^2 exactly with Nitsche boundary data
        use crate::geometry::builders;
        use crate::manufactured::Ambient;
        let u = Ambient::Quadratic {
            q: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]],
            b: [0.0; 3],
            c: 0.0,
        };
        let case = ManufacturedCase::new("q", builders::unit_square().unwrap(), vec![u], true).unwrap();
        for opts in [MeshOptions::matching(0.25), MeshOptions::cut(0.25)] {
            let disc = Discretization::new(case.surface.clone(), opts, 2).unwrap();
            let sys = assemble(&disc, &case.default_problem()).unwrap();
            let (uh, _) = solve_system(&sys.a, &sys.b).unwrap();
            let pi = disc.space.interpolate(&disc.surface, &disc.meshes, |i, x| case.exact[i].value(x));
            let err = uh.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
        }
    }
}
