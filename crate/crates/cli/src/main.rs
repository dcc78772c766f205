use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use compsurf::assembly::{assemble, Discretization, QuadOrders, Stabilizer};
use compsurf::manufactured::demo_problem;
use compsurf::mesh::{MeshMode, MeshSummary};
use compsurf::solve::{solve_system, SolveReport};
use compsurf::sparse::write_vector_market;
use compsurf::study::{
    csv_header, csv_row, run_condition_study, run_convergence_with, run_dg_equivalence, solve_level, DgEquivalenceRow,
    RunConfig, StudyReport,
};
use compsurf::vtk::{sample_field, write_vtk};

/// Largest accepted discrepancy of `dg-equiv`.
const DG_TOL: f64 = 1e-11;

#[derive(Parser)]
#[command(name = "compsurf", version, about = "Nitsche finite elements on composite surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one manufactured case at the first level.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the system matrix and right-hand side.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Refinement study with fitted error slopes.
    Converge(RunArgs),
    /// Condition numbers over the levels.
    Condition(RunArgs),
    /// Compare the interface forms with the average/jump form on the split square.
    DgEquiv(RunArgs),
    /// Triple junction with +-1 boundary data, for inspection.
    Demo(RunArgs),
    /// Write the assembled system at the first level.
    DumpMatrix(RunArgs),
}

/// Every flag overrides the matching field of the config file (or of the
/// defaults when no file is given).
#[derive(Args, Clone, Debug, Default)]
struct RunArgs {
    /// JSON file with a RunConfig.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<String>,
    /// Polynomial degree (1 or 2).
    #[arg(short, long)]
    p: Option<usize>,
    /// Mesh sizes, coarsest first.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mesh_mode: Option<ModeArg>,
    /// Grid shift of cut meshes in units of h, as `a,b`.
    #[arg(long, value_delimiter = ',')]
    cut_offset: Option<Vec<f64>>,
    #[arg(long)]
    beta: Option<f64>,
    /// Jump penalties gamma_1,gamma_2.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    stabilizer: Option<StabArg>,
    #[arg(long)]
    gradvar_weight: Option<f64>,
    /// Average weights per interface, e.g. `0.5,0.5;0.3,0.7`.
    #[arg(long)]
    weights: Option<String>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Quadrature orders `volume,curve,face`.
    #[arg(long, value_delimiter = ',')]
    quad_orders: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimate condition numbers during `solve` and `converge`.
    #[arg(long)]
    condition: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Matching,
    Nonmatching,
    Cut,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum StabArg {
    Jump,
    Gradvar,
    None,
}

fn parse_weights(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|group| {
            group
                .split(',')
                .map(|w| w.trim().parse::<f64>().with_context(|| format!("bad weight `{w}`")))
                .collect()
        })
        .collect()
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &self.case {
            c.case = v.clone();
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = &self.levels {
            c.levels = v.clone();
        }
        if let Some(v) = self.mesh_mode {
            c.mesh_mode = match v {
                ModeArg::Matching => MeshMode::Matching,
                ModeArg::Nonmatching => MeshMode::Nonmatching,
                ModeArg::Cut => MeshMode::Cut,
            };
        }
        if let Some(v) = &self.cut_offset {
            let [a, b] = v[..] else { bail!("--cut-offset takes two values, got {}", v.len()) };
            c.cut_offset = [a, b];
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = &self.gamma {
            c.gamma = v.clone();
        }
        if let Some(v) = self.stabilizer {
            c.stabilizer = match v {
                StabArg::Jump => Stabilizer::Jump,
                StabArg::Gradvar => Stabilizer::Gradvar,
                StabArg::None => Stabilizer::None,
            };
        }
        if let Some(v) = self.gradvar_weight {
            c.gradvar_weight = v;
        }
        if let Some(v) = &self.weights {
            c.weights = parse_weights(v)?;
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = &self.quad_orders {
            let [volume, curve, face] = v[..] else { bail!("--quad-orders takes three values, got {}", v.len()) };
            c.quad_orders = Some(QuadOrders { volume, curve, face });
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.condition |= self.condition;
        c.validate()?;
        fs::create_dir_all(&c.output_dir).with_context(|| format!("creating {}", c.output_dir.display()))?;
        Ok(c)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_system(dir: &Path, a: &compsurf::sparse::CsrMatrix, b: &[f64]) -> Result<()> {
    let path = dir.join("system.mtx");
    let mut f = BufWriter::new(File::create(&path)?);
    a.write_matrix_market(&mut f)?;
    f.flush()?;
    let mut g = BufWriter::new(File::create(dir.join("rhs.mtx"))?);
    write_vector_market(b, &mut g)?;
    g.flush()?;
    eprintln!("wrote {} and rhs.mtx", path.display());
    Ok(())
}

fn meshes(disc: &Discretization) -> Vec<MeshSummary> {
    disc.meshes.iter().map(|m| m.summary()).collect()
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config: &'a RunConfig,
    report: &'a SolveReport,
    meshes: Vec<MeshSummary>,
}

fn solve(c: &RunConfig, dump: bool) -> Result<()> {
    let h = c.levels[0];
    let level = solve_level(c, h)?;
    let r = &level.report;
    println!(
        "{} p={} h={h} dofs={} l2={:.4e} energy={:.4e}",
        r.case, r.p, r.dof_count, r.l2_error, r.energy_error
    );
    write_json(
        &c.output_dir.join("report.json"),
        &SolveOutput {
            config: c,
            report: r,
            meshes: meshes(&level.disc),
        },
    )?;
    write_vtk(&level.disc, &level.u, &c.output_dir.join("solution.vtk"))?;
    if dump {
        write_system(&c.output_dir, &level.system.a, &level.system.b)?;
    }
    Ok(())
}

/// Runs a study, writing each CSV row as soon as its level finishes so that
/// a failing level leaves the earlier rows on disk.
fn study(c: &RunConfig, condition_only: bool) -> Result<()> {
    let path = c.output_dir.join("convergence.csv");
    let mut csv = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    csv.write_all(csv_header().as_bytes())?;
    csv.flush()?;
    let report: Result<StudyReport> = if condition_only {
        run_condition_study(c)
            .map_err(Into::into)
            .and_then(|r| {
                for l in &r.levels {
                    csv.write_all(csv_row(l).as_bytes())?;
                }
                Ok(r)
            })
    } else {
        run_convergence_with(c, |l| {
            eprintln!("h={} dofs={} l2={:.4e} energy={:.4e}", l.h, l.dof_count, l.l2_error, l.energy_error);
            csv.write_all(csv_row(l).as_bytes())?;
            csv.flush()?;
            Ok(())
        })
        .map_err(Into::into)
    };
    csv.flush()?;
    eprintln!("wrote {}", path.display());
    let report = report?;
    let fmt = |s: Option<f64>| s.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "slopes: l2 {} energy {} condition {}",
        fmt(report.l2_slope),
        fmt(report.energy_slope),
        fmt(report.condition_slope)
    );
    write_json(&c.output_dir.join("report.json"), &report)
}

#[derive(Serialize)]
struct DgOutput<'a> {
    config: &'a RunConfig,
    rows: &'a [DgEquivalenceRow],
    max_discrepancy: f64,
    tolerance: f64,
}

fn dg_equiv(c: &RunConfig) -> Result<()> {
    let rows = run_dg_equivalence(c)?;
    let mut worst = 0.0f64;
    for r in &rows {
        let d = &r.discrepancy;
        println!(
            "{:?} h={} alpha=({}, {}) consistency {:.2e} penalty {:.2e}",
            r.mesh_mode, r.h, d.alpha[0], d.alpha[1], d.consistency, d.penalty
        );
        worst = worst.max(d.max());
    }
    write_json(
        &c.output_dir.join("report.json"),
        &DgOutput {
            config: c,
            rows: &rows,
            max_discrepancy: worst,
            tolerance: DG_TOL,
        },
    )?;
    if worst > DG_TOL {
        bail!("average/jump discrepancy {worst:e} exceeds {DG_TOL:e}");
    }
    Ok(())
}

#[derive(Serialize)]
struct DemoOutput {
    h: f64,
    p: usize,
    dof_count: usize,
    /// Range of `u_h` over the exported vertices.
    min: f64,
    max: f64,
    meshes: Vec<MeshSummary>,
}

fn demo(c: &RunConfig) -> Result<()> {
    let (surface, mut problem) = demo_problem()?;
    problem.beta = c.beta;
    problem.gamma = c.gamma.clone();
    problem.stabilizer = c.stabilizer;
    problem.gradvar_weight = c.gradvar_weight;
    let h = c.levels[0];
    let mut disc = Discretization::new(surface, c.mesh_options(h), c.p)?;
    if let Some(o) = c.quad_orders {
        disc.orders = o;
    }
    let sys = assemble(&disc, &problem)?;
    let (u, _) = solve_system(&sys.a, &sys.b)?;
    let field = sample_field(&disc, &u)?;
    let out = DemoOutput {
        h,
        p: c.p,
        dof_count: disc.ndofs(),
        min: field.u.iter().copied().fold(f64::INFINITY, f64::min),
        max: field.u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        meshes: meshes(&disc),
    };
    println!("demo: dofs={} u in [{:.4}, {:.4}]", out.dof_count, out.min, out.max);
    write_json(&c.output_dir.join("report.json"), &out)?;
    write_vtk(&disc, &u, &c.output_dir.join("solution.vtk"))?;
    Ok(())
}

fn dump_matrix(c: &RunConfig) -> Result<()> {
    let case = c.case()?;
    let disc = c.discretization(&case, c.levels[0])?;
    let sys = assemble(&disc, &c.problem(&case))?;
    println!("n={} nnz={}", sys.a.n, sys.a.nnz());
    write_system(&c.output_dir, &sys.a, &sys.b)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { run, dump_matrix } => solve(&run.config()?, dump_matrix),
        Command::Converge(run) => study(&run.config()?, false),
        Command::Condition(run) => study(&run.config()?, true),
        Command::DgEquiv(run) => dg_equiv(&run.config()?),
        Command::Demo(run) => demo(&run.config()?),
        Command::DumpMatrix(run) => dump_matrix(&run.config()?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_parse_per_interface() {
        assert_eq!(parse_weights("0.5,0.5;0.3, 0.7").unwrap(), vec![vec![0.5, 0.5], vec![0.3, 0.7]]);
        assert!(parse_weights("0.5,x").is_err());
    }

    #[test]
    fn comma_separated_tuples() {
        let parse = |extra: &[&str]| {
            let argv = [&["compsurf", "converge", "-o", "unused"], extra].concat();
            match Cli::try_parse_from(argv).unwrap().command {
                Command::Converge(run) => run,
                _ => unreachable!(),
            }
        };
        let run = parse(&["--cut-offset", "0.4,0.25", "--quad-orders", "5,6,7"]);
        assert_eq!(run.cut_offset, Some(vec![0.4, 0.25]));
        assert_eq!(run.quad_orders, Some(vec![5, 6, 7]));
        assert!(parse(&["--cut-offset", "0.4"]).config().is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        fs::write(&file, r#"{"case": "flat_two_patch", "p": 2, "beta": 50.0}"#).unwrap();
        let args = RunArgs {
            config: Some(file),
            beta: Some(200.0),
            output_dir: Some(dir.path().join("out")),
            ..Default::default()
        };
        let c = args.config().unwrap();
        assert_eq!((c.case.as_str(), c.p, c.beta), ("flat_two_patch", 2, 200.0));
        assert!(dir.path().join("out").is_dir());
    }
}
