//! Assembly of the symmetric Nitsche system `A = a_h + s_h`, `b = l_h`.

mod dg;
mod interface;
mod stab;

use std::sync::Arc;

use nalgebra::{DMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use dg::{flat_dg_equivalence, DgDiscrepancy};
pub use interface::{boundary_points, interface_points, trace_breaks, CurveQuadPoint, TracePoint};
pub use stab::{assemble_stab_gradvar, assemble_stab_jump};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, CompositeSurface};
use crate::mesh::{build_meshes, MeshOptions, PatchMesh};
use crate::polygon::Point;
use crate::quadrature::{rect_rule, triangles_rule};
use crate::space::{eval_basis, BrokenSpace};
use crate::sparse::{CsrMatrix, Triplets};

/// Data function of `(patch, reference point, physical point)`.
pub type ScalarFn = Arc<dyn Fn(usize, &Point, &Vector3<f64>) -> f64 + Send + Sync>;
/// Neumann data of `(patch, reference point, physical point, conormal)`.
pub type FluxFn = Arc<dyn Fn(usize, &Point, &Vector3<f64>, &Vector3<f64>) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilizer {
    /// Penalty on jumps of normal derivatives across faces.
    #[default]
    Jump,
    /// Least-squares penalty on the gradient variation over face patches.
    Gradvar,
    None,
}

#[derive(Clone)]
pub struct ProblemData {
    pub f: ScalarFn,
    pub g_d: ScalarFn,
    pub g_n: FluxFn,
    /// Nitsche penalty.
    pub beta: f64,
    /// Jump penalty weights `gamma_k`, `k = 1..p`.
    pub gamma: Vec<f64>,
    pub stabilizer: Stabilizer,
    /// Weight of the gradient-variation penalty.
    pub gradvar_weight: f64,
}

pub const DEFAULT_BETA: f64 = 100.0;
pub const DEFAULT_GAMMA: f64 = 1e-2;
/// Weight of the gradient-variation penalty.
pub const DEFAULT_GRADVAR_WEIGHT: f64 = 0.1;

impl ProblemData {
    /// `f = 0`, `g_D = c`, `g_N = 0`.
    pub fn constant(c: f64) -> Self {
        Self {
            f: Arc::new(|_, _, _| 0.0),
            g_d: Arc::new(move |_, _, _| c),
            g_n: Arc::new(|_, _, _, _| 0.0),
            beta: DEFAULT_BETA,
            gamma: vec![DEFAULT_GAMMA; 2],
            stabilizer: Stabilizer::Jump,
            gradvar_weight: DEFAULT_GRADVAR_WEIGHT,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must be positive", self.beta)));
        }
        if self.gamma.len() < p && self.stabilizer == Stabilizer::Jump {
            return Err(Error::InvalidParameter(format!(
                "{} stabilization weights given for degree {p}",
                self.gamma.len()
            )));
        }
        if self.gamma.iter().any(|g| !(*g >= 0.0)) || !(self.gradvar_weight >= 0.0) {
            return Err(Error::InvalidParameter("stabilization weights must be >= 0".into()));
        }
        Ok(())
    }
}

/// Quadrature exactness for each kind of integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadOrders {
    pub volume: usize,
    pub curve: usize,
    pub face: usize,
}

impl QuadOrders {
    pub fn for_degree(p: usize) -> Self {
        Self {
            volume: 2 * p + 2,
            curve: 2 * p + 2,
            face: 2 * p,
        }
    }

    pub fn doubled(&self) -> Self {
        Self {
            volume: 2 * self.volume,
            curve: 2 * self.curve,
            face: 2 * self.face,
        }
    }
}

/// Surface, meshes and broken space for one discretization level.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub surface: CompositeSurface,
    pub meshes: Vec<PatchMesh>,
    pub space: BrokenSpace,
    pub mesh_options: MeshOptions,
    pub orders: QuadOrders,
}

impl Discretization {
    pub fn new(surface: CompositeSurface, mesh_options: MeshOptions, p: usize) -> Result<Self> {
        let meshes = build_meshes(&surface, &mesh_options)?;
        let space = BrokenSpace::new(&meshes, p)?;
        Ok(Self {
            surface,
            meshes,
            space,
            mesh_options,
            orders: QuadOrders::for_degree(p),
        })
    }

    pub fn p(&self) -> usize {
        self.space.p
    }

    pub fn ndofs(&self) -> usize {
        self.space.ndofs
    }

    /// Mesh size used in the penalty of interface `j`: the largest member `h`.
    pub fn interface_h(&self, j: usize) -> f64 {
        self.surface.interfaces()[j]
            .members
            .iter()
            .map(|m| self.meshes[m.patch].h)
            .fold(0.0, f64::max)
    }

    pub fn has_cut_cells(&self) -> bool {
        self.meshes.iter().any(|m| m.cells.iter().any(|c| c.cut))
    }

    /// Quadrature points of active cell `c` on patch `i`, with weights
    /// including the area element.
    pub fn cell_points(&self, i: usize, c: usize, order: usize) -> Result<Vec<CellPoint>> {
        let mesh = &self.meshes[i];
        let cell = &mesh.cells[c];
        let map = &self.surface.patches()[i].map;
        let rule = if cell.cut {
            triangles_rule(&cell.triangles, order)?
        } else {
            rect_rule(&cell.rect, order)?
        };
        let mut out = Vec::with_capacity(rule.len());
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let (ginv, det) = map.inverse_metric(x)?;
            let jac = map.jacobian(x);
            let b = eval_basis(&cell.rect.lo, mesh.h, self.p(), x)?;
            let grads = b.grads.iter().map(|g| jac * (ginv * g)).collect();
            out.push(CellPoint {
                x: *x,
                phys: map.point(x),
                weight: w * det.sqrt(),
                values: b.values,
                ref_grads: b.grads,
                grads,
            });
        }
        Ok(out)
    }
}

pub struct CellPoint {
    pub x: Point,
    pub phys: Vector3<f64>,
    /// Quadrature weight times `sqrt(det G)` (may be negative on cut cells).
    pub weight: f64,
    pub values: Vec<f64>,
    pub ref_grads: Vec<Vector2<f64>>,
    /// Tangential gradients `J G^{-1} grad_ref`.
    pub grads: Vec<Vector3<f64>>,
}

#[derive(Clone, Debug)]
pub struct SystemParts {
    pub volume: CsrMatrix,
    pub interface_consistency: CsrMatrix,
    pub interface_penalty: CsrMatrix,
    pub dirichlet: CsrMatrix,
    pub stabilization: CsrMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub stabilizer: Stabilizer,
}

#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub parts: SystemParts,
    pub params: SystemParams,
}

impl AssembledSystem {
    /// `a_h` without the stabilization.
    pub fn unstabilized(&self) -> CsrMatrix {
        let p = &self.parts;
        p.volume
            .add(&p.interface_consistency)
            .add(&p.interface_penalty)
            .add(&p.dirichlet)
    }
}

/// `sum_i (sigma(v), grad w)_{Omega_i}`.
pub fn assemble_volume(disc: &Discretization) -> Result<CsrMatrix> {
    let mut t = Triplets::new(disc.ndofs());
    let mut any = false;
    for (i, mesh) in disc.meshes.iter().enumerate() {
        let mu = disc.surface.patches()[i].mu;
        for (c, _) in mesh.active_cells() {
            any = true;
            let dofs = disc.space.patches[i].cell_dofs(c);
            let n = dofs.len();
            let mut k = DMatrix::zeros(n, n);
            for q in disc.cell_points(i, c, disc.orders.volume)? {
                for a in 0..n {
                    for b in 0..n {
                        k[(a, b)] += q.weight * mu * q.grads[a].dot(&q.grads[b]);
                    }
                }
            }
            t.add_block(dofs, dofs, &k);
        }
    }
    if !any {
        return Err(Error::Mesh("no active cells".into()));
    }
    Ok(t.into_csr())
}

/// Interface forms: `(consistency, penalty)`.
pub fn assemble_interface(disc: &Discretization, beta: f64) -> Result<(CsrMatrix, CsrMatrix)> {
    let n = disc.ndofs();
    let mut cons = Triplets::new(n);
    let mut pen = Triplets::new(n);
    for j in 0..disc.surface.interfaces().len() {
        let weights = &disc.surface.interfaces()[j].weights;
        let h = disc.interface_h(j);
        for q in interface_points(disc, j, disc.orders.curve)? {
            let (dofs, jumps, fluxes) = stacked_terms(&q, weights);
            let m = dofs.len();
            let mut kc = DMatrix::zeros(m, m);
            let mut kp = DMatrix::zeros(m, m);
            for (k, tp) in q.members.iter().enumerate() {
                let mu = disc.surface.patches()[tp.patch].mu;
                let jk = &jumps[k];
                let fk = &fluxes[k];
                for a in 0..m {
                    for b in 0..m {
                        kc[(a, b)] -= q.weight * (fk[a] * jk[b] + jk[a] * fk[b]);
                        kp[(a, b)] += q.weight * beta * mu / h * jk[a] * jk[b];
                    }
                }
            }
            cons.add_block(&dofs, &dofs, &kc);
            pen.add_block(&dofs, &dofs, &kp);
        }
    }
    Ok((cons.into_csr(), pen.into_csr()))
}

/// Concatenated member DOFs with, for every member `k`, the coefficient
/// rows of `v_k - <v>` and of `nu_k . sigma(v_k)`.
pub(crate) fn stacked_terms(q: &CurveQuadPoint, weights: &[f64]) -> (Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dofs: Vec<usize> = q.members.iter().flat_map(|m| m.dofs.iter().copied()).collect();
    let m = dofs.len();
    let mut starts = Vec::with_capacity(q.members.len());
    let mut s = 0;
    for tp in &q.members {
        starts.push(s);
        s += tp.dofs.len();
    }
    let mut jumps = Vec::with_capacity(q.members.len());
    let mut fluxes = Vec::with_capacity(q.members.len());
    for (k, tp) in q.members.iter().enumerate() {
        let mut jk = vec![0.0; m];
        for (l, tl) in q.members.iter().enumerate() {
            let coef = if l == k { 1.0 } else { 0.0 } - weights[l];
            for (a, v) in tl.values.iter().enumerate() {
                jk[starts[l] + a] += coef * v;
            }
        }
        let mut fk = vec![0.0; m];
        for (a, g) in tp.fluxes.iter().enumerate() {
            fk[starts[k] + a] = *g;
        }
        jumps.push(jk);
        fluxes.push(fk);
    }
    (dofs, jumps, fluxes)
}

/// Nitsche terms on the Dirichlet boundary: matrix and load contribution.
pub fn assemble_dirichlet(disc: &Discretization, problem: &ProblemData) -> Result<(CsrMatrix, Vec<f64>)> {
    let n = disc.ndofs();
    let mut t = Triplets::new(n);
    let mut rhs = vec![0.0; n];
    for seg in disc.surface.boundary() {
        if seg.kind != BoundaryKind::Dirichlet {
            continue;
        }
        let mu = disc.surface.patches()[seg.patch].mu;
        let h = disc.meshes[seg.patch].h;
        let pen = problem.beta * mu / h;
        for q in boundary_points(disc, seg.patch, seg.piece, disc.orders.curve)? {
            let tp = &q.members[0];
            let m = tp.dofs.len();
            let mut k = DMatrix::zeros(m, m);
            for a in 0..m {
                for b in 0..m {
                    k[(a, b)] += q.weight
                        * (-tp.fluxes[a] * tp.values[b] - tp.values[a] * tp.fluxes[b] + pen * tp.values[a] * tp.values[b]);
                }
            }
            t.add_block(&tp.dofs, &tp.dofs, &k);
            let g = (problem.g_d)(seg.patch, &tp.xref, &tp.x);
            for a in 0..m {
                rhs[tp.dofs[a]] += q.weight * g * (pen * tp.values[a] - tp.fluxes[a]);
            }
        }
    }
    Ok((t.into_csr(), rhs))
}

/// `(f, w)_Omega + (g_N, w)_{Gamma_N}`.
pub fn assemble_load(disc: &Discretization, problem: &ProblemData) -> Result<Vec<f64>> {
    let mut rhs = vec![0.0; disc.ndofs()];
    for (i, mesh) in disc.meshes.iter().enumerate() {
        for (c, _) in mesh.active_cells() {
            let dofs = disc.space.patches[i].cell_dofs(c);
            for q in disc.cell_points(i, c, disc.orders.volume)? {
                let f = (problem.f)(i, &q.x, &q.phys);
                for (a, &d) in dofs.iter().enumerate() {
                    rhs[d] += q.weight * f * q.values[a];
                }
            }
        }
    }
    for seg in disc.surface.boundary() {
        if seg.kind != BoundaryKind::Neumann {
            continue;
        }
        for q in boundary_points(disc, seg.patch, seg.piece, disc.orders.curve)? {
            let tp = &q.members[0];
            let g = (problem.g_n)(seg.patch, &tp.xref, &tp.x, &tp.nu);
            for (a, &d) in tp.dofs.iter().enumerate() {
                rhs[d] += q.weight * g * tp.values[a];
            }
        }
    }
    Ok(rhs)
}

pub fn assemble_stabilization(disc: &Discretization, problem: &ProblemData) -> Result<CsrMatrix> {
    match problem.stabilizer {
        Stabilizer::Jump => assemble_stab_jump(disc, &problem.gamma),
        Stabilizer::Gradvar => Ok(assemble_stab_gradvar(disc)?.scaled(problem.gradvar_weight)),
        Stabilizer::None => Ok(CsrMatrix::zeros(disc.ndofs())),
    }
}

/// Full system for `problem` on `disc`.
pub fn assemble(disc: &Discretization, problem: &ProblemData) -> Result<AssembledSystem> {
    problem.validate(disc.p())?;
    let volume = assemble_volume(disc)?;
    let (interface_consistency, interface_penalty) = assemble_interface(disc, problem.beta)?;
    let (dirichlet, dirichlet_rhs) = assemble_dirichlet(disc, problem)?;
    let stabilization = assemble_stabilization(disc, problem)?;
    let mut b = assemble_load(disc, problem)?;
    for (x, y) in b.iter_mut().zip(&dirichlet_rhs) {
        *x += y;
    }
    let a = volume
        .add(&interface_consistency)
        .add(&interface_penalty)
        .add(&dirichlet)
        .add(&stabilization);
    Ok(AssembledSystem {
        a,
        b,
        parts: SystemParts {
            volume,
            interface_consistency,
            interface_penalty,
            dirichlet,
            stabilization,
        },
        params: SystemParams {
            beta: problem.beta,
            gamma1: problem.gamma.first().copied().unwrap_or(0.0),
            gamma2: problem.gamma.get(1).copied().unwrap_or(0.0),
            stabilizer: problem.stabilizer,
        },
    })
}
