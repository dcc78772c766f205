use nalgebra::Vector3;

use super::Discretization;
use crate::error::{Error, Result};
use crate::geometry::Curve2;
use crate::mesh::PatchMesh;
use crate::polygon::Point;
use crate::quadrature::gauss_1d;
use crate::space::eval_basis;

/// One member patch evaluated at an interface or boundary quadrature point.
#[derive(Clone, Debug)]
pub struct TracePoint {
    pub patch: usize,
    pub cell: usize,
    pub xref: Point,
    pub x: Vector3<f64>,
    /// Outward unit conormal.
    pub nu: Vector3<f64>,
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
    /// Tangential gradients of the shape functions.
    pub grads: Vec<Vector3<f64>>,
    /// `mu nu . grad phi` for every shape function.
    pub fluxes: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CurveQuadPoint {
    pub t: f64,
    /// Gauss weight times the speed of the curve in R^3.
    pub weight: f64,
    pub members: Vec<TracePoint>,
}

const SNAP: f64 = 1e-9;

fn grid_coord(mesh: &PatchMesh, x: &Point, d: usize) -> f64 {
    let u = (x[d] - mesh.origin[d]) / mesh.h;
    if (u - u.round()).abs() < SNAP {
        u.round()
    } else {
        u
    }
}

/// Parameters in `(0, 1)` where the reference curve crosses or touches a
/// grid line of `mesh`.
pub fn trace_breaks(mesh: &PatchMesh, curve: &Curve2) -> Vec<f64> {
    let samples = ((8.0 * curve.approx_length(64) / mesh.h).ceil() as usize).max(32);
    let ts: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
    let pts: Vec<Point> = ts.iter().map(|&t| curve.point(t)).collect();
    let mut out = Vec::new();
    for d in 0..2 {
        let u: Vec<f64> = pts.iter().map(|p| grid_coord(mesh, p, d)).collect();
        for k in 0..samples {
            if u[k] == u[k].round() && k > 0 {
                out.push(ts[k]);
            }
            let (lo, hi) = (u[k].min(u[k + 1]), u[k].max(u[k + 1]));
            let mut line = lo.floor() + 1.0;
            while line < hi {
                if line > lo {
                    // bisection on u_d(t) = line
                    let (mut a, mut b) = (ts[k], ts[k + 1]);
                    let fa = u[k] - line;
                    for _ in 0..80 {
                        let m = 0.5 * (a + b);
                        let fm = (curve.point(m)[d] - mesh.origin[d]) / mesh.h - line;
                        if (fm < 0.0) == (fa < 0.0) {
                            a = m;
                        } else {
                            b = m;
                        }
                        if b - a < 1e-15 {
                            break;
                        }
                    }
                    out.push(0.5 * (a + b));
                }
                line += 1.0;
            }
        }
    }
    out
}

fn merge_breaks(mut inner: Vec<f64>) -> Vec<f64> {
    inner.push(0.0);
    inner.push(1.0);
    inner.retain(|t| (0.0..=1.0).contains(t));
    inner.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(inner.len());
    for t in inner {
        if out.last().is_none_or(|&l| t - l > 1e-13) {
            out.push(t);
        }
    }
    if let Some(l) = out.last_mut() {
        *l = 1.0;
    }
    out
}

/// Evaluates member `patch` at parameter `t` of its reference curve,
/// choosing the active cell from a point shifted slightly inward at `t_cell`.
fn trace_point(
    disc: &Discretization,
    patch: usize,
    piece: usize,
    t: f64,
    cell: usize,
) -> Result<TracePoint> {
    let p = &disc.surface.patches()[patch];
    let mesh = &disc.meshes[patch];
    let xref = p.domain.pieces()[piece].curve.point(t);
    let nu_hat = p.domain.outward_normal(piece, t);
    let nu = disc.surface.push_conormal(patch, &xref, &nu_hat)?;
    let (ginv, _) = p.map.inverse_metric(&xref)?;
    let jac = p.map.jacobian(&xref);
    let rect = &mesh.cells[cell].rect;
    // evaluate in the cell's own periodic frame
    let mut xe = xref;
    if mesh.periodic {
        let period = mesh.n[0] as f64 * mesh.h;
        let c = 0.5 * (rect.lo[0] + rect.hi[0]);
        xe[0] += ((c - xe[0]) / period).round() * period;
    }
    let b = eval_basis(&rect.lo, mesh.h, disc.p(), &xe)?;
    let grads: Vec<Vector3<f64>> = b.grads.iter().map(|g| jac * (ginv * g)).collect();
    let fluxes = grads.iter().map(|g| p.mu * nu.dot(g)).collect();
    Ok(TracePoint {
        patch,
        cell,
        xref,
        x: p.map.point(&xref),
        nu,
        dofs: disc.space.patches[patch].cell_dofs(cell).to_vec(),
        values: b.values,
        grads,
        fluxes,
    })
}

fn locate_panel(disc: &Discretization, patch: usize, piece: usize, t: f64) -> Result<usize> {
    let p = &disc.surface.patches()[patch];
    let mesh = &disc.meshes[patch];
    let x = p.domain.pieces()[piece].curve.point(t);
    let inward = -p.domain.outward_normal(piece, t);
    // the exact curve may leave the polygonized domain by its chord error
    mesh.locate_within(&(x + 1e-6 * mesh.h * inward), 1e-3 * mesh.h).ok_or_else(|| {
        Error::Mesh(format!(
            "curve point {:?} of patch {patch} is not covered by an active cell",
            x
        ))
    })
}

fn build_points(
    disc: &Discretization,
    members: &[(usize, usize)],
    breaks: &[f64],
    order: usize,
    speed: impl Fn(f64) -> f64,
) -> Result<Vec<CurveQuadPoint>> {
    let (gx, gw) = gauss_1d(order)?;
    let mut out = Vec::with_capacity(breaks.len() * gx.len());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        let cells = members
            .iter()
            .map(|&(patch, piece)| locate_panel(disc, patch, piece, mid))
            .collect::<Result<Vec<_>>>()?;
        for (x, w) in gx.iter().zip(gw) {
            let t = a + (b - a) * x;
            let pts = members
                .iter()
                .zip(&cells)
                .map(|(&(patch, piece), &cell)| trace_point(disc, patch, piece, t, cell))
                .collect::<Result<Vec<_>>>()?;
            out.push(CurveQuadPoint {
                t,
                weight: w * (b - a) * speed(t),
                members: pts,
            });
        }
    }
    Ok(out)
}

/// Quadrature on interface `j` in the master parameter; every member is
/// evaluated at the same `t`.
pub fn interface_points(disc: &Discretization, j: usize, order: usize) -> Result<Vec<CurveQuadPoint>> {
    let gamma = &disc.surface.interfaces()[j];
    let members: Vec<(usize, usize)> = gamma.members.iter().map(|m| (m.patch, m.piece)).collect();
    let mut breaks = Vec::new();
    for &(patch, piece) in &members {
        let curve = &disc.surface.patches()[patch].domain.pieces()[piece].curve;
        breaks.extend(trace_breaks(&disc.meshes[patch], curve));
    }
    let breaks = merge_breaks(breaks);
    let master = gamma.master.clone();
    build_points(disc, &members, &breaks, order, |t| master.derivative(t).norm())
}

/// Quadrature on a boundary piece of one patch.
pub fn boundary_points(disc: &Discretization, patch: usize, piece: usize, order: usize) -> Result<Vec<CurveQuadPoint>> {
    let p = &disc.surface.patches()[patch];
    let curve = p.domain.pieces()[piece].curve.clone();
    let breaks = merge_breaks(trace_breaks(&disc.meshes[patch], &curve));
    let map = p.map.clone();
    build_points(disc, &[(patch, piece)], &breaks, order, move |t| {
        (map.jacobian(&curve.point(t)) * curve.derivative(t)).norm()
    })
}
