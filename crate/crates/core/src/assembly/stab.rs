use nalgebra::{DMatrix, Vector2};

use super::Discretization;
use crate::error::Result;
use crate::mesh::{Face, PatchMesh};
use crate::polygon::{Point, Rect};
use crate::quadrature::{gauss_1d, rect_rule};
use crate::space::eval_basis;
use crate::sparse::{CsrMatrix, Triplets};

/// Lower corner of the second cell of `face`, moved next to the first cell
/// so that periodic wrap faces are evaluated in one frame.
fn neighbour_lo(mesh: &PatchMesh, face: &Face) -> Point {
    let mut lo = mesh.cells[face.cells[0]].rect.lo;
    lo[face.axis] += mesh.h;
    lo
}

/// Union of the DOFs of both cells, with the positions of each cell's local
/// DOFs in that union.
fn merged_dofs(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut all: Vec<usize> = a.iter().chain(b).copied().collect();
    all.sort_unstable();
    all.dedup();
    let pos = |d: &usize| all.binary_search(d).unwrap();
    let pa = a.iter().map(pos).collect();
    let pb = b.iter().map(pos).collect();
    (all, pa, pb)
}

/// `sum_F sum_k gamma_k h^(2k-1) ([D_n^k v], [D_n^k w])_F` with reference
/// normal derivatives on the stabilization faces of every patch.
pub fn assemble_stab_jump(disc: &Discretization, gamma: &[f64]) -> Result<CsrMatrix> {
    let p = disc.p();
    let mut t = Triplets::new(disc.ndofs());
    let (gx, gw) = gauss_1d(disc.orders.face)?;
    for (i, mesh) in disc.meshes.iter().enumerate() {
        let h = mesh.h;
        for face in &mesh.stab_faces {
            let [ca, cb] = face.cells;
            let lo_a = mesh.cells[ca].rect.lo;
            let lo_b = neighbour_lo(mesh, face);
            let (dofs, pa, pb) = merged_dofs(disc.space.patches[i].cell_dofs(ca), disc.space.patches[i].cell_dofs(cb));
            let m = dofs.len();
            let mut local = DMatrix::zeros(m, m);
            let tangent = 1 - face.axis;
            for (s, w) in gx.iter().zip(gw) {
                let mut x = lo_b;
                x[tangent] += s * h;
                let ea = eval_basis(&lo_a, h, p, &x)?;
                let eb = eval_basis(&lo_b, h, p, &x)?;
                for k in 1..=p {
                    let g = gamma.get(k - 1).copied().unwrap_or(0.0);
                    if g == 0.0 {
                        continue;
                    }
                    let deriv = |e: &crate::space::BasisEval, n: usize| -> f64 {
                        if k == 1 {
                            e.grads[n][face.axis]
                        } else {
                            e.hessians[n][2 * face.axis]
                        }
                    };
                    let mut jump = vec![0.0; m];
                    for n in 0..pb.len() {
                        jump[pb[n]] += deriv(&eb, n);
                    }
                    for n in 0..pa.len() {
                        jump[pa[n]] -= deriv(&ea, n);
                    }
                    let c = g * h.powi(2 * k as i32 - 1) * w * h;
                    for a in 0..m {
                        for b in 0..m {
                            local[(a, b)] += c * jump[a] * jump[b];
                        }
                    }
                }
            }
            t.add_block(&dofs, &dofs, &local);
        }
    }
    Ok(t.into_csr())
}

/// Gradients of the monomials `s^a r^b` (`a, b <= p`, constant dropped) in
/// coordinates scaled by `h` around `origin`.
fn monomial_grads(p: usize, origin: &Point, h: f64, x: &Point) -> Vec<Vector2<f64>> {
    let s = (x[0] - origin[0]) / h;
    let r = (x[1] - origin[1]) / h;
    let mut out = Vec::new();
    for b in 0..=p as i32 {
        for a in 0..=p as i32 {
            if a == 0 && b == 0 {
                continue;
            }
            let ds = if a > 0 { a as f64 * s.powi(a - 1) * r.powi(b) } else { 0.0 };
            let dr = if b > 0 { b as f64 * s.powi(a) * r.powi(b - 1) } else { 0.0 };
            out.push(Vector2::new(ds, dr) / h);
        }
    }
    out
}

/// `sum_F (grad(v - P_F v), grad(w - P_F w))_{K1 u K2}` where `P_F` is the
/// H1 projection onto `Q_p` of the (full, unclipped) cell pair, evaluated
/// in reference coordinates.
pub fn assemble_stab_gradvar(disc: &Discretization) -> Result<CsrMatrix> {
    let p = disc.p();
    let mut t = Triplets::new(disc.ndofs());
    let mut skipped = 0usize;
    for (i, mesh) in disc.meshes.iter().enumerate() {
        let h = mesh.h;
        for face in &mesh.stab_faces {
            let [ca, cb] = face.cells;
            let lo_a = mesh.cells[ca].rect.lo;
            let lo_b = neighbour_lo(mesh, face);
            let (dofs, pa, pb) = merged_dofs(disc.space.patches[i].cell_dofs(ca), disc.space.patches[i].cell_dofs(cb));
            let m = dofs.len();
            let nm = (p + 1) * (p + 1) - 1;
            let mut k_loc = DMatrix::<f64>::zeros(m, m);
            let mut g_red = DMatrix::<f64>::zeros(nm, nm);
            let mut g_pv = DMatrix::<f64>::zeros(nm, m);
            for (lo, pos) in [(lo_a, &pa), (lo_b, &pb)] {
                let rect = Rect::new(lo, lo + Point::new(h, h));
                let rule = rect_rule(&rect, disc.orders.volume)?;
                for (x, w) in rule.points.iter().zip(&rule.weights) {
                    let e = eval_basis(&lo, h, p, x)?;
                    let mut g = vec![Vector2::zeros(); m];
                    for (n, &q) in pos.iter().enumerate() {
                        g[q] += e.grads[n];
                    }
                    let mg = monomial_grads(p, &lo_a, h, x);
                    for a in 0..m {
                        for b in 0..m {
                            k_loc[(a, b)] += w * g[a].dot(&g[b]);
                        }
                    }
                    for a in 0..nm {
                        for b in 0..nm {
                            g_red[(a, b)] += w * mg[a].dot(&mg[b]);
                        }
                        for b in 0..m {
                            g_pv[(a, b)] += w * mg[a].dot(&g[b]);
                        }
                    }
                }
            }
            let Some(chol) = g_red.cholesky() else {
                skipped += 1;
                continue;
            };
            let local: DMatrix<f64> = &k_loc - g_pv.transpose() * chol.solve(&g_pv);
            let local = (&local + local.transpose()) * 0.5;
            t.add_block(&dofs, &dofs, &local);
        }
    }
    if skipped > 0 {
        eprintln!("warning: {skipped} stabilization faces skipped (singular local projection)");
    }
    Ok(t.into_csr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builders;
    use crate::mesh::MeshOptions;

    fn cut_square(p: usize, h: f64) -> Discretization {
        Discretization::new(builders::unit_square().unwrap(), MeshOptions::cut(h), p).unwrap()
    }

    #[test]
    fn global_polynomials_are_not_penalized() {
        for p in [1, 2] {
            let d = cut_square(p, 0.2);
            assert!(d.meshes[0].stab_faces.len() > 0);
            let s = assemble_stab_jump(&d, &[1.0, 1.0]).unwrap();
            let g = assemble_stab_gradvar(&d).unwrap();
            let v = d.space.interpolate(&d.surface, &d.meshes, |_, x| {
                if p == 1 {
                    2.0 * x[0] - x[1] + 0.5
                } else {
                    x[0] * x[0] - 3.0 * x[0] * x[1] + x[1]
                }
            });
            assert!(s.bilinear(&v, &v).abs() < 1e-12);
            assert!(g.bilinear(&v, &v).abs() < 1e-12);
            assert!(s.asymmetry() < 1e-14 && g.asymmetry() < 1e-12);
        }
    }

    #[test]
    fn kink_across_a_face() {
        let d = cut_square(1, 0.2);
        let mesh = &d.meshes[0];
        let face = mesh.stab_faces.iter().find(|f| f.axis == 0).copied().unwrap();
        let xf = mesh.cells[face.cells[0]].rect.hi[0];
        // slope 1 left of the face line, 2 to the right
        let v = d
            .space
            .interpolate(&d.surface, &d.meshes, |_, x| if x[0] <= xf + 1e-12 { x[0] } else { 2.0 * x[0] - xf });
        let mut single = d.clone();
        single.meshes[0].stab_faces = vec![face];
        let s = assemble_stab_jump(&single, &[0.01]).unwrap();
        let e = s.bilinear(&v, &v);
        assert!((e - 0.01 * mesh.h * mesh.h).abs() < 1e-15, "{e}");
        let g = assemble_stab_gradvar(&single).unwrap();
        assert!(g.bilinear(&v, &v) > 1e-3 * mesh.h * mesh.h);
    }

    #[test]
    fn both_stabilizers_are_psd() {
        let d = cut_square(2, 0.3);
        let s = assemble_stab_jump(&d, &[0.01, 0.01]).unwrap();
        let g = assemble_stab_gradvar(&d).unwrap();
        let es = nalgebra::SymmetricEigen::new(s.to_dense()).eigenvalues;
        let eg = nalgebra::SymmetricEigen::new(g.to_dense()).eigenvalues;
        assert!(es.min() > -1e-12 * es.max());
        assert!(eg.min() > -1e-10 * eg.max());
    }
}
