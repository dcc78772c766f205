//! Tensor-product Lagrange spaces `Q_p` on patch meshes and the broken
//! composite space.

use std::collections::HashMap;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::CompositeSurface;
use crate::mesh::PatchMesh;
use crate::polygon::Point;

pub fn check_degree(p: usize) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedDegree(p))
    }
}

/// Value and first two derivatives of the 1D Lagrange polynomial `a` of
/// degree `p` on equispaced nodes of `[0, 1]`, at `s`.
pub fn lagrange_1d(p: usize, a: usize, s: f64) -> [f64; 3] {
    match (p, a) {
        (1, 0) => [1.0 - s, -1.0, 0.0],
        (1, 1) => [s, 1.0, 0.0],
        (2, 0) => [2.0 * (s - 0.5) * (s - 1.0), 4.0 * s - 3.0, 4.0],
        (2, 1) => [-4.0 * s * (s - 1.0), -8.0 * s + 4.0, -8.0],
        (2, 2) => [2.0 * s * (s - 0.5), 4.0 * s - 1.0, 4.0],
        _ => [0.0; 3],
    }
}

/// Shape functions of one cell at a point. Gradients and second
/// derivatives are taken with respect to reference coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<Vector2<f64>>,
    /// `(d_xixi, d_xieta, d_etaeta)`.
    pub hessians: Vec<[f64; 3]>,
}

/// Evaluates the `(p + 1)^2` shape functions of the cell with lower corner
/// `lo` and size `h` at reference point `x` (which may lie outside the cell).
/// Local index `a + (p + 1) b`.
pub fn eval_basis(lo: &Point, h: f64, p: usize, x: &Point) -> Result<BasisEval> {
    check_degree(p)?;
    let s = (x[0] - lo[0]) / h;
    let r = (x[1] - lo[1]) / h;
    let n = p + 1;
    let fs: Vec<[f64; 3]> = (0..n).map(|a| lagrange_1d(p, a, s)).collect();
    let fr: Vec<[f64; 3]> = (0..n).map(|b| lagrange_1d(p, b, r)).collect();
    let mut out = BasisEval {
        values: Vec::with_capacity(n * n),
        grads: Vec::with_capacity(n * n),
        hessians: Vec::with_capacity(n * n),
    };
    for b in 0..n {
        for a in 0..n {
            let (u, v) = (fs[a], fr[b]);
            out.values.push(u[0] * v[0]);
            out.grads.push(Vector2::new(u[1] * v[0], u[0] * v[1]) / h);
            out.hessians
                .push([u[2] * v[0] / (h * h), u[1] * v[1] / (h * h), u[0] * v[2] / (h * h)]);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PatchSpace {
    pub patch: usize,
    pub p: usize,
    /// Lagrange nodes per direction of the full lattice.
    pub lattice: [usize; 2],
    /// Global number of the first DOF of this patch.
    pub offset: usize,
    pub ndofs: usize,
    /// Lattice index `(k0, k1)` to local DOF.
    dof_of_node: HashMap<[usize; 2], usize>,
    /// Local DOF to lattice index.
    pub nodes: Vec<[usize; 2]>,
    cell_dofs: Vec<Vec<usize>>,
}

impl PatchSpace {
    pub fn new(mesh: &PatchMesh, p: usize, offset: usize) -> Result<Self> {
        check_degree(p)?;
        let lattice = [
            p * mesh.n[0] + usize::from(!mesh.periodic),
            p * mesh.n[1] + 1,
        ];
        let node = |i: usize, j: usize, a: usize, b: usize| {
            let k0 = p * i + a;
            [if mesh.periodic { k0 % lattice[0] } else { k0 }, p * j + b]
        };
        let mut used: Vec<[usize; 2]> = Vec::new();
        for (_, c) in mesh.active_cells() {
            let [i, j] = c.index;
            for b in 0..=p {
                for a in 0..=p {
                    used.push(node(i, j, a, b));
                }
            }
        }
        if used.is_empty() {
            return Err(Error::Mesh(format!("patch {} has no active cells", mesh.patch)));
        }
        // lexicographic: eta outer, xi inner
        used.sort_by_key(|k| (k[1], k[0]));
        used.dedup();
        let dof_of_node: HashMap<[usize; 2], usize> =
            used.iter().enumerate().map(|(d, k)| (*k, d)).collect();

        let cell_dofs = mesh
            .cells
            .iter()
            .map(|c| {
                if !c.active {
                    return Vec::new();
                }
                let [i, j] = c.index;
                let mut v = Vec::with_capacity((p + 1) * (p + 1));
                for b in 0..=p {
                    for a in 0..=p {
                        v.push(offset + dof_of_node[&node(i, j, a, b)]);
                    }
                }
                v
            })
            .collect();
        Ok(Self {
            patch: mesh.patch,
            p,
            lattice,
            offset,
            ndofs: used.len(),
            dof_of_node,
            nodes: used,
            cell_dofs,
        })
    }

    /// Global DOFs of cell `c` in local order `a + (p + 1) b`.
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c]
    }

    pub fn dof_at(&self, k: [usize; 2]) -> Option<usize> {
        self.dof_of_node.get(&k).map(|d| self.offset + d)
    }

    /// Reference coordinates of the local DOF `d`.
    pub fn node_coords(&self, mesh: &PatchMesh, d: usize) -> Point {
        let k = self.nodes[d];
        mesh.origin + Point::new(k[0] as f64, k[1] as f64) * (mesh.h / self.p as f64)
    }
}

/// `V_h = sum_i V_{h,i}` with DOFs numbered patch by patch.
#[derive(Clone, Debug)]
pub struct BrokenSpace {
    pub p: usize,
    pub patches: Vec<PatchSpace>,
    pub ndofs: usize,
}

impl BrokenSpace {
    pub fn new(meshes: &[PatchMesh], p: usize) -> Result<Self> {
        check_degree(p)?;
        let mut patches = Vec::with_capacity(meshes.len());
        let mut offset = 0;
        for m in meshes {
            let s = PatchSpace::new(m, p, offset)?;
            offset += s.ndofs;
            patches.push(s);
        }
        Ok(Self {
            p,
            patches,
            ndofs: offset,
        })
    }

    /// Patch owning global DOF `d`.
    pub fn patch_of(&self, d: usize) -> usize {
        self.patches
            .iter()
            .position(|s| d >= s.offset && d < s.offset + s.ndofs)
            .expect("dof out of range")
    }

    /// Nodal interpolant of `v(patch, x)` where `x` is the physical point of
    /// each Lagrange node (nodes outside the domain use the extension of `v`).
    pub fn interpolate(
        &self,
        surface: &CompositeSurface,
        meshes: &[PatchMesh],
        v: impl Fn(usize, &Vector3<f64>) -> f64,
    ) -> Vec<f64> {
        let mut out = vec![0.0; self.ndofs];
        for (i, s) in self.patches.iter().enumerate() {
            let map = &surface.patches()[i].map;
            for d in 0..s.ndofs {
                let x = s.node_coords(&meshes[i], d);
                out[s.offset + d] = v(i, &map.point(&x));
            }
        }
        out
    }

    /// Value and reference gradient of the discrete function `u` on cell `c`
    /// of patch `i` at reference point `x`.
    pub fn eval(
        &self,
        meshes: &[PatchMesh],
        u: &[f64],
        i: usize,
        c: usize,
        x: &Point,
    ) -> Result<(f64, Vector2<f64>)> {
        let mesh = &meshes[i];
        let cell = &mesh.cells[c];
        let b = eval_basis(&cell.rect.lo, mesh.h, self.p, x)?;
        let dofs = self.patches[i].cell_dofs(c);
        let mut val = 0.0;
        let mut grad = Vector2::zeros();
        for (k, &d) in dofs.iter().enumerate() {
            val += u[d] * b.values[k];
            grad += u[d] * b.grads[k];
        }
        Ok((val, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builders;
    use crate::mesh::{build_meshes, MeshOptions};

    #[test]
    fn q1_center_values() {
        let b = eval_basis(&Point::zeros(), 1.0, 1, &Point::new(0.5, 0.5)).unwrap();
        assert!(b.values.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn q2_kronecker_at_nodes() {
        let h = 0.3;
        let lo = Point::new(0.1, -0.2);
        for nb in 0..3 {
            for na in 0..3 {
                let x = lo + Point::new(na as f64, nb as f64) * (h / 2.0);
                let b = eval_basis(&lo, h, 2, &x).unwrap();
                for (k, v) in b.values.iter().enumerate() {
                    let want = if k == na + 3 * nb { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(
            eval_basis(&Point::zeros(), 1.0, 3, &Point::zeros()),
            Err(Error::UnsupportedDegree(3))
        ));
    }

    #[test]
    fn periodic_lattice_wraps() {
        let s = builders::CylinderPair::default().build().unwrap();
        let meshes = build_meshes(&s, &MeshOptions::cut(0.4)).unwrap();
        let space = BrokenSpace::new(&meshes, 1).unwrap();
        let m = &meshes[0];
        assert!(m.periodic);
        // last column shares its right nodes with the first column
        let ps = &space.patches[0];
        for (c, cell) in m.active_cells() {
            if cell.index[0] == m.n[0] - 1 {
                let left = m.cell_at(0, cell.index[1] as isize).unwrap();
                if m.cells[left].active {
                    assert_eq!(ps.cell_dofs(c)[1], ps.cell_dofs(left)[0]);
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_constants_and_quadratics() {
        let s = builders::unit_square().unwrap();
        let meshes = build_meshes(&s, &MeshOptions::cut(0.25)).unwrap();
        let space = BrokenSpace::new(&meshes, 2).unwrap();
        let ones = space.interpolate(&s, &meshes, |_, _| 1.0);
        assert!(ones.iter().all(|&v| v == 1.0));
        let u = space.interpolate(&s, &meshes, |_, x| x[0] * x[0]);
        for (c, _) in meshes[0].active_cells() {
            let x = meshes[0].cells[c].rect.lo + Point::new(0.037, 0.11);
            let (v, g) = space.eval(&meshes, &u, 0, c, &x).unwrap();
            assert!((v - x[0] * x[0]).abs() < 1e-13);
            assert!((g[0] - 2.0 * x[0]).abs() < 1e-12);
        }
    }
}
