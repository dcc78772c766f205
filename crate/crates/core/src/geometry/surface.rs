use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::curve::Curve3;
use super::domain::{PieceTag, ReferenceDomain};
use super::map::PatchMap;
use crate::error::{Error, Result};

/// Lower and upper admissible values of the diffusion coefficient.
pub const MU_BOUNDS: (f64, f64) = (1e-6, 1e6);

/// Relative tolerance for trace consistency `|F_k(c_k(t)) - c(t)|`.
pub const TRACE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Patch {
    pub name: String,
    pub map: PatchMap,
    pub domain: ReferenceDomain,
    /// Piecewise constant diffusion coefficient.
    pub mu: f64,
}

/// A member of an interface: the patch and the boundary piece of its
/// reference domain that traces the curve. The piece is parametrized in the
/// same `t` as the master curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceMember {
    pub patch: usize,
    pub piece: usize,
}

#[derive(Clone, Debug)]
pub struct InterfaceCurve {
    pub master: Curve3,
    pub members: Vec<InterfaceMember>,
    /// Convex weights of the average `<v> = sum_k alpha_k v_k`.
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundarySegment {
    pub patch: usize,
    pub piece: usize,
    pub kind: BoundaryKind,
}

/// Union of exactly parametrized patches glued along interface curves.
#[derive(Clone, Debug)]
pub struct CompositeSurface {
    patches: Vec<Patch>,
    interfaces: Vec<InterfaceCurve>,
    boundary: Vec<BoundarySegment>,
    diameter: f64,
}

impl InterfaceCurve {
    /// Interface with equal weights `1/m`.
    pub fn new(master: Curve3, members: Vec<InterfaceMember>) -> Self {
        let m = members.len().max(1);
        Self {
            master,
            weights: vec![1.0 / m as f64; members.len()],
            members,
        }
    }
}

fn check_weights(w: &[f64], m: usize) -> Result<()> {
    if w.len() != m {
        return Err(Error::InvalidParameter(format!(
            "{} average weights given for {} member patches",
            w.len(),
            m
        )));
    }
    if w.iter().any(|&a| !(0.0..=1.0).contains(&a)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "average weights {w:?} are not a convex combination"
        )));
    }
    Ok(())
}

impl CompositeSurface {
    pub fn new(patches: Vec<Patch>, interfaces: Vec<InterfaceCurve>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::InvalidSurface("no patches".into()));
        }
        for (i, p) in patches.iter().enumerate() {
            if !(p.mu >= MU_BOUNDS.0 && p.mu <= MU_BOUNDS.1) {
                return Err(Error::InvalidSurface(format!(
                    "patch {i}: mu = {} outside [{}, {}]",
                    p.mu, MU_BOUNDS.0, MU_BOUNDS.1
                )));
            }
        }

        // every interface-tagged piece is claimed by its interface exactly once
        let mut claimed: Vec<Vec<Option<usize>>> =
            patches.iter().map(|p| vec![None; p.domain.pieces().len()]).collect();
        for (j, gamma) in interfaces.iter().enumerate() {
            if gamma.members.len() < 2 {
                return Err(Error::InvalidSurface(format!(
                    "interface {j} has {} member patch(es); at least 2 are required",
                    gamma.members.len()
                )));
            }
            check_weights(&gamma.weights, gamma.members.len())?;
            for m in &gamma.members {
                let slot = patches
                    .get(m.patch)
                    .and_then(|p| p.domain.pieces().get(m.piece))
                    .ok_or_else(|| Error::InvalidSurface(format!("interface {j}: bad member {m:?}")))?;
                if slot.tag != PieceTag::Interface(j) {
                    return Err(Error::InvalidSurface(format!(
                        "interface {j}: piece {} of patch {} is tagged {:?}",
                        m.piece, m.patch, slot.tag
                    )));
                }
                if claimed[m.patch][m.piece].replace(j).is_some() {
                    return Err(Error::InvalidSurface(format!(
                        "piece {} of patch {} belongs to two interfaces",
                        m.piece, m.patch
                    )));
                }
            }
        }

        let mut boundary = Vec::new();
        for (i, p) in patches.iter().enumerate() {
            for (k, piece) in p.domain.pieces().iter().enumerate() {
                match piece.tag {
                    PieceTag::Interface(j) if claimed[i][k] != Some(j) => {
                        return Err(Error::InvalidSurface(format!(
                            "piece {k} of patch {i} is tagged for interface {j} but not listed there"
                        )))
                    }
                    PieceTag::Dirichlet => boundary.push(BoundarySegment {
                        patch: i,
                        piece: k,
                        kind: BoundaryKind::Dirichlet,
                    }),
                    PieceTag::Neumann => boundary.push(BoundarySegment {
                        patch: i,
                        piece: k,
                        kind: BoundaryKind::Neumann,
                    }),
                    _ => {}
                }
            }
        }
        if !boundary.iter().any(|b| b.kind == BoundaryKind::Dirichlet) {
            return Err(Error::InvalidSurface("Dirichlet boundary is empty".into()));
        }

        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in &patches {
            let (a, b) = p.domain.bounds();
            for s in 0..=8 {
                for r in 0..=8 {
                    let x = Vector2::new(
                        a[0] + (b[0] - a[0]) * s as f64 / 8.0,
                        a[1] + (b[1] - a[1]) * r as f64 / 8.0,
                    );
                    let y = p.map.point(&x);
                    lo = lo.inf(&y);
                    hi = hi.sup(&y);
                }
            }
        }
        let surf = Self {
            patches,
            interfaces,
            boundary,
            diameter: (hi - lo).norm(),
        };
        surf.validate()?;
        Ok(surf)
    }

    fn validate(&self) -> Result<()> {
        let tol = TRACE_TOL * self.diameter.max(1.0);

        // rank of the Jacobian on a sample of interior points
        for (i, p) in self.patches.iter().enumerate() {
            let (a, b) = p.domain.bounds();
            for s in 0..=10 {
                for r in 0..=10 {
                    let x = Vector2::new(
                        a[0] + (b[0] - a[0]) * s as f64 / 10.0,
                        a[1] + (b[1] - a[1]) * r as f64 / 10.0,
                    );
                    p.map.inverse_metric(&x).map_err(|e| {
                        Error::InvalidSurface(format!("patch {i}: {e}"))
                    })?;
                }
            }
        }

        for (j, gamma) in self.interfaces.iter().enumerate() {
            for q in 0..=20 {
                let t = q as f64 / 20.0;
                let c = gamma.master.point(t);
                for m in &gamma.members {
                    let p = &self.patches[m.patch];
                    let y = p.map.point(&p.domain.pieces()[m.piece].curve.point(t));
                    if (y - c).norm() > tol {
                        return Err(Error::InvalidSurface(format!(
                            "interface {j}: trace of patch {} is off the curve by {:e} at t = {t}",
                            m.patch,
                            (y - c).norm()
                        )));
                    }
                }
            }
        }

        // pairwise disjoint interfaces
        let samples: Vec<Vec<Vector3<f64>>> = self
            .interfaces
            .iter()
            .map(|g| (0..=64).map(|q| g.master.point(q as f64 / 64.0)).collect())
            .collect();
        for a in 0..samples.len() {
            for b in a + 1..samples.len() {
                let d = samples[a]
                    .iter()
                    .flat_map(|x| samples[b].iter().map(move |y| (x - y).norm()))
                    .fold(f64::INFINITY, f64::min);
                if d < tol {
                    return Err(Error::InvalidSurface(format!("interfaces {a} and {b} intersect")));
                }
            }
        }

        // connectivity of the patch graph
        let n = self.patches.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for gamma in &self.interfaces {
            let r0 = root(&mut parent, gamma.members[0].patch);
            for m in &gamma.members[1..] {
                let r = root(&mut parent, m.patch);
                parent[r] = r0;
            }
        }
        let r0 = root(&mut parent, 0);
        if (1..n).any(|i| root(&mut parent, i) != r0) {
            return Err(Error::InvalidSurface("patches are not connected through interfaces".into()));
        }

        // corner condition on consecutive boundary pieces
        for (i, p) in self.patches.iter().enumerate() {
            for (a, ar, b, br) in p.domain.junctions() {
                let pieces = p.domain.pieces();
                if a == b || pieces[a].tag == PieceTag::Seam || pieces[b].tag == PieceTag::Seam {
                    continue;
                }
                let ta = if ar { 0.0 } else { 1.0 };
                let tb = if br { 1.0 } else { 0.0 };
                let x = pieces[a].curve.point(ta);
                let na = self.push_conormal(i, &x, &p.domain.outward_normal(a, ta))?;
                let nb = self.push_conormal(i, &x, &p.domain.outward_normal(b, tb))?;
                if na.dot(&nb) <= -1.0 + 1e-6 {
                    return Err(Error::InvalidSurface(format!(
                        "patch {i}: cusp between boundary pieces {a} and {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn interfaces(&self) -> &[InterfaceCurve] {
        &self.interfaces
    }

    pub fn boundary(&self) -> &[BoundarySegment] {
        &self.boundary
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn set_weights(&mut self, j: usize, weights: Vec<f64>) -> Result<()> {
        let gamma = self
            .interfaces
            .get_mut(j)
            .ok_or_else(|| Error::InvalidParameter(format!("no interface {j}")))?;
        check_weights(&weights, gamma.members.len())?;
        gamma.weights = weights;
        Ok(())
    }

    pub fn set_mu(&mut self, i: usize, mu: f64) -> Result<()> {
        if !(mu >= MU_BOUNDS.0 && mu <= MU_BOUNDS.1) {
            return Err(Error::InvalidParameter(format!("mu = {mu} out of bounds")));
        }
        self.patches
            .get_mut(i)
            .ok_or_else(|| Error::InvalidParameter(format!("no patch {i}")))?
            .mu = mu;
        Ok(())
    }

    /// `normalize(J G^{-1} nu_hat)` for a reference conormal `nu_hat`.
    pub fn push_conormal(&self, patch: usize, x: &Vector2<f64>, nu_hat: &Vector2<f64>) -> Result<Vector3<f64>> {
        let map = &self.patches[patch].map;
        let (ginv, _) = map.inverse_metric(x)?;
        Ok((map.jacobian(x) * (ginv * nu_hat)).normalize())
    }

    /// Reference point of member `k` of interface `j` at parameter `t`.
    pub fn trace(&self, j: usize, k: usize, t: f64) -> Result<Vector2<f64>> {
        let m = self.member(j, k)?;
        Ok(self.patches[m.patch].domain.pieces()[m.piece].curve.point(t))
    }

    fn member(&self, j: usize, k: usize) -> Result<InterfaceMember> {
        let gamma = self
            .interfaces
            .get(j)
            .ok_or_else(|| Error::InvalidParameter(format!("no interface {j}")))?;
        gamma.members.get(k).copied().ok_or_else(|| {
            Error::InvalidParameter(format!("interface {j} has no member {k}"))
        })
    }

    /// Outward unit conormal of member `k` of interface `j` at `t`.
    pub fn conormal(&self, j: usize, k: usize, t: f64) -> Result<Vector3<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("curve parameter {t} outside [0, 1]")));
        }
        let m = self.member(j, k)?;
        let dom = &self.patches[m.patch].domain;
        let x = dom.pieces()[m.piece].curve.point(t);
        self.push_conormal(m.patch, &x, &dom.outward_normal(m.piece, t))
    }

    /// Outward unit conormal of boundary piece `piece` of `patch`.
    pub fn boundary_conormal(&self, patch: usize, piece: usize, t: f64) -> Result<Vector3<f64>> {
        let dom = &self.patches[patch].domain;
        let x = dom.pieces()[piece].curve.point(t);
        self.push_conormal(patch, &x, &dom.outward_normal(piece, t))
    }
}
