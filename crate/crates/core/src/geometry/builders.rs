//! Built-in composite surfaces and their JSON descriptions.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::curve::{Curve2, Curve3};
use super::domain::{BoundaryPiece, PieceTag, ReferenceDomain, Ring};
use super::map::PatchMap;
use super::surface::{CompositeSurface, InterfaceCurve, InterfaceMember, Patch};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Planar rectangle `origin + xi e1 + eta e2`, `(xi, eta) in [0, width] x [0, height]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectPatch {
    pub origin: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

fn default_mu() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideRef {
    pub patch: usize,
    pub side: Side,
}

/// Sides listed in `interfaces` are glued; sides in `neumann` get natural
/// conditions; all others are Dirichlet.
pub fn rect_assembly(
    rects: &[RectPatch],
    interfaces: &[Vec<SideRef>],
    neumann: &[SideRef],
) -> Result<CompositeSurface> {
    let mut tags: Vec<[PieceTag; 4]> = vec![[PieceTag::Dirichlet; 4]; rects.len()];
    let check = |r: &SideRef| -> Result<()> {
        if r.patch >= rects.len() {
            return Err(Error::InvalidSurface(format!("side refers to missing patch {}", r.patch)));
        }
        Ok(())
    };
    for s in neumann {
        check(s)?;
        tags[s.patch][s.side.index()] = PieceTag::Neumann;
    }
    for (j, members) in interfaces.iter().enumerate() {
        for s in members {
            check(s)?;
            if tags[s.patch][s.side.index()] != PieceTag::Dirichlet {
                return Err(Error::InvalidSurface(format!(
                    "side {:?} of patch {} assigned twice",
                    s.side, s.patch
                )));
            }
            tags[s.patch][s.side.index()] = PieceTag::Interface(j);
        }
    }

    let corners = |r: &RectPatch| {
        [
            Vector2::new(0.0, 0.0),
            Vector2::new(r.width, 0.0),
            Vector2::new(r.width, r.height),
            Vector2::new(0.0, r.height),
        ]
    };
    let maps: Vec<PatchMap> = rects
        .iter()
        .map(|r| PatchMap::Plane {
            origin: r.origin,
            e1: r.e1,
            e2: r.e2,
        })
        .collect();

    // reversed[i][s]: side s of patch i runs against the counter-clockwise order
    let mut reversed = vec![[false; 4]; rects.len()];
    let mut curves = Vec::new();
    for (j, members) in interfaces.iter().enumerate() {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidSurface(format!("interface {j} is empty")))?;
        let c = corners(&rects[first.patch]);
        let k = first.side.index();
        let a = maps[first.patch].point(&c[k]);
        let b = maps[first.patch].point(&c[(k + 1) % 4]);
        let scale = (b - a).norm();
        for s in &members[1..] {
            let c = corners(&rects[s.patch]);
            let k = s.side.index();
            let pa = maps[s.patch].point(&c[k]);
            let pb = maps[s.patch].point(&c[(k + 1) % 4]);
            if (pa - a).norm() <= 1e-12 * scale && (pb - b).norm() <= 1e-12 * scale {
                continue;
            }
            if (pb - a).norm() <= 1e-12 * scale && (pa - b).norm() <= 1e-12 * scale {
                reversed[s.patch][k] = true;
                continue;
            }
            return Err(Error::InvalidSurface(format!(
                "interface {j}: side {:?} of patch {} does not coincide with the first member",
                s.side, s.patch
            )));
        }
        curves.push(Curve3::segment(a, b));
    }

    let mut patches = Vec::with_capacity(rects.len());
    for (i, r) in rects.iter().enumerate() {
        if !(r.width > 0.0 && r.height > 0.0) {
            return Err(Error::InvalidSurface(format!("patch {i} has non-positive extent")));
        }
        let c = corners(r);
        let mut pieces = Vec::with_capacity(4);
        let mut ring = Vec::with_capacity(4);
        for k in 0..4 {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            let rev = reversed[i][k];
            pieces.push(BoundaryPiece {
                curve: if rev { Curve2::segment(b, a) } else { Curve2::segment(a, b) },
                tag: tags[i][k],
            });
            ring.push((k, rev));
        }
        let domain = ReferenceDomain::new(pieces, vec![Ring { pieces: ring, hole: false }], None)?;
        patches.push(Patch {
            name: format!("rect{i}"),
            map: maps[i].clone(),
            domain,
            mu: r.mu,
        });
    }

    let ifaces = interfaces
        .iter()
        .zip(curves)
        .map(|(members, curve)| {
            InterfaceCurve::new(
                curve,
                members
                    .iter()
                    .map(|s| InterfaceMember {
                        patch: s.patch,
                        piece: s.side.index(),
                    })
                    .collect(),
            )
        })
        .collect();
    CompositeSurface::new(patches, ifaces)
}

/// `[0, 1]^2` in the `z = 0` plane with Dirichlet boundary.
pub fn unit_square() -> Result<CompositeSurface> {
    rect_assembly(&[unit_rect([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])], &[], &[])
}

fn unit_rect(origin: [f64; 3], e1: [f64; 3], e2: [f64; 3]) -> RectPatch {
    RectPatch {
        origin,
        e1,
        e2,
        width: 1.0,
        height: 1.0,
        mu: 1.0,
    }
}

/// Unit square split at `x = 1/2` into two patches sharing one interface.
pub fn split_square() -> Result<CompositeSurface> {
    let left = RectPatch {
        width: 0.5,
        ..unit_rect([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    };
    let right = RectPatch {
        width: 0.5,
        ..unit_rect([0.5, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    };
    rect_assembly(
        &[left, right],
        &[vec![
            SideRef { patch: 0, side: Side::Right },
            SideRef { patch: 1, side: Side::Left },
        ]],
        &[],
    )
}

/// Two unit squares folded at a right angle along `x = 1, z = 0`. The
/// edges `y = 0` and `y = 1` are Neumann.
pub fn folded_square() -> Result<CompositeSurface> {
    let flat = unit_rect([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let wall = unit_rect([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]);
    let neumann = [
        SideRef { patch: 0, side: Side::Bottom },
        SideRef { patch: 0, side: Side::Top },
        SideRef { patch: 1, side: Side::Bottom },
        SideRef { patch: 1, side: Side::Top },
    ];
    rect_assembly(
        &[flat, wall],
        &[vec![
            SideRef { patch: 0, side: Side::Right },
            SideRef { patch: 1, side: Side::Left },
        ]],
        &neumann,
    )
}

/// Unit squares fanned around the segment `x = y = 0, z in [0, 1]`. Patch
/// `k` spans the direction `(cos a_k, sin a_k, 0)`.
pub fn flat_junction(angles: &[f64], neumann: &[SideRef]) -> Result<CompositeSurface> {
    if angles.len() < 2 {
        return Err(Error::InvalidSurface("a junction needs at least two patches".into()));
    }
    for a in 0..angles.len() {
        for b in a + 1..angles.len() {
            let d = (angles[a] - angles[b]).rem_euclid(2.0 * PI);
            if d < 1e-9 || 2.0 * PI - d < 1e-9 {
                return Err(Error::InvalidSurface(format!(
                    "patches {a} and {b} of the junction coincide"
                )));
            }
        }
    }
    let rects: Vec<RectPatch> = angles
        .iter()
        .map(|a| unit_rect([0.0; 3], [a.cos(), a.sin(), 0.0], [0.0, 0.0, 1.0]))
        .collect();
    let members = (0..angles.len())
        .map(|patch| SideRef { patch, side: Side::Left })
        .collect();
    rect_assembly(&rects, &[members], neumann)
}

/// Geometry of two transversally intersecting cylinders: the inner one
/// `y^2 + (z - z0)^2 = r1^2` and the outer one
/// `(x sin(theta) + y cos(theta))^2 + z^2 = r2^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderPair {
    pub r1: f64,
    pub r2: f64,
    pub theta: f64,
    pub z0: f64,
}

impl Default for CylinderPair {
    fn default() -> Self {
        Self {
            r1: 1.5,
            r2: 2.0,
            theta: 2.0 * PI / 3.0,
            z0: 0.15,
        }
    }
}

/// Distance the truncated cylinders extend beyond the intersection curves.
const CYLINDER_MARGIN: f64 = 0.4;

impl CylinderPair {
    pub fn validate(&self) -> Result<()> {
        let CylinderPair { r1, r2, theta, z0 } = *self;
        if !(r1 > 0.0 && r2 > r1) {
            return Err(Error::InvalidSurface(format!("need 0 < r1 < r2, got {r1}, {r2}")));
        }
        if !(theta > 0.0 && theta < PI) || theta.sin() < 1e-3 {
            return Err(Error::InvalidSurface(format!("axis angle {theta} is (nearly) parallel")));
        }
        if z0.abs() + r1 >= r2 * (1.0 - 1e-6) {
            return Err(Error::InvalidSurface(format!(
                "|z0| + r1 = {} reaches r2 = {r2}: the intersection is not transversal",
                z0.abs() + r1
            )));
        }
        Ok(())
    }

    /// Axis of the outer cylinder.
    pub fn outer_axis(&self) -> Vector3<f64> {
        Vector3::new(self.theta.cos(), -self.theta.sin(), 0.0)
    }

    /// Direction `m` with `x sin(theta) + y cos(theta) = p . m`.
    pub fn outer_radial(&self) -> Vector3<f64> {
        Vector3::new(self.theta.sin(), self.theta.cos(), 0.0)
    }

    /// Point and `d/dphi` of branch `sign = +-1` of the intersection curve,
    /// parametrized by the inner cylinder angle.
    fn branch(&self, sign: f64, phi: f64) -> Branch {
        let (s, c) = self.theta.sin_cos();
        let y = self.r1 * phi.cos();
        let z = self.z0 + self.r1 * phi.sin();
        let dy = -self.r1 * phi.sin();
        let dz = self.r1 * phi.cos();
        let w = sign * (self.r2 * self.r2 - z * z).sqrt();
        let dw = -z * dz / w;
        Branch {
            p: Vector3::new((w - y * c) / s, y, z),
            dp: Vector3::new((dw - dy * c) / s, dy, dz),
            w,
        }
    }

    /// Point on the intersection branch `sign` at `t in [0, 1]`, with derivative.
    pub fn curve_point(&self, sign: f64, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let b = self.branch(sign, 2.0 * PI * t);
        (b.p, 2.0 * PI * b.dp)
    }

    pub fn inner_map(&self) -> PatchMap {
        PatchMap::Cylinder {
            center: [0.0, 0.0, self.z0],
            u: [0.0, 1.0, 0.0],
            v: [0.0, 0.0, 1.0],
            axis: [1.0, 0.0, 0.0],
            radius: self.r1,
            angle0: 0.0,
            angle_scale: self.r1,
        }
    }

    pub fn outer_map(&self) -> PatchMap {
        let m = self.outer_radial();
        let a = self.outer_axis();
        PatchMap::Cylinder {
            center: [0.0; 3],
            u: [m[0], m[1], m[2]],
            v: [0.0, 0.0, 1.0],
            axis: [a[0], a[1], a[2]],
            radius: self.r2,
            angle0: -PI / 2.0,
            angle_scale: self.r2,
        }
    }

    /// Reference trace of branch `sign` on the inner cylinder, `(r1 phi, x)`.
    fn inner_trace(&self, sign: f64) -> Curve2 {
        let me = *self;
        Curve2::new(move |t| {
            let b = me.branch(sign, 2.0 * PI * t);
            (
                Vector2::new(me.r1 * 2.0 * PI * t, b.p[0]),
                2.0 * PI * Vector2::new(me.r1, b.dp[0]),
            )
        })
    }

    /// Reference trace of branch `sign` on the outer cylinder,
    /// `(r2 (psi + pi/2), s)` with `psi = atan2(z, w)` kept in `[-pi/2, 3pi/2)`.
    fn outer_trace(&self, sign: f64) -> Curve2 {
        let me = *self;
        let a = self.outer_axis();
        Curve2::new(move |t| {
            let b = me.branch(sign, 2.0 * PI * t);
            let mut psi = b.p[2].atan2(b.w);
            if psi < -PI / 2.0 {
                psi += 2.0 * PI;
            }
            let dpsi = b.dp[2] / b.w;
            (
                Vector2::new(me.r2 * (psi + PI / 2.0), b.p.dot(&a)),
                2.0 * PI * Vector2::new(me.r2 * dpsi, b.dp.dot(&a)),
            )
        })
    }

    /// Half lengths of the truncated inner and outer cylinders.
    pub fn extents(&self) -> (f64, f64) {
        let a = self.outer_axis();
        let mut l1: f64 = 0.0;
        let mut l2: f64 = 0.0;
        for sign in [1.0, -1.0] {
            for q in 0..2048 {
                let b = self.branch(sign, 2.0 * PI * q as f64 / 2048.0);
                l1 = l1.max(b.p[0].abs());
                l2 = l2.max(b.p.dot(&a).abs());
            }
        }
        (l1 + CYLINDER_MARGIN, l2 + CYLINDER_MARGIN)
    }

    /// Inner cylinder split into the middle piece and two ends, outer
    /// cylinder split into the part outside the inner one and two discs.
    /// Patches: 0 inner middle, 1 inner end (+), 2 inner end (-), 3 outer
    /// main, 4 disc (+), 5 disc (-). Interface 0 is the `+` branch and
    /// interface 1 the `-` branch; each has four members. Cut ends of the
    /// cylinders are Dirichlet.
    pub fn build(&self) -> Result<CompositeSurface> {
        self.validate()?;
        let (l1, l2) = self.extents();
        let p1 = 2.0 * PI * self.r1;
        let p2 = 2.0 * PI * self.r2;
        let seg = |a: (f64, f64), b: (f64, f64), tag| BoundaryPiece {
            curve: Curve2::segment(Vector2::new(a.0, a.1), Vector2::new(b.0, b.1)),
            tag,
        };
        let piece = |curve, tag| BoundaryPiece { curve, tag };
        let ring = |pieces: Vec<(usize, bool)>, hole| Ring { pieces, hole };

        let plus_in = self.inner_trace(1.0);
        let minus_in = self.inner_trace(-1.0);
        let xp0 = plus_in.point(0.0)[1];
        let xp1 = plus_in.point(1.0)[1];
        let xm0 = minus_in.point(0.0)[1];
        let xm1 = minus_in.point(1.0)[1];
        let (g_plus, g_minus) = (PieceTag::Interface(0), PieceTag::Interface(1));
        let seam = PieceTag::Seam;
        let dir = PieceTag::Dirichlet;

        let middle = ReferenceDomain::new(
            vec![
                piece(minus_in.clone(), g_minus),
                seg((p1, xm1), (p1, xp1), seam),
                piece(plus_in.clone(), g_plus),
                seg((0.0, xp0), (0.0, xm0), seam),
            ],
            vec![ring(vec![(0, false), (1, false), (2, true), (3, false)], false)],
            Some(p1),
        )?;
        let end_plus = ReferenceDomain::new(
            vec![
                piece(plus_in.clone(), g_plus),
                seg((p1, xp1), (p1, l1), seam),
                seg((p1, l1), (0.0, l1), dir),
                seg((0.0, l1), (0.0, xp0), seam),
            ],
            vec![ring(vec![(0, false), (1, false), (2, false), (3, false)], false)],
            Some(p1),
        )?;
        let end_minus = ReferenceDomain::new(
            vec![
                seg((0.0, -l1), (p1, -l1), dir),
                seg((p1, -l1), (p1, xm1), seam),
                piece(minus_in.clone(), g_minus),
                seg((0.0, xm0), (0.0, -l1), seam),
            ],
            vec![ring(vec![(0, false), (1, false), (2, true), (3, false)], false)],
            Some(p1),
        )?;
        let outer = ReferenceDomain::new(
            vec![
                seg((0.0, -l2), (p2, -l2), dir),
                seg((p2, -l2), (p2, l2), seam),
                seg((p2, l2), (0.0, l2), dir),
                seg((0.0, l2), (0.0, -l2), seam),
                piece(self.outer_trace(1.0), g_plus),
                piece(self.outer_trace(-1.0), g_minus),
            ],
            vec![
                ring(vec![(0, false), (1, false), (2, false), (3, false)], false),
                ring(vec![(4, false)], true),
                ring(vec![(5, false)], true),
            ],
            Some(p2),
        )?;
        let disc_plus = ReferenceDomain::new(
            vec![piece(self.outer_trace(1.0), g_plus)],
            vec![ring(vec![(0, false)], false)],
            None,
        )?;
        let disc_minus = ReferenceDomain::new(
            vec![piece(self.outer_trace(-1.0), g_minus)],
            vec![ring(vec![(0, false)], false)],
            None,
        )?;

        let inner = self.inner_map();
        let outer_map = self.outer_map();
        let mk = |name: &str, map: &PatchMap, domain| Patch {
            name: name.to_string(),
            map: map.clone(),
            domain,
            mu: 1.0,
        };
        let patches = vec![
            mk("inner_middle", &inner, middle),
            mk("inner_end_plus", &inner, end_plus),
            mk("inner_end_minus", &inner, end_minus),
            mk("outer_main", &outer_map, outer),
            mk("outer_disc_plus", &outer_map, disc_plus),
            mk("outer_disc_minus", &outer_map, disc_minus),
        ];
        let me = *self;
        let member = |patch, piece| InterfaceMember { patch, piece };
        let interfaces = vec![
            InterfaceCurve::new(
                Curve3::new(move |t| me.curve_point(1.0, t)),
                vec![member(0, 2), member(1, 0), member(3, 4), member(4, 0)],
            ),
            InterfaceCurve::new(
                Curve3::new(move |t| me.curve_point(-1.0, t)),
                vec![member(0, 0), member(2, 2), member(3, 5), member(5, 0)],
            ),
        ];
        CompositeSurface::new(patches, interfaces)
    }
}

struct Branch {
    p: Vector3<f64>,
    dp: Vector3<f64>,
    w: f64,
}

pub fn cylinder_intersection(r1: f64, r2: f64, theta: f64, z0: f64) -> Result<CompositeSurface> {
    CylinderPair { r1, r2, theta, z0 }.build()
}

/// JSON-serializable description of a composite surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceDescription {
    UnitSquare,
    SplitSquare,
    FoldedSquare,
    FlatJunction {
        angles: Vec<f64>,
        #[serde(default)]
        neumann: Vec<SideRef>,
    },
    IntersectingCylinders(CylinderPair),
    RectAssembly {
        patches: Vec<RectPatch>,
        #[serde(default)]
        interfaces: Vec<Vec<SideRef>>,
        #[serde(default)]
        neumann: Vec<SideRef>,
    },
}

impl SurfaceDescription {
    pub fn build(&self) -> Result<CompositeSurface> {
        match self {
            SurfaceDescription::UnitSquare => unit_square(),
            SurfaceDescription::SplitSquare => split_square(),
            SurfaceDescription::FoldedSquare => folded_square(),
            SurfaceDescription::FlatJunction { angles, neumann } => flat_junction(angles, neumann),
            SurfaceDescription::IntersectingCylinders(c) => c.build(),
            SurfaceDescription::RectAssembly {
                patches,
                interfaces,
                neumann,
            } => rect_assembly(patches, interfaces, neumann),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conormals(s: &CompositeSurface, j: usize, t: f64) -> Vec<Vector3<f64>> {
        (0..s.interfaces()[j].members.len())
            .map(|k| s.conormal(j, k, t).unwrap())
            .collect()
    }

    #[test]
    fn coplanar_pair_has_opposite_conormals() {
        let s = split_square().unwrap();
        let nu = conormals(&s, 0, 0.3);
        assert!((nu[0] - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        assert!((nu[1] + Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-14);

        let s = flat_junction(&[0.0, PI], &[]).unwrap();
        let nu = conormals(&s, 0, 0.7);
        assert!((nu[0].dot(&nu[1]) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn right_angle_conormals_are_orthogonal() {
        for s in [folded_square().unwrap(), flat_junction(&[0.0, PI / 2.0], &[]).unwrap()] {
            let nu = conormals(&s, 0, 0.4);
            assert!(nu[0].dot(&nu[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn triple_junction_conormals_sum_to_zero() {
        let s = flat_junction(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0], &[]).unwrap();
        for q in 0..=10 {
            let sum: Vector3<f64> = conormals(&s, 0, q as f64 / 10.0).iter().sum();
            assert!(sum.norm() < 1e-14);
        }
    }

    #[test]
    fn duplicate_junction_angles_rejected() {
        assert!(flat_junction(&[0.0, 2.0 * PI], &[]).is_err());
    }

    #[test]
    fn cylinder_curves_lie_on_both_cylinders() {
        let c = CylinderPair::default();
        let s = c.build().unwrap();
        assert_eq!(s.patches().len(), 6);
        assert_eq!(s.interfaces().len(), 2);
        for gamma in s.interfaces() {
            assert_eq!(gamma.members.len(), 4);
            for q in 0..=100 {
                let p = gamma.master.point(q as f64 / 100.0);
                let e1 = p[1] * p[1] + (p[2] - c.z0).powi(2) - c.r1 * c.r1;
                let e2 = (p[0] * c.theta.sin() + p[1] * c.theta.cos()).powi(2) + p[2] * p[2] - c.r2 * c.r2;
                assert!(e1.abs() < 1e-10 && e2.abs() < 1e-10, "{e1} {e2}");
            }
        }
    }

    #[test]
    fn perpendicular_concentric_curve_is_symmetric() {
        let c = CylinderPair {
            r1: 1.0,
            r2: 1.5,
            theta: PI / 2.0,
            z0: 0.0,
        };
        c.build().unwrap();
        for sign in [1.0, -1.0] {
            for q in 0..50 {
                let (p, _) = c.curve_point(sign, q as f64 / 50.0);
                assert!((p[0] - sign * (c.r2 * c.r2 - p[2] * p[2]).sqrt()).abs() < 1e-12);
                assert!((p[1].abs() - (c.r1 * c.r1 - p[2] * p[2]).sqrt()).abs() < 1e-12);
                // z -> -z maps the curve onto itself: phi -> -phi
                let (m, _) = c.curve_point(sign, 1.0 - q as f64 / 50.0);
                assert!((m - Vector3::new(p[0], p[1], -p[2])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn tangential_cylinders_rejected() {
        assert!(cylinder_intersection(1.5, 2.0, 2.0 * PI / 3.0, 0.5).is_err());
        assert!(cylinder_intersection(1.5, 2.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn cylinder_trace_derivatives_match_differences() {
        let c = CylinderPair::default();
        let s = c.build().unwrap();
        let eps = 1e-6;
        for (j, gamma) in s.interfaces().iter().enumerate() {
            for m in &gamma.members {
                let curve = &s.patches()[m.patch].domain.pieces()[m.piece].curve;
                for q in 1..10 {
                    let t = q as f64 / 10.0 + 0.013;
                    let fd = (curve.point(t + eps) - curve.point(t - eps)) / (2.0 * eps);
                    assert!((fd - curve.derivative(t)).norm() < 1e-5, "interface {j}");
                }
            }
            for q in 1..10 {
                let t = q as f64 / 10.0;
                let fd = (gamma.master.point(t + eps) - gamma.master.point(t - eps)) / (2.0 * eps);
                assert!((fd - gamma.master.derivative(t)).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn description_round_trip() {
        let d = SurfaceDescription::IntersectingCylinders(CylinderPair::default());
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(SurfaceDescription::from_json(&s).unwrap(), d);
        let j = r#"{"kind":"flat_junction","angles":[0.0,2.0,4.0]}"#;
        let s = SurfaceDescription::from_json(j).unwrap().build().unwrap();
        assert_eq!(s.interfaces()[0].members.len(), 3);
    }
}
