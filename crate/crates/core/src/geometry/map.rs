use nalgebra::{Matrix2, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `det G` the parametrization is treated as singular.
pub const DEGENERATE_METRIC_TOL: f64 = 1e-14;

/// Exact map from a patch's reference coordinates `(xi, eta)` into R^3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchMap {
    /// `F(xi, eta) = origin + xi * e1 + eta * e2`.
    Plane {
        origin: [f64; 3],
        e1: [f64; 3],
        e2: [f64; 3],
    },
    /// `F(xi, eta) = center + R (cos phi u + sin phi v) + eta * axis`
    /// with `phi = angle0 + xi / angle_scale`.
    ///
    /// `angle_scale = 1` gives the angular parametrization, `angle_scale = R`
    /// the arc-length one. The normal `J e1 x J e2` points outward when
    /// `(u, v, axis)` is right handed.
    Cylinder {
        center: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
        axis: [f64; 3],
        radius: f64,
        angle0: f64,
        angle_scale: f64,
    },
}

fn v3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl PatchMap {
    pub fn identity_plane() -> Self {
        PatchMap::Plane {
            origin: [0.0; 3],
            e1: [1.0, 0.0, 0.0],
            e2: [0.0, 1.0, 0.0],
        }
    }

    /// Cylinder around the z axis parametrized by angle and height,
    /// `F(theta, z) = (R cos theta, R sin theta, z)`.
    pub fn z_cylinder(radius: f64) -> Self {
        PatchMap::Cylinder {
            center: [0.0; 3],
            u: [1.0, 0.0, 0.0],
            v: [0.0, 1.0, 0.0],
            axis: [0.0, 0.0, 1.0],
            radius,
            angle0: 0.0,
            angle_scale: 1.0,
        }
    }

    pub fn point(&self, x: &Vector2<f64>) -> Vector3<f64> {
        match self {
            PatchMap::Plane { origin, e1, e2 } => v3(origin) + x[0] * v3(e1) + x[1] * v3(e2),
            PatchMap::Cylinder {
                center,
                u,
                v,
                axis,
                radius,
                angle0,
                angle_scale,
            } => {
                let phi = angle0 + x[0] / angle_scale;
                v3(center) + *radius * (phi.cos() * v3(u) + phi.sin() * v3(v)) + x[1] * v3(axis)
            }
        }
    }

    /// Columns are `dF/dxi` and `dF/deta`.
    pub fn jacobian(&self, x: &Vector2<f64>) -> Matrix3x2<f64> {
        match self {
            PatchMap::Plane { e1, e2, .. } => Matrix3x2::from_columns(&[v3(e1), v3(e2)]),
            PatchMap::Cylinder {
                u,
                v,
                axis,
                radius,
                angle0,
                angle_scale,
                ..
            } => {
                let phi = angle0 + x[0] / angle_scale;
                let d_xi = (*radius / angle_scale) * (-phi.sin() * v3(u) + phi.cos() * v3(v));
                Matrix3x2::from_columns(&[d_xi, v3(axis)])
            }
        }
    }

    /// First fundamental form `G = J^T J`.
    pub fn metric(&self, x: &Vector2<f64>) -> Matrix2<f64> {
        let j = self.jacobian(x);
        j.transpose() * j
    }

    pub fn inverse_metric(&self, x: &Vector2<f64>) -> Result<(Matrix2<f64>, f64)> {
        let g = self.metric(x);
        let det = g.determinant();
        if !(det > DEGENERATE_METRIC_TOL) {
            return Err(Error::GeometryDegenerate {
                xi: x[0],
                eta: x[1],
                det,
            });
        }
        let inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
        Ok((inv, det))
    }

    /// Unit normal `(J e1 x J e2) / |J e1 x J e2|`.
    pub fn normal(&self, x: &Vector2<f64>) -> Vector3<f64> {
        let j = self.jacobian(x);
        j.column(0).cross(&j.column(1)).normalize()
    }

    /// Divergence of the normal field, `kappa = div n` (sum of principal
    /// curvatures, signed by the orientation of `normal`).
    pub fn total_curvature(&self, x: &Vector2<f64>) -> f64 {
        match self {
            PatchMap::Plane { .. } => 0.0,
            PatchMap::Cylinder {
                center,
                axis,
                radius,
                ..
            } => {
                let p = self.point(x);
                let a = v3(axis).normalize();
                let d = p - v3(center);
                let radial = (d - d.dot(&a) * a).normalize();
                self.normal(x).dot(&radial) / radius
            }
        }
    }

    pub fn is_planar(&self) -> bool {
        matches!(self, PatchMap::Plane { .. })
    }
}

/// Tangential gradient of a function given through its reference gradient:
/// `J G^{-1} grad_ref`.
pub fn surface_gradient(
    map: &PatchMap,
    x: &Vector2<f64>,
    ref_grad: &Vector2<f64>,
) -> Result<Vector3<f64>> {
    let (ginv, _) = map.inverse_metric(x)?;
    Ok(map.jacobian(x) * (ginv * ref_grad))
}

/// `sqrt(det G)`, the area element of the parametrization.
pub fn surface_measure(map: &PatchMap, x: &Vector2<f64>) -> Result<f64> {
    let (_, det) = map.inverse_metric(x)?;
    Ok(det.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_zero_gradient() {
        let map = PatchMap::z_cylinder(1.5);
        let g = surface_gradient(&map, &Vector2::new(0.3, 0.1), &Vector2::zeros()).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn identity_plane_gradient() {
        let map = PatchMap::identity_plane();
        let g = surface_gradient(&map, &Vector2::new(0.2, 0.7), &Vector2::new(1.0, 0.0)).unwrap();
        assert!((g - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cylinder_gradient_of_angle() {
        // G = diag(R^2, 1): grad theta = J e1 / R^2 = (0, 1/R, 0) at theta = 0.
        let r = 1.5;
        let map = PatchMap::z_cylinder(r);
        let x = Vector2::new(0.0, 0.4);
        let g = surface_gradient(&map, &x, &Vector2::new(1.0, 0.0)).unwrap();
        assert!((g - Vector3::new(0.0, 1.0 / r, 0.0)).norm() < 1e-14);

        // Independent check: central differences of theta(p) = atan2(y, x)
        // along the two tangent directions of the surface.
        let p = map.point(&x);
        let theta = |q: Vector3<f64>| q[1].atan2(q[0]);
        let eps = 1e-6;
        let t1 = Vector3::new(0.0, 1.0, 0.0);
        let t2 = Vector3::new(0.0, 0.0, 1.0);
        let on_surface = |q: Vector3<f64>| {
            let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
            Vector3::new(q[0] * r / rho, q[1] * r / rho, q[2])
        };
        let d1 = (theta(on_surface(p + eps * t1)) - theta(on_surface(p - eps * t1))) / (2.0 * eps);
        let d2 = (theta(on_surface(p + eps * t2)) - theta(on_surface(p - eps * t2))) / (2.0 * eps);
        assert!((g[1] - d1).abs() < 1e-8);
        assert!((g[2] - d2).abs() < 1e-8);
    }

    #[test]
    fn cylinder_outward_normal_and_curvature() {
        let map = PatchMap::z_cylinder(2.0);
        for k in 0..8 {
            let th = k as f64 * PI / 4.0;
            let x = Vector2::new(th, 0.3);
            let n = map.normal(&x);
            assert!((n - Vector3::new(th.cos(), th.sin(), 0.0)).norm() < 1e-14);
            assert!((map.total_curvature(&x) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_plane_is_rejected() {
        let map = PatchMap::Plane {
            origin: [0.0; 3],
            e1: [1.0, 0.0, 0.0],
            e2: [2.0, 0.0, 0.0],
        };
        let err = surface_gradient(&map, &Vector2::zeros(), &Vector2::new(1.0, 0.0));
        assert!(matches!(err, Err(Error::GeometryDegenerate { .. })));
    }

    #[test]
    fn cylinder_measure() {
        let map = PatchMap::z_cylinder(1.5);
        for &t in &[0.0, 1.0, 2.5] {
            let m = surface_measure(&map, &Vector2::new(t, -0.2)).unwrap();
            assert!((m - 1.5).abs() < 1e-14);
        }
        assert!((surface_measure(&PatchMap::identity_plane(), &Vector2::new(3.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
    }
}
