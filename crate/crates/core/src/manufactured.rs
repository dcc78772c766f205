//! Manufactured solutions: closed-form ambient functions, the surface
//! Laplacian through the extension formula, and the built-in test cases.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::assembly::{ProblemData, Stabilizer, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_GRADVAR_WEIGHT};
use crate::error::{Error, Result};
use crate::geometry::{builders, CompositeSurface, CylinderPair, PatchMap};
use crate::polygon::Point;
use crate::quadrature::{curve_rule, uniform_breaks};

/// Smooth function on R^3 with closed-form derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ambient {
    /// `amplitude * prod_i sin(k_i x_i + phase_i)`.
    SineProduct {
        k: [f64; 3],
        phase: [f64; 3],
        amplitude: f64,
    },
    /// `x^T Q x + b . x + c` with symmetric `Q`.
    Quadratic { q: [[f64; 3]; 3], b: [f64; 3], c: f64 },
}

impl Ambient {
    /// `sin(x) sin(y) sin(z)`.
    pub fn sin_xyz() -> Self {
        Ambient::SineProduct {
            k: [1.0; 3],
            phase: [0.0; 3],
            amplitude: 1.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Ambient::Quadratic {
            q: [[0.0; 3]; 3],
            b: [0.0; 3],
            c,
        }
    }

    /// `[sin, k cos, -k^2 sin]` of each sine factor at `x`.
    fn sine_factors(k: &[f64; 3], phase: &[f64; 3], x: &Vector3<f64>) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| {
            let (s, c) = (k[i] * x[i] + phase[i]).sin_cos();
            [s, k[i] * c, -k[i] * k[i] * s]
        })
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        match self {
            Ambient::SineProduct { k, phase, amplitude } => {
                let f = Self::sine_factors(k, phase, x);
                amplitude * f[0][0] * f[1][0] * f[2][0]
            }
            Ambient::Quadratic { q, b, c } => {
                let q = Matrix3::from_fn(|i, j| q[i][j]);
                x.dot(&(q * x)) + Vector3::from(*b).dot(x) + c
            }
        }
    }

    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Ambient::SineProduct { k, phase, amplitude } => {
                let f = Self::sine_factors(k, phase, x);
                Vector3::new(
                    f[0][1] * f[1][0] * f[2][0],
                    f[0][0] * f[1][1] * f[2][0],
                    f[0][0] * f[1][0] * f[2][1],
                ) * *amplitude
            }
            Ambient::Quadratic { q, b, .. } => {
                let q = Matrix3::from_fn(|i, j| q[i][j]);
                (q + q.transpose()) * x + Vector3::from(*b)
            }
        }
    }

    pub fn hessian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        match self {
            Ambient::SineProduct { k, phase, amplitude } => {
                let f = Self::sine_factors(k, phase, x);
                Matrix3::from_fn(|i, j| {
                    (0..3)
                        .map(|m| {
                            let order = usize::from(m == i) + usize::from(m == j);
                            f[m][order]
                        })
                        .product::<f64>()
                }) * *amplitude
            }
            Ambient::Quadratic { q, .. } => {
                let q = Matrix3::from_fn(|i, j| q[i][j]);
                q + q.transpose()
            }
        }
    }
}

/// `Delta_Omega u = Delta u - n^T (Hess u) n - kappa (n . grad u)` with
/// `kappa = div n` of the patch at reference point `x`.
pub fn surface_laplacian(u: &Ambient, map: &PatchMap, x: &Point) -> f64 {
    let p = map.point(x);
    let n = map.normal(x);
    let h = u.hessian(&p);
    h.trace() - n.dot(&(h * n)) - map.total_curvature(x) * n.dot(&u.gradient(&p))
}

/// Tangential gradient `(I - n n^T) grad u`.
pub fn tangential_gradient(u: &Ambient, map: &PatchMap, x: &Point) -> Vector3<f64> {
    let n = map.normal(x);
    let g = u.gradient(&map.point(x));
    g - n * n.dot(&g)
}

/// Difference step of [`metric_laplacian`] in the oracle comparisons.
pub const ORACLE_STEP: f64 = 1e-4;

/// Intrinsic Laplace-Beltrami operator of `u o F` computed from the
/// parametrization alone: `(1 / sqrt g) d_a (sqrt g g^{ab} d_b u)` with
/// central differences of step `eps` for the map, the metric and `u`.
pub fn metric_laplacian(u: impl Fn(&Vector3<f64>) -> f64, map: &PatchMap, x: &Point, eps: f64) -> f64 {
    let e = [Vector2::new(eps, 0.0), Vector2::new(0.0, eps)];
    let metric = |y: &Point| {
        let d: Vec<Vector3<f64>> = e.iter().map(|s| (map.point(&(y + s)) - map.point(&(y - s))) / (2.0 * eps)).collect();
        nalgebra::Matrix2::new(d[0].dot(&d[0]), d[0].dot(&d[1]), d[1].dot(&d[0]), d[1].dot(&d[1]))
    };
    let flux = |y: &Point| -> Vector2<f64> {
        let g = metric(y);
        let det = g.determinant();
        let ginv = g.try_inverse().unwrap_or_else(nalgebra::Matrix2::zeros);
        let du = Vector2::new(
            (u(&map.point(&(y + e[0]))) - u(&map.point(&(y - e[0])))) / (2.0 * eps),
            (u(&map.point(&(y + e[1]))) - u(&map.point(&(y - e[1])))) / (2.0 * eps),
        );
        det.sqrt() * (ginv * du)
    };
    let div = (flux(&(x + e[0]))[0] - flux(&(x - e[0]))[0]) / (2.0 * eps)
        + (flux(&(x + e[1]))[1] - flux(&(x - e[1]))[1]) / (2.0 * eps);
    div / metric(x).determinant().sqrt()
}

pub const CASE_NAMES: [&str; 5] = [
    "flat_square",
    "flat_two_patch",
    "flat_triple_junction",
    "sharp_edge_L",
    "intersecting_cylinders",
];

/// Exact solution `u_i` on every patch (the restriction of an ambient
/// function) with derived data `f = -mu Delta_Omega u`, `g_D = u`,
/// `g_N = mu nu . grad_Omega u`.
#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub name: String,
    pub surface: CompositeSurface,
    pub exact: Vec<Ambient>,
    /// Whether the patch boundaries follow grid lines (fitted meshes possible).
    pub fitted: bool,
}

/// Largest quadrature value of `|| sum_k mu_k nu_k . grad u_k ||_{L2(Gamma_j)}`
/// allowed for the derived data.
pub const KIRCHHOFF_TOL: f64 = 1e-9;

impl ManufacturedCase {
    pub fn new(name: &str, surface: CompositeSurface, exact: Vec<Ambient>, fitted: bool) -> Result<Self> {
        if exact.len() != surface.patches().len() {
            return Err(Error::InvalidParameter(format!(
                "{} exact solutions for {} patches",
                exact.len(),
                surface.patches().len()
            )));
        }
        let case = Self {
            name: name.to_string(),
            surface,
            exact,
            fitted,
        };
        for j in 0..case.surface.interfaces().len() {
            let r = case.exact_kirchhoff_residual(j)?;
            if r > KIRCHHOFF_TOL {
                return Err(Error::InvalidParameter(format!(
                    "exact fluxes of case {name} do not balance on interface {j}: residual {r:.3e}"
                )));
            }
        }
        Ok(case)
    }

    /// `u_i` at reference point `x` of patch `i`.
    pub fn value(&self, i: usize, x: &Point) -> f64 {
        self.exact[i].value(&self.surface.patches()[i].map.point(x))
    }

    pub fn tangential_gradient(&self, i: usize, x: &Point) -> Vector3<f64> {
        tangential_gradient(&self.exact[i], &self.surface.patches()[i].map, x)
    }

    pub fn laplacian(&self, i: usize, x: &Point) -> f64 {
        surface_laplacian(&self.exact[i], &self.surface.patches()[i].map, x)
    }

    /// Curvature `kappa = div n` of patch `i`.
    pub fn kappa(&self, i: usize, x: &Point) -> f64 {
        self.surface.patches()[i].map.total_curvature(x)
    }

    /// `|| sum_k mu_k nu_k . grad_Omega u_k ||_{L2(Gamma_j)}` of the exact solution.
    pub fn exact_kirchhoff_residual(&self, j: usize) -> Result<f64> {
        let gamma = &self.surface.interfaces()[j];
        let mut r = 0.0;
        for q in curve_rule(&gamma.master, &uniform_breaks(64), 8)? {
            let mut s = 0.0;
            for (k, m) in gamma.members.iter().enumerate() {
                let x = self.surface.trace(j, k, q.t)?;
                let nu = self.surface.conormal(j, k, q.t)?;
                s += self.surface.patches()[m.patch].mu * nu.dot(&self.tangential_gradient(m.patch, &x));
            }
            r += q.weight * s * s;
        }
        Ok(r.sqrt())
    }

    /// Problem data with the given penalty and stabilization.
    pub fn problem(&self, beta: f64, gamma: Vec<f64>, stabilizer: Stabilizer) -> ProblemData {
        let mus: Vec<f64> = self.surface.patches().iter().map(|p| p.mu).collect();
        let maps: Vec<PatchMap> = self.surface.patches().iter().map(|p| p.map.clone()).collect();
        let exact = self.exact.clone();
        let (maps_f, exact_f, mus_f) = (maps.clone(), exact.clone(), mus.clone());
        let exact_d = exact.clone();
        ProblemData {
            f: Arc::new(move |i, x, _| -mus_f[i] * surface_laplacian(&exact_f[i], &maps_f[i], x)),
            g_d: Arc::new(move |i, _, p| exact_d[i].value(p)),
            g_n: Arc::new(move |i, _, p, nu| mus[i] * nu.dot(&exact[i].gradient(p))),
            beta,
            gamma,
            stabilizer,
            gradvar_weight: DEFAULT_GRADVAR_WEIGHT,
        }
    }

    pub fn default_problem(&self) -> ProblemData {
        self.problem(DEFAULT_BETA, vec![DEFAULT_GAMMA; 2], Stabilizer::Jump)
    }

    /// `(u, grad_Omega u)` at a point, for error norms.
    pub fn exact_fn(&self) -> impl Fn(usize, &Point, &Vector3<f64>) -> (f64, Vector3<f64>) + Sync + '_ {
        move |i, x, p| (self.exact[i].value(p), self.tangential_gradient(i, x))
    }
}

fn sine2(kx: f64, ky: f64, kz: f64, phase: [f64; 3]) -> Ambient {
    Ambient::SineProduct {
        k: [kx, ky, kz],
        phase,
        amplitude: 1.0,
    }
}

/// Built-in manufactured case by name.
pub fn make_case(name: &str) -> Result<ManufacturedCase> {
    let h = PI / 2.0;
    match name {
        "flat_square" => ManufacturedCase::new(name, builders::unit_square()?, vec![sine2(PI, PI, 0.0, [0.0, 0.0, h])], true),
        "flat_two_patch" => {
            let u = sine2(PI, PI, 0.0, [0.0, 0.0, h]);
            ManufacturedCase::new(name, builders::split_square()?, vec![u.clone(), u], true)
        }
        "flat_triple_junction" => {
            let u = sine2(0.0, 0.0, 1.0, [h, h, 0.0]);
            let s = builders::flat_junction(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0], &[])?;
            ManufacturedCase::new(name, s, vec![u; 3], true)
        }
        "sharp_edge_L" => {
            // arc length across the fold: x on the floor, 1 + z on the wall
            let floor = sine2(PI, 0.0, 0.0, [0.0, h, h]);
            let wall = sine2(0.0, 0.0, PI, [h, h, PI]);
            ManufacturedCase::new(name, builders::folded_square()?, vec![floor, wall], true)
        }
        "intersecting_cylinders" => {
            let s = CylinderPair::default().build()?;
            let n = s.patches().len();
            ManufacturedCase::new(name, s, vec![Ambient::sin_xyz(); n], false)
        }
        _ => Err(Error::UnknownCase(name.to_string())),
    }
}

/// Triple junction with `f = 0`, `u = 1` on the outer edges of the first
/// patch and `u = -1` on the others. Solution fields for inspection only.
pub fn demo_problem() -> Result<(CompositeSurface, ProblemData)> {
    let s = builders::flat_junction(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0], &[])?;
    let mut prob = ProblemData::constant(0.0);
    prob.g_d = Arc::new(|i, _, _| if i == 0 { 1.0 } else { -1.0 });
    Ok((s, prob))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_quadratic() {
        let u = Ambient::Quadratic {
            q: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
            b: [0.0; 3],
            c: 0.0,
        };
        let map = PatchMap::identity_plane();
        assert!((surface_laplacian(&u, &map, &Point::new(0.3, 0.7)) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn cylinder_z_squared_and_radius_squared() {
        let map = PatchMap::z_cylinder(1.5);
        let z2 = Ambient::Quadratic {
            q: [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]],
            b: [0.0; 3],
            c: 0.0,
        };
        let r2 = Ambient::Quadratic {
            q: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]],
            b: [0.0; 3],
            c: 0.0,
        };
        for x in [Point::new(0.2, 0.4), Point::new(4.0, -1.0)] {
            assert!((surface_laplacian(&z2, &map, &x) - 2.0).abs() < 1e-13);
            // constant on the surface
            assert!(surface_laplacian(&r2, &map, &x).abs() < 1e-13);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let u = Ambient::SineProduct {
            k: [1.3, -0.7, 2.0],
            phase: [0.1, 0.5, -0.3],
            amplitude: 1.7,
        };
        let x = Vector3::new(0.3, -0.2, 0.9);
        let eps = 1e-6;
        for i in 0..3 {
            let e = Vector3::ith(i, eps);
            let fd = (u.value(&(x + e)) - u.value(&(x - e))) / (2.0 * eps);
            assert!((fd - u.gradient(&x)[i]).abs() < 1e-8);
            let fd2 = (u.gradient(&(x + e)) - u.gradient(&(x - e))) / (2.0 * eps);
            assert!((fd2 - u.hessian(&x).column(i)).norm() < 1e-8);
        }
    }

    #[test]
    fn cylinder_oracle_agreement() {
        let map = PatchMap::z_cylinder(1.5);
        let u = Ambient::sin_xyz();
        for x in [Point::new(0.1, 0.2), Point::new(2.0, -0.4), Point::new(5.0, 1.1)] {
            let a = surface_laplacian(&u, &map, &x);
            let b = metric_laplacian(|p| u.value(p), &map, &x, ORACLE_STEP);
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn junction_fluxes_vanish_and_cases_build() {
        let c = make_case("flat_triple_junction").unwrap();
        for k in 0..3 {
            let nu = c.surface.conormal(0, k, 0.4).unwrap();
            let x = c.surface.trace(0, k, 0.4).unwrap();
            assert!(nu.dot(&c.tangential_gradient(k, &x)).abs() < 1e-15);
        }
        for name in CASE_NAMES {
            let c = make_case(name).unwrap();
            for j in 0..c.surface.interfaces().len() {
                assert!(c.exact_kirchhoff_residual(j).unwrap() < 1e-9);
            }
        }
        assert!(matches!(make_case("sphere"), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn sharp_edge_is_continuous() {
        let c = make_case("sharp_edge_L").unwrap();
        for t in [0.0, 0.3, 1.0] {
            let a = c.value(0, &c.surface.trace(0, 0, t).unwrap());
            let b = c.value(1, &c.surface.trace(0, 1, t).unwrap());
            assert!((a - b).abs() < 1e-14);
        }
    }
}
