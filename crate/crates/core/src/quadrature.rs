//! Gauss rules on cells, clipped triangles and parametrized curves.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{Curve3, PatchMap};
use crate::polygon::{Point, Rect};

/// Highest supported polynomial exactness.
pub const MAX_ORDER: usize = 39;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadRule {
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n, mapped from [-1, 1] to [0, 1]
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn table() -> &'static Vec<(Vec<f64>, Vec<f64>)> {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=MAX_ORDER / 2 + 2).map(|n| if n == 0 { (vec![], vec![]) } else { legendre_nodes(n) }).collect())
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_points(n: usize) -> Result<(&'static [f64], &'static [f64])> {
    let t = table();
    if n == 0 || n >= t.len() {
        return Err(Error::UnsupportedOrder(2 * n.max(1) - 1));
    }
    Ok((&t[n].0, &t[n].1))
}

/// Gauss-Legendre rule on `[0, 1]` exact for degree `order`.
pub fn gauss_1d(order: usize) -> Result<(&'static [f64], &'static [f64])> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    gauss_points(order / 2 + 1)
}

/// Tensor Gauss rule on an axis-aligned box.
pub fn rect_rule(rect: &Rect, order: usize) -> Result<QuadRule> {
    let (x, w) = gauss_1d(order)?;
    let d = rect.hi - rect.lo;
    let mut points = Vec::with_capacity(x.len() * x.len());
    let mut weights = Vec::with_capacity(x.len() * x.len());
    for (yj, wj) in x.iter().zip(w) {
        for (xi, wi) in x.iter().zip(w) {
            points.push(rect.lo + Point::new(xi * d[0], yj * d[1]));
            weights.push(wi * wj * d[0] * d[1]);
        }
    }
    Ok(QuadRule { points, weights, order })
}

/// Collapsed (Duffy) Gauss rule on a triangle. Weights carry the sign of
/// the triangle's orientation.
pub fn triangle_rule(tri: &[Point; 3], order: usize) -> Result<QuadRule> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let (x, w) = gauss_points(order.div_ceil(2) + 1)?;
    let [a, b, c] = *tri;
    let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let mut points = Vec::with_capacity(x.len() * x.len());
    let mut weights = Vec::with_capacity(x.len() * x.len());
    for (u, wu) in x.iter().zip(w) {
        for (v, wv) in x.iter().zip(w) {
            points.push(a + (b - a) * *u + (c - b) * (u * v));
            weights.push(wu * wv * u * two_area);
        }
    }
    Ok(QuadRule { points, weights, order })
}

/// Rule for a set of (signed) triangles.
pub fn triangles_rule(tris: &[[Point; 3]], order: usize) -> Result<QuadRule> {
    let mut rule = QuadRule {
        points: Vec::new(),
        weights: Vec::new(),
        order,
    };
    for t in tris {
        let r = triangle_rule(t, order)?;
        rule.points.extend(r.points);
        rule.weights.extend(r.weights);
    }
    Ok(rule)
}

/// One quadrature point on a curve: parameter and weight including the
/// speed `|c'(t)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub weight: f64,
}

/// Composite Gauss rule in the parameter of a space curve. `breaks` are
/// sorted panel boundaries in `[0, 1]` including the end points.
pub fn curve_rule(curve: &Curve3, breaks: &[f64], order: usize) -> Result<Vec<CurvePoint>> {
    let (x, w) = gauss_1d(order)?;
    let mut out = Vec::with_capacity(breaks.len() * x.len());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        for (xi, wi) in x.iter().zip(w) {
            let t = a + (b - a) * xi;
            out.push(CurvePoint {
                t,
                weight: wi * (b - a) * curve.derivative(t).norm(),
            });
        }
    }
    Ok(out)
}

/// `n` equal panels on `[0, 1]`.
pub fn uniform_breaks(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Surface area of a patch region given by a reference-domain rule.
pub fn surface_area(map: &PatchMap, rule: &QuadRule) -> Result<f64> {
    let mut a = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        a += w * crate::geometry::surface_measure(map, p)?;
    }
    Ok(a)
}
