//! Planar polygon helpers: signed area, even-odd containment and clipping
//! against axis-aligned boxes.

use nalgebra::Vector2;

pub type Point = Vector2<f64>;

/// Shoelace area, positive for counter-clockwise rings.
pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Even-odd rule over a set of rings.
pub fn contains(rings: &[Vec<Point>], x: &Point) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        for i in 0..n {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            if (a[1] > x[1]) != (b[1] > x[1]) {
                let s = a[0] + (x[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if x[0] < s {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub lo: Point,
    pub hi: Point,
}

impl Rect {
    pub fn new(lo: Point, hi: Point) -> Self {
        Self { lo, hi }
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        p[0] >= self.lo[0] - tol
            && p[0] <= self.hi[0] + tol
            && p[1] >= self.lo[1] - tol
            && p[1] <= self.hi[1] + tol
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            self.lo,
            Point::new(self.hi[0], self.lo[1]),
            self.hi,
            Point::new(self.lo[0], self.hi[1]),
        ]
    }
}

fn clip_half_plane(poly: &[Point], axis: usize, bound: f64, keep_above: bool) -> Vec<Point> {
    let inside = |p: &Point| {
        if keep_above {
            p[axis] >= bound
        } else {
            p[axis] <= bound
        }
    };
    let mut out = Vec::with_capacity(poly.len() + 4);
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let prev = poly[(i + n - 1) % n];
        let (ci, pi) = (inside(&cur), inside(&prev));
        if ci != pi {
            let s = (bound - prev[axis]) / (cur[axis] - prev[axis]);
            let mut x = prev + s * (cur - prev);
            x[axis] = bound;
            out.push(x);
        }
        if ci {
            out.push(cur);
        }
    }
    out
}

/// Sutherland-Hodgman clip of an arbitrary (possibly non-convex) ring
/// against a box. The winding number of the result equals that of the input
/// inside the box, so signed integrals over the output are exact even when
/// the output contains zero-width bridges.
pub fn clip_ring_to_rect(ring: &[Point], rect: &Rect) -> Vec<Point> {
    let mut poly = ring.to_vec();
    for (axis, bound, above) in [
        (0, rect.lo[0], true),
        (0, rect.hi[0], false),
        (1, rect.lo[1], true),
        (1, rect.hi[1], false),
    ] {
        if poly.is_empty() {
            break;
        }
        poly = clip_half_plane(&poly, axis, bound, above);
    }
    poly
}

/// Fan triangulation with signed triangles. Anchored at the vertex mean when
/// that gives only non-negative triangles, otherwise at the first vertex.
pub fn fan_triangles(poly: &[Point]) -> Vec<[Point; 3]> {
    let n = poly.len();
    if n < 3 {
        return Vec::new();
    }
    let orient = signed_area(poly).signum();
    let centroid = poly.iter().fold(Point::zeros(), |acc, p| acc + p) / n as f64;
    let tri_area = |a: &Point, b: &Point, c: &Point| {
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    };
    let star = (0..n).all(|i| orient * tri_area(&centroid, &poly[i], &poly[(i + 1) % n]) >= -1e-300);
    if star {
        (0..n)
            .map(|i| [centroid, poly[i], poly[(i + 1) % n]])
            .filter(|t| tri_area(&t[0], &t[1], &t[2]) != 0.0)
            .collect()
    } else {
        (1..n - 1)
            .map(|i| [poly[0], poly[i], poly[i + 1]])
            .filter(|t| tri_area(&t[0], &t[1], &t[2]) != 0.0)
            .collect()
    }
}

pub fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}
