use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::curve::Curve2;
use crate::error::{Error, Result};
use crate::polygon::{self, Point};

/// Role of one boundary piece of a reference domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceTag {
    Interface(usize),
    Dirichlet,
    Neumann,
    /// Periodic identification line of a closed parametrization. Not a
    /// boundary of the surface.
    Seam,
}

#[derive(Clone, Debug)]
pub struct BoundaryPiece {
    pub curve: Curve2,
    pub tag: PieceTag,
}

/// Closed loop of pieces, each used forwards (`false`) or reversed (`true`).
#[derive(Clone, Debug)]
pub struct Ring {
    pub pieces: Vec<(usize, bool)>,
    pub hole: bool,
}

/// Reference domain of a patch, bounded by exact curves. Outer rings are
/// stored counter-clockwise and holes clockwise, so the domain is always on
/// the left of the traversal direction.
#[derive(Clone, Debug)]
pub struct ReferenceDomain {
    pieces: Vec<BoundaryPiece>,
    rings: Vec<Ring>,
    periodic: Option<f64>,
    outward_sign: Vec<f64>,
    fine: Vec<Vec<Point>>,
    lo: Point,
    hi: Point,
}

const FINE_SEGMENTS: usize = 4096;

impl ReferenceDomain {
    pub fn new(pieces: Vec<BoundaryPiece>, rings: Vec<Ring>, periodic: Option<f64>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::InvalidSurface("reference domain without boundary".into()));
        }
        let mut use_count = vec![0usize; pieces.len()];
        for ring in &rings {
            for &(k, _) in &ring.pieces {
                if k >= pieces.len() {
                    return Err(Error::InvalidSurface(format!("ring references missing piece {k}")));
                }
                use_count[k] += 1;
            }
        }
        if let Some(k) = use_count.iter().position(|&c| c != 1) {
            return Err(Error::InvalidSurface(format!(
                "boundary piece {k} must belong to exactly one ring"
            )));
        }
        if let Some(p) = periodic {
            if !(p > 0.0) {
                return Err(Error::InvalidSurface("period must be positive".into()));
            }
        }

        let mut dom = Self {
            pieces,
            rings,
            periodic,
            outward_sign: Vec::new(),
            fine: Vec::new(),
            lo: Point::zeros(),
            hi: Point::zeros(),
        };

        // bounding box from a rough sampling, used to scale tolerances
        let rough = dom.sample_rings(None, 64)?;
        let (lo, hi) = bbox(&rough);
        dom.lo = lo;
        dom.hi = hi;

        let diam = dom.diameter();
        let rough = dom.sample_rings(Some(diam / FINE_SEGMENTS as f64), 8)?;
        for (ring, poly) in dom.rings.iter_mut().zip(&rough) {
            let area = polygon::signed_area(poly);
            let want_positive = !ring.hole;
            if area == 0.0 {
                return Err(Error::InvalidSurface("ring with zero area".into()));
            }
            if (area > 0.0) != want_positive {
                ring.pieces.reverse();
                for p in ring.pieces.iter_mut() {
                    p.1 = !p.1;
                }
            }
        }
        dom.outward_sign = vec![1.0; dom.pieces.len()];
        for ring in &dom.rings {
            for &(k, rev) in &ring.pieces {
                dom.outward_sign[k] = if rev { -1.0 } else { 1.0 };
            }
        }
        dom.fine = dom.sample_rings(Some(diam / FINE_SEGMENTS as f64), 8)?;
        let (lo, hi) = bbox(&dom.fine);
        dom.lo = lo;
        dom.hi = hi;
        Ok(dom)
    }

    /// Axis-aligned rectangle `[0, w] x [0, h]` with pieces bottom, right,
    /// top, left (counter-clockwise).
    pub fn rectangle(w: f64, h: f64, tags: [PieceTag; 4]) -> Result<Self> {
        let c = [
            Vector2::new(0.0, 0.0),
            Vector2::new(w, 0.0),
            Vector2::new(w, h),
            Vector2::new(0.0, h),
        ];
        Self::polygon(&c, &tags)
    }

    /// Straight-edged domain; edge `i` joins vertex `i` to vertex `i + 1`.
    pub fn polygon(vertices: &[Point], tags: &[PieceTag]) -> Result<Self> {
        if vertices.len() < 3 || tags.len() != vertices.len() {
            return Err(Error::InvalidSurface("polygon needs >= 3 vertices and one tag per edge".into()));
        }
        let n = vertices.len();
        let pieces = (0..n)
            .map(|i| BoundaryPiece {
                curve: Curve2::segment(vertices[i], vertices[(i + 1) % n]),
                tag: tags[i],
            })
            .collect();
        let rings = vec![Ring {
            pieces: (0..n).map(|i| (i, false)).collect(),
            hole: false,
        }];
        Self::new(pieces, rings, None)
    }

    fn sample_rings(&self, resolution: Option<f64>, min_per_piece: usize) -> Result<Vec<Vec<Point>>> {
        let scale = (self.hi - self.lo).norm().max(1.0);
        let mut out = Vec::with_capacity(self.rings.len());
        for ring in &self.rings {
            let mut poly = Vec::new();
            for (idx, &(k, rev)) in ring.pieces.iter().enumerate() {
                let curve = &self.pieces[k].curve;
                let n = match resolution {
                    _ if curve.is_straight() => 1,
                    Some(r) => ((curve.approx_length(64) / r).ceil() as usize).max(min_per_piece),
                    None => min_per_piece,
                };
                let at = |t: f64| curve.point(if rev { 1.0 - t } else { t });
                for i in 0..n {
                    poly.push(at(i as f64 / n as f64));
                }
                let end = at(1.0);
                let (nk, nrev) = ring.pieces[(idx + 1) % ring.pieces.len()];
                let next = self.pieces[nk].curve.point(if nrev { 1.0 } else { 0.0 });
                if (end - next).norm() > 1e-9 * scale {
                    return Err(Error::InvalidSurface(format!(
                        "ring is not closed: piece {k} ends at {:?}, piece {nk} starts at {:?}",
                        end, next
                    )));
                }
            }
            out.push(poly);
        }
        Ok(out)
    }

    /// Oriented boundary polylines with curved pieces subdivided so that no
    /// segment is longer than `resolution`.
    pub fn polylines(&self, resolution: f64) -> Result<Vec<Vec<Point>>> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidParameter("polyline resolution must be positive".into()));
        }
        self.sample_rings(Some(resolution), 2)
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn periodic(&self) -> Option<f64> {
        self.periodic
    }

    pub fn bounds(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    pub fn diameter(&self) -> f64 {
        (self.hi - self.lo).norm()
    }

    /// Area of the finely polygonized domain.
    pub fn area(&self) -> f64 {
        self.fine.iter().map(|r| polygon::signed_area(r)).sum()
    }

    pub fn wrap(&self, x: &Point) -> Point {
        match self.periodic {
            Some(p) => Point::new(x[0].rem_euclid(p), x[1]),
            None => *x,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        polygon::contains(&self.fine, &self.wrap(x))
    }

    /// Outward unit normal (in reference coordinates) of piece `k` at `t`.
    pub fn outward_normal(&self, k: usize, t: f64) -> Point {
        let d = self.pieces[k].curve.derivative(t);
        self.outward_sign[k] * Vector2::new(d[1], -d[0]).normalize()
    }

    pub fn outward_sign(&self, k: usize) -> f64 {
        self.outward_sign[k]
    }

    /// Pieces adjacent in their ring, as `(piece, reversed, next_piece, next_reversed)`.
    pub fn junctions(&self) -> Vec<(usize, bool, usize, bool)> {
        let mut out = Vec::new();
        for ring in &self.rings {
            let n = ring.pieces.len();
            for i in 0..n {
                let (a, ar) = ring.pieces[i];
                let (b, br) = ring.pieces[(i + 1) % n];
                out.push((a, ar, b, br));
            }
        }
        out
    }
}

fn bbox(rings: &[Vec<Point>]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in rings.iter().flatten() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}
