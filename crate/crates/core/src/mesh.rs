//! Structured quadrilateral background grids over reference domains, with
//! cut-cell clipping and the stabilization face sets.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CompositeSurface, ReferenceDomain};
use crate::polygon::{self, Point, Rect};

/// Cells with clipped area below this fraction of `h^2` are dropped.
pub const SLIVER_TOL: f64 = 1e-14;
/// Cells whose clipped area is within this fraction of `h^2` count as full.
pub const FULL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshMode {
    /// Grid lines follow the (axis-aligned) patch boundary.
    Matching,
    /// Fitted grids with `h` on even and `h/2` on odd patches.
    Nonmatching,
    /// Shifted background grid; the boundary cuts through cells.
    #[default]
    Cut,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub index: [usize; 2],
    pub rect: Rect,
    pub active: bool,
    pub cut: bool,
    /// Area of `K` intersected with the reference domain.
    pub area: f64,
    /// Signed triangles covering the clipped region (cut cells only).
    pub triangles: Vec<[Point; 3]>,
}

/// Interior face between two active cells; `axis` is the direction of the
/// face normal (0: vertical face, normal along xi).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Face {
    pub cells: [usize; 2],
    pub axis: usize,
}

#[derive(Clone, Debug)]
pub struct PatchMesh {
    pub patch: usize,
    pub h: f64,
    pub origin: Point,
    pub n: [usize; 2],
    pub periodic: bool,
    pub cells: Vec<Cell>,
    pub stab_faces: Vec<Face>,
    /// Area of the polygonized domain used for clipping.
    pub polygon_area: f64,
    /// `|polygon area - reference area| / reference area`.
    pub polygon_area_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeshSummary {
    pub patch: usize,
    pub h: f64,
    pub cells: usize,
    pub active: usize,
    pub cut: usize,
    pub stab_faces: usize,
    pub polygon_area_error: f64,
}

fn cell_rect(origin: &Point, h: f64, i: usize, j: usize) -> Rect {
    let lo = origin + Point::new(i as f64 * h, j as f64 * h);
    Rect::new(lo, lo + Point::new(h, h))
}

/// Triangulated intersection of an axis-aligned cell with the region
/// bounded by oriented `rings`. Triangles carry the winding sign, so their
/// signed areas add up to the clipped area.
pub fn clip_cell(rect: &Rect, rings: &[Vec<Point>]) -> Vec<[Point; 3]> {
    let mut tris = Vec::new();
    for ring in rings {
        let clipped = polygon::clip_ring_to_rect(ring, rect);
        tris.extend(polygon::fan_triangles(&clipped));
    }
    let area: f64 = tris.iter().map(polygon::triangle_area).sum();
    if (area - rect.area()).abs() <= FULL_TOL * rect.area() {
        let c = rect.corners();
        return vec![[c[0], c[1], c[2]], [c[0], c[2], c[3]]];
    }
    tris
}

impl PatchMesh {
    pub fn cell_at(&self, i: isize, j: isize) -> Option<usize> {
        let (n0, n1) = (self.n[0] as isize, self.n[1] as isize);
        let i = if self.periodic { i.rem_euclid(n0) } else { i };
        if i < 0 || j < 0 || i >= n0 || j >= n1 {
            return None;
        }
        Some(j as usize * self.n[0] + i as usize)
    }

    /// Active cell containing `x`, searching neighbours within `1e-9 h` when
    /// `x` sits on a grid line or in a dropped sliver.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        self.locate_within(x, 1e-9 * self.h)
    }

    /// As [`PatchMesh::locate`] with an explicit neighbour tolerance.
    pub fn locate_within(&self, x: &Point, tol: f64) -> Option<usize> {
        let mut y = *x;
        if self.periodic {
            let p = self.n[0] as f64 * self.h;
            y[0] = (y[0] - self.origin[0]).rem_euclid(p) + self.origin[0];
        }
        let fi = ((y[0] - self.origin[0]) / self.h).floor() as isize;
        let fj = ((y[1] - self.origin[1]) / self.h).floor() as isize;
        if let Some(c) = self.cell_at(fi, fj) {
            if self.cells[c].active {
                return Some(c);
            }
        }
        for dj in -1..=1 {
            for di in -1..=1 {
                if let Some(c) = self.cell_at(fi + di, fj + dj) {
                    let cell = &self.cells[c];
                    if cell.active && self.rect_contains(cell, &y, tol) {
                        return Some(c);
                    }
                }
            }
        }
        None
    }

    fn rect_contains(&self, cell: &Cell, y: &Point, tol: f64) -> bool {
        if cell.rect.contains(y, tol) {
            return true;
        }
        if self.periodic {
            let p = self.n[0] as f64 * self.h;
            for s in [-p, p] {
                if cell.rect.contains(&(y + Point::new(s, 0.0)), tol) {
                    return true;
                }
            }
        }
        false
    }

    pub fn active_cells(&self) -> impl Iterator<Item = (usize, &Cell)> {
        self.cells.iter().enumerate().filter(|(_, c)| c.active)
    }

    pub fn summary(&self) -> MeshSummary {
        MeshSummary {
            patch: self.patch,
            h: self.h,
            cells: self.cells.len(),
            active: self.cells.iter().filter(|c| c.active).count(),
            cut: self.cells.iter().filter(|c| c.cut).count(),
            stab_faces: self.stab_faces.len(),
            polygon_area_error: self.polygon_area_error,
        }
    }

    /// Reference area covered by the active cells' clipped regions.
    pub fn covered_area(&self) -> f64 {
        self.active_cells().map(|(_, c)| c.area).sum()
    }
}

/// Resolution of the boundary polylines used for clipping at mesh size `h`.
pub fn polyline_resolution(h: f64) -> f64 {
    (h / 4.0).min(h * h / 4.0)
}

/// Background grid over one reference domain. `offset` is the grid shift in
/// units of `h` (ignored along a periodic direction).
pub fn build_mesh(
    domain: &ReferenceDomain,
    patch: usize,
    h: f64,
    mode: MeshMode,
    offset: [f64; 2],
) -> Result<PatchMesh> {
    let diam = domain.diameter();
    if !(h > 0.0) || h > diam {
        return Err(Error::Mesh(format!(
            "mesh size {h} must be positive and not exceed the domain diameter {diam}"
        )));
    }
    let (lo, hi) = domain.bounds();
    let fitted = mode != MeshMode::Cut;
    let (h, periodic) = match domain.periodic() {
        Some(p) => (p / (p / h).round().max(1.0), true),
        None => (h, false),
    };

    let mut origin = Point::zeros();
    let mut n = [0usize; 2];
    for d in 0..2 {
        if d == 0 && periodic {
            origin[0] = 0.0;
            n[0] = (domain.periodic().unwrap() / h).round() as usize;
            continue;
        }
        if fitted {
            origin[d] = lo[d];
            let cells = (hi[d] - lo[d]) / h;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
                return Err(Error::Mesh(format!(
                    "fitted mesh: extent {} is not a multiple of h = {h}",
                    hi[d] - lo[d]
                )));
            }
            n[d] = cells.round().max(1.0) as usize;
        } else {
            origin[d] = lo[d] - offset[d] * h;
            n[d] = ((hi[d] - origin[d]) / h).floor() as usize + 1;
        }
    }

    let rings = domain.polylines(polyline_resolution(h))?;
    let polygon_area: f64 = rings.iter().map(|r| polygon::signed_area(r)).sum();
    let reference_area = domain.area();
    let ring_boxes: Vec<Rect> = rings
        .iter()
        .map(|r| {
            let mut b = Rect::new(r[0], r[0]);
            for p in r {
                b.lo = b.lo.inf(p);
                b.hi = b.hi.sup(p);
            }
            b
        })
        .collect();

    // cells touched by a boundary segment
    let mut touched: BTreeSet<usize> = BTreeSet::new();
    let idx = |x: f64, d: usize| ((x - origin[d]) / h).floor() as isize;
    let eps = 1e-12 * h;
    for ring in &rings {
        let m = ring.len();
        for k in 0..m {
            let (a, b) = (ring[k], ring[(k + 1) % m]);
            let (i0, i1) = (idx(a[0].min(b[0]) - eps, 0), idx(a[0].max(b[0]) + eps, 0));
            let (j0, j1) = (idx(a[1].min(b[1]) - eps, 1), idx(a[1].max(b[1]) + eps, 1));
            for j in j0.max(0)..=j1.min(n[1] as isize - 1) {
                for i in i0.max(0)..=i1.min(n[0] as isize - 1) {
                    touched.insert(j as usize * n[0] + i as usize);
                }
            }
        }
    }

    let mut cells = Vec::with_capacity(n[0] * n[1]);
    for j in 0..n[1] {
        // scanline crossings through the row centre
        let yc = origin[1] + (j as f64 + 0.5) * h;
        let mut crossings: Vec<f64> = Vec::new();
        for ring in &rings {
            let m = ring.len();
            for k in 0..m {
                let (a, b) = (ring[k], ring[(k + 1) % m]);
                if (a[1] > yc) != (b[1] > yc) {
                    crossings.push(a[0] + (yc - a[1]) / (b[1] - a[1]) * (b[0] - a[0]));
                }
            }
        }
        crossings.sort_by(|a, b| a.total_cmp(b));

        for i in 0..n[0] {
            let rect = cell_rect(&origin, h, i, j);
            let id = j * n[0] + i;
            let full = h * h;
            let (area, triangles) = if touched.contains(&id) {
                let near: Vec<Vec<Point>> = rings
                    .iter()
                    .zip(&ring_boxes)
                    .filter(|(_, b)| {
                        b.lo[0] <= rect.hi[0] && b.hi[0] >= rect.lo[0] && b.lo[1] <= rect.hi[1] && b.hi[1] >= rect.lo[1]
                    })
                    .map(|(r, _)| r.clone())
                    .collect();
                let tris = clip_cell(&rect, &near);
                let area: f64 = tris.iter().map(polygon::triangle_area).sum();
                (area, tris)
            } else {
                let xc = origin[0] + (i as f64 + 0.5) * h;
                let left = crossings.partition_point(|&x| x < xc);
                if left % 2 == 1 {
                    (full, Vec::new())
                } else {
                    (0.0, Vec::new())
                }
            };
            let active = area >= SLIVER_TOL * full;
            let is_full = (area - full).abs() <= FULL_TOL * full;
            cells.push(Cell {
                index: [i, j],
                rect,
                active,
                cut: active && !is_full,
                area: if active { area } else { 0.0 },
                triangles: if active && !is_full { triangles } else { Vec::new() },
            });
        }
    }

    if fitted {
        if let Some(c) = cells.iter().find(|c| c.cut) {
            return Err(Error::Mesh(format!(
                "fitted mesh requested but cell {:?} is cut by the boundary",
                c.index
            )));
        }
    }

    let mut mesh = PatchMesh {
        patch,
        h,
        origin,
        n,
        periodic,
        cells,
        stab_faces: Vec::new(),
        polygon_area,
        polygon_area_error: (polygon_area - reference_area).abs() / reference_area.abs(),
    };

    let covered = mesh.covered_area();
    if (covered - polygon_area).abs() > 1e-8 * polygon_area.abs() {
        return Err(Error::Mesh(format!(
            "active cells cover area {covered}, domain polygon has {polygon_area}"
        )));
    }

    let mut faces = BTreeSet::new();
    for j in 0..n[1] as isize {
        for i in 0..n[0] as isize {
            let a = mesh.cell_at(i, j).unwrap();
            for (axis, (di, dj)) in [(1, 0), (0, 1)].into_iter().enumerate() {
                if let Some(b) = mesh.cell_at(i + di, j + dj) {
                    if a == b {
                        continue;
                    }
                    let (ca, cb) = (&mesh.cells[a], &mesh.cells[b]);
                    if ca.active && cb.active && (ca.cut || cb.cut) {
                        faces.insert(Face { cells: [a, b], axis });
                    }
                }
            }
        }
    }
    mesh.stab_faces = faces.into_iter().collect();
    Ok(mesh)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    pub mode: MeshMode,
    pub h: f64,
    /// Grid shift in units of `h` for cut meshes.
    pub offset: [f64; 2],
}

impl MeshOptions {
    pub fn cut(h: f64) -> Self {
        Self {
            mode: MeshMode::Cut,
            h,
            offset: [1.0 / 3.0, 1.0 / 3.0],
        }
    }

    pub fn matching(h: f64) -> Self {
        Self {
            mode: MeshMode::Matching,
            h,
            offset: [0.0, 0.0],
        }
    }

    pub fn nonmatching(h: f64) -> Self {
        Self {
            mode: MeshMode::Nonmatching,
            h,
            offset: [0.0, 0.0],
        }
    }

    pub fn patch_h(&self, patch: usize) -> f64 {
        match self.mode {
            MeshMode::Nonmatching if patch % 2 == 1 => self.h / 2.0,
            _ => self.h,
        }
    }
}

pub fn build_meshes(surface: &CompositeSurface, opts: &MeshOptions) -> Result<Vec<PatchMesh>> {
    surface
        .patches()
        .iter()
        .enumerate()
        .map(|(i, p)| build_mesh(&p.domain, i, opts.patch_h(i), opts.mode, opts.offset))
        .collect()
}

/// Map from grid index to active cell, handy for tests and diagnostics.
pub fn active_index(mesh: &PatchMesh) -> HashMap<[usize; 2], usize> {
    mesh.active_cells().map(|(k, c)| (c.index, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PieceTag, SurfaceDescription};

    fn unit_domain() -> ReferenceDomain {
        ReferenceDomain::rectangle(1.0, 1.0, [PieceTag::Dirichlet; 4]).unwrap()
    }

    #[test]
    fn matching_unit_square() {
        let m = build_mesh(&unit_domain(), 0, 0.25, MeshMode::Matching, [0.0; 2]).unwrap();
        assert_eq!(m.cells.len(), 16);
        assert!(m.cells.iter().all(|c| c.active && !c.cut));
        assert!(m.stab_faces.is_empty());
    }

    #[test]
    fn shifted_unit_square_covers_area() {
        let h = 0.25;
        let m = build_mesh(&unit_domain(), 0, h, MeshMode::Cut, [1.0 / 3.0; 2]).unwrap();
        assert!((m.covered_area() - 1.0).abs() < 1e-8);
        for c in m.cells.iter().filter(|c| c.active) {
            assert!(c.area > 0.0);
        }
        // stab faces only next to cut cells
        for f in &m.stab_faces {
            assert!(m.cells[f.cells[0]].cut || m.cells[f.cells[1]].cut);
        }
        assert!(m.cells.iter().any(|c| c.cut));
    }

    #[test]
    fn clip_cell_examples() {
        let rect = Rect::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        let big = vec![vec![
            Point::new(-1.0, -1.0),
            Point::new(2.0, -1.0),
            Point::new(2.0, 2.0),
            Point::new(-1.0, 2.0),
        ]];
        let t = clip_cell(&rect, &big);
        assert_eq!(t.len(), 2);
        assert!((t.iter().map(polygon::triangle_area).sum::<f64>() - 1.0).abs() < 1e-15);

        // boundary through the midpoints of two opposite edges
        let half = vec![vec![
            Point::new(-1.0, -1.0),
            Point::new(0.5, -1.0),
            Point::new(0.5, 2.0),
            Point::new(-1.0, 2.0),
        ]];
        let a: f64 = clip_cell(&rect, &half).iter().map(polygon::triangle_area).sum();
        assert!((a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cylinder_cut_cells_are_inside_their_cells() {
        let s = SurfaceDescription::IntersectingCylinders(Default::default()).build().unwrap();
        for (i, p) in s.patches().iter().enumerate() {
            let m = build_mesh(&p.domain, i, 0.2, MeshMode::Cut, [1.0 / 3.0; 2]).unwrap();
            for c in m.cells.iter().filter(|c| c.cut) {
                assert!(!c.triangles.is_empty());
                assert!(c.area > 0.0);
                for t in &c.triangles {
                    for v in t {
                        assert!(c.rect.contains(v, 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn single_cut_cell_has_all_its_faces() {
        // a domain whose boundary crosses exactly one cell interior: the
        // square [0, 1] with a tiny notch in the middle of the grid
        let verts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.6, 1.0),
            Point::new(0.55, 0.55),
            Point::new(0.4, 1.0),
            Point::new(0.0, 1.0),
        ];
        let d = ReferenceDomain::polygon(&verts, &[PieceTag::Dirichlet; 7]).unwrap();
        let m = build_mesh(&d, 0, 0.2, MeshMode::Cut, [0.0; 2]);
        // the notch cuts a column of cells; check the face rule directly
        let m = m.unwrap();
        for (k, c) in m.active_cells() {
            if !c.cut {
                continue;
            }
            let [i, j] = c.index;
            for (di, dj, axis) in [(-1isize, 0isize, 0usize), (1, 0, 0), (0, -1, 1), (0, 1, 1)] {
                if let Some(nb) = m.cell_at(i as isize + di, j as isize + dj) {
                    if m.cells[nb].active {
                        let f = if di + dj > 0 {
                            Face { cells: [k, nb], axis }
                        } else {
                            Face { cells: [nb, k], axis }
                        };
                        assert!(m.stab_faces.contains(&f));
                    }
                }
            }
        }
    }
}
