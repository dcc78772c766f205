//! Legacy ASCII VTK export of discrete surface fields.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::assembly::Discretization;
use crate::error::Result;
use crate::geometry::surface_gradient;
use crate::polygon::{triangle_area, Point};

/// Physical-space triangulation with per-vertex samples of `u` and
/// `|grad_Omega u|`. Vertices are not shared between triangles.
#[derive(Clone, Debug, Default)]
pub struct SurfaceField {
    pub points: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub u: Vec<f64>,
    pub grad_magnitude: Vec<f64>,
}

pub fn sample_field(disc: &Discretization, u: &[f64]) -> Result<SurfaceField> {
    let mut out = SurfaceField::default();
    for (i, mesh) in disc.meshes.iter().enumerate() {
        let map = &disc.surface.patches()[i].map;
        for (c, cell) in mesh.active_cells() {
            let tris: Vec<[Point; 3]> = if cell.cut {
                cell.triangles.clone()
            } else {
                let k = cell.rect.corners();
                vec![[k[0], k[1], k[2]], [k[0], k[2], k[3]]]
            };
            for t in tris {
                if triangle_area(&t) == 0.0 {
                    continue;
                }
                let base = out.points.len();
                for x in &t {
                    let (val, g) = disc.space.eval(&disc.meshes, u, i, c, x)?;
                    let y = map.point(x);
                    out.points.push([y[0], y[1], y[2]]);
                    out.u.push(val);
                    out.grad_magnitude.push(surface_gradient(map, x, &g)?.norm());
                }
                out.triangles.push([base, base + 1, base + 2]);
            }
        }
    }
    Ok(out)
}

impl SurfaceField {
    pub fn to_vtk_string(&self, title: &str) -> String {
        let mut s = String::new();
        let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
        }
        let nt = self.triangles.len();
        let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {nt}");
        for _ in 0..nt {
            s.push_str("5\n");
        }
        let _ = writeln!(s, "POINT_DATA {}", self.points.len());
        for (name, data) in [("u", &self.u), ("grad_magnitude", &self.grad_magnitude)] {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in data {
                let _ = writeln!(s, "{v:.17e}");
            }
        }
        s
    }
}

pub fn write_vtk(disc: &Discretization, u: &[f64], path: &Path) -> Result<()> {
    let field = sample_field(disc, u)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(field.to_vtk_string("compsurf solution").as_bytes())?;
    f.flush()?;
    Ok(())
}
