use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{assemble_interface, interface_points, Discretization};
use crate::error::{Error, Result};
use crate::polygon::Point;
use crate::sparse::{CsrMatrix, Triplets};

/// Largest entrywise differences between the Nitsche interface matrices and
/// the average/jump matrices, relative to the largest Nitsche entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgDiscrepancy {
    pub alpha: [f64; 2],
    pub consistency: f64,
    pub penalty: f64,
    pub consistency_scale: f64,
    pub penalty_scale: f64,
}

impl DgDiscrepancy {
    pub fn max(&self) -> f64 {
        self.consistency.max(self.penalty)
    }
}

fn check_flat(disc: &Discretization) -> Result<f64> {
    let patches = disc.surface.patches();
    let mu = patches[0].mu;
    if patches.iter().any(|p| p.mu != mu) {
        return Err(Error::Comparison("the average/jump form needs a single constant mu".into()));
    }
    let n0 = patches[0].map.normal(&Point::zeros());
    for p in patches {
        if !p.map.is_planar() || p.map.normal(&Point::zeros()).cross(&n0).norm() > 1e-12 {
            return Err(Error::Comparison(format!("patch {:?} is not coplanar with patch 0", p.name)));
        }
    }
    for (j, g) in disc.surface.interfaces().iter().enumerate() {
        if g.members.len() != 2 {
            return Err(Error::Comparison(format!(
                "interface {j} has {} members; the average/jump form needs two",
                g.members.len()
            )));
        }
    }
    Ok(mu)
}

/// Compares the assembled interface forms with weights `alpha` on every
/// interface against a direct assembly of
/// `-({nu.sigma(v)}, [w]) - ([v], {nu.sigma(w)}) + beta mu / h (a1^2 + a2^2) ([v], [w])`
/// where `{nu.sigma(v)} = a2 nu1.sigma(v1) - a1 nu2.sigma(v2)` and `[v] = v1 - v2`.
pub fn flat_dg_equivalence(disc: &Discretization, alpha: [f64; 2], beta: f64) -> Result<DgDiscrepancy> {
    let mu = check_flat(disc)?;
    let mut d = disc.clone();
    for j in 0..d.surface.interfaces().len() {
        d.surface.set_weights(j, alpha.to_vec())?;
    }
    let (cons, pen) = assemble_interface(&d, beta)?;

    let n = d.ndofs();
    let mut dg_cons = Triplets::new(n);
    let mut dg_pen = Triplets::new(n);
    let [a1, a2] = alpha;
    for j in 0..d.surface.interfaces().len() {
        let h = d.interface_h(j);
        for q in interface_points(&d, j, d.orders.curve)? {
            let (s1, s2) = (&q.members[0], &q.members[1]);
            let dofs: Vec<usize> = s1.dofs.iter().chain(&s2.dofs).copied().collect();
            let m1 = s1.dofs.len();
            let m = dofs.len();
            let mut jump = vec![0.0; m];
            let mut avg = vec![0.0; m];
            for a in 0..m1 {
                jump[a] = s1.values[a];
                avg[a] = a2 * mu * s1.nu.dot(&s1.grads[a]);
            }
            for a in 0..s2.dofs.len() {
                jump[m1 + a] = -s2.values[a];
                avg[m1 + a] = -a1 * mu * s2.nu.dot(&s2.grads[a]);
            }
            let mut kc = DMatrix::zeros(m, m);
            let mut kp = DMatrix::zeros(m, m);
            let pen_coef = beta * mu / h * (a1 * a1 + a2 * a2);
            for a in 0..m {
                for b in 0..m {
                    kc[(a, b)] -= q.weight * (avg[a] * jump[b] + jump[a] * avg[b]);
                    kp[(a, b)] += q.weight * pen_coef * jump[a] * jump[b];
                }
            }
            dg_cons.add_block(&dofs, &dofs, &kc);
            dg_pen.add_block(&dofs, &dofs, &kp);
        }
    }
    let rel = |x: &CsrMatrix, y: CsrMatrix| {
        let scale = x.max_abs();
        (x.sub(&y).max_abs() / scale.max(f64::MIN_POSITIVE), scale)
    };
    let (consistency, consistency_scale) = rel(&cons, dg_cons.into_csr());
    let (penalty, penalty_scale) = rel(&pen, dg_pen.into_csr());
    Ok(DgDiscrepancy {
        alpha,
        consistency,
        penalty,
        consistency_scale,
        penalty_scale,
    })
}
