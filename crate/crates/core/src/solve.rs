//! Sparse solves, error norms, condition numbers and interface diagnostics.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::assembly::{boundary_points, interface_points, AssembledSystem, Discretization};
use crate::error::{Error, Result};
use crate::geometry::BoundaryKind;
use crate::polygon::Point;
use crate::random;
use crate::sparse::{dot, norm, CsrMatrix};

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct Factorization {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl Factorization {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut t = Vec::with_capacity(a.nnz());
        for i in 0..a.n {
            for (j, v) in a.row(i) {
                if j <= i {
                    t.push(Triplet::new(i, j, v));
                }
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &t)
            .map_err(|e| Error::Indefinite(format!("could not build sparse matrix: {e:?}")))?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|e| {
            Error::Indefinite(format!(
                "Cholesky factorization failed ({e:?}); the penalty may be too small or stabilization missing"
            ))
        })?;
        Ok(Self { n: a.n, llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Relative residual required of every solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Solves `A u = b` by sparse Cholesky and checks the residual.
pub fn solve_system(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, Factorization)> {
    let f = Factorization::new(a)?;
    let mut u = f.solve(b);
    let bn = norm(b);
    let mut res = residual(a, &u, b);
    // one step of iterative refinement for badly scaled systems
    if bn > 0.0 && norm(&res) > RESIDUAL_TOL * bn {
        let du = f.solve(&res);
        u.iter_mut().zip(&du).for_each(|(x, d)| *x += d);
        res = residual(a, &u, b);
    }
    if bn > 0.0 && norm(&res) > RESIDUAL_TOL * bn {
        return Err(Error::Indefinite(format!(
            "relative residual {:.3e} after solve",
            norm(&res) / bn
        )));
    }
    Ok((u, f))
}

pub fn solve(system: &AssembledSystem) -> Result<Vec<f64>> {
    Ok(solve_system(&system.a, &system.b)?.0)
}

fn residual(a: &CsrMatrix, u: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(u).iter().zip(b).map(|(x, y)| y - x).collect()
}

/// Exact solution of `(patch, reference point, physical point)` returning
/// its value and tangential gradient.
pub type ExactFn<'a> = &'a (dyn Fn(usize, &Point, &Vector3<f64>) -> (f64, Vector3<f64>) + Sync);

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    /// Mesh-dependent energy norm of `u - u_h`.
    pub energy: f64,
}

/// Value and tangential gradient of the discrete function `u` at a point of
/// a cell, given shape values and tangential gradients.
fn combine(u: &[f64], dofs: &[usize], values: &[f64], grads: &[Vector3<f64>]) -> (f64, Vector3<f64>) {
    let mut v = 0.0;
    let mut g = Vector3::zeros();
    for (a, &d) in dofs.iter().enumerate() {
        v += u[d] * values[a];
        g += u[d] * grads[a];
    }
    (v, g)
}

/// `||u - u_h||_Omega` and the energy norm
/// `sum ||e||_{a_i}^2 + sum_j sum_k (h ||nu_k . grad e_k||^2 + h^-1 ||e_k - <e>||^2)
///  + h ||nu . grad e||^2_{Gamma_D} + h^-1 ||e||^2_{Gamma_D}`,
/// all integrated at doubled quadrature order.
pub fn error_norms(disc: &Discretization, u: &[f64], exact: ExactFn) -> Result<ErrorNorms> {
    let orders = disc.orders.doubled();
    let mut l2 = 0.0;
    let mut energy = 0.0;
    for (i, mesh) in disc.meshes.iter().enumerate() {
        let mu = disc.surface.patches()[i].mu;
        for (c, _) in mesh.active_cells() {
            let dofs = disc.space.patches[i].cell_dofs(c);
            for q in disc.cell_points(i, c, orders.volume)? {
                let (uh, gh) = combine(u, dofs, &q.values, &q.grads);
                let (ue, ge) = exact(i, &q.x, &q.phys);
                l2 += q.weight * (ue - uh).powi(2);
                energy += q.weight * mu * (ge - gh).norm_squared();
            }
        }
    }
    for j in 0..disc.surface.interfaces().len() {
        let h = disc.interface_h(j);
        let weights = &disc.surface.interfaces()[j].weights;
        for q in interface_points(disc, j, orders.curve)? {
            let errs: Vec<(f64, Vector3<f64>)> = q
                .members
                .iter()
                .map(|m| {
                    let (uh, gh) = combine(u, &m.dofs, &m.values, &m.grads);
                    let (ue, ge) = exact(m.patch, &m.xref, &m.x);
                    (ue - uh, ge - gh)
                })
                .collect();
            let avg: f64 = errs.iter().zip(weights).map(|(e, w)| w * e.0).sum();
            for (m, (e, ge)) in q.members.iter().zip(&errs) {
                energy += q.weight * (h * m.nu.dot(ge).powi(2) + (e - avg).powi(2) / h);
            }
        }
    }
    for seg in disc.surface.boundary() {
        if seg.kind != BoundaryKind::Dirichlet {
            continue;
        }
        let h = disc.meshes[seg.patch].h;
        for q in boundary_points(disc, seg.patch, seg.piece, orders.curve)? {
            let m = &q.members[0];
            let (uh, gh) = combine(u, &m.dofs, &m.values, &m.grads);
            let (ue, ge) = exact(m.patch, &m.xref, &m.x);
            energy += q.weight * (h * m.nu.dot(&(ge - gh)).powi(2) + (ue - uh).powi(2) / h);
        }
    }
    Ok(ErrorNorms {
        l2: l2.max(0.0).sqrt(),
        energy: energy.max(0.0).sqrt(),
    })
}

/// `sqrt(v^T S v)`.
pub fn seminorm(s: &CsrMatrix, v: &[f64]) -> f64 {
    s.bilinear(v, v).max(0.0).sqrt()
}

/// `|| sum_k nu_k . sigma(u_k) ||_{L2(Gamma_j)}`.
pub fn kirchhoff_residual(disc: &Discretization, u: &[f64], j: usize) -> Result<f64> {
    let mut r = 0.0;
    for q in interface_points(disc, j, disc.orders.doubled().curve)? {
        let s: f64 = q
            .members
            .iter()
            .map(|m| m.dofs.iter().enumerate().map(|(a, &d)| u[d] * m.fluxes[a]).sum::<f64>())
            .sum();
        r += q.weight * s * s;
    }
    Ok(r.sqrt())
}

/// `max_k || u_k - <u> ||_{L2(Gamma_j)}`.
pub fn jump_residual(disc: &Discretization, u: &[f64], j: usize) -> Result<f64> {
    let weights = &disc.surface.interfaces()[j].weights;
    let mut r = vec![0.0; weights.len()];
    for q in interface_points(disc, j, disc.orders.doubled().curve)? {
        let vals: Vec<f64> = q
            .members
            .iter()
            .map(|m| m.dofs.iter().enumerate().map(|(a, &d)| u[d] * m.values[a]).sum())
            .collect();
        let avg: f64 = vals.iter().zip(weights).map(|(v, w)| v * w).sum();
        for (k, v) in vals.iter().enumerate() {
            r[k] += q.weight * (v - avg).powi(2);
        }
    }
    Ok(r.into_iter().fold(0.0, f64::max).sqrt())
}

/// Relative tolerance and iteration cap of the extreme-eigenvalue iterations.
pub const EIG_TOL: f64 = 1e-4;
pub const EIG_MAX_ITER: usize = 10_000;

/// Largest eigenvalue of a symmetric positive semidefinite operator.
///
/// Power iteration accelerated by the Lanczos recurrence: the Krylov space
/// of `k` power steps is kept implicitly and the largest Ritz value is
/// checked every few steps. Without reorthogonalization spurious copies of
/// converged Ritz values can appear, which leaves the largest one intact.
pub fn largest_eigenvalue(n: usize, seed: u64, apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    let mut rng = random::rng(seed);
    let mut q: Vec<f64> = (0..n).map(|_| random::uniform(&mut rng) - 0.5).collect();
    let nq = norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut q_prev = vec![0.0; n];
    let (mut alphas, mut betas) = (Vec::new(), Vec::<f64>::new());
    let mut last = f64::NAN;
    let ritz = |alphas: &[f64], betas: &[f64]| {
        let k = alphas.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        SymmetricEigen::new(t).eigenvalues.max()
    };
    for it in 0..EIG_MAX_ITER.min(n.max(1) * 4 + 10) {
        let mut w = apply(&q);
        let alpha = dot(&q, &w);
        let beta_prev = betas.last().copied().unwrap_or(0.0);
        for i in 0..n {
            w[i] -= alpha * q[i] + beta_prev * q_prev[i];
        }
        alphas.push(alpha);
        let beta = norm(&w);
        let check = it % 5 == 4 || beta <= 1e-14 * alpha.abs().max(f64::MIN_POSITIVE) || alphas.len() >= n;
        if check {
            let lam = ritz(&alphas, &betas);
            if beta <= 1e-14 * lam.abs().max(f64::MIN_POSITIVE) || alphas.len() >= n || (lam - last).abs() <= EIG_TOL * 1e-2 * lam.abs() {
                return Ok(lam);
            }
            last = lam;
        }
        betas.push(beta);
        q_prev = std::mem::replace(&mut q, w.into_iter().map(|v| v / beta).collect());
    }
    Err(Error::NotConverged {
        iterations: alphas.len(),
    })
}

/// `lambda_max / lambda_min` of a symmetric positive definite matrix from
/// the largest eigenvalues of `A` and of `A^-1`.
pub fn condition_number(a: &CsrMatrix, factorization: Option<&Factorization>, seed: u64) -> Result<f64> {
    let owned;
    let f = match factorization {
        Some(f) => f,
        None => {
            owned = Factorization::new(a)?;
            &owned
        }
    };
    let lmax = largest_eigenvalue(a.n, seed, |x| a.mul_vec(x))?;
    let inv = largest_eigenvalue(a.n, seed.wrapping_add(1), |x| f.solve(x))?;
    Ok(lmax * inv)
}

/// Smallest eigenvalue of a symmetric matrix by dense decomposition.
pub fn dense_lambda_min(a: &CsrMatrix) -> f64 {
    SymmetricEigen::new(a.to_dense()).eigenvalues.min()
}

/// Largest `lambda` with `N v = lambda D v`, for symmetric `N` and positive
/// definite `D`.
pub fn generalized_lambda_max(n: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<f64> {
    let chol = d
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Indefinite("denominator matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Indefinite("singular Cholesky factor".into()))?;
    let m = &linv * n * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(m).eigenvalues.max())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub case: String,
    pub p: usize,
    pub h: f64,
    pub dof_count: usize,
    pub l2_error: f64,
    pub energy_error: f64,
    /// `||pi_h u - u_h||_{s_h}`.
    pub stab_energy: f64,
    pub condition_number: Option<f64>,
    pub kirchhoff_residuals: Vec<f64>,
    pub jump_residuals: Vec<f64>,
    pub wall_time: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let a = CsrMatrix::from_diagonal(&[2.0]);
        let (u, _) = solve_system(&a, &[4.0]).unwrap();
        assert!((u[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(solve_system(&a, &[1.0, 1.0]), Err(Error::Indefinite(_))));
    }

    #[test]
    fn diagonal_condition_numbers() {
        let id = CsrMatrix::identity(5);
        assert!((condition_number(&id, None, 1).unwrap() - 1.0).abs() < 1e-12);
        let d = CsrMatrix::from_diagonal(&[1.0, 10.0]);
        assert!((condition_number(&d, None, 1).unwrap() - 10.0).abs() < 1e-3);
    }

    #[test]
    fn laplacian_1d_condition_matches_dense() {
        let n = 40;
        let mut t = crate::sparse::Triplets::new(n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        let a = t.into_csr();
        let e = SymmetricEigen::new(a.to_dense()).eigenvalues;
        let exact = e.max() / e.min();
        let c = condition_number(&a, None, 7).unwrap();
        assert!((c - exact).abs() < 1e-4 * exact, "{c} vs {exact}");
    }

    #[test]
    fn generalized_eigenvalue() {
        let n = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 6.0]));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        assert!((generalized_lambda_max(&n, &d).unwrap() - 3.0).abs() < 1e-12);
    }
}
