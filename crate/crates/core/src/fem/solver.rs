//! Krylov solvers for the sparse systems arising in the time stepper.
//!
//! [`BiCgStab`] is right-preconditioned, so the residual it monitors is the
//! residual of the unpreconditioned system. Convergence is only reported after
//! the true residual `b - A x` has been recomputed and checked.

use crate::error::FemError;
use crate::sparse::{dot, norm2, SparseMatrix};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Incomplete LU on the sparsity pattern of the matrix.
    Ilu0,
}

/// ILU(0) factors stored on the pattern of the source matrix: strictly lower
/// part holds L (unit diagonal implied), the rest holds U.
struct Ilu0<'a> {
    row_ptr: &'a [usize],
    col_idx: &'a [usize],
    diag: Vec<usize>,
    lu: Vec<f64>,
}

impl<'a> Ilu0<'a> {
    fn new(a: &'a SparseMatrix) -> Result<Self, FemError> {
        let n = a.nrows();
        let (row_ptr, col_idx) = (a.row_ptr(), a.col_idx());
        let mut lu = a.values().to_vec();
        let mut diag = vec![0; n];
        for (i, d) in diag.iter_mut().enumerate() {
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            *d = row_ptr[i]
                + row.binary_search(&i).map_err(|_| {
                    FemError::InvalidArgument(format!("ILU(0) needs a stored diagonal in row {i}"))
                })?;
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            for kk in row_ptr[i]..diag[i] {
                let k = col_idx[kk];
                let pivot = lu[diag[k]];
                if pivot == 0.0 || !pivot.is_finite() {
                    return Err(FemError::InvalidArgument(format!("ILU(0) zero pivot in row {k}")));
                }
                lu[kk] /= pivot;
                let factor = lu[kk];
                for kj in diag[k] + 1..row_ptr[k + 1] {
                    let p = pos[col_idx[kj]];
                    if p != usize::MAX {
                        lu[p] -= factor * lu[kj];
                    }
                }
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        Ok(Self {
            row_ptr,
            col_idx,
            diag,
            lu,
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = r[i];
            for k in self.row_ptr[i]..self.diag[i] {
                acc -= self.lu[k] * z[self.col_idx[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..self.row_ptr[i + 1] {
                acc -= self.lu[k] * z[self.col_idx[k]];
            }
            z[i] = acc / self.lu[self.diag[i]];
        }
    }
}

enum Applied<'a> {
    Diagonal(Vec<f64>),
    Ilu(Ilu0<'a>),
}

impl Applied<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Diagonal(d) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                    *zi = di * ri;
                }
            }
            Self::Ilu(f) => f.apply(r, z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// ||b − A x|| / ||b|| at exit.
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct BiCgStab {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    /// Soft restarts (new shadow residual) allowed before a breakdown is reported.
    pub max_restarts: usize,
}

impl BiCgStab {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            preconditioner: Preconditioner::Jacobi,
            max_restarts: 10,
        }
    }

    /// Solves `a x = b`, using the content of `x` as the initial guess.
    pub fn solve_into(
        &self,
        a: &SparseMatrix,
        b: &[f64],
        x: &mut [f64],
    ) -> Result<SolveStats, FemError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(FemError::InvalidArgument(format!(
                "system must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        for len in [b.len(), x.len()] {
            if len != n {
                return Err(FemError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if !(self.tol > 0.0) {
            return Err(FemError::InvalidArgument("tolerance must be positive".into()));
        }

        let b_norm = norm2(b);
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let target = self.tol * b_norm;

        let prec = match self.preconditioner {
            Preconditioner::None => Applied::Diagonal(vec![1.0; n]),
            Preconditioner::Jacobi => Applied::Diagonal(
                a.diagonal()
                    .into_iter()
                    .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
                    .collect(),
            ),
            Preconditioner::Ilu0 => Applied::Ilu(Ilu0::new(a)?),
        };

        let mut r = vec![0.0; n];
        let true_residual = |x: &[f64], r: &mut [f64]| -> f64 {
            a.mul_vec_into(x, r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            norm2(r)
        };

        let mut r_norm = true_residual(x, &mut r);
        if r_norm <= target {
            return Ok(SolveStats {
                iterations: 0,
                relative_residual: r_norm / b_norm,
            });
        }

        let mut r_hat = r.clone();
        let mut p = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut p_hat = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut s_hat = vec![0.0; n];
        let mut t = vec![0.0; n];
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut restarts = 0;

        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            // r has become (nearly) orthogonal to the shadow residual
            if rho_new.abs() <= 1e-30 * norm2(&r_hat) * r_norm {
                if restarts == self.max_restarts {
                    return Err(FemError::Breakdown {
                        iterations,
                        residual: r_norm / b_norm,
                    });
                }
                restarts += 1;
                r_hat.copy_from_slice(&r);
                p.iter_mut().for_each(|e| *e = 0.0);
                v.iter_mut().for_each(|e| *e = 0.0);
                rho = 1.0;
                alpha = 1.0;
                omega = 1.0;
                continue;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            prec.apply(&p, &mut p_hat);
            a.mul_vec_into(&p_hat, &mut v);
            let r_hat_v = dot(&r_hat, &v);
            if r_hat_v == 0.0 || !r_hat_v.is_finite() {
                return Err(FemError::Breakdown {
                    iterations,
                    residual: r_norm / b_norm,
                });
            }
            alpha = rho / r_hat_v;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm2(&s) <= target {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                r_norm = true_residual(x, &mut r);
                if r_norm <= target {
                    return Ok(SolveStats {
                        iterations,
                        relative_residual: r_norm / b_norm,
                    });
                }
                // drifted estimate: continue from the refreshed residual
                r_hat.copy_from_slice(&r);
                p.iter_mut().for_each(|e| *e = 0.0);
                v.iter_mut().for_each(|e| *e = 0.0);
                rho = 1.0;
                alpha = 1.0;
                omega = 1.0;
                continue;
            }
            prec.apply(&s, &mut s_hat);
            a.mul_vec_into(&s_hat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                return Err(FemError::Breakdown {
                    iterations,
                    residual: r_norm / b_norm,
                });
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            r_norm = norm2(&r);
            if !r_norm.is_finite() {
                return Err(FemError::Breakdown {
                    iterations,
                    residual: r_norm,
                });
            }
            if r_norm <= target {
                r_norm = true_residual(x, &mut r);
                if r_norm <= target {
                    return Ok(SolveStats {
                        iterations,
                        relative_residual: r_norm / b_norm,
                    });
                }
                r_hat.copy_from_slice(&r);
                p.iter_mut().for_each(|e| *e = 0.0);
                v.iter_mut().for_each(|e| *e = 0.0);
                rho = 1.0;
                alpha = 1.0;
                omega = 1.0;
            }
            if omega == 0.0 {
                return Err(FemError::Breakdown {
                    iterations,
                    residual: r_norm / b_norm,
                });
            }
        }
        let residual = true_residual(x, &mut r) / b_norm;
        Err(FemError::NotConverged {
            iterations,
            residual,
        })
    }
}

/// Solves a (generally nonsymmetric) sparse system with Jacobi-preconditioned
/// BiCGStab from a zero initial guess. On success `||b − A x|| ≤ tol·||b||`.
pub fn solve_nonsymmetric(
    system: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, FemError> {
    let mut x = vec![0.0; rhs.len()];
    BiCgStab::new(tol, max_iter).solve_into(system, rhs, &mut x)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5, 0.0];
        let x = solve_nonsymmetric(&SparseMatrix::identity(4), &b, 1e-12, 10).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let x = solve_nonsymmetric(&SparseMatrix::identity(3), &[0.0; 3], 1e-12, 10).unwrap();
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn nonsymmetric_small_system() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 4.0),
                (0, 1, 1.0),
                (1, 0, -2.0),
                (1, 1, 5.0),
                (1, 2, 1.0),
                (2, 1, 3.0),
                (2, 2, 6.0),
            ],
        )
        .unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let x = solve_nonsymmetric(&a, &b, 1e-13, 50).unwrap();
        let r = a.mul_vec(&x).unwrap();
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn non_square_and_bad_tol_rejected() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0)]).unwrap();
        assert!(solve_nonsymmetric(&a, &[1.0, 1.0], 1e-8, 10).is_err());
        assert!(solve_nonsymmetric(&SparseMatrix::identity(2), &[1.0, 1.0], 0.0, 10).is_err());
        assert!(matches!(
            solve_nonsymmetric(&SparseMatrix::identity(2), &[1.0], 1e-8, 10),
            Err(FemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        // no fill-in for a tridiagonal matrix, so one iteration suffices
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0 + i as f64 * 0.01));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut solver = BiCgStab::new(1e-12, 100);
        solver.preconditioner = Preconditioner::Ilu0;
        let mut x = vec![0.0; n];
        let stats = solver.solve_into(&a, &b, &mut x).unwrap();
        assert_eq!(stats.iterations, 1);
        let r = a.mul_vec(&x).unwrap();
        assert!(r.iter().zip(&b).all(|(ri, bi)| (ri - bi).abs() < 1e-12));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        // 1D Laplacian with a shift: needs many iterations
        let n = 200;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.001));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        match solve_nonsymmetric(&a, &vec![1.0; n], 1e-14, 2) {
            Err(FemError::NotConverged { iterations: 2, residual }) => assert!(residual > 1e-14),
            other => panic!("unexpected {other:?}"),
        }
    }
}
