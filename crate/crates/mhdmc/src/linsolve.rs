//! Matrix-free linear solvers for the implicit sub-steps.
//!
//! The Picard sub-systems are sparse nonsymmetric stencil operators; we solve
//! them with BiCGStab preconditioned by the Jacobi diagonal. The diagonal is
//! extracted without assembling the matrix by probing the operator with
//! periodic colorings (period 3 per direction separates any two cells that
//! share a stencil of radius <= 2, per component). Small systems can also be
//! solved by dense LU after probing with unit vectors, which doubles as an
//! oracle in tests.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinError {
    #[error("bicgstab did not converge in {iters} iterations, residual {residual:e}")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("bicgstab breakdown, residual {residual:e}")]
    Breakdown { residual: f64 },
    #[error("dense lu factorization failed")]
    Singular,
}

#[derive(Debug, Clone, Copy)]
pub struct LinReport {
    pub iters: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Extract the operator diagonal by coloring probes. The unknown vector is a
/// concatenation of `ncomp` cell fields on an nx1 x nx2 grid; cells of the
/// same color within one component never interact for stencils of radius <= 2
/// as long as nx1 and nx2 are not tiny (we fall back to unit probing then).
pub fn stencil_diagonal<F>(op: &F, nx1: usize, nx2: usize, ncomp: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = nx1 * nx2 * ncomp;
    let mut diag = vec![0.0; n];
    // A coloring with period p along a periodic axis keeps same-color cells at
    // distance exactly p when p divides the axis length, which separates any
    // stencil of radius <= 2 once p >= 3. Pick the smallest such divisor; if
    // an axis is too short fall back to probing every cell.
    fn period(n: usize) -> Option<usize> {
        (3..=n).find(|p| n % p == 0)
    }
    let (p1, p2) = match (period(nx1), period(nx2)) {
        (Some(p1), Some(p2)) => (p1, p2),
        _ => {
            let mut e = vec![0.0; n];
            let mut y = vec![0.0; n];
            for k in 0..n {
                e[k] = 1.0;
                op(&e, &mut y);
                diag[k] = y[k];
                e[k] = 0.0;
            }
            return diag;
        }
    };
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for c in 0..ncomp {
        for s1 in 0..p1 {
            for s2 in 0..p2 {
                e.iter_mut().for_each(|v| *v = 0.0);
                let mut any = false;
                for j in (s2..nx2).step_by(p2) {
                    for i in (s1..nx1).step_by(p1) {
                        e[c * nx1 * nx2 + j * nx1 + i] = 1.0;
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                op(&e, &mut y);
                for j in (s2..nx2).step_by(p2) {
                    for i in (s1..nx1).step_by(p1) {
                        let k = c * nx1 * nx2 + j * nx1 + i;
                        diag[k] = y[k];
                    }
                }
            }
        }
    }
    diag
}

/// Preconditioned BiCGStab for a matrix-free operator. `diag` is the Jacobi
/// preconditioner (entries with |d| below machine floor are passed through).
/// Convergence is relative to the right-hand side norm.
pub fn bicgstab<F>(
    op: &F,
    rhs: &[f64],
    x: &mut [f64],
    diag: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<LinReport, LinError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(LinReport { iters: 0, residual: 0.0 });
    }
    let prec = |r: &[f64], z: &mut [f64]| {
        for k in 0..n {
            let d = diag[k];
            z[k] = if d.abs() > 1e-300 { r[k] / d } else { r[k] };
        }
    };
    let mut r = vec![0.0; n];
    op(x, &mut r);
    for k in 0..n {
        r[k] = rhs[k] - r[k];
    }
    let r0 = r.clone();
    let mut rho_prev = 1.0_f64;
    let mut alpha = 1.0_f64;
    let mut omega = 1.0_f64;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = norm(&r);
    if res <= tol * bnorm {
        return Ok(LinReport { iters: 0, residual: res / bnorm });
    }
    for it in 1..=max_iters {
        let rho = dot(&r0, &r);
        if rho.abs() < 1e-300 {
            return Err(LinError::Breakdown { residual: res / bnorm });
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_prev) * (alpha / omega);
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
        }
        prec(&p, &mut phat);
        op(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-300 {
            return Err(LinError::Breakdown { residual: res / bnorm });
        }
        alpha = rho / denom;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) <= tol * bnorm {
            for k in 0..n {
                x[k] += alpha * phat[k];
            }
            return Ok(LinReport { iters: it, residual: norm(&s) / bnorm });
        }
        prec(&s, &mut shat);
        op(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt.abs() < 1e-300 {
            return Err(LinError::Breakdown { residual: res / bnorm });
        }
        omega = dot(&t, &s) / tt;
        for k in 0..n {
            x[k] += alpha * phat[k] + omega * shat[k];
            r[k] = s[k] - omega * t[k];
        }
        res = norm(&r);
        if res <= tol * bnorm {
            return Ok(LinReport { iters: it, residual: res / bnorm });
        }
        if omega.abs() < 1e-300 {
            return Err(LinError::Breakdown { residual: res / bnorm });
        }
        rho_prev = rho;
    }
    Err(LinError::NoConvergence { iters: max_iters, residual: res / bnorm })
}

/// Assemble the dense matrix of a matrix-free operator by unit-vector probing.
pub fn probe_dense<F>(op: &F, n: usize) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        op(&e, &mut y);
        for r in 0..n {
            a[(r, k)] = y[r];
        }
        e[k] = 0.0;
    }
    a
}

/// Direct solve by probing plus LU. Only sensible for small grids; used as
/// the reference path for solver verification.
pub fn solve_dense<F>(op: &F, rhs: &[f64], x: &mut [f64]) -> Result<(), LinError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let a = probe_dense(op, n);
    let lu = a.lu();
    let sol = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or(LinError::Singular)?;
    x.copy_from_slice(sol.as_slice());
    Ok(())
}
