//! Linear solves for the implicit parts of the time step:
//! `(alpha I - beta L) x = b` with the Neumann Laplacian `L`.
//!
//! 1D uses direct tridiagonal elimination; 2D uses conjugate gradients with
//! a diagonal preconditioner (the operator is symmetric positive definite
//! for alpha > 0, beta >= 0).

use crate::error::{Result, SimError};
use crate::mesh::{pairwise_sum, Field};

/// Relative residual required of iterative solves.
pub const SOLVE_TOL: f64 = 1e-12;

/// Solve `(alpha I - beta L) x = b`.
pub fn solve_helmholtz(alpha: f64, beta: f64, b: &Field) -> Result<Field> {
    debug_assert!(alpha > 0.0 && beta >= 0.0);
    if beta == 0.0 {
        return Ok(b.scale(1.0 / alpha));
    }
    if b.grid().dim() == 1 {
        solve_tridiagonal(alpha, beta, b)
    } else {
        solve_pcg(alpha, beta, b)
    }
}

/// Thomas algorithm on the 1D operator. With mirrored ghosts the boundary
/// rows have a single off-diagonal, keeping the matrix an M-matrix.
fn solve_tridiagonal(alpha: f64, beta: f64, b: &Field) -> Result<Field> {
    let g = b.grid().clone();
    let n = g.n(0);
    let r = beta / (g.h(0) * g.h(0));
    // diag: alpha + r at boundary rows, alpha + 2r inside; off-diagonals -r.
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    let rhs = b.values();

    let diag = |i: usize| {
        if i == 0 || i == n - 1 {
            alpha + r
        } else {
            alpha + 2.0 * r
        }
    };

    c_prime[0] = -r / diag(0);
    d_prime[0] = rhs[0] / diag(0);
    for i in 1..n {
        let m = diag(i) - (-r) * c_prime[i - 1];
        c_prime[i] = -r / m;
        d_prime[i] = (rhs[i] - (-r) * d_prime[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    Field::new(g, x).map_err(|_| SimError::Solver("tridiagonal solve produced non-finite values".into()))
}

/// Matrix-vector product `(alpha I - beta L) x` for the 2D 5-point stencil.
fn apply(alpha: f64, beta: f64, x: &Field) -> Vec<f64> {
    let g = x.grid();
    let (nx, ny) = (g.n(0), g.n(1));
    let rx = beta / (g.h(0) * g.h(0));
    let ry = beta / (g.h(1) * g.h(1));
    let xv = x.values();
    let mut out = vec![0.0; xv.len()];
    for j in 0..ny {
        for i in 0..nx {
            let idx = g.index(i, j);
            let c = xv[idx];
            let mut acc = alpha * c;
            if i > 0 {
                acc -= rx * (xv[g.index(i - 1, j)] - c);
            }
            if i + 1 < nx {
                acc -= rx * (xv[g.index(i + 1, j)] - c);
            }
            if j > 0 {
                acc -= ry * (xv[g.index(i, j - 1)] - c);
            }
            if j + 1 < ny {
                acc -= ry * (xv[g.index(i, j + 1)] - c);
            }
            out[idx] = acc;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

fn solve_pcg(alpha: f64, beta: f64, b: &Field) -> Result<Field> {
    let g = b.grid().clone();
    let n = g.cell_count();
    let (nx, ny) = (g.n(0), g.n(1));
    let rx = beta / (g.h(0) * g.h(0));
    let ry = beta / (g.h(1) * g.h(1));
    let inv_diag: Vec<f64> = (0..n)
        .map(|idx| {
            let (i, j) = (idx % nx, idx / nx);
            let mut d = alpha;
            if i > 0 {
                d += rx;
            }
            if i + 1 < nx {
                d += rx;
            }
            if j > 0 {
                d += ry;
            }
            if j + 1 < ny {
                d += ry;
            }
            1.0 / d
        })
        .collect();

    let bv = b.values();
    let b_norm = dot(bv, bv).sqrt();
    if b_norm == 0.0 {
        return Ok(Field::constant(g, 0.0));
    }

    let mut x = Field::constant(g.clone(), 0.0);
    let mut r: Vec<f64> = bv.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    let max_iter = 20 * (nx + ny).max(100);
    for _ in 0..max_iter {
        let pf = Field::new(g.clone(), p.clone())
            .map_err(|_| SimError::Solver("cg direction became non-finite".into()))?;
        let ap = apply(alpha, beta, &pf);
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            return Err(SimError::Solver("cg lost positive definiteness".into()));
        }
        let step = rz / denom;
        for i in 0..n {
            x.values_mut()[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if dot(&r, &r).sqrt() <= SOLVE_TOL * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let dir = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + dir * p[i];
        }
    }
    Err(SimError::Solver(format!(
        "cg failed to reach relative residual {SOLVE_TOL} in {max_iter} iterations"
    )))
}
