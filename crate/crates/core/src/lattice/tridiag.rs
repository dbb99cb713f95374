//! Tridiagonal and cyclic tridiagonal solvers.

use crate::error::{BflError, Result};

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(BflError::Solver("tridiagonal bands have inconsistent lengths".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(BflError::Solver("zero pivot in tridiagonal solve".into()));
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i] = sup[i - 1] / pivot;
        pivot = diag[i] - sub[i] * c[i];
        if pivot == 0.0 {
            return Err(BflError::Solver(format!("zero pivot at row {i}")));
        }
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
    Ok(x)
}

/// Cyclic system: as [`solve_tridiagonal`] with the corner couplings
/// `sub[0]` (row 0, column n-1) and `sup[n-1]` (row n-1, column 0).
/// Sherman–Morrison on top of two Thomas solves.
pub fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(BflError::Solver("cyclic solve needs at least 3 unknowns".into()));
    }
    let top_right = sub[0];
    let bottom_left = sup[n - 1];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= bottom_left * top_right / gamma;
    let x = solve_tridiagonal(sub, &d, sup, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = bottom_left;
    let z = solve_tridiagonal(sub, &d, sup, &u)?;
    let fact = (x[0] + top_right * x[n - 1] / gamma) / (1.0 + z[0] + top_right * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}
