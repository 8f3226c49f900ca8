//! Tridiagonal solvers, plain and periodic.

use crate::error::{Error, Result};

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[m-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    if lower.len() != m || upper.len() != m || rhs.len() != m {
        return Err(Error::InvalidArgument("tridiagonal band lengths differ".into()));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..m {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Periodic tridiagonal system: `lower[0]` couples row 0 to `x[m-1]` and
/// `upper[m-1]` couples row `m-1` to `x[0]`. Sherman–Morrison on top of
/// [`solve_tridiagonal`]; requires `m >= 3`.
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "cyclic tridiagonal solve needs at least 3 rows, got {m}"
        )));
    }
    if lower.len() != m || upper.len() != m || rhs.len() != m {
        return Err(Error::InvalidArgument("tridiagonal band lengths differ".into()));
    }
    let alpha = upper[m - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[m - 1] -= alpha * beta / gamma;
    let y = solve_tridiagonal(lower, &b, upper, rhs)?;
    let mut u = vec![0.0; m];
    u[0] = gamma;
    u[m - 1] = alpha;
    let z = solve_tridiagonal(lower, &b, upper, &u)?;
    let denom = 1.0 + z[0] + beta * z[m - 1] / gamma;
    if denom == 0.0 {
        return Err(Error::Singular("cyclic correction denominator vanished".into()));
    }
    let fact = (y[0] + beta * y[m - 1] / gamma) / denom;
    Ok(y.iter().zip(&z).map(|(yi, zi)| yi - fact * zi).collect())
}

/// `y = A x` for the periodic tridiagonal matrix.
pub fn cyclic_matvec(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
    let m = diag.len();
    (0..m)
        .map(|i| {
            let prev = x[(i + m - 1) % m];
            let next = x[(i + 1) % m];
            lower[i] * prev + diag[i] * x[i] + upper[i] * next
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dense(lower: &[f64], diag: &[f64], upper: &[f64], periodic: bool) -> DMatrix<f64> {
        let m = diag.len();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = diag[i];
            if i > 0 {
                a[(i, i - 1)] = lower[i];
            } else if periodic {
                a[(0, m - 1)] = lower[0];
            }
            if i + 1 < m {
                a[(i, i + 1)] = upper[i];
            } else if periodic {
                a[(m - 1, 0)] = upper[m - 1];
            }
        }
        a
    }

    #[test]
    fn matches_dense_lu() {
        let m = 9;
        let lower: Vec<f64> = (0..m).map(|i| -1.0 + 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..m).map(|i| -0.7 - 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..m).map(|i| 3.0 + (i as f64).sin()).collect();
        let rhs: Vec<f64> = (0..m).map(|i| (i as f64 * 0.37).cos()).collect();
        for periodic in [false, true] {
            let x = if periodic {
                solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap()
            } else {
                solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap()
            };
            let a = dense(&lower, &diag, &upper, periodic);
            let x_ref = a.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
            for i in 0..m {
                assert!((x[i] - x_ref[i]).abs() < 1e-13, "periodic={periodic} row {i}");
            }
        }
    }

    #[test]
    fn cyclic_residual_is_small() {
        let m = 64;
        let lower = vec![-1.0; m];
        let upper = vec![-1.0; m];
        let diag = vec![2.5; m];
        let rhs: Vec<f64> = (0..m).map(|i| (i as f64).sqrt()).collect();
        let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let back = cyclic_matvec(&lower, &diag, &upper, &x);
        for i in 0..m {
            assert!((back[i] - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(solve_cyclic_tridiagonal(&[1.0; 2], &[3.0; 2], &[1.0; 2], &[1.0; 2]).is_err());
    }
}
