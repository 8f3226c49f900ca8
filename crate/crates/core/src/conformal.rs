//! The Lichnerowicz equation on a background of constant scalar curvature
//! `-n(n-1)`, for transverse-traceless data entering only through `|sigma|^2`:
//!
//! ```text
//!   -4(n-1)/(n-2) Lap u - n(n-1) u + (n-1)/n tau^2 u^((n+2)/(n-2))
//!       - u^((2-3n)/(n-2)) |sigma|^2 = 0
//! ```
//!
//! The physical metric is `u^(4/(n-2)) h`; with `sigma = 0` the solution is
//! the constant `(n^2/tau^2)^((n-2)/4)`.

use rayon::prelude::*;

use crate::banded::{cyclic_matvec, solve_cyclic_tridiagonal};
use crate::error::{Error, Result};
use crate::table::Table;

pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const MAX_BACKTRACKS: usize = 30;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_GRID_TOL: f64 = 1e-10;

pub const SWEEP_HEADER: [&str; 6] = ["tau", "sigma_sq", "u_min", "u_max", "ham", "bound_nn_vol"];

/// `(M, h)` with `R_h = -n(n-1)`, optionally sampled along a periodic
/// coordinate of length `length` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalBackground {
    pub dim: usize,
    pub volume: f64,
    pub grid: Option<(usize, f64)>,
}

impl ConformalBackground {
    pub fn new(dim: usize, volume: f64) -> Result<Self> {
        if !(3..=4).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::InvalidArgument(format!("volume must be positive, got {volume}")));
        }
        Ok(Self {
            dim,
            volume,
            grid: None,
        })
    }

    pub fn with_grid(mut self, points: usize, length: f64) -> Result<Self> {
        if points < 3 || !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid needs at least 3 points and a positive length".into(),
            ));
        }
        self.grid = Some((points, length));
        Ok(self)
    }

    pub fn scalar_curvature(&self) -> f64 {
        let n = self.dim as f64;
        -n * (n - 1.0)
    }

    pub fn points(&self) -> usize {
        self.grid.map_or(1, |(m, _)| m)
    }

    /// `u(h, 0, tau) = (n^2/tau^2)^((n-2)/4)`.
    pub fn umbilic_factor(&self, tau: f64) -> f64 {
        let n = self.dim as f64;
        (n * n / (tau * tau)).powf((n - 2.0) / 4.0)
    }

    /// `int f mu_h`, trapezoidal along the grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.volume * f.iter().sum::<f64>() / f.len() as f64
    }

    /// Bands of the periodic second-difference Laplacian.
    fn laplacian(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (m, len) = self.grid?;
        let h2 = (len / m as f64).powi(2);
        Some((vec![1.0 / h2; m], vec![-2.0 / h2; m], vec![1.0 / h2; m]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTData {
    pub sigma_sq: Vec<f64>,
}

impl TTData {
    pub fn constant(sigma_sq: f64) -> Result<Self> {
        Self::field(vec![sigma_sq])
    }

    pub fn field(sigma_sq: Vec<f64>) -> Result<Self> {
        if sigma_sq.is_empty() || sigma_sq.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("|sigma|^2 must be finite and nonnegative".into()));
        }
        Ok(Self { sigma_sq })
    }

    fn at(&self, j: usize) -> f64 {
        if self.sigma_sq.len() == 1 {
            self.sigma_sq[0]
        } else {
            self.sigma_sq[j]
        }
    }

    fn check(&self, bg: &ConformalBackground) -> Result<()> {
        let m = bg.points();
        if self.sigma_sq.len() != 1 && self.sigma_sq.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.sigma_sq.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LichSolution {
    pub u: Vec<f64>,
    pub tau: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Max-norm residual before each Newton step and after the last.
    pub residual_history: Vec<f64>,
}

impl LichSolution {
    pub fn u_min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn u_max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Exponents {
    diffusion: f64,
    curvature: f64,
    tau_coef: f64,
    p_tau: f64,
    p_sigma: f64,
}

fn exponents(bg: &ConformalBackground, tau: f64) -> Exponents {
    let n = bg.dim as f64;
    Exponents {
        diffusion: 4.0 * (n - 1.0) / (n - 2.0),
        curvature: bg.scalar_curvature(),
        tau_coef: (n - 1.0) / n * tau * tau,
        p_tau: (n + 2.0) / (n - 2.0),
        p_sigma: (2.0 - 3.0 * n) / (n - 2.0),
    }
}

fn validate(u: &[f64], bg: &ConformalBackground, tt: &TTData, tau: f64) -> Result<()> {
    if !(tau < 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be negative, got {tau}")));
    }
    if u.len() != bg.points() {
        return Err(Error::DimensionMismatch {
            expected: bg.points(),
            got: u.len(),
        });
    }
    if let Some(x) = u.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::InvalidArgument(format!("u must be positive, got {x}")));
    }
    tt.check(bg)
}

fn residual_unchecked(u: &[f64], bg: &ConformalBackground, tt: &TTData, tau: f64) -> Vec<f64> {
    let e = exponents(bg, tau);
    let lap = bg
        .laplacian()
        .map_or_else(|| vec![0.0; u.len()], |(l, d, up)| cyclic_matvec(&l, &d, &up, u));
    (0..u.len())
        .map(|j| {
            -e.diffusion * lap[j] + e.curvature * u[j] + e.tau_coef * u[j].powf(e.p_tau)
                - u[j].powf(e.p_sigma) * tt.at(j)
        })
        .collect()
}

/// Pointwise value of the Lichnerowicz expression.
pub fn lichnerowicz_residual(u: &[f64], bg: &ConformalBackground, tt: &TTData, tau: f64) -> Result<Vec<f64>> {
    validate(u, bg, tt, tau)?;
    Ok(residual_unchecked(u, bg, tt, tau))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Newton's method from `u(h, 0, tau)` with backtracking that halves the
/// step (up to 30 times) until `u` stays positive and the residual drops.
pub fn solve_lichnerowicz(bg: &ConformalBackground, tt: &TTData, tau: f64, tol: f64) -> Result<LichSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let m = bg.points();
    let mut u = vec![bg.umbilic_factor(tau); m];
    validate(&u, bg, tt, tau)?;
    let e = exponents(bg, tau);
    let mut f = residual_unchecked(&u, bg, tt, tau);
    let mut r = max_abs(&f);
    let mut history = vec![r];
    let mut it = 0;
    while r > tol {
        if it == MAX_NEWTON_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: r,
            });
        }
        it += 1;
        let jdiag: Vec<f64> = (0..m)
            .map(|j| {
                e.curvature + e.tau_coef * e.p_tau * u[j].powf(e.p_tau - 1.0)
                    - e.p_sigma * u[j].powf(e.p_sigma - 1.0) * tt.at(j)
            })
            .collect();
        let neg_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let delta = match bg.laplacian() {
            None => vec![neg_f[0] / jdiag[0]],
            Some((l, d, up)) => {
                let lower: Vec<f64> = l.iter().map(|x| -e.diffusion * x).collect();
                let upper: Vec<f64> = up.iter().map(|x| -e.diffusion * x).collect();
                let diag: Vec<f64> = d.iter().zip(&jdiag).map(|(x, q)| -e.diffusion * x + q).collect();
                solve_cyclic_tridiagonal(&lower, &diag, &upper, &neg_f)?
            }
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            if trial.iter().all(|x| *x > 0.0 && x.is_finite()) {
                let ft = residual_unchecked(&trial, bg, tt, tau);
                let rt = max_abs(&ft);
                if rt < r || rt <= tol {
                    u = trial;
                    f = ft;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: r,
            });
        }
        history.push(r);
    }
    Ok(LichSolution {
        u,
        tau,
        residual_norm: r,
        iterations: it,
        residual_history: history,
    })
}

/// `|tau|^n int u^(2n/(n-2)) mu_h`.
pub fn conformal_ham(sol: &LichSolution, bg: &ConformalBackground) -> f64 {
    let n = bg.dim as f64;
    let p = 2.0 * n / (n - 2.0);
    let f: Vec<f64> = sol.u.iter().map(|u| u.powf(p)).collect();
    sol.tau.abs().powf(n) * bg.integrate(&f)
}

/// `-((n-1)/n) (min Ham)^(2/n)`. From sampled data this is only an upper
/// bound on the infimum it estimates.
pub fn sigma_report(ham_values: &[f64], n: usize) -> Result<f64> {
    if ham_values.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if ham_values.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("Ham values must be positive".into()));
    }
    let nf = n as f64;
    let min = ham_values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(-(nf - 1.0) / nf * min.powf(2.0 / nf))
}

/// Solves every `(tau, |sigma|^2)` pair with constant data, rows in
/// `taus`-major order.
pub fn lichnerowicz_sweep(bg: &ConformalBackground, taus: &[f64], sigma_sq: &[f64], tol: f64) -> Result<Table> {
    let n = bg.dim as f64;
    let bound = n.powf(n) * bg.volume;
    let pairs: Vec<(f64, f64)> = taus
        .iter()
        .flat_map(|t| sigma_sq.iter().map(move |s| (*t, *s)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(tau, s)| {
            let tt = TTData::constant(s)?;
            let sol = solve_lichnerowicz(bg, &tt, tau, tol)?;
            Ok(vec![tau, s, sol.u_min(), sol.u_max(), conformal_ham(&sol, bg), bound])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&SWEEP_HEADER);
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (f(hi) > 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn residual_examples() {
        let bg = ConformalBackground::new(3, 1.0).unwrap();
        let zero = TTData::constant(0.0).unwrap();
        assert_eq!(lichnerowicz_residual(&[1.0], &bg, &zero, -3.0).unwrap(), vec![0.0]);
        let five = TTData::constant(5.0).unwrap();
        assert_eq!(lichnerowicz_residual(&[1.0], &bg, &five, -3.0).unwrap(), vec![-5.0]);
        for n in 3..=4 {
            let bg = ConformalBackground::new(n, 1.0).unwrap();
            for tau in [-0.3, -2.0, -7.0] {
                let u = bg.umbilic_factor(tau);
                let r = lichnerowicz_residual(&[u], &bg, &zero, tau).unwrap()[0];
                assert!(r.abs() < 1e-12, "n={n} tau={tau}: {r}");
            }
        }
        assert!(lichnerowicz_residual(&[0.0], &bg, &zero, -1.0).is_err());
        assert!(lichnerowicz_residual(&[-1.0], &bg, &zero, -1.0).is_err());
    }

    #[test]
    fn solve_examples() {
        let bg = ConformalBackground::new(3, 1.0).unwrap();
        let sol = solve_lichnerowicz(&bg, &TTData::constant(0.0).unwrap(), -3.0, 1e-12).unwrap();
        assert_eq!(sol.u, vec![1.0]);
        assert!(sol.iterations <= 1);

        let sol = solve_lichnerowicz(&bg, &TTData::constant(12.0).unwrap(), -3.0, 1e-12).unwrap();
        let root = bisect(1.0, 2.0, |u| 6.0 * u.powi(5) - 6.0 * u - 12.0 * u.powi(-7));
        assert!(root > 1.1 && root < 1.2);
        assert!((sol.u[0] - root).abs() < 1e-12);
        assert!(conformal_ham(&sol, &bg) > 27.0);

        let grid = bg.with_grid(64, 3.0).unwrap();
        let gs = solve_lichnerowicz(&grid, &TTData::constant(12.0).unwrap(), -3.0, 1e-10).unwrap();
        for u in &gs.u {
            assert!((u - root).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let bg = ConformalBackground::new(4, 1.0).unwrap();
        let sol = solve_lichnerowicz(&bg, &TTData::constant(40.0).unwrap(), -1.0, 1e-12).unwrap();
        let h = &sol.residual_history;
        assert!(h.len() >= 4);
        // once close, r_{k+1} / r_k^2 stays bounded
        for w in h.windows(2).skip(1) {
            if w[0] < 1e-2 && w[1] > 1e-12 {
                assert!(w[1] / (w[0] * w[0]) < 100.0, "{h:?}");
            }
        }
    }

    #[test]
    fn inhomogeneous_grid_solution() {
        let m = 128;
        let bg = ConformalBackground::new(3, 2.0).unwrap().with_grid(m, 2.0).unwrap();
        let s: Vec<f64> = (0..m)
            .map(|j| 3.0 + 2.0 * (2.0 * std::f64::consts::PI * j as f64 / m as f64).cos())
            .collect();
        let tt = TTData::field(s.clone()).unwrap();
        let tau = -2.0;
        let sol = solve_lichnerowicz(&bg, &tt, tau, 1e-10).unwrap();
        assert!(sol.u_min() >= bg.umbilic_factor(tau) - 1e-10);
        assert!(conformal_ham(&sol, &bg) >= 27.0 * 2.0);
        // pointwise larger data, pointwise larger solution
        let bigger = TTData::field(s.iter().map(|x| x + 1.0).collect()).unwrap();
        let sol2 = solve_lichnerowicz(&bg, &bigger, tau, 1e-10).unwrap();
        assert!(sol.u.iter().zip(&sol2.u).all(|(a, b)| b > a));
        // bracketed by the constant solutions at min and max data
        let lo = solve_lichnerowicz(&ConformalBackground::new(3, 2.0).unwrap(), &TTData::constant(1.0).unwrap(), tau, 1e-12).unwrap();
        let hi = solve_lichnerowicz(&ConformalBackground::new(3, 2.0).unwrap(), &TTData::constant(5.0).unwrap(), tau, 1e-12).unwrap();
        assert!(sol.u_min() >= lo.u[0] - 1e-10 && sol.u_max() <= hi.u[0] + 1e-10);
    }

    #[test]
    fn ham_examples() {
        for n in 3..=4 {
            let bg = ConformalBackground::new(n, 1.7).unwrap();
            let bound = (n as f64).powi(n as i32) * 1.7;
            for tau in [-0.5, -3.0] {
                let sol = solve_lichnerowicz(&bg, &TTData::constant(0.0).unwrap(), tau, 1e-12).unwrap();
                assert!((conformal_ham(&sol, &bg) - bound).abs() < 1e-12 * bound);
            }
        }
    }

    #[test]
    fn sigma_report_examples() {
        let v = 2.5f64;
        let r = sigma_report(&[27.0 * v], 3).unwrap();
        assert!((r + 2.0 / 3.0 * 9.0 * v.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((sigma_report(&[27.0], 3).unwrap() + 6.0).abs() < 1e-12);
        assert_eq!(sigma_report(&[64.0, 27.0, 100.0], 3).unwrap(), sigma_report(&[27.0], 3).unwrap());
        assert!(sigma_report(&[], 3).is_err());
    }

    #[test]
    fn sweep_is_ordered_and_bounded() {
        let bg = ConformalBackground::new(3, 1.0).unwrap();
        let t = lichnerowicz_sweep(&bg, &[-1.0, -2.0], &[0.0, 1.0, 4.0], 1e-12).unwrap();
        assert_eq!(t.header, SWEEP_HEADER);
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.rows[3][0], -2.0);
        assert_eq!(t.rows[3][1], 0.0);
        for r in &t.rows {
            assert!(r[4] >= r[5] * (1.0 - 1e-12));
        }
    }
}
