//! Rescaled volume of CMC surfaces under a shrinking translation cocycle.
//!
//! A strictly convex spacelike surface in 2+1 Minkowski space is the
//! envelope of its tangent planes, so it is determined by its support
//! function `p(y) = <X(y), y>` on the hyperboloid `H^2` (the Gauss image).
//! With `A = Hess p - p I` the surface point is `X = grad p - p y`, the area
//! element is `det A dA_H` and the mean curvature is `-tr A^-1`; the unit
//! hyperboloid is `p = -1`, `A = I`, `H = -2`.
//!
//! For holonomy `(f, t)` the surface is invariant iff
//! `p(f(g) y) = p(y) + <t_g, f(g) y>`. We write `p = -1 + w + q` where
//! `q(y) = <V(y), y>` with the equivariant section
//! `V(y) = sum_g chi(g^-1 y) t_g / sum_g chi(g^-1 y)` built from a bump
//! `chi`, and `w` is invariant. Since `Hess l = l g` for linear functions
//! `l`, `B = Hess q - q I` is invariant as well, and `H = -2` becomes
//!
//! ```text
//!   (Lap_H - 2) w = -tr B - 2 det(W + B),     W = Hess w - w I,
//! ```
//!
//! which is solved on a Poincare-disk grid covering the octagon; nodes just
//! outside the octagon take the value of `w` at their reduced point.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::holonomy::{
    disk_to_hyperboloid, enumerate_elements, hyperboloid_to_disk, scale_structure, BolzaOctagon, HolonomyRep,
};
use crate::lorentz::MinkVector;
use crate::table::Table;

pub const LIMIT_HEADER: [&str; 5] = ["lambda", "tau_mean", "volume", "ham_ratio", "residual"];

/// Mean curvature of the surfaces produced.
const TAU: f64 = -2.0;
const NEWTON_FLOOR: f64 = 0.5;
const MAX_RESTARTS: usize = 6;
const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConfig {
    /// Disk-coordinate grid step.
    pub spacing: f64,
    /// Width in nodes of the layer of reduced nodes around the octagon.
    pub band: usize,
    /// Support radius of the bump defining the equivariant section; must
    /// exceed the octagon circumradius.
    pub bump_radius: f64,
    /// Target max-norm residual of the discrete equation.
    pub tol: f64,
    pub max_sweeps: usize,
    /// SOR relaxation factor.
    pub omega: f64,
    /// Angular and radial Gauss points per octagon sector.
    pub quadrature: (usize, usize),
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            spacing: 0.02,
            band: 4,
            bump_radius: 2.8,
            tol: 1e-10,
            max_sweeps: 40_000,
            omega: 1.6,
            quadrature: (24, 24),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub lambda: f64,
    pub tau_mean: f64,
    pub volume: f64,
    /// `tau_mean^2 Vol / (4 * 4 pi)`.
    pub ham_ratio: f64,
    /// Max `|H - tau|` over the grid.
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl LimitRow {
    fn failed(lambda: f64, sweeps: usize, residual: f64) -> Self {
        Self {
            lambda,
            tau_mean: f64::NAN,
            volume: f64::NAN,
            ham_ratio: f64::NAN,
            residual,
            sweeps,
            converged: false,
        }
    }
}

pub fn limit_table(rows: &[LimitRow]) -> Table {
    let mut t = Table::new(&LIMIT_HEADER);
    for r in rows {
        t.push(vec![r.lambda, r.tau_mean, r.volume, r.ham_ratio, r.residual]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Unused,
    Interior,
    Ghost,
}

/// 4x4 cubic Lagrange stencil.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    nodes: [usize; 16],
    weights: [f64; 16],
}

fn lagrange(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

struct DiskGrid {
    m: usize,
    z0: f64,
    h: f64,
    kind: Vec<Kind>,
    interior: Vec<usize>,
    /// Nodes whose eight neighbours all carry values.
    evaluable: Vec<usize>,
    ghosts: Vec<(usize, Stencil)>,
    /// `(1 - |z|^2)^2 / 4` and `2 z / (1 - |z|^2)` per node.
    conf: Vec<f64>,
    drift: Vec<[f64; 2]>,
}

impl DiskGrid {
    fn new(oct: &BolzaOctagon, cfg: &LimitConfig) -> Result<Self> {
        let h = cfg.spacing;
        let rc = (0.5 * oct.circumradius()).tanh();
        let k = (rc / h).ceil() as usize + cfg.band + 3;
        let m = 2 * k + 1;
        let z0 = -(k as f64) * h;
        let mut g = Self {
            m,
            z0,
            h,
            kind: vec![Kind::Unused; m * m],
            interior: Vec::new(),
            evaluable: Vec::new(),
            ghosts: Vec::new(),
            conf: vec![0.0; m * m],
            drift: vec![[0.0; 2]; m * m],
        };
        for idx in 0..m * m {
            let z = g.point(idx);
            let d = 1.0 - z[0] * z[0] - z[1] * z[1];
            if d <= 0.0 {
                continue;
            }
            g.conf[idx] = 0.25 * d * d;
            g.drift[idx] = [2.0 * z[0] / d, 2.0 * z[1] / d];
            if oct.contains_disk(z) {
                g.kind[idx] = Kind::Interior;
                g.interior.push(idx);
            }
        }
        let b = cfg.band as isize;
        let mut ghost_ids = Vec::new();
        for idx in 0..m * m {
            if g.kind[idx] == Kind::Interior {
                continue;
            }
            let (i, j) = ((idx / m) as isize, (idx % m) as isize);
            let near = (-b..=b).any(|di| {
                (-b..=b).any(|dj| {
                    let (a, c) = (i + di, j + dj);
                    a >= 0 && c >= 0 && (a as usize) < m && (c as usize) < m && g.kind[a as usize * m + c as usize] == Kind::Interior
                })
            });
            if near {
                g.kind[idx] = Kind::Ghost;
                ghost_ids.push(idx);
            }
        }
        for idx in ghost_ids {
            let z = g.point(idx);
            if z[0] * z[0] + z[1] * z[1] >= 0.99 {
                return Err(Error::InvalidArgument("grid band leaves the disk; reduce spacing or band".into()));
            }
            let (reduced, _) = oct.reduce(&disk_to_hyperboloid(g.point(idx)))?;
            let st = g.stencil(hyperboloid_to_disk(&reduced))?;
            g.ghosts.push((idx, st));
        }
        let mi = m as isize;
        g.evaluable = (0..m * m)
            .filter(|&idx| {
                let (i, j) = ((idx / m) as isize, (idx % m) as isize);
                g.kind[idx] != Kind::Unused
                    && (-1..=1).all(|di| {
                        (-1..=1).all(|dj| {
                            let (a, c) = (i + di, j + dj);
                            a >= 0 && c >= 0 && a < mi && c < mi && g.kind[(a * mi + c) as usize] != Kind::Unused
                        })
                    })
            })
            .collect();
        Ok(g)
    }

    fn point(&self, idx: usize) -> [f64; 2] {
        [self.z0 + (idx / self.m) as f64 * self.h, self.z0 + (idx % self.m) as f64 * self.h]
    }

    fn stencil(&self, z: [f64; 2]) -> Result<Stencil> {
        let u = (z[0] - self.z0) / self.h;
        let v = (z[1] - self.z0) / self.h;
        let (iu, iv) = (u.floor() as isize, v.floor() as isize);
        let (wu, wv) = (lagrange(u - iu as f64), lagrange(v - iv as f64));
        let mut st = Stencil {
            nodes: [0; 16],
            weights: [0.0; 16],
        };
        for a in 0..4 {
            for b in 0..4 {
                let (i, j) = (iu - 1 + a as isize, iv - 1 + b as isize);
                let ok = i >= 0 && j >= 0 && (i as usize) < self.m && (j as usize) < self.m;
                let idx = if ok { i as usize * self.m + j as usize } else { 0 };
                if !ok || self.kind[idx] == Kind::Unused {
                    return Err(Error::InvalidArgument(format!(
                        "interpolation stencil at {z:?} leaves the grid band"
                    )));
                }
                st.nodes[a * 4 + b] = idx;
                st.weights[a * 4 + b] = wu[a] * wv[b];
            }
        }
        Ok(st)
    }

    fn interpolate(st: &Stencil, f: &[f64]) -> f64 {
        st.nodes.iter().zip(&st.weights).map(|(i, w)| w * f[*i]).sum()
    }

    /// Gives every reduced node the value at its reduced point; repeated
    /// because stencils near corners may themselves touch reduced nodes.
    fn fill_ghosts(&self, f: &mut [f64], passes: usize) {
        for _ in 0..passes {
            for (idx, st) in &self.ghosts {
                f[*idx] = Self::interpolate(st, f);
            }
        }
    }

    /// Mixed hyperbolic Hessian `g^-1 Hess f` at an interior node.
    fn hessian(&self, f: &[f64], idx: usize) -> [f64; 3] {
        let m = self.m;
        let h = self.h;
        let (e, w, n, s) = (f[idx + m], f[idx - m], f[idx + 1], f[idx - 1]);
        let fx = (e - w) / (2.0 * h);
        let fy = (n - s) / (2.0 * h);
        let fxx = (e - 2.0 * f[idx] + w) / (h * h);
        let fyy = (n - 2.0 * f[idx] + s) / (h * h);
        let fxy = (f[idx + m + 1] - f[idx + m - 1] - f[idx - m + 1] + f[idx - m - 1]) / (4.0 * h * h);
        let [lx, ly] = self.drift[idx];
        let ldf = lx * fx + ly * fy;
        let c = self.conf[idx];
        // Hess_ij = f_ij - (L_j f_i + L_i f_j - delta_ij L.df)
        let hxx = fxx - (2.0 * lx * fx - ldf);
        let hyy = fyy - (2.0 * ly * fy - ldf);
        let hxy = fxy - (ly * fx + lx * fy);
        [c * hxx, c * hxy, c * hyy]
    }
}

fn bump(d: f64, radius: f64) -> f64 {
    let x = d / radius;
    if x >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

struct Solved {
    det: Vec<f64>,
    mean_curvature: Vec<f64>,
    residual: f64,
    sweeps: usize,
    converged: bool,
}

fn solve_support(grid: &DiskGrid, b: &[[f64; 3]], cfg: &LimitConfig) -> Solved {
    let nn = grid.m * grid.m;
    let h2 = grid.h * grid.h;
    // F(w) = (Lap - 2) w + tr B + 2 det(W + B) at one node and its
    // derivative in the node value, -(4a + 2)(1 + tr(W + B)); the factor is
    // floored since the linearization can degenerate far from the solution
    let local = |w: &[f64], idx: usize| -> (f64, f64) {
        let [hxx, hxy, hyy] = grid.hessian(w, idx);
        let (mxx, mxy, myy) = (hxx - w[idx] + b[idx][0], hxy + b[idx][1], hyy - w[idx] + b[idx][2]);
        let f = hxx + hyy - 2.0 * w[idx] + b[idx][0] + b[idx][2] + 2.0 * (mxx * myy - mxy * mxy);
        (f, -(4.0 * grid.conf[idx] / h2 + 2.0) * (1.0 + mxx + myy).max(NEWTON_FLOOR))
    };
    let mut omega = cfg.omega;
    let mut w = vec![0.0; nn];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    'attempt: for _ in 0..MAX_RESTARTS {
        w.iter_mut().for_each(|v| *v = 0.0);
        let mut first = None;
        while sweeps < cfg.max_sweeps {
            residual = 0.0;
            for &idx in &grid.interior {
                residual = f64::max(residual, local(&w, idx).0.abs());
            }
            // the reduced nodes form a linear system of their own near the
            // vertex cycle; it has to be consistent as well
            for (idx, st) in &grid.ghosts {
                residual = f64::max(residual, (w[*idx] - DiskGrid::interpolate(st, &w)).abs());
            }
            let start = *first.get_or_insert(residual);
            if !residual.is_finite() || residual > DIVERGENCE_FACTOR * start {
                // back off towards (and below) plain Gauss-Seidel
                omega = if omega > 1.05 { 1.0 + 0.5 * (omega - 1.0) } else { 0.75 * omega };
                continue 'attempt;
            }
            if residual <= cfg.tol {
                break 'attempt;
            }
            for &idx in &grid.interior {
                let (f, df) = local(&w, idx);
                w[idx] -= omega * f / df;
            }
            grid.fill_ghosts(&mut w, 4);
            sweeps += 1;
        }
        break;
    }
    let converged = residual <= cfg.tol;
    let mut det = vec![0.0; nn];
    let mut mean_curvature = vec![0.0; nn];
    let mut h_res = 0.0f64;
    // values are invariant, so reduced nodes next to the octagon are
    // evaluated in place; quadrature stencils never reach further out
    for &idx in &grid.evaluable {
        let [hxx, hxy, hyy] = grid.hessian(&w, idx);
        let axx = 1.0 + hxx - w[idx] + b[idx][0];
        let axy = hxy + b[idx][1];
        let ayy = 1.0 + hyy - w[idx] + b[idx][2];
        let d = axx * ayy - axy * axy;
        det[idx] = d;
        mean_curvature[idx] = -(axx + ayy) / d;
        if grid.kind[idx] == Kind::Interior {
            h_res = h_res.max((mean_curvature[idx] - TAU).abs());
            if !(d > 0.0) || axx <= 0.0 {
                h_res = f64::INFINITY;
            }
        }
    }
    Solved {
        det,
        mean_curvature,
        residual: h_res,
        sweeps,
        converged: converged && h_res.is_finite(),
    }
}

/// For each `lambda`, scales the cocycle by `lambda^-2`, solves for the
/// invariant CMC surface with `tau = -2` and reports its rescaled volume
/// relative to the hyperbolic value `4 * Vol(H^2 / Gamma) = 16 pi`.
/// A solve that fails to converge yields a row of NaNs (residual kept).
pub fn limit_experiment(rep: &HolonomyRep, lambdas: &[f64], cfg: &LimitConfig) -> Result<Vec<LimitRow>> {
    if rep.presentation.dim() != 2 || rep.presentation.generator_count() != 8 {
        return Err(Error::InvalidArgument("the limit experiment needs the genus-two octagon group".into()));
    }
    let oct = BolzaOctagon::new();
    if cfg.bump_radius <= oct.circumradius() {
        return Err(Error::InvalidArgument(format!(
            "bump radius {} must exceed the circumradius {}",
            cfg.bump_radius,
            oct.circumradius()
        )));
    }
    let grid = DiskGrid::new(&oct, cfg)?;
    let reach = grid
        .kind
        .iter()
        .enumerate()
        .filter(|(_, k)| **k != Kind::Unused)
        .map(|(i, _)| {
            let z = grid.point(i);
            2.0 * (z[0] * z[0] + z[1] * z[1]).sqrt().atanh()
        })
        .fold(0.0, f64::max);
    let elements = enumerate_elements(rep, reach + cfg.bump_radius, oct.circumradius())?;
    let origin = MinkVector::basis(2, 0);
    let orbit: Vec<MinkVector> = elements
        .iter()
        .map(|e| e.isometry.linear.apply(&origin))
        .collect::<Result<_>>()?;
    // section weights do not depend on lambda
    let used: Vec<usize> = (0..grid.m * grid.m).filter(|i| grid.kind[*i] != Kind::Unused).collect();
    let weights: Vec<Vec<(usize, f64)>> = used
        .iter()
        .map(|&idx| {
            let y = disk_to_hyperboloid(grid.point(idx));
            orbit
                .iter()
                .enumerate()
                .filter_map(|(e, o)| {
                    let c = (-o.inner(&y).expect("dimension 3")).max(1.0);
                    let chi = bump(c.acosh(), cfg.bump_radius);
                    (chi > 0.0).then_some((e, chi))
                })
                .collect()
        })
        .collect();
    if weights.iter().any(|w| w.is_empty()) {
        return Err(Error::InvalidArgument("bump partition does not cover the grid".into()));
    }
    let quad = oct.quadrature(cfg.quadrature.0, cfg.quadrature.1);
    let stencils: Vec<Stencil> = quad.points.iter().map(|p| grid.stencil(*p)).collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let scaled = scale_structure(rep, lambda.powi(-2))?;
        let translations: Vec<MinkVector> = elements
            .iter()
            .map(|e| Ok(scaled.evaluate(&e.word)?.translation))
            .collect::<Result<_>>()?;
        let mut q = vec![0.0; grid.m * grid.m];
        for (slot, &idx) in used.iter().enumerate() {
            let y = disk_to_hyperboloid(grid.point(idx));
            let total: f64 = weights[slot].iter().map(|(_, c)| c).sum();
            let mut v = [0.0; 3];
            for (e, c) in &weights[slot] {
                for (a, t) in v.iter_mut().zip(translations[*e].components()) {
                    *a += c * t / total;
                }
            }
            let yc = y.components();
            q[idx] = -v[0] * yc[0] + v[1] * yc[1] + v[2] * yc[2];
        }
        let mut b = vec![[0.0; 3]; grid.m * grid.m];
        for &idx in &grid.evaluable {
            let [hxx, hxy, hyy] = grid.hessian(&q, idx);
            b[idx] = [hxx - q[idx], hxy, hyy - q[idx]];
        }
        let s = solve_support(&grid, &b, cfg);
        if !s.converged {
            rows.push(LimitRow::failed(lambda, s.sweeps, s.residual));
            continue;
        }
        let volume: f64 = stencils
            .iter()
            .zip(&quad.weights)
            .map(|(st, wt)| wt * DiskGrid::interpolate(st, &s.det))
            .sum();
        let h_int: f64 = stencils
            .iter()
            .zip(&quad.weights)
            .map(|(st, wt)| {
                let d = DiskGrid::interpolate(st, &s.det);
                wt * d * DiskGrid::interpolate(st, &s.mean_curvature)
            })
            .sum();
        let tau_mean = h_int / volume;
        rows.push(LimitRow {
            lambda,
            tau_mean,
            volume,
            ham_ratio: tau_mean * tau_mean * volume / (16.0 * PI),
            residual: s.residual,
            sweeps: s.sweeps,
            converged: true,
        });
    }
    Ok(rows)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonomy::{bolza_generators, coboundary_cocycle, cohomology_basis, Cocycle};

    fn rep(c: impl FnOnce(&crate::holonomy::GroupPresentation) -> Cocycle) -> HolonomyRep {
        let p = bolza_generators();
        let coc = c(&p);
        HolonomyRep::new(p, coc).unwrap()
    }

    #[test]
    fn zero_cocycle_is_the_hyperboloid() {
        let r = rep(Cocycle::zero);
        let rows = limit_experiment(&r, &[1.0, 3.0], &LimitConfig::default()).unwrap();
        for row in rows {
            assert!(row.converged);
            assert_eq!(row.sweeps, 0);
            assert!((row.ham_ratio - 1.0).abs() < 1e-8, "{row:?}");
            assert!((row.volume - 4.0 * PI).abs() < 1e-7);
        }
    }

    #[test]
    fn coboundary_matches_within_discretization() {
        let v = MinkVector::new(vec![0.01, 0.005, -0.005]).unwrap();
        let r = rep(|p| coboundary_cocycle(p, &v).unwrap());
        let rows = limit_experiment(&r, &[1.0, 2.0], &LimitConfig::default()).unwrap();
        for row in &rows {
            assert!(row.converged);
            assert!((row.ham_ratio - 1.0).abs() < 1e-4, "{row:?}");
        }
    }

    #[test]
    fn coboundary_error_shrinks_under_refinement() {
        let v = MinkVector::new(vec![0.01, 0.005, -0.005]).unwrap();
        let r = rep(|p| coboundary_cocycle(p, &v).unwrap());
        let dev = |h: f64| {
            let cfg = LimitConfig { spacing: h, tol: 1e-9, ..Default::default() };
            let row = limit_experiment(&r, &[4.0], &cfg).unwrap()[0];
            assert!(row.converged);
            (row.ham_ratio - 1.0).abs()
        };
        assert!(dev(0.0125) < 0.25 * dev(0.025));
    }

    #[test]
    fn deviation_is_quadratic_in_the_cocycle() {
        // Vol - 4 pi = -int det(W + B) with W, B linear in the cocycle to
        // leading order, and the cocycle scales with lambda^-2
        let r = rep(|p| cohomology_basis(p).unwrap()[0].scale(0.1));
        let rows = limit_experiment(&r, &[2.0, 4.0], &LimitConfig::default()).unwrap();
        let (a, b) = (rows[0].ham_ratio - 1.0, rows[1].ham_ratio - 1.0);
        assert!(a > 0.0 && b > 0.0);
        assert!((a / b / 16.0 - 1.0).abs() < 0.05, "{}", a / b);
    }

    #[test]
    fn failed_solves_are_marked() {
        let r = rep(|p| cohomology_basis(p).unwrap()[0].scale(5.0));
        let cfg = LimitConfig { max_sweeps: 200, ..Default::default() };
        let rows = limit_experiment(&r, &[1.0], &cfg).unwrap();
        assert!(!rows[0].converged);
        assert!(rows[0].ham_ratio.is_nan());
        let t = limit_table(&rows);
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn rejects_small_bump() {
        let r = rep(Cocycle::zero);
        let cfg = LimitConfig { bump_radius: 1.0, ..Default::default() };
        assert!(limit_experiment(&r, &[1.0], &cfg).is_err());
    }
}
