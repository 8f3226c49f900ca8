//! CMC-time flow of flat data in zero-shift gauge, reduced to products of
//! constant-curvature blocks.
//!
//! Each block `i` has dimension `d_i`, a model metric `g_i` of curvature
//! `kappa_i in {-1, 0}` and carries `A_i g_i` (the scale field `A_i = a_i^2`)
//! and the covariant second fundamental form `k_i g_i`. Fields are either
//! constants or samples on a periodic grid along one flat circle block.
//!
//! With `t = tr K` the evolution is
//!
//! ```text
//!   d/dt A_i = -2 N k_i,     d/dt k_i = -A_i Hess_i N - N k_i^2 / A_i,
//!   -Lap N + |K|^2 N = 1,
//! ```
//!
//! integrated with classical RK4 in the variables `(A_i, p_i = k_i / A_i)`;
//! the trace of `dp/dt` is `-Lap N + |K|^2 N = 1`, so the CMC gauge is a
//! linear invariant of every stage and survives the RK4 combination.

use crate::banded::solve_cyclic_tridiagonal;
use crate::error::{Error, Result};
use crate::table::Table;

/// `|tr K - tau|` above which a step is retried at half size.
pub const GAUGE_TOL: f64 = 1e-9;
/// Maximum number of halvings of a single step.
pub const MAX_HALVINGS: u32 = 20;
/// Default periodic grid size of the 1-D mode.
pub const DEFAULT_GRID_POINTS: usize = 256;

pub const TRACE_HEADER: [&str; 8] = [
    "tau",
    "volume",
    "ham",
    "n_khat2_integral",
    "gauss_residual",
    "codazzi_residual",
    "lapse_min",
    "lapse_max",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Hyperbolic,
    Flat,
}

impl Curvature {
    pub fn kappa(self) -> f64 {
        match self {
            Curvature::Hyperbolic => -1.0,
            Curvature::Flat => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub dim: usize,
    pub curvature: Curvature,
}

impl Block {
    pub fn hyperbolic(dim: usize) -> Self {
        Self {
            dim,
            curvature: Curvature::Hyperbolic,
        }
    }

    pub fn flat(dim: usize) -> Self {
        Self {
            dim,
            curvature: Curvature::Flat,
        }
    }
}

/// Periodic grid of `points` nodes on the flat circle block `block`, whose
/// model metric is `dx^2` on `[0, length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub block: usize,
    pub points: usize,
    pub length: f64,
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }
}

/// Block decomposition of `M`. `volume_factor` is the model volume of all
/// blocks not carried by the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGeometry {
    pub blocks: Vec<Block>,
    pub volume_factor: f64,
    pub grid: Option<Grid>,
}

impl BlockGeometry {
    pub fn new(blocks: Vec<Block>, volume_factor: f64, grid: Option<Grid>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(|b| b.dim == 0) {
            return Err(Error::InvalidArgument("blocks must have positive dimension".into()));
        }
        let n: usize = blocks.iter().map(|b| b.dim).sum();
        if !(2..=4).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if !(volume_factor > 0.0 && volume_factor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "volume_factor must be positive, got {volume_factor}"
            )));
        }
        if let Some(g) = grid {
            let ok = g.block < blocks.len()
                && blocks[g.block] == Block::flat(1)
                && g.points >= 3
                && g.length > 0.0
                && g.length.is_finite();
            if !ok {
                return Err(Error::InvalidArgument(
                    "the grid must sit on a one-dimensional flat block, with at least 3 points and positive length".into(),
                ));
            }
        }
        Ok(Self {
            blocks,
            volume_factor,
            grid,
        })
    }

    pub fn homogeneous(blocks: Vec<Block>, volume_factor: f64) -> Result<Self> {
        Self::new(blocks, volume_factor, None)
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// Number of samples per field (1 when homogeneous).
    pub fn points(&self) -> usize {
        self.grid.map_or(1, |g| g.points)
    }

    /// Quadrature weight of one node: `h` on the grid, otherwise 1, times
    /// `volume_factor`.
    fn node_weight(&self) -> f64 {
        self.grid.map_or(1.0, |g| g.spacing()) * self.volume_factor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub geometry: BlockGeometry,
    /// `A_i` per block, one sample per node.
    pub g_blocks: Vec<Vec<f64>>,
    /// Covariant `k_i` per block.
    pub k_blocks: Vec<Vec<f64>>,
    pub tau: f64,
    pub lapse: Vec<f64>,
}

fn check_fields(geometry: &BlockGeometry, g: &[Vec<f64>], k: &[Vec<f64>]) -> Result<()> {
    let nb = geometry.blocks.len();
    let m = geometry.points();
    if g.len() != nb || k.len() != nb {
        return Err(Error::DimensionMismatch {
            expected: nb,
            got: g.len().min(k.len()),
        });
    }
    for f in g.iter().chain(k) {
        if f.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: f.len(),
            });
        }
    }
    Ok(())
}

impl FlowState {
    /// Validates the fields and solves the lapse equation.
    pub fn new(geometry: BlockGeometry, g_blocks: Vec<Vec<f64>>, k_blocks: Vec<Vec<f64>>, tau: f64) -> Result<Self> {
        check_fields(&geometry, &g_blocks, &k_blocks)?;
        if let Some(bad) = g_blocks.iter().flatten().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Degenerate {
                tau,
                what: format!("non-positive metric scale {bad}"),
            });
        }
        let mut s = Self {
            geometry,
            g_blocks,
            k_blocks,
            tau,
            lapse: Vec::new(),
        };
        s.lapse = solve_lapse(&s)?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn points(&self) -> usize {
        self.geometry.points()
    }

    /// Mixed eigenvalue `p_i = k_i / A_i` of block `i` at node `j`.
    pub fn mixed(&self, i: usize, j: usize) -> f64 {
        self.k_blocks[i][j] / self.g_blocks[i][j]
    }

    pub fn trace_k(&self) -> Vec<f64> {
        (0..self.points())
            .map(|j| {
                self.geometry
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.dim as f64 * self.mixed(i, j))
                    .sum()
            })
            .collect()
    }

    pub fn k_norm_sq(&self) -> Vec<f64> {
        k_norm_sq(&self.geometry, &self.g_blocks, &self.k_blocks)
    }

    /// `max |tr K - tau|`.
    pub fn gauge_defect(&self) -> f64 {
        self.trace_k()
            .iter()
            .map(|t| (t - self.tau).abs())
            .fold(0.0, f64::max)
    }

    /// Volume density `mu` per node (including `sqrt(A)` of the grid block).
    pub fn density(&self) -> Vec<f64> {
        density(&self.geometry, &self.g_blocks)
    }

    pub fn volume(&self) -> f64 {
        self.integrate(&vec![1.0; self.points()])
    }

    /// `int f mu` over `M`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mu = self.density();
        f.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>() * self.geometry.node_weight()
    }

    /// `|tau|^n Vol`.
    pub fn ham(&self) -> f64 {
        self.tau.abs().powi(self.dim() as i32) * self.volume()
    }

    /// `|K-hat|^2 = |K|^2 - (tr K)^2 / n` per node.
    pub fn khat_norm_sq(&self) -> Vec<f64> {
        let n = self.dim() as f64;
        self.k_norm_sq()
            .iter()
            .zip(self.trace_k())
            .map(|(k2, t)| (k2 - t * t / n).max(0.0))
            .collect()
    }

    /// `int N |K-hat|^2 mu`.
    pub fn n_khat2_integral(&self) -> f64 {
        let f: Vec<f64> = self.lapse.iter().zip(self.khat_norm_sq()).map(|(n, k)| n * k).collect();
        self.integrate(&f)
    }

    /// Replaces the lapse without solving (diagnostics only).
    pub fn with_lapse(mut self, lapse: Vec<f64>) -> Result<Self> {
        if lapse.len() != self.points() {
            return Err(Error::DimensionMismatch {
                expected: self.points(),
                got: lapse.len(),
            });
        }
        self.lapse = lapse;
        Ok(self)
    }
}

fn k_norm_sq(geometry: &BlockGeometry, g: &[Vec<f64>], k: &[Vec<f64>]) -> Vec<f64> {
    (0..geometry.points())
        .map(|j| {
            geometry
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let p = k[i][j] / g[i][j];
                    b.dim as f64 * p * p
                })
                .sum()
        })
        .collect()
}

fn density(geometry: &BlockGeometry, g: &[Vec<f64>]) -> Vec<f64> {
    (0..geometry.points())
        .map(|j| {
            geometry
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| g[i][j].powf(0.5 * b.dim as f64))
                .product()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Lapse

/// Conservative periodic Laplacian `Lap f = (1/mu) d_x (mu / A_x d_x f)` as
/// bands `(lower, diag, upper)`.
struct Laplacian {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Laplacian {
    fn new(geometry: &BlockGeometry, g: &[Vec<f64>]) -> Option<Self> {
        let grid = geometry.grid?;
        let m = grid.points;
        let h2 = grid.spacing().powi(2);
        let mu = density(geometry, g);
        let ax = &g[grid.block];
        let c: Vec<f64> = (0..m).map(|j| mu[j] / ax[j]).collect();
        // w[j] sits at j + 1/2
        let w: Vec<f64> = (0..m).map(|j| 0.5 * (c[j] + c[(j + 1) % m])).collect();
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for j in 0..m {
            let wl = w[(j + m - 1) % m];
            let wr = w[j];
            let s = 1.0 / (mu[j] * h2);
            lower[j] = wl * s;
            upper[j] = wr * s;
            diag[j] = -(wl + wr) * s;
        }
        Some(Self { lower, diag, upper })
    }

    /// Flux form, so constants are annihilated exactly.
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let m = f.len();
        (0..m)
            .map(|j| {
                let (l, r) = (f[(j + m - 1) % m], f[(j + 1) % m]);
                self.lower[j] * (l - f[j]) + self.upper[j] * (r - f[j])
            })
            .collect()
    }
}

fn lapse_for(geometry: &BlockGeometry, g: &[Vec<f64>], k: &[Vec<f64>], tau: f64) -> Result<Vec<f64>> {
    let k2 = k_norm_sq(geometry, g, k);
    if let Some((node, v)) = k2.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::DegenerateLapse { tau, node, k2: *v });
    }
    match Laplacian::new(geometry, g) {
        None => Ok(vec![1.0 / k2[0]]),
        Some(lap) => {
            let lower: Vec<f64> = lap.lower.iter().map(|x| -x).collect();
            let upper: Vec<f64> = lap.upper.iter().map(|x| -x).collect();
            let diag: Vec<f64> = lap.diag.iter().zip(&k2).map(|(d, q)| q - d).collect();
            let mut lapse = solve_cyclic_tridiagonal(&lower, &diag, &upper, &vec![1.0; k2.len()])?;
            // iterative refinement: the cyclic elimination loses a few digits
            // once |K|^2 is small against the stiffness
            let residual = |x: &[f64]| -> Vec<f64> {
                let lx = lap.apply(x);
                (0..x.len()).map(|j| 1.0 + lx[j] - k2[j] * x[j]).collect()
            };
            let size = |r: &[f64]| r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let mut r = residual(&lapse);
            for _ in 0..3 {
                let dx = solve_cyclic_tridiagonal(&lower, &diag, &upper, &r)?;
                let cand: Vec<f64> = lapse.iter().zip(&dx).map(|(x, d)| x + d).collect();
                let rc = residual(&cand);
                if !(size(&rc) < size(&r)) {
                    break;
                }
                lapse = cand;
                r = rc;
            }
            Ok(lapse)
        }
    }
}

/// Solves `-Lap N + |K|^2 N = 1`: algebraically when homogeneous, by a
/// periodic tridiagonal solve on the grid.
pub fn solve_lapse(state: &FlowState) -> Result<Vec<f64>> {
    lapse_for(&state.geometry, &state.g_blocks, &state.k_blocks, state.tau)
}

/// `max |-Lap N + |K|^2 N - 1|` for the state's current lapse.
pub fn lapse_residual(state: &FlowState) -> f64 {
    let k2 = state.k_norm_sq();
    let lap = Laplacian::new(&state.geometry, &state.g_blocks)
        .map_or_else(|| vec![0.0; state.points()], |l| l.apply(&state.lapse));
    state
        .lapse
        .iter()
        .zip(&k2)
        .zip(&lap)
        .map(|((n, q), l)| (-l + q * n - 1.0).abs())
        .fold(0.0, f64::max)
}

/// `|int (1 - N tau^2 / n) mu - int N |K-hat|^2 mu|`, which vanishes when
/// the lapse equation holds.
pub fn lapse_identity_check(state: &FlowState) -> f64 {
    let n = state.dim() as f64;
    let t2 = state.tau * state.tau;
    let lhs_f: Vec<f64> = state.lapse.iter().map(|nn| 1.0 - nn * t2 / n).collect();
    (state.integrate(&lhs_f) - state.n_khat2_integral()).abs()
}

// ---------------------------------------------------------------------------
// Constraints

/// Central first difference on the periodic grid.
fn d1(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    (0..m).map(|j| (f[(j + 1) % m] - f[(j + m - 1) % m]) / (2.0 * h)).collect()
}

/// Mixed Ricci eigenvalue per block and node, and the Codazzi defect.
struct Curvatures {
    ricci: Vec<Vec<f64>>,
    codazzi: f64,
}

fn curvatures(geometry: &BlockGeometry, g: &[Vec<f64>], k: &[Vec<f64>]) -> Curvatures {
    let m = geometry.points();
    let nb = geometry.blocks.len();
    let Some(grid) = geometry.grid else {
        let ricci = geometry
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| vec![(b.dim as f64 - 1.0) * b.curvature.kappa() / g[i][0]])
            .collect();
        return Curvatures { ricci, codazzi: 0.0 };
    };
    // Multiply-warped product ds^2 + sum b_i^2 g_i with s the arc length.
    let h = grid.spacing();
    let sg: Vec<f64> = g[grid.block].iter().map(|a| a.sqrt()).collect();
    let per_s = |f: Vec<f64>| -> Vec<f64> { f.iter().zip(&sg).map(|(x, s)| x / s).collect() };
    let fibers: Vec<usize> = (0..nb).filter(|i| *i != grid.block).collect();
    let b: Vec<Vec<f64>> = g.iter().map(|a| a.iter().map(|x| x.sqrt()).collect()).collect();
    let mut bs = vec![vec![0.0; m]; nb];
    let mut bss = vec![vec![0.0; m]; nb];
    for &i in &fibers {
        bs[i] = per_s(d1(&b[i], h));
        bss[i] = per_s(d1(&bs[i], h));
    }
    let p = |i: usize| -> Vec<f64> { k[i].iter().zip(&g[i]).map(|(kk, a)| kk / a).collect() };
    let ps = p(grid.block);
    let mut ricci = vec![vec![0.0; m]; nb];
    let mut codazzi = 0.0f64;
    for j in 0..m {
        ricci[grid.block][j] = -fibers
            .iter()
            .map(|&i| geometry.blocks[i].dim as f64 * bss[i][j] / b[i][j])
            .sum::<f64>();
    }
    for &i in &fibers {
        let d = geometry.blocks[i].dim as f64;
        let kappa = geometry.blocks[i].curvature.kappa();
        let pi = p(i);
        let pis = per_s(d1(&pi, h));
        for j in 0..m {
            let others: f64 = fibers
                .iter()
                .filter(|&&l| l != i)
                .map(|&l| geometry.blocks[l].dim as f64 * bs[l][j] / b[l][j])
                .sum();
            let (bb, b1, b2) = (b[i][j], bs[i][j], bss[i][j]);
            ricci[i][j] = ((d - 1.0) * kappa - bb * b2 - (d - 1.0) * b1 * b1 - bb * b1 * others) / (bb * bb);
            codazzi = codazzi.max((pis[j] - b1 / bb * (ps[j] - pi[j])).abs());
        }
    }
    Curvatures { ricci, codazzi }
}

/// Max-norm residuals of the flat Gauss equation
/// `Ric - K K + tr K K = 0` (mixed, per block) and of the Codazzi equation.
pub fn flat_constraint_residual(state: &FlowState) -> (f64, f64) {
    let c = curvatures(&state.geometry, &state.g_blocks, &state.k_blocks);
    let tr = state.trace_k();
    let mut gauss = 0.0f64;
    for (i, ric) in c.ricci.iter().enumerate() {
        for j in 0..state.points() {
            let p = state.mixed(i, j);
            gauss = gauss.max((ric[j] - p * p + tr[j] * p).abs());
        }
    }
    (gauss, c.codazzi)
}

/// Max-norm residuals of `R - |K|^2 + (tr K)^2 = 0` and of the momentum
/// constraint `d tr K - div K = 0`.
pub fn vacuum_constraint_residual(state: &FlowState) -> (f64, f64) {
    let c = curvatures(&state.geometry, &state.g_blocks, &state.k_blocks);
    let tr = state.trace_k();
    let k2 = state.k_norm_sq();
    let mut scalar = 0.0f64;
    for j in 0..state.points() {
        let r: f64 = state
            .geometry
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| b.dim as f64 * c.ricci[i][j])
            .sum();
        scalar = scalar.max((r - k2[j] + tr[j] * tr[j]).abs());
    }
    let momentum = match state.geometry.grid {
        None => 0.0,
        Some(grid) => {
            // s-component: sum_i d_i (p_i' - (b_i'/b_i)(p_s - p_i))
            let h = grid.spacing();
            let m = grid.points;
            let sg: Vec<f64> = state.g_blocks[grid.block].iter().map(|a| a.sqrt()).collect();
            let mut total = vec![0.0; m];
            for (i, blk) in state.geometry.blocks.iter().enumerate() {
                if i == grid.block {
                    continue;
                }
                let pi: Vec<f64> = (0..m).map(|j| state.mixed(i, j)).collect();
                let b: Vec<f64> = state.g_blocks[i].iter().map(|a| a.sqrt()).collect();
                let dp = d1(&pi, h);
                let db = d1(&b, h);
                for j in 0..m {
                    let ps = state.mixed(grid.block, j);
                    total[j] += blk.dim as f64 * (dp[j] - db[j] / b[j] * (ps - pi[j])) / sg[j];
                }
            }
            total.iter().fold(0.0f64, |a, x| a.max(x.abs()))
        }
    };
    (scalar, momentum)
}

/// `|Ric|^2_g = sum_i d_i Ric_i^2`, maximized over nodes.
pub fn ricci_norm_sq(state: &FlowState) -> f64 {
    let c = curvatures(&state.geometry, &state.g_blocks, &state.k_blocks);
    (0..state.points())
        .map(|j| {
            state
                .geometry
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| b.dim as f64 * c.ricci[i][j].powi(2))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Frozen bound `C_n` in `|Ric|^2_g <= C_n tau^4`, the larger of the cone
/// value `(n-1)^2/n^3` and the Kasner value `(n-2)^2/(n-1)^3`.
pub fn ricci_proxy_constant(n: usize) -> f64 {
    match n {
        2 => 0.125,
        3 => 4.0 / 27.0,
        4 => 4.0 / 27.0,
        _ => f64::NAN,
    }
}

// ---------------------------------------------------------------------------
// Stepping

/// Right-hand side in `(A, p)` variables.
fn rhs(geometry: &BlockGeometry, a: &[Vec<f64>], p: &[Vec<f64>], tau: f64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let m = geometry.points();
    let k: Vec<Vec<f64>> = a
        .iter()
        .zip(p)
        .map(|(aa, pp)| aa.iter().zip(pp).map(|(x, y)| x * y).collect())
        .collect();
    let lapse = lapse_for(geometry, a, &k, tau)?;
    let mut hess = vec![vec![0.0; m]; geometry.blocks.len()];
    if let (Some(grid), Some(lap)) = (geometry.grid, Laplacian::new(geometry, a)) {
        let h = grid.spacing();
        let dn = d1(&lapse, h);
        let lapn = lap.apply(&lapse);
        let mut rest = lapn;
        for (i, b) in geometry.blocks.iter().enumerate() {
            if i == grid.block {
                continue;
            }
            let da = d1(&a[i], h);
            for j in 0..m {
                hess[i][j] = da[j] / (2.0 * a[grid.block][j] * a[i][j]) * dn[j];
                rest[j] -= b.dim as f64 * hess[i][j];
            }
        }
        hess[grid.block] = rest;
    }
    let mut da = vec![vec![0.0; m]; geometry.blocks.len()];
    let mut dp = vec![vec![0.0; m]; geometry.blocks.len()];
    for i in 0..geometry.blocks.len() {
        for j in 0..m {
            let nn = if lapse.len() == 1 { lapse[0] } else { lapse[j] };
            da[i][j] = -2.0 * nn * p[i][j] * a[i][j];
            dp[i][j] = -hess[i][j] + nn * p[i][j] * p[i][j];
        }
    }
    Ok((da, dp))
}

fn axpy(x: &[Vec<f64>], s: f64, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + s * v).collect())
        .collect()
}

fn rk4(state: &FlowState, dtau: f64) -> Result<FlowState> {
    let geo = &state.geometry;
    let t0 = state.tau;
    let a0 = &state.g_blocks;
    let p0: Vec<Vec<f64>> = a0
        .iter()
        .zip(&state.k_blocks)
        .map(|(aa, kk)| kk.iter().zip(aa).map(|(k, a)| k / a).collect())
        .collect();
    let guard = |a: &[Vec<f64>], t: f64| -> Result<()> {
        match a.iter().flatten().find(|x| !(**x > 0.0 && x.is_finite())) {
            Some(x) => Err(Error::Degenerate {
                tau: t,
                what: format!("metric scale {x}"),
            }),
            None => Ok(()),
        }
    };
    let (ka, kp) = rhs(geo, a0, &p0, t0)?;
    let a1 = axpy(a0, 0.5 * dtau, &ka);
    guard(&a1, t0 + 0.5 * dtau)?;
    let (la, lp) = rhs(geo, &a1, &axpy(&p0, 0.5 * dtau, &kp), t0 + 0.5 * dtau)?;
    let a2 = axpy(a0, 0.5 * dtau, &la);
    guard(&a2, t0 + 0.5 * dtau)?;
    let (ma, mp) = rhs(geo, &a2, &axpy(&p0, 0.5 * dtau, &lp), t0 + 0.5 * dtau)?;
    let a3 = axpy(a0, dtau, &ma);
    guard(&a3, t0 + dtau)?;
    let (na, np) = rhs(geo, &a3, &axpy(&p0, dtau, &mp), t0 + dtau)?;

    let combine = |x0: &[Vec<f64>], k1: &[Vec<f64>], k2: &[Vec<f64>], k3: &[Vec<f64>], k4: &[Vec<f64>]| {
        let mut out = x0.to_vec();
        for i in 0..out.len() {
            for j in 0..out[i].len() {
                out[i][j] += dtau / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
            }
        }
        out
    };
    let a = combine(a0, &ka, &la, &ma, &na);
    let p = combine(&p0, &kp, &lp, &mp, &np);
    guard(&a, t0 + dtau)?;
    let k = a
        .iter()
        .zip(&p)
        .map(|(aa, pp)| aa.iter().zip(pp).map(|(x, y)| x * y).collect())
        .collect();
    FlowState::new(geo.clone(), a, k, t0 + dtau)
}

fn step_to(state: &FlowState, tau_new: f64, depth: u32) -> Result<FlowState> {
    let dtau = tau_new - state.tau;
    let mut next = rk4(state, dtau)?;
    next.tau = tau_new;
    // drift measured locally: the increment of tr K against the increment of tau
    let before = state.trace_k();
    let drift = next
        .trace_k()
        .iter()
        .zip(&before)
        .map(|(a, b)| ((a - b) - dtau).abs())
        .fold(0.0, f64::max);
    if drift <= GAUGE_TOL {
        return Ok(next);
    }
    if depth >= MAX_HALVINGS {
        return Err(Error::StepUnderflow { tau: state.tau, drift });
    }
    let mid = step_to(state, state.tau + 0.5 * dtau, depth + 1)?;
    step_to(&mid, tau_new, depth + 1)
}

/// One RK4 step from `tau` to `tau + dtau`; a step whose gauge drift exceeds
/// [`GAUGE_TOL`] is redone as two half steps.
pub fn flow_step(state: &FlowState, dtau: f64) -> Result<FlowState> {
    if !(dtau > 0.0 && dtau.is_finite()) {
        return Err(Error::InvalidArgument(format!("dtau must be positive, got {dtau}")));
    }
    step_to(state, state.tau + dtau, 0)
}

// ---------------------------------------------------------------------------
// Runs and traces

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// `tau_k = tau_0 (tau_end / tau_0)^(k / steps)`: uniform in `log |tau|`.
    #[default]
    Geometric,
    Uniform,
}

impl Schedule {
    pub fn times(self, tau0: f64, tau_end: f64, steps: usize) -> Vec<f64> {
        if steps == 0 || tau0 == tau_end {
            return vec![tau0];
        }
        let mut t: Vec<f64> = (0..=steps)
            .map(|k| {
                let s = k as f64 / steps as f64;
                match self {
                    Schedule::Geometric => tau0 * (tau_end / tau0).powf(s),
                    Schedule::Uniform => tau0 + (tau_end - tau0) * s,
                }
            })
            .collect();
        t[0] = tau0;
        t[steps] = tau_end;
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamRecord {
    pub tau: f64,
    pub volume: f64,
    pub ham: f64,
    pub n_khat2_integral: f64,
    pub gauss_residual: f64,
    pub codazzi_residual: f64,
    pub lapse_min: f64,
    pub lapse_max: f64,
    /// Not serialized: `max |K|^2` and `max |Ric|^2_g`.
    pub k2_max: f64,
    pub ricci_sq_max: f64,
}

impl HamRecord {
    pub fn of(state: &FlowState) -> Self {
        let (gauss, codazzi) = flat_constraint_residual(state);
        Self {
            tau: state.tau,
            volume: state.volume(),
            ham: state.ham(),
            n_khat2_integral: state.n_khat2_integral(),
            gauss_residual: gauss,
            codazzi_residual: codazzi,
            lapse_min: state.lapse.iter().copied().fold(f64::INFINITY, f64::min),
            lapse_max: state.lapse.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            k2_max: state.k_norm_sq().into_iter().fold(0.0, f64::max),
            ricci_sq_max: ricci_norm_sq(state),
        }
    }

    fn row(&self) -> Vec<f64> {
        vec![
            self.tau,
            self.volume,
            self.ham,
            self.n_khat2_integral,
            self.gauss_residual,
            self.codazzi_residual,
            self.lapse_min,
            self.lapse_max,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonitorEvent {
    /// `|K|^2 > tau^2` somewhere on the slice.
    Treibergs { tau: f64, k2_max: f64 },
    /// `N` outside `[1/tau^2, n/tau^2]` although `|K|^2 <= tau^2`.
    LapseBounds { tau: f64, lapse_min: f64, lapse_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamTrace {
    pub dim: usize,
    pub records: Vec<HamRecord>,
    pub events: Vec<MonitorEvent>,
}

const MONITOR_REL: f64 = 1e-10;

impl HamTrace {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Appends a record and runs the Treibergs and lapse-bound monitors.
    pub fn record(&mut self, state: &FlowState) {
        let r = HamRecord::of(state);
        let t2 = r.tau * r.tau;
        if r.k2_max > t2 * (1.0 + MONITOR_REL) {
            self.events.push(MonitorEvent::Treibergs {
                tau: r.tau,
                k2_max: r.k2_max,
            });
        } else {
            let n = self.dim as f64;
            if r.lapse_min < (1.0 - MONITOR_REL) / t2 || r.lapse_max > n * (1.0 + MONITOR_REL) / t2 {
                self.events.push(MonitorEvent::LapseBounds {
                    tau: r.tau,
                    lapse_min: r.lapse_min,
                    lapse_max: r.lapse_max,
                });
            }
        }
        self.records.push(r);
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&TRACE_HEADER);
        for r in &self.records {
            t.push(r.row());
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.to_table().to_csv()
    }

    pub fn max_gauss_residual(&self) -> f64 {
        self.records.iter().map(|r| r.gauss_residual).fold(0.0, f64::max)
    }

    /// `max |Ric|^2_g / tau^4` along the trace.
    pub fn ricci_proxy_ratio(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.ricci_sq_max / r.tau.powi(4))
            .fold(0.0, f64::max)
    }
}

/// Integrates from `initial.tau` to `tau_end` in `steps` steps of the given
/// schedule, one record per accepted step (plus the initial one).
pub fn run_flow_with(initial: &FlowState, tau_end: f64, steps: usize, schedule: Schedule) -> Result<HamTrace> {
    let tau0 = initial.tau;
    if !(tau0 < 0.0 && tau_end < 0.0 && tau0 <= tau_end) {
        return Err(Error::InvalidArgument(format!(
            "need tau_start <= tau_end < 0, got {tau0} and {tau_end}"
        )));
    }
    if tau0 < tau_end && steps == 0 {
        return Err(Error::InvalidArgument("steps must be positive".into()));
    }
    let times = schedule.times(tau0, tau_end, steps);
    let mut trace = HamTrace::new(initial.dim());
    let mut state = initial.clone();
    trace.record(&state);
    for t in &times[1..] {
        state = step_to(&state, *t, 0)?;
        trace.record(&state);
    }
    Ok(trace)
}

/// [`run_flow_with`] on the geometric schedule.
pub fn run_flow(initial: &FlowState, tau_end: f64, steps: usize) -> Result<HamTrace> {
    run_flow_with(initial, tau_end, steps, Schedule::Geometric)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// `(tau, dHam/dtau by finite differences, -n |tau|^(n-1) int N |K-hat|^2)`
    /// at interior records.
    pub samples: Vec<(f64, f64, f64)>,
    /// Largest `|lhs - rhs| / max(|rhs|, floor / rel_tol)` with `floor = abs_tol * max(Ham, 1)`.
    pub worst: f64,
    pub identity_holds: bool,
    /// Indices `i` with `Ham[i+1] > Ham[i]` beyond rounding.
    pub increases: Vec<usize>,
}

pub const MONOTONICITY_REL_TOL: f64 = 1e-4;
/// Floor per unit of `Ham` for records where the identity's right side vanishes.
pub const MONOTONICITY_ABS_TOL: f64 = 1e-10;

/// Checks `dHam/dtau = -n |tau|^(n-1) int N |K-hat|^2 mu` with a
/// three-point central difference (non-uniform spacing) and flags any
/// increase of `Ham` larger than `1e-12` relative.
pub fn ham_monotonicity_check(trace: &HamTrace) -> Result<MonotonicityReport> {
    let r = &trace.records;
    if r.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 records".into()));
    }
    let n = trace.dim as f64;
    let mut samples = Vec::with_capacity(r.len() - 2);
    let mut worst = 0.0f64;
    let mut holds = true;
    for i in 1..r.len() - 1 {
        let (h1, h2) = (r[i].tau - r[i - 1].tau, r[i + 1].tau - r[i].tau);
        let lhs = -h2 / (h1 * (h1 + h2)) * r[i - 1].ham + (h2 - h1) / (h1 * h2) * r[i].ham
            + h1 / (h2 * (h1 + h2)) * r[i + 1].ham;
        let rhs = -n * r[i].tau.abs().powf(n - 1.0) * r[i].n_khat2_integral;
        let err = (lhs - rhs).abs();
        // where the right side vanishes, compare against the size of Ham
        let floor = MONOTONICITY_ABS_TOL * r[i].ham.abs().max(1.0);
        if err > MONOTONICITY_REL_TOL * rhs.abs() && err > floor {
            holds = false;
        }
        let scale = rhs.abs().max(floor / MONOTONICITY_REL_TOL);
        worst = worst.max(err / scale);
        samples.push((r[i].tau, lhs, rhs));
    }
    let increases = (0..r.len() - 1)
        .filter(|&i| r[i + 1].ham > r[i].ham * (1.0 + 1e-12))
        .collect();
    Ok(MonotonicityReport {
        samples,
        worst,
        identity_holds: holds,
        increases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConeModel, KasnerModel, Model};

    fn kasner(n: usize) -> Model {
        Model::Kasner(KasnerModel::new(n, 1.3, 0.9).unwrap())
    }

    /// Kasner data with the circle reparametrized: `A_x(x)` non-constant,
    /// same geometry.
    fn kasner_on_grid(n: usize, m: usize, tau: f64) -> FlowState {
        let rho = -((n - 1) as f64) / tau;
        let len = 2.0;
        let geo = BlockGeometry::new(
            vec![Block::hyperbolic(n - 1), Block::flat(1)],
            1.3,
            Some(Grid {
                block: 1,
                points: m,
                length: len,
            }),
        )
        .unwrap();
        let x = |j: usize| j as f64 * len / m as f64;
        let ax: Vec<f64> = (0..m)
            .map(|j| (1.0 + 0.3 * (std::f64::consts::PI * x(j)).cos()).powi(2))
            .collect();
        FlowState::new(
            geo,
            vec![vec![rho * rho; m], ax],
            vec![vec![-rho; m], vec![0.0; m]],
            tau,
        )
        .unwrap()
    }

    #[test]
    fn flat_residual_examples() {
        let cone = Model::Cone(ConeModel::new(3, 2.0).unwrap()).state_at(-1.5).unwrap();
        let (g, c) = flat_constraint_residual(&cone);
        assert!(g < 1e-12 && c < 1e-12);
        let mut bad = cone.clone();
        bad.k_blocks[0][0] *= 1.1;
        assert!(flat_constraint_residual(&bad).0 > 1e-3);
        for n in 2..=4 {
            let s = kasner(n).state_at(-0.7).unwrap();
            let (g, c) = flat_constraint_residual(&s);
            assert!(g < 1e-12 && c < 1e-12, "n={n}");
        }
    }

    #[test]
    fn vacuum_residual_matches_direct_formula() {
        let geo = BlockGeometry::homogeneous(vec![Block::hyperbolic(2), Block::flat(1)], 1.0).unwrap();
        let (a1, a2, k1, k2) = (1.7, 0.4, -0.9, 0.35);
        let s = FlowState::new(geo, vec![vec![a1], vec![a2]], vec![vec![k1], vec![k2]], -1.0).unwrap();
        let (p1, p2) = (k1 / a1, k2 / a2);
        let r = 2.0 * (-1.0 / a1);
        let direct = r - (2.0 * p1 * p1 + p2 * p2) + (2.0 * p1 + p2).powi(2);
        let (sc, mo) = vacuum_constraint_residual(&s);
        assert!((sc - direct.abs()).abs() < 1e-14);
        assert_eq!(mo, 0.0);
        for n in 2..=4 {
            let (sc, mo) = vacuum_constraint_residual(&kasner(n).state_at(-2.0).unwrap());
            assert!(sc < 1e-12 && mo < 1e-12);
        }
    }

    #[test]
    fn lapse_examples() {
        for n in 2..=4 {
            let tau = -1.3;
            let c = Model::Cone(ConeModel::new(n, 1.0).unwrap()).state_at(tau).unwrap();
            assert!((c.lapse[0] - n as f64 / (tau * tau)).abs() < 1e-14);
            let k = kasner(n).state_at(tau).unwrap();
            assert!((k.lapse[0] - (n - 1) as f64 / (tau * tau)).abs() < 1e-14);
            assert!(lapse_identity_check(&k) < 1e-12);
            assert!(lapse_identity_check(&c) < 1e-12);
        }
        let g = kasner_on_grid(3, 64, -1.3);
        for v in &g.lapse {
            assert!((v - 2.0 / 1.69).abs() < 1e-12);
        }
        assert!(lapse_residual(&g) < 1e-10, "{}", lapse_residual(&g));
    }

    #[test]
    fn degenerate_lapse_is_reported() {
        let geo = BlockGeometry::homogeneous(vec![Block::flat(2)], 1.0).unwrap();
        let e = FlowState::new(geo, vec![vec![1.0]], vec![vec![0.0]], -1.0).unwrap_err();
        assert!(matches!(e, Error::DegenerateLapse { .. }));
    }

    #[test]
    fn lapse_identity_needs_the_lapse_equation() {
        let s = kasner_on_grid(3, 32, -1.0);
        let m = s.points();
        let perturbed: Vec<f64> = (0..m).map(|j| s.lapse[j] * (1.0 + 0.1 * (j as f64).sin())).collect();
        let p = s.with_lapse(perturbed).unwrap();
        assert!(lapse_identity_check(&p) > 1e-4);
    }

    #[test]
    fn cone_step_stays_on_the_cone() {
        let model = Model::Cone(ConeModel::new(3, 1.0).unwrap());
        let s = model.state_at(-2.0).unwrap();
        for dtau in [1e-3, 0.01, 0.02] {
            let next = flow_step(&s, dtau).unwrap();
            let exact = model.slice_at(-2.0 + dtau).unwrap();
            assert!(next.khat_norm_sq()[0] < 1e-20);
            let rel = (next.g_blocks[0][0] - exact.block_metric_scales[0]).abs() / exact.block_metric_scales[0];
            assert!(rel < 1e-10, "dtau={dtau}: {rel}");
        }
    }

    #[test]
    fn grid_mode_agrees_with_homogeneous() {
        let n = 3;
        let tau0 = -2.0;
        let hom = kasner(n).state_at(tau0).unwrap();
        let grid = kasner_on_grid(n, 32, tau0);
        let a = run_flow(&hom, -0.5, 50).unwrap();
        let b = run_flow(&grid, -0.5, 50).unwrap();
        let ra = a.records.last().unwrap();
        let rb = b.records.last().unwrap();
        // volumes differ by a constant factor (circle length)
        let (qa, qb) = (ra.ham / a.records[0].ham, rb.ham / b.records[0].ham);
        assert!((qa - qb).abs() < 1e-9 * qa);
        assert!((ra.lapse_min - rb.lapse_min).abs() < 1e-10);
        assert!((rb.gauss_residual - ra.gauss_residual).abs() < 1e-12);
        assert!(rb.codazzi_residual < 1e-12);
    }

    #[test]
    fn grid_lapse_residual_late_and_fine() {
        for (m, tau) in [(64, -0.1), (128, -0.05), (256, -1.0)] {
            let s = kasner_on_grid(3, m, tau);
            assert!(lapse_residual(&s) < 1e-10, "m={m} tau={tau}: {}", lapse_residual(&s));
        }
    }

    #[test]
    fn inhomogeneous_grid_flow_keeps_the_gauge() {
        let m = 48;
        let geo = BlockGeometry::new(
            vec![Block::hyperbolic(2), Block::flat(1)],
            1.0,
            Some(Grid {
                block: 1,
                points: m,
                length: 1.0,
            }),
        )
        .unwrap();
        let tau = -3.0;
        let w: Vec<f64> = (0..m).map(|j| 0.2 * (2.0 * std::f64::consts::PI * j as f64 / m as f64).sin()).collect();
        // p_1 = -1 + w, p_s = tau - 2 p_1
        let g = vec![vec![1.0; m], w.iter().map(|x| 1.0 + 0.5 * x).collect()];
        let k1: Vec<f64> = w.iter().map(|x| -1.0 + x).collect();
        let ks: Vec<f64> = (0..m).map(|j| (tau - 2.0 * k1[j]) * g[1][j]).collect();
        let s = FlowState::new(geo, g, vec![k1, ks], tau).unwrap();
        assert!(s.gauge_defect() < 1e-14);
        assert!(lapse_residual(&s) < 1e-10);
        assert!(lapse_identity_check(&s) < 1e-10);
        let next = flow_step(&s, 0.05).unwrap();
        assert!(next.gauge_defect() < 1e-12);
        assert!(lapse_residual(&next) < 1e-10);
    }

    #[test]
    fn zero_length_run_has_one_record() {
        let s = kasner(3).state_at(-1.0).unwrap();
        let t = run_flow(&s, -1.0, 10).unwrap();
        assert_eq!(t.records.len(), 1);
        assert!(run_flow(&s, -2.0, 10).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        let cone = Model::Cone(ConeModel::new(2, 1.0).unwrap()).state_at(-10.0).unwrap();
        let rep = ham_monotonicity_check(&run_flow(&cone, -0.1, 10_000).unwrap()).unwrap();
        assert!(rep.identity_holds && rep.increases.is_empty());
        for (_, _, rhs) in &rep.samples {
            assert_eq!(*rhs, 0.0);
        }

        let model = kasner(3);
        let tr = run_flow(&model.state_at(-10.0).unwrap(), -0.1, 400).unwrap();
        let rep = ham_monotonicity_check(&tr).unwrap();
        assert!(rep.identity_holds, "worst {}", rep.worst);
        for (_, _, rhs) in &rep.samples {
            assert!((rhs + 4.0 * 1.3 * 0.9).abs() < 1e-6);
        }

        let mut bad = tr.clone();
        bad.records[5].ham *= 1.05;
        assert!(!ham_monotonicity_check(&bad).unwrap().increases.is_empty());
    }

    #[test]
    fn ricci_proxy_on_models() {
        for n in 2..=4 {
            let tau = -1.9;
            let c = Model::Cone(ConeModel::new(n, 1.0).unwrap()).state_at(tau).unwrap();
            let nf = n as f64;
            let cone_c = (nf - 1.0).powi(2) / nf.powi(3);
            assert!((ricci_norm_sq(&c) / tau.powi(4) - cone_c).abs() < 1e-12);
            let k = kasner(n).state_at(tau).unwrap();
            let kas_c = (nf - 2.0).powi(2) / (nf - 1.0).powi(3);
            assert!((ricci_norm_sq(&k) / tau.powi(4) - kas_c).abs() < 1e-12);
            assert!(cone_c.max(kas_c) == ricci_proxy_constant(n) || (cone_c.max(kas_c) - ricci_proxy_constant(n)).abs() < 1e-15);
        }
    }
}
