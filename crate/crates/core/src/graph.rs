//! Spacelike graphs `t = phi(x)` over a rectangular patch of Euclidean
//! `n`-space, sampled on a uniform grid.
//!
//! Conventions: `W = sqrt(1 - |grad phi|^2)`, `g_ij = delta_ij - phi_i phi_j`,
//! `K_ij = -phi_ij / W`, `H = g^ij K_ij`, future unit normal
//! `nu = (1, grad phi) / W`. The upper hyperboloid `phi = sqrt(s^2 + |x|^2)`
//! then has `H = -n/s`.
//!
//! All differential quantities live on interior nodes, at least two nodes
//! away from the patch boundary; the outer two layers carry Dirichlet data.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::holonomy::BolzaOctagon;
use crate::lorentz::{MinkIsometry, MinkVector};
use crate::table::format_number;

pub use crate::limit::{limit_experiment, limit_table, LimitConfig, LimitRow, LIMIT_HEADER};

/// Spacelike margin: interior gradients must satisfy `|grad phi| < 1 - 1e-6`.
pub const SPACELIKE_MARGIN: f64 = 1e-6;
/// Classification tolerance for eigenvalues of `K_ij`.
pub const CONVEXITY_TOL: f64 = 1e-10;
/// Sub-samples per axis when cutting boundary cells of a fundamental domain.
pub const SUPERSAMPLE: usize = 16;
/// Nodes kept fixed along every patch boundary.
pub const MARGIN: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: f64,
    /// Row-major, last axis fastest.
    pub values: Vec<f64>,
}

impl HeightField {
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 || shape.len() != origin.len() {
            return Err(Error::InvalidArgument("shape and origin must have the same length 1..=4".into()));
        }
        if shape.iter().any(|m| *m < 2 * MARGIN + 1) {
            return Err(Error::InvalidArgument(format!(
                "every axis needs at least {} nodes",
                2 * MARGIN + 1
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: values.len(),
            });
        }
        Ok(Self {
            shape,
            origin,
            spacing,
            values,
        })
    }

    /// Samples `f` on the grid with `shape` nodes starting at `origin`.
    pub fn from_fn(shape: &[usize], origin: &[f64], spacing: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut h = Self::new(shape.to_vec(), origin.to_vec(), spacing, vec![0.0; len])?;
        for i in 0..len {
            let x = h.coords(i);
            h.values[i] = f(&x);
        }
        Ok(h)
    }

    /// Square patch `[-half, half]^n` with `points` nodes per axis.
    pub fn centered(n: usize, half: f64, points: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidArgument("need at least 2 points per axis".into()));
        }
        let h = 2.0 * half / (points - 1) as f64;
        Self::from_fn(&vec![points; n], &vec![-half; n], h, f)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Upper corner of the patch.
    pub fn extent(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.shape)
            .map(|(o, m)| o + (*m - 1) as f64 * self.spacing)
            .collect()
    }

    fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![1; n];
        for a in (0..n - 1).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = i % self.shape[a];
            i /= self.shape[a];
        }
        out
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        self.multi_index(i)
            .iter()
            .zip(&self.origin)
            .map(|(k, o)| o + *k as f64 * self.spacing)
            .collect()
    }

    /// Nodes at least [`MARGIN`] away from every face.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                self.multi_index(i)
                    .iter()
                    .zip(&self.shape)
                    .all(|(k, m)| *k >= MARGIN && *k + MARGIN < *m)
            })
            .collect()
    }

    /// Dense CSV: three header lines `origin,...`, `extent,...`, `spacing,h`,
    /// then one line per row of the last axis.
    pub fn to_csv(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(",");
        let mut s = format!(
            "origin,{}\nextent,{}\nspacing,{}\n",
            join(&self.origin),
            join(&self.extent()),
            format_number(self.spacing)
        );
        let last = *self.shape.last().expect("nonempty shape");
        for row in self.values.chunks(last) {
            s.push_str(&join(row));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |name: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {name} line")))?;
            let mut parts = line.split(',');
            if parts.next().map(str::trim) != Some(name) {
                return Err(Error::Parse(format!("expected {name} line, got {line:?}")));
            }
            parts.map(parse_f64).collect()
        };
        let origin = header("origin")?;
        let extent = header("extent")?;
        let spacing = header("spacing")?;
        if spacing.len() != 1 || origin.len() != extent.len() {
            return Err(Error::Parse("malformed height field header".into()));
        }
        let h = spacing[0];
        let shape: Vec<usize> = origin
            .iter()
            .zip(&extent)
            .map(|(o, e)| ((e - o) / h).round() as usize + 1)
            .collect();
        let mut values = Vec::new();
        for line in lines {
            for v in line.split(',') {
                values.push(parse_f64(v)?);
            }
        }
        Self::new(shape, origin, h, values)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let s = s.trim();
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::Parse(format!("not a number: {s:?}"))),
    }
}

/// Per-node geometry on the interior nodes of a height field.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphGeometry {
    pub dim: usize,
    /// Flat indices into the height field.
    pub nodes: Vec<usize>,
    /// `grad phi`, `dim` entries per node.
    pub gradient: Vec<f64>,
    /// `phi_ij`, `dim * dim` entries per node.
    pub hessian: Vec<f64>,
    /// `W = sqrt(1 - |grad phi|^2)`.
    pub volume_density: Vec<f64>,
    pub mean_curvature: Vec<f64>,
}

struct NodeGeometry {
    grad: Vec<f64>,
    hess: Vec<f64>,
    w: f64,
    h: f64,
}

fn node_geometry(phi: &HeightField, strides: &[usize], i: usize) -> NodeGeometry {
    let n = phi.dim();
    let v = &phi.values;
    let h = phi.spacing;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    for a in 0..n {
        let (p, m) = (v[i + strides[a]], v[i - strides[a]]);
        grad[a] = (p - m) / (2.0 * h);
        hess[a * n + a] = (p - 2.0 * v[i] + m) / (h * h);
        for b in a + 1..n {
            let (sa, sb) = (strides[a], strides[b]);
            let d = (v[i + sa + sb] - v[i + sa - sb] - v[i - sa + sb] + v[i - sa - sb]) / (4.0 * h * h);
            hess[a * n + b] = d;
            hess[b * n + a] = d;
        }
    }
    let g2: f64 = grad.iter().map(|x| x * x).sum();
    let w = (1.0 - g2).max(0.0).sqrt();
    // H = -(1/W) (delta_ij + phi_i phi_j / W^2) phi_ij
    let mut contraction = 0.0;
    for a in 0..n {
        contraction += hess[a * n + a];
        for b in 0..n {
            contraction += grad[a] * grad[b] * hess[a * n + b] / (w * w);
        }
    }
    NodeGeometry {
        grad,
        hess,
        w,
        h: -contraction / w,
    }
}

fn check_spacelike(max_grad: f64) -> Result<()> {
    if max_grad < 1.0 - SPACELIKE_MARGIN {
        Ok(())
    } else {
        Err(Error::NotSpacelike(max_grad))
    }
}

/// Central-difference geometry on the interior nodes.
pub fn graph_geometry(phi: &HeightField) -> Result<GraphGeometry> {
    let n = phi.dim();
    let strides = phi.strides();
    let nodes = phi.interior_nodes();
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let per: Vec<NodeGeometry> = nodes.par_iter().map(|&i| node_geometry(phi, &strides, i)).collect();
    let max_grad = per
        .iter()
        .map(|g| g.grad.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    check_spacelike(max_grad)?;
    let mut out = GraphGeometry {
        dim: n,
        nodes,
        gradient: Vec::with_capacity(per.len() * n),
        hessian: Vec::with_capacity(per.len() * n * n),
        volume_density: Vec::with_capacity(per.len()),
        mean_curvature: Vec::with_capacity(per.len()),
    };
    for g in per {
        out.gradient.extend(g.grad);
        out.hessian.extend(g.hess);
        out.volume_density.push(g.w);
        out.mean_curvature.push(g.h);
    }
    Ok(out)
}

impl GraphGeometry {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn gradient_at(&self, k: usize) -> &[f64] {
        &self.gradient[k * self.dim..(k + 1) * self.dim]
    }

    /// `g_ij = delta_ij - phi_i phi_j`.
    pub fn induced_metric(&self, k: usize) -> DMatrix<f64> {
        let d = self.gradient_at(k);
        DMatrix::from_fn(self.dim, self.dim, |i, j| if i == j { 1.0 } else { 0.0 } - d[i] * d[j])
    }

    pub fn inverse_metric(&self, k: usize) -> DMatrix<f64> {
        let d = self.gradient_at(k);
        let w2 = self.volume_density[k].powi(2);
        DMatrix::from_fn(self.dim, self.dim, |i, j| if i == j { 1.0 } else { 0.0 } + d[i] * d[j] / w2)
    }

    /// `K_ij = -phi_ij / W`.
    pub fn second_form(&self, k: usize) -> DMatrix<f64> {
        let n = self.dim;
        let w = self.volume_density[k];
        DMatrix::from_fn(n, n, |i, j| -self.hessian[k * n * n + i * n + j] / w)
    }

    /// Future unit normal `(1, grad phi) / W`.
    pub fn normal(&self, k: usize) -> MinkVector {
        normal_from_gradient(self.gradient_at(k))
    }

    /// `|K|^2_g = tr((g^-1 K)^2)`.
    pub fn k_norm_sq(&self, k: usize) -> f64 {
        let s = self.inverse_metric(k) * self.second_form(k);
        (&s * &s).trace()
    }
}

fn normal_from_gradient(grad: &[f64]) -> MinkVector {
    let w = (1.0 - grad.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let mut c = Vec::with_capacity(grad.len() + 1);
    c.push(1.0 / w);
    c.extend(grad.iter().map(|x| x / w));
    MinkVector::new(c).expect("dimension checked by caller")
}

/// `nu = (1, grad phi) / W` for one gradient.
pub fn gauss_map_at(grad: &[f64]) -> Result<MinkVector> {
    let g = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    check_spacelike(g)?;
    Ok(normal_from_gradient(grad))
}

/// Gauss map on the interior nodes.
pub fn gauss_map(phi: &HeightField) -> Result<Vec<MinkVector>> {
    let geo = graph_geometry(phi)?;
    Ok((0..geo.len()).map(|k| geo.normal(k)).collect())
}

/// Interior extrema of `H`.
pub fn mean_curvature_spread(geo: &GraphGeometry) -> (f64, f64) {
    geo.mean_curvature
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(*h), hi.max(*h)))
}

/// A graph known in closed form.
pub trait ExactGraph {
    fn dim(&self) -> usize;
    fn phi(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn sample(&self, half: f64, points: usize) -> Result<HeightField> {
        HeightField::centered(self.dim(), half, points, |x| self.phi(x))
    }
}

/// Upper hyperboloid `phi = sqrt(s^2 + |x|^2)`, mean curvature `-n/s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperboloid {
    pub dim: usize,
    pub s: f64,
}

impl ExactGraph for Hyperboloid {
    fn dim(&self) -> usize {
        self.dim
    }

    fn phi(&self, x: &[f64]) -> f64 {
        (self.s * self.s + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = self.phi(x);
        x.iter().map(|v| v / p).collect()
    }
}

/// `max |nu(y) - L nu(x)|` where `(phi(y), y)` is the image of `(phi(x), x)`
/// under `iso` and `L` its linear part. Requires the graph to be invariant.
pub fn gauss_map_equivariance(graph: &impl ExactGraph, iso: &MinkIsometry, x: &[f64]) -> Result<f64> {
    let mut c = vec![graph.phi(x)];
    c.extend_from_slice(x);
    let image = iso.apply(&MinkVector::new(c)?)?;
    let y = image.spatial().to_vec();
    let lhs = gauss_map_at(&graph.gradient(&y))?;
    let rhs = iso.linear.apply(&gauss_map_at(&graph.gradient(x))?)?;
    Ok(lhs.sub(&rhs)?.max_abs())
}

#[derive(Debug, Clone)]
pub enum DomainFilter {
    WholePatch,
    /// Nodes whose Gauss image lies in the octagon (n = 2).
    Octagon(BolzaOctagon),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientEnergy {
    /// `int |K|^2_g mu_g`.
    pub energy: f64,
    pub volume: f64,
    /// Area-weighted mean of `H`.
    pub tau_mean: f64,
}

fn disk_point(nu: &MinkVector) -> [f64; 2] {
    let c = nu.components();
    [c[1] / (1.0 + c[0]), c[2] / (1.0 + c[0])]
}

/// Integrates `|K|^2_g`, `1` and `H` against `W dx` over the filtered region.
/// For the octagon filter, cells cut by the domain boundary get fractional
/// weights from [`SUPERSAMPLE`]^2 sub-points with bilinearly interpolated
/// normals.
pub fn quotient_energy(phi: &HeightField, filter: &DomainFilter) -> Result<QuotientEnergy> {
    let geo = graph_geometry(phi)?;
    let n = phi.dim();
    let cell = phi.spacing.powi(n as i32);
    let fractions: Vec<f64> = match filter {
        DomainFilter::WholePatch => vec![1.0; geo.len()],
        DomainFilter::Octagon(oct) => {
            if n != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: n });
            }
            octagon_fractions(phi, &geo, oct)
        }
    };
    let (mut e, mut vol, mut hsum) = (0.0, 0.0, 0.0);
    for k in 0..geo.len() {
        let f = fractions[k];
        if f == 0.0 {
            continue;
        }
        let w = geo.volume_density[k] * cell * f;
        e += geo.k_norm_sq(k) * w;
        vol += w;
        hsum += geo.mean_curvature[k] * w;
    }
    if vol == 0.0 {
        return Err(Error::EmptyRegion);
    }
    Ok(QuotientEnergy {
        energy: e,
        volume: vol,
        tau_mean: hsum / vol,
    })
}

fn octagon_fractions(phi: &HeightField, geo: &GraphGeometry, oct: &BolzaOctagon) -> Vec<f64> {
    let strides = phi.strides();
    let mut slot = vec![usize::MAX; phi.len()];
    for (k, &i) in geo.nodes.iter().enumerate() {
        slot[i] = k;
    }
    let normals: Vec<[f64; 3]> = (0..geo.len())
        .map(|k| {
            let c = geo.normal(k);
            [c.components()[0], c.components()[1], c.components()[2]]
        })
        .collect();
    let inside = |nu: [f64; 3]| -> bool { oct.contains_disk([nu[1] / (1.0 + nu[0]), nu[2] / (1.0 + nu[0])]) };
    let member: Vec<bool> = (0..geo.len()).map(|k| oct.contains_disk(disk_point(&geo.normal(k)))).collect();
    (0..geo.len())
        .into_par_iter()
        .map(|k| {
            let i = geo.nodes[k];
            // neighbors in the 3x3 block; missing ones fall back to the center
            let nb = |da: isize, db: isize| -> usize {
                let j = i as isize + da * strides[0] as isize + db * strides[1] as isize;
                let s = slot[j as usize];
                if s == usize::MAX {
                    k
                } else {
                    s
                }
            };
            let uniform = (-1..=1).all(|a| (-1..=1).all(|b| member[nb(a, b)] == member[k]));
            if uniform {
                return if member[k] { 1.0 } else { 0.0 };
            }
            let s = SUPERSAMPLE;
            let mut count = 0usize;
            for p in 0..s {
                for q in 0..s {
                    let a = (p as f64 + 0.5) / s as f64 - 0.5;
                    let b = (q as f64 + 0.5) / s as f64 - 0.5;
                    let (sa, sb) = (if a < 0.0 { -1 } else { 1 }, if b < 0.0 { -1 } else { 1 });
                    let (fa, fb) = (a.abs(), b.abs());
                    let (n00, n10, n01, n11) = (normals[k], normals[nb(sa, 0)], normals[nb(0, sb)], normals[nb(sa, sb)]);
                    let mut nu = [0.0; 3];
                    for c in 0..3 {
                        nu[c] = (1.0 - fa) * (1.0 - fb) * n00[c] + fa * (1.0 - fb) * n10[c] + (1.0 - fa) * fb * n01[c] + fa * fb * n11[c];
                    }
                    if inside(nu) {
                        count += 1;
                    }
                }
            }
            count as f64 / (s * s) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    NegativeDefinite,
    PositiveDefinite,
    Semidefinite,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Nodes where `K_ij` has eigenvalues of both signs beyond tolerance.
    pub indefinite_nodes: usize,
    pub class: Definiteness,
}

/// Eigenvalue extrema of `K_ij` over the interior, classified with
/// tolerance [`CONVEXITY_TOL`].
pub fn convexity_check(geo: &GraphGeometry) -> ConvexityReport {
    let eig: Vec<(f64, f64)> = (0..geo.len())
        .into_par_iter()
        .map(|k| {
            let e = geo.second_form(k).symmetric_eigen().eigenvalues;
            (e.min(), e.max())
        })
        .collect();
    let lo = eig.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let hi = eig.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let indefinite_nodes = eig
        .iter()
        .filter(|(a, b)| *a < -CONVEXITY_TOL && *b > CONVEXITY_TOL)
        .count();
    let class = if hi < -CONVEXITY_TOL {
        Definiteness::NegativeDefinite
    } else if lo > CONVEXITY_TOL {
        Definiteness::PositiveDefinite
    } else if hi <= CONVEXITY_TOL || lo >= -CONVEXITY_TOL {
        Definiteness::Semidefinite
    } else {
        Definiteness::Indefinite
    };
    ConvexityReport {
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        indefinite_nodes,
        class,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOutcome {
    /// Best iterate found.
    pub field: HeightField,
    /// Interior `max |H - tau|` of `field`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after every accepted iteration (starting with the initial one).
    pub history: Vec<f64>,
}

pub const MAX_REJECTIONS: usize = 40;
const RELAX_CFL: f64 = 0.9;

/// Pseudo-time descent `phi <- phi - sigma W (H - tau)` on interior nodes
/// with the local explicit step `sigma = c h^2 / (2 sum_ij |g^ij|)`.
/// A step that loses spacelikeness is rejected and `c` halved.
pub fn cmc_relax(phi0: &HeightField, tau_target: f64, tol: f64, max_iters: usize) -> Result<RelaxOutcome> {
    if !(tau_target < 0.0) {
        return Err(Error::InvalidArgument(format!("tau_target must be negative, got {tau_target}")));
    }
    let strides = phi0.strides();
    let nodes = phi0.interior_nodes();
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = phi0.dim();
    let h2 = phi0.spacing * phi0.spacing;
    let eval = |phi: &HeightField| -> (Vec<NodeGeometry>, f64, f64) {
        let per: Vec<NodeGeometry> = nodes.iter().map(|&i| node_geometry(phi, &strides, i)).collect();
        let res = per.iter().map(|g| (g.h - tau_target).abs()).fold(0.0, f64::max);
        let max_grad = per
            .iter()
            .map(|g| g.grad.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        (per, res, max_grad)
    };
    let (mut geo, mut res, max_grad) = eval(phi0);
    check_spacelike(max_grad)?;
    let mut phi = phi0.clone();
    let mut best = (phi.clone(), res);
    let mut history = vec![res];
    let mut c = RELAX_CFL;
    let mut rejections = 0;
    let mut it = 0;
    while res > tol && it < max_iters {
        let mut trial = phi.clone();
        for (g, &i) in geo.iter().zip(&nodes) {
            let w2 = g.w * g.w;
            let mut norm = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    norm += (delta + g.grad[a] * g.grad[b] / w2).abs();
                }
            }
            let sigma = c * h2 / (2.0 * norm);
            trial.values[i] -= sigma * g.w * (g.h - tau_target);
        }
        let (tgeo, tres, tgrad) = eval(&trial);
        if tgrad >= 1.0 - SPACELIKE_MARGIN || !tres.is_finite() {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::NotSpacelike(tgrad));
            }
            c *= 0.5;
            continue;
        }
        rejections = 0;
        c = (c * 1.25).min(RELAX_CFL);
        it += 1;
        phi = trial;
        geo = tgeo;
        res = tres;
        history.push(res);
        if res < best.1 {
            best = (phi.clone(), res);
        }
    }
    Ok(RelaxOutcome {
        converged: best.1 <= tol,
        field: best.0,
        residual: best.1,
        iterations: it,
        history,
    })
}
