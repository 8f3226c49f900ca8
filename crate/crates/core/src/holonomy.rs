//! Surface-group holonomy into `SO(n,1)_0`, translation cocycles and the
//! regular-octagon (Bolza) group of genus two.
//!
//! Words are signed, 1-based generator indices: `k` is generator `k`,
//! `-k` its inverse.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lorentz::{make_boost, LorentzMap, MinkIsometry, MinkVector, REPROJECT_EVERY};
use crate::quadrature::gauss_legendre;
use crate::table::format_number;

pub type Word = Vec<i32>;

/// Drops adjacent `k, -k` pairs.
pub fn reduce_word(w: &[i32]) -> Word {
    let mut out: Word = Vec::with_capacity(w.len());
    for &x in w {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

pub fn inverse_word(w: &[i32]) -> Word {
    w.iter().rev().map(|x| -x).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPresentation {
    pub generators: Vec<LorentzMap>,
    pub relators: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle {
    pub generator_translations: Vec<MinkVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyRep {
    pub presentation: GroupPresentation,
    pub cocycle: Cocycle,
}

impl GroupPresentation {
    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    fn letter(&self, x: i32) -> Result<(usize, bool)> {
        let count = self.generators.len();
        let k = x.unsigned_abs() as usize;
        if x == 0 || k > count {
            return Err(Error::BadWordLetter { index: x, count });
        }
        Ok((k - 1, x < 0))
    }

    pub fn check_word(&self, w: &[i32]) -> Result<()> {
        for &x in w {
            self.letter(x)?;
        }
        Ok(())
    }

    fn linear_letter(&self, x: i32) -> Result<LorentzMap> {
        let (k, inv) = self.letter(x)?;
        Ok(if inv {
            self.generators[k].inverse()
        } else {
            self.generators[k].clone()
        })
    }

    /// Largest relator defect `max |f(r) - I|`.
    pub fn relator_residual(&self) -> Result<f64> {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in &self.relators {
            let m = evaluate_word(self, r)?;
            worst = worst.max((m.entries() - DMatrix::identity(n + 1, n + 1)).amax());
        }
        Ok(worst)
    }
}

/// Product of generators in word order; the empty word is the identity.
/// The running product is re-projected onto the Lorentz group every
/// [`REPROJECT_EVERY`] letters.
pub fn evaluate_word(p: &GroupPresentation, w: &[i32]) -> Result<LorentzMap> {
    p.check_word(w)?;
    let mut acc = LorentzMap::identity(p.dim());
    for (i, &x) in w.iter().enumerate() {
        acc = acc.compose(&p.linear_letter(x)?)?;
        if (i + 1) % REPROJECT_EVERY == 0 {
            acc = acc.reproject();
        }
    }
    Ok(acc)
}

impl Cocycle {
    pub fn zero(p: &GroupPresentation) -> Self {
        Self {
            generator_translations: vec![MinkVector::zeros(p.dim()); p.generator_count()],
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            generator_translations: self.generator_translations.iter().map(|t| t.scale(s)).collect(),
        }
    }

    /// Flattened components, generator-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.generator_translations
            .iter()
            .flat_map(|t| t.components().to_vec())
            .collect()
    }

    pub fn from_flat(n: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() % (n + 1) != 0 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: flat.len(),
            });
        }
        let generator_translations = flat
            .chunks(n + 1)
            .map(|c| MinkVector::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            generator_translations,
        })
    }
}

impl HolonomyRep {
    pub fn new(presentation: GroupPresentation, cocycle: Cocycle) -> Result<Self> {
        if cocycle.generator_translations.len() != presentation.generator_count() {
            return Err(Error::InvalidArgument(format!(
                "cocycle has {} translations for {} generators",
                cocycle.generator_translations.len(),
                presentation.generator_count()
            )));
        }
        for t in &cocycle.generator_translations {
            if t.dim() != presentation.dim() {
                return Err(Error::DimensionMismatch {
                    expected: presentation.dim(),
                    got: t.dim(),
                });
            }
        }
        Ok(Self {
            presentation,
            cocycle,
        })
    }

    pub fn fuchsian(presentation: GroupPresentation) -> Self {
        let cocycle = Cocycle::zero(&presentation);
        Self {
            presentation,
            cocycle,
        }
    }

    fn isometry_letter(&self, x: i32) -> Result<MinkIsometry> {
        let (k, inv) = self.presentation.letter(x)?;
        let g = MinkIsometry::new(
            self.presentation.generators[k].clone(),
            self.cocycle.generator_translations[k].clone(),
        )?;
        Ok(if inv { g.inverse() } else { g })
    }

    /// `rho(w) = (f(w), t_w)`.
    pub fn evaluate(&self, w: &[i32]) -> Result<MinkIsometry> {
        self.presentation.check_word(w)?;
        let mut acc = MinkIsometry::identity(self.presentation.dim());
        for (i, &x) in w.iter().enumerate() {
            acc = acc.compose(&self.isometry_letter(x)?)?;
            if (i + 1) % REPROJECT_EVERY == 0 {
                acc.linear = acc.linear.reproject();
            }
        }
        Ok(acc)
    }

    /// Largest relator translation `max |t_r|`.
    pub fn cocycle_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for r in &self.presentation.relators {
            worst = worst.max(extend_cocycle(self, r)?.max_abs());
        }
        Ok(worst)
    }

    pub fn to_kv(&self) -> String {
        to_kv(self)
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        from_kv(text)
    }
}

/// Translation part `t_w` of the word, built letter by letter with
/// `t_{ab} = t_a + f(a) t_b`.
pub fn extend_cocycle(rep: &HolonomyRep, w: &[i32]) -> Result<MinkVector> {
    Ok(rep.evaluate(w)?.translation)
}

/// `t_g = b - f(g) b`.
pub fn coboundary_cocycle(p: &GroupPresentation, b: &MinkVector) -> Result<Cocycle> {
    let generator_translations = p
        .generators
        .iter()
        .map(|g| b.sub(&g.apply(b)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Cocycle {
        generator_translations,
    })
}

/// Multiplies every generator translation by `lambda > 0`; linear parts are untouched.
pub fn scale_structure(rep: &HolonomyRep, lambda: f64) -> Result<HolonomyRep> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale factor must be positive, got {lambda}"
        )));
    }
    Ok(HolonomyRep {
        presentation: rep.presentation.clone(),
        cocycle: rep.cocycle.scale(lambda),
    })
}

/// `f(w) x + t_w`.
pub fn apply_deformed_holonomy(rep: &HolonomyRep, w: &[i32], x: &MinkVector) -> Result<MinkVector> {
    rep.evaluate(w)?.apply(x)
}

/// Matrix of the linear map from flattened generator translations to the
/// stacked relator translations. Its kernel is the cocycle space.
pub fn relator_map(p: &GroupPresentation) -> Result<DMatrix<f64>> {
    let n = p.dim();
    let cols = p.generator_count() * (n + 1);
    let rows = p.relators.len() * (n + 1);
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut flat = vec![0.0; cols];
        flat[j] = 1.0;
        let rep = HolonomyRep::new(p.clone(), Cocycle::from_flat(n, &flat)?)?;
        for (r, word) in p.relators.iter().enumerate() {
            let t = extend_cocycle(&rep, word)?;
            for (c, v) in t.components().iter().enumerate() {
                m[(r * (n + 1) + c, j)] = *v;
            }
        }
    }
    Ok(m)
}

fn orthonormal_kernel(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    // Kernel of m = kernel of m^T m; use its symmetric eigendecomposition.
    let gram = m.transpose() * m;
    let scale = gram.amax().max(1.0);
    let eig = gram.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i].abs() <= tol * scale)
        .collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()));
    idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect()
}

/// Orthonormal basis (in the flattened Euclidean sense) of all cocycles.
pub fn cocycle_space(p: &GroupPresentation) -> Result<Vec<Cocycle>> {
    let m = relator_map(p)?;
    orthonormal_kernel(&m, 1e-10)
        .into_iter()
        .map(|v| Cocycle::from_flat(p.dim(), v.as_slice()))
        .collect()
}

/// Cocycles orthogonal to every coboundary: a concrete complement
/// representing first cohomology.
pub fn cohomology_basis(p: &GroupPresentation) -> Result<Vec<Cocycle>> {
    let n = p.dim();
    let z = cocycle_space(p)?;
    let mut b: Vec<DVector<f64>> = Vec::new();
    for i in 0..=n {
        let c = coboundary_cocycle(p, &MinkVector::basis(n, i))?;
        b.push(DVector::from_vec(c.to_flat()));
    }
    let bmat = DMatrix::from_columns(&b);
    let q = bmat.qr().q();
    let project = |v: &DVector<f64>| v - &q * (q.transpose() * v);
    let zmat = DMatrix::from_columns(&z.iter().map(|c| project(&DVector::from_vec(c.to_flat()))).collect::<Vec<_>>());
    // column space of the projected kernel
    let svd = zmat.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-8 {
            out.push(Cocycle::from_flat(n, u.column(i).as_slice())?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Regular octagon group

/// Angle at which side `k` of the octagon faces the center.
fn side_angle(k: usize) -> f64 {
    k as f64 * PI / 4.0
}

/// Unit spacelike normal of the side at hyperbolic distance `r` from the
/// center in direction `theta`.
fn side_normal(r: f64, theta: f64) -> MinkVector {
    MinkVector::from_dvector(DVector::from_vec(vec![
        r.sinh(),
        r.cosh() * theta.cos(),
        r.cosh() * theta.sin(),
    ]))
}

/// Interior vertex angle of the regular octagon with inradius `r`.
pub fn octagon_vertex_angle(r: f64) -> f64 {
    let u0 = side_normal(r, side_angle(0));
    let u1 = side_normal(r, side_angle(1));
    let c = -u0.inner(&u1).expect("same dimension");
    c.clamp(-1.0, 1.0).acos()
}

/// Inradius of the regular octagon with vertex angle `pi/4`, by bisection.
pub fn bolza_inradius() -> f64 {
    let target = PI / 4.0;
    let (mut lo, mut hi) = (1e-6, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if octagon_vertex_angle(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// The eight side pairings `R(k pi/4) T(l) R(-k pi/4)` of the regular
/// octagon, with the four inverse relators `g_k g_{k+4}` and the surface
/// relator `g0 g1^-1 g2 g3^-1 g0^-1 g1 g2^-1 g3`.
pub fn bolza_generators() -> GroupPresentation {
    let ell = 2.0 * bolza_inradius();
    let t = make_boost(&[1.0, 0.0], ell).expect("unit direction");
    let generators = (0..8)
        .map(|k| {
            let r = LorentzMap::rotation(2, 1, 2, side_angle(k)).expect("valid plane");
            r.compose(&t)
                .and_then(|m| m.compose(&r.inverse()))
                .expect("same dimension")
                .reproject()
        })
        .collect();
    let mut relators: Vec<Word> = (1..=4).map(|k| vec![k, k + 4]).collect();
    relators.push(vec![1, 6, 3, 8, 5, 2, 7, 4]);
    GroupPresentation {
        generators,
        relators,
    }
}

/// Poincaré disk coordinate of a hyperboloid point.
pub fn hyperboloid_to_disk(x: &MinkVector) -> [f64; 2] {
    let c = x.components();
    [c[1] / (1.0 + c[0]), c[2] / (1.0 + c[0])]
}

pub fn disk_to_hyperboloid(z: [f64; 2]) -> MinkVector {
    let r2 = z[0] * z[0] + z[1] * z[1];
    let d = 1.0 - r2;
    MinkVector::from_dvector(DVector::from_vec(vec![(1.0 + r2) / d, 2.0 * z[0] / d, 2.0 * z[1] / d]))
}

/// Hyperbolic distance from the base point `(1, 0, ..., 0)`.
pub fn distance_from_origin(x: &MinkVector) -> f64 {
    x.time().max(1.0).acosh()
}

/// Regular octagon centered at `(1, 0, 0)` with its side normals.
#[derive(Debug, Clone)]
pub struct BolzaOctagon {
    pub inradius: f64,
    normals: Vec<MinkVector>,
    presentation: GroupPresentation,
}

/// Tolerance within which a point is treated as lying on a side.
const SIDE_TOL: f64 = 1e-12;

impl Default for BolzaOctagon {
    fn default() -> Self {
        Self::new()
    }
}

impl BolzaOctagon {
    pub fn new() -> Self {
        let inradius = bolza_inradius();
        let normals = (0..8).map(|k| side_normal(inradius, side_angle(k))).collect();
        Self {
            inradius,
            normals,
            presentation: bolza_generators(),
        }
    }

    pub fn presentation(&self) -> &GroupPresentation {
        &self.presentation
    }

    /// Circumradius (center to vertex).
    pub fn circumradius(&self) -> f64 {
        // right triangle center / side midpoint / vertex
        (self.inradius.tanh() / (PI / 8.0).cos()).atanh()
    }

    /// Signed side functionals `<x, u_k>`; positive means outside side `k`.
    pub fn side_values(&self, x: &MinkVector) -> [f64; 8] {
        let mut s = [0.0; 8];
        for (k, u) in self.normals.iter().enumerate() {
            s[k] = x.inner(u).expect("dimension 2");
        }
        s
    }

    /// Membership with boundary ties resolved toward the side with the smaller
    /// generator index: sides 1..4 (`k < 4`) are kept, their partners dropped.
    pub fn contains(&self, x: &MinkVector) -> bool {
        let s = self.side_values(x);
        let scale = x.time().max(1.0);
        for (k, v) in s.iter().enumerate() {
            let v = v / scale;
            if v > SIDE_TOL || (v >= -SIDE_TOL && k >= 4) {
                return false;
            }
        }
        true
    }

    pub fn contains_disk(&self, z: [f64; 2]) -> bool {
        let r2 = z[0] * z[0] + z[1] * z[1];
        r2 < 1.0 && self.contains(&disk_to_hyperboloid(z))
    }

    fn inside_closed_disk(&self, z: [f64; 2]) -> bool {
        let x = disk_to_hyperboloid(z);
        self.side_values(&x).iter().all(|v| *v <= 0.0)
    }

    /// Euclidean radius of the octagon boundary along the disk ray at `theta`.
    pub fn boundary_radius(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.inside_closed_disk([mid * c, mid * s]) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Hyperbolic area from the radial integral `int (2/(1-rho^2) - 2) dtheta`,
    /// Gauss–Legendre in each of the eight smooth sectors.
    pub fn area(&self, points_per_sector: usize) -> f64 {
        let rule = gauss_legendre(points_per_sector);
        (0..8)
            .map(|k| {
                let (a, b) = (side_angle(k) - PI / 8.0, side_angle(k) + PI / 8.0);
                crate::quadrature::integrate(&rule, a, b, |t| {
                    let rho = self.boundary_radius(t);
                    2.0 / (1.0 - rho * rho) - 2.0
                })
            })
            .sum()
    }

    /// Product rule over the octagon in disk coordinates with hyperbolic area
    /// weights: radial and angular Gauss–Legendre in every sector.
    pub fn quadrature(&self, angular: usize, radial: usize) -> OctagonQuadrature {
        let ra = gauss_legendre(angular);
        let rr = gauss_legendre(radial);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for k in 0..8 {
            let (a, b) = (side_angle(k) - PI / 8.0, side_angle(k) + PI / 8.0);
            let (ha, ma) = (0.5 * (b - a), 0.5 * (a + b));
            for (xa, wa) in ra.0.iter().zip(&ra.1) {
                let theta = ma + ha * xa;
                let rmax = self.boundary_radius(theta);
                let (s, c) = theta.sin_cos();
                for (xr, wr) in rr.0.iter().zip(&rr.1) {
                    let rho = 0.5 * rmax * (1.0 + xr);
                    let conf = 2.0 / (1.0 - rho * rho);
                    points.push([rho * c, rho * s]);
                    weights.push(wa * ha * wr * 0.5 * rmax * rho * conf * conf);
                }
            }
        }
        OctagonQuadrature { points, weights }
    }

    /// Maps a hyperboloid point into the closed octagon by repeatedly applying
    /// the pairing that undoes the most violated side. Returns the reduced
    /// point and the word `w` with `f(w) * reduced = x`.
    pub fn reduce(&self, x: &MinkVector) -> Result<(MinkVector, Word)> {
        let mut y = x.clone();
        let mut word: Word = Vec::new();
        for _ in 0..200 {
            let s = self.side_values(&y);
            let (k, worst) = s
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
            if worst <= SIDE_TOL * y.time().max(1.0) {
                return Ok((y, word));
            }
            // g_k maps the tile across side k+4 onto the tile across side k;
            // its inverse g_{k+4} brings y back toward the center.
            let back = (k + 4) % 8;
            y = self.presentation.generators[back].apply(&y)?.clone();
            word.push(k as i32 + 1);
        }
        Err(Error::InvalidArgument("octagon reduction did not terminate".into()))
    }
}

#[derive(Debug, Clone)]
pub struct OctagonQuadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl OctagonQuadrature {
    pub fn integrate(&self, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Group element together with its affine action.
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub word: Word,
    pub isometry: MinkIsometry,
}

/// All elements `g` with `d(o, f(g) o) <= radius`, found by breadth-first
/// search over words whose intermediate orbit points stay within
/// `radius + 2 * margin`. Distinct elements have distinct orbit points
/// because the base point has trivial stabilizer.
pub fn enumerate_elements(rep: &HolonomyRep, radius: f64, margin: f64) -> Result<Vec<GroupElement>> {
    let n = rep.presentation.dim();
    let origin = MinkVector::basis(n, 0);
    let limit = radius + 2.0 * margin;
    let cell = 0.25;
    let key = |x: &MinkVector| -> (i64, i64) {
        let s = x.spatial();
        ((s[0] / cell).floor() as i64, (s[1] / cell).floor() as i64)
    };
    let mut seen: HashMap<(i64, i64), Vec<MinkVector>> = HashMap::new();
    let is_new = |seen: &HashMap<(i64, i64), Vec<MinkVector>>, x: &MinkVector| -> bool {
        let (a, b) = key(x);
        for da in -1..=1 {
            for db in -1..=1 {
                if let Some(list) = seen.get(&(a + da, b + db)) {
                    for y in list {
                        // orbit points are at least twice the inradius apart
                        if -x.inner(y).unwrap_or(0.0) < 1.1 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    };
    let identity = GroupElement {
        word: Vec::new(),
        isometry: MinkIsometry::identity(n),
    };
    seen.entry(key(&origin)).or_default().push(origin.clone());
    let mut out = vec![identity.clone()];
    let mut frontier = vec![identity];
    let gens: Vec<MinkIsometry> = (1..=rep.presentation.generator_count() as i32)
        .map(|k| rep.evaluate(&[k]))
        .collect::<Result<_>>()?;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for e in &frontier {
            for (k, g) in gens.iter().enumerate() {
                let iso = e.isometry.compose(g)?;
                let p = iso.linear.apply(&origin)?;
                if distance_from_origin(&p) > limit || !is_new(&seen, &p) {
                    continue;
                }
                seen.entry(key(&p)).or_default().push(p);
                let mut word = e.word.clone();
                word.push(k as i32 + 1);
                let el = GroupElement { word, isometry: iso };
                next.push(el.clone());
                out.push(el);
            }
        }
        frontier = next;
    }
    out.retain(|e| {
        let p = e.isometry.linear.apply(&origin).expect("dimension");
        distance_from_origin(&p) <= radius
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// key = value serialization
//
//   dim = 2
//   generators = 8
//   generator.1 = a00 a01 a02 a10 ... (row-major)
//   relators = 5
//   relator.1 = 1 5
//   translation.1 = t0 t1 t2

pub fn to_kv(rep: &HolonomyRep) -> String {
    let p = &rep.presentation;
    let n = p.dim();
    let mut s = String::new();
    s.push_str(&format!("dim = {n}\n"));
    s.push_str(&format!("generators = {}\n", p.generator_count()));
    for (i, g) in p.generators.iter().enumerate() {
        let m = g.entries();
        let vals: Vec<String> = (0..=n)
            .flat_map(|r| (0..=n).map(move |c| (r, c)))
            .map(|(r, c)| format_number(m[(r, c)]))
            .collect();
        s.push_str(&format!("generator.{} = {}\n", i + 1, vals.join(" ")));
    }
    s.push_str(&format!("relators = {}\n", p.relators.len()));
    for (i, r) in p.relators.iter().enumerate() {
        let vals: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        s.push_str(&format!("relator.{} = {}\n", i + 1, vals.join(" ")));
    }
    for (i, t) in rep.cocycle.generator_translations.iter().enumerate() {
        let vals: Vec<String> = t.components().iter().map(|x| format_number(*x)).collect();
        s.push_str(&format!("translation.{} = {}\n", i + 1, vals.join(" ")));
    }
    s
}

pub fn from_kv(text: &str) -> Result<HolonomyRep> {
    let mut map: HashMap<String, String> = HashMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key = value, got {line:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| map.get(k).ok_or_else(|| Error::Parse(format!("missing key {k}")));
    let int = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Parse(format!("{k} is not an integer")))
    };
    let floats = |k: &str| -> Result<Vec<f64>> {
        get(k)?
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|_| Error::Parse(format!("bad number in {k}"))))
            .collect()
    };
    let n = int("dim")?;
    let count = int("generators")?;
    let mut generators = Vec::with_capacity(count);
    for i in 1..=count {
        let v = floats(&format!("generator.{i}"))?;
        if v.len() != (n + 1) * (n + 1) {
            return Err(Error::Parse(format!("generator.{i} has {} entries", v.len())));
        }
        generators.push(LorentzMap::new(DMatrix::from_row_slice(n + 1, n + 1, &v))?);
    }
    let rcount = int("relators")?;
    let mut relators = Vec::with_capacity(rcount);
    for i in 1..=rcount {
        let w = get(&format!("relator.{i}"))?
            .split_whitespace()
            .map(|x| x.parse::<i32>().map_err(|_| Error::Parse(format!("bad letter in relator.{i}"))))
            .collect::<Result<Word>>()?;
        relators.push(w);
    }
    let presentation = GroupPresentation {
        generators,
        relators,
    };
    let mut translations = Vec::with_capacity(count);
    for i in 1..=count {
        let key = format!("translation.{i}");
        if map.contains_key(&key) {
            translations.push(MinkVector::new(floats(&key)?)?);
        } else {
            translations.push(MinkVector::zeros(n));
        }
    }
    HolonomyRep::new(
        presentation,
        Cocycle {
            generator_translations: translations,
        },
    )
}
