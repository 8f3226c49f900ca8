//! Minkowski space `R^{n,1}` with signature `(-, +, ..., +)`.
//!
//! Index 0 is the time coordinate. Spatial dimension `n` is a runtime value
//! in `2..=4`; every vector carries `n + 1` components.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest and largest supported spatial dimension.
pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 4;

/// Default tolerance for group-membership checks.
pub const LORENTZ_TOL: f64 = 1e-12;

/// `|<x, x>|` below this is classified null.
pub const NULL_TOL: f64 = 1e-10;

/// Word evaluation re-projects onto the Lorentz group after this many products.
pub const REPROJECT_EVERY: usize = 16;

fn check_dim(n: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinkVector(DVector<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Causal {
    Timelike,
    Null,
    Spacelike,
}

impl MinkVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        check_dim(components.len().saturating_sub(1))?;
        Ok(Self(DVector::from_vec(components)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n + 1))
    }

    /// Unit vector `e_i` (`i = 0` is the time direction).
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n + 1);
        v[i] = 1.0;
        Self(v)
    }

    /// Point `(sqrt(1 + |x|^2), x)` of the upper unit hyperboloid over `x`.
    pub fn hyperboloid_point(spatial: &[f64]) -> Result<Self> {
        let r2: f64 = spatial.iter().map(|x| x * x).sum();
        let mut c = Vec::with_capacity(spatial.len() + 1);
        c.push((1.0 + r2).sqrt());
        c.extend_from_slice(spatial);
        Self::new(c)
    }

    pub(crate) fn from_dvector(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn components(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn time(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> &[f64] {
        &self.0.as_slice()[1..]
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        mink_inner(self, other)
    }

    pub fn square(&self) -> f64 {
        let s = self.0.as_slice();
        -s[0] * s[0] + s[1..].iter().map(|x| x * x).sum::<f64>()
    }

    pub fn causal(&self) -> Causal {
        let q = self.square();
        if q.abs() < NULL_TOL {
            Causal::Null
        } else if q < 0.0 {
            Causal::Timelike
        } else {
            Causal::Spacelike
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Minkowski inner product `-u0 v0 + sum ui vi`.
pub fn mink_inner(u: &MinkVector, v: &MinkVector) -> Result<f64> {
    same_dim(u.dim(), v.dim())?;
    let (a, b) = (u.components(), v.components());
    Ok(-a[0] * b[0] + a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum::<f64>())
}

/// `diag(-1, 1, ..., 1)` of size `n + 1`.
pub fn eta(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n + 1, n + 1);
    m[(0, 0)] = -1.0;
    m
}

/// Element of `O(n,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzMap {
    entries: DMatrix<f64>,
    orthochronous: bool,
}

impl LorentzMap {
    /// Wraps a square matrix. Membership in `O(n,1)` is not enforced here; use
    /// [`verify_lorentz`] or [`LorentzMap::checked`].
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidArgument(format!(
                "Lorentz map must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        check_dim(entries.nrows().saturating_sub(1))?;
        let orthochronous = entries[(0, 0)] > 0.0;
        Ok(Self {
            entries,
            orthochronous,
        })
    }

    /// Like [`LorentzMap::new`] but rejects matrices with defect above `tol`.
    pub fn checked(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        let m = Self::new(entries)?;
        if m.defect() > tol {
            return Err(Error::InvalidArgument(format!(
                "not a Lorentz map (defect {:e})",
                m.defect()
            )));
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n + 1, n + 1),
            orthochronous: true,
        }
    }

    /// Rotation by `angle` in the spatial coordinate plane `(i, j)`, `1 <= i, j <= n`.
    pub fn rotation(n: usize, i: usize, j: usize, angle: f64) -> Result<Self> {
        check_dim(n)?;
        if i == 0 || j == 0 || i > n || j > n || i == j {
            return Err(Error::InvalidArgument(format!(
                "bad rotation plane ({i}, {j}) for n = {n}"
            )));
        }
        let mut m = DMatrix::identity(n + 1, n + 1);
        let (s, c) = angle.sin_cos();
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -s;
        m[(j, i)] = s;
        Ok(Self {
            entries: m,
            orthochronous: true,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_orthochronous(&self) -> bool {
        self.orthochronous
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows() - 1
    }

    /// `max |A^T eta A - eta|`.
    pub fn defect(&self) -> f64 {
        let e = eta(self.dim());
        (self.entries.transpose() * &e * &self.entries - e).amax()
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Self::new(&self.entries * &other.entries)
    }

    /// `eta A^T eta`, exact for group elements.
    pub fn inverse(&self) -> Self {
        let e = eta(self.dim());
        Self {
            entries: &e * self.entries.transpose() * &e,
            orthochronous: self.orthochronous,
        }
    }

    pub fn apply(&self, v: &MinkVector) -> Result<MinkVector> {
        same_dim(self.dim(), v.dim())?;
        Ok(MinkVector(&self.entries * v.as_dvector()))
    }

    /// Nearest group element in the polar sense: Newton iteration
    /// `A <- (A + eta A^{-T} eta) / 2`, whose fixed points are exactly `O(n,1)`.
    /// Very large boosts are too ill-conditioned for the inverse; the input
    /// is returned unchanged unless the iteration makes a small correction
    /// that reduces the defect.
    pub fn reproject(&self) -> Self {
        let e = eta(self.dim());
        let mut a = self.entries.clone();
        for _ in 0..8 {
            let Some(inv) = a.clone().try_inverse() else {
                break;
            };
            let next = (&a + &e * inv.transpose() * &e) * 0.5;
            let change = (&next - &a).amax();
            a = next;
            if change < 1e-16 * a.amax().max(1.0) {
                break;
            }
        }
        let out = Self {
            orthochronous: a[(0, 0)] > 0.0,
            entries: a,
        };
        let moved = (&out.entries - &self.entries).amax();
        if out.entries.iter().all(|x| x.is_finite())
            && moved <= 1e-6 * self.entries.amax()
            && out.defect() <= self.defect()
        {
            out
        } else {
            self.clone()
        }
    }
}

/// `true` iff `max |A^T eta A - eta| <= tol`.
pub fn verify_lorentz(a: &LorentzMap, tol: f64) -> bool {
    a.defect() <= tol
}

/// Pure boost along the unit spatial `direction`.
pub fn make_boost(direction: &[f64], rapidity: f64) -> Result<LorentzMap> {
    let n = direction.len();
    check_dim(n)?;
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "boost direction must be a unit vector (norm {norm})"
        )));
    }
    let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
    let mut m = DMatrix::identity(n + 1, n + 1);
    m[(0, 0)] = ch;
    for i in 0..n {
        m[(0, i + 1)] = sh * direction[i];
        m[(i + 1, 0)] = sh * direction[i];
        for j in 0..n {
            m[(i + 1, j + 1)] += (ch - 1.0) * direction[i] * direction[j];
        }
    }
    LorentzMap::new(m)
}

/// Affine isometry `x -> A x + a` of Minkowski space.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkIsometry {
    pub linear: LorentzMap,
    pub translation: MinkVector,
}

impl MinkIsometry {
    pub fn new(linear: LorentzMap, translation: MinkVector) -> Result<Self> {
        same_dim(linear.dim(), translation.dim())?;
        Ok(Self {
            linear,
            translation,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            linear: LorentzMap::identity(n),
            translation: MinkVector::zeros(n),
        }
    }

    pub fn linear(a: LorentzMap) -> Self {
        let n = a.dim();
        Self {
            linear: a,
            translation: MinkVector::zeros(n),
        }
    }

    pub fn translate(a: MinkVector) -> Self {
        Self {
            linear: LorentzMap::identity(a.dim()),
            translation: a,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    /// `self ∘ other`: `(A, a)(B, b) = (AB, A b + a)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        let linear = self.linear.compose(&other.linear)?;
        let translation = self.linear.apply(&other.translation)?.add(&self.translation)?;
        Ok(Self {
            linear,
            translation,
        })
    }

    pub fn inverse(&self) -> Self {
        let linear = self.linear.inverse();
        let t = MinkVector(linear.entries() * self.translation.as_dvector() * -1.0);
        Self {
            linear,
            translation: t,
        }
    }

    pub fn apply(&self, x: &MinkVector) -> Result<MinkVector> {
        self.linear.apply(x)?.add(&self.translation)
    }
}

pub fn apply_isometry(g: &MinkIsometry, x: &MinkVector) -> Result<MinkVector> {
    g.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> MinkVector {
        MinkVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn inner_signature() {
        let e0 = MinkVector::basis(2, 0);
        let e1 = MinkVector::basis(2, 1);
        assert_eq!(mink_inner(&e0, &e0).unwrap(), -1.0);
        assert_eq!(mink_inner(&e1, &e1).unwrap(), 1.0);
        let null = v(&[1.0, 1.0, 0.0]);
        assert_eq!(mink_inner(&null, &null).unwrap(), 0.0);
        assert_eq!(null.causal(), Causal::Null);
        assert_eq!(e0.causal(), Causal::Timelike);
        assert_eq!(e1.causal(), Causal::Spacelike);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let a = MinkVector::zeros(2);
        let b = MinkVector::zeros(3);
        assert!(matches!(
            mink_inner(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn verify_examples() {
        assert!(verify_lorentz(&LorentzMap::identity(3), 1e-12));
        let b = make_boost(&[1.0, 0.0], 1.0).unwrap();
        assert!(verify_lorentz(&b, 1e-12));
        let mut m = DMatrix::identity(3, 3);
        m[(1, 1)] = 1.001;
        assert!(!verify_lorentz(&LorentzMap::new(m).unwrap(), 1e-12));
    }

    #[test]
    fn boost_examples() {
        let b0 = make_boost(&[0.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(b0, LorentzMap::identity(3));

        let b = make_boost(&[1.0, 0.0], 1.0).unwrap();
        let back = make_boost(&[1.0, 0.0], -1.0).unwrap();
        let id = b.compose(&back).unwrap();
        assert!((id.entries() - DMatrix::identity(3, 3)).amax() < 1e-14);

        let img = b.apply(&MinkVector::basis(2, 0)).unwrap();
        assert!((img.components()[0] - 1f64.cosh()).abs() < 1e-15);
        assert!((img.components()[1] - 1f64.sinh()).abs() < 1e-15);
        assert_eq!(img.components()[2], 0.0);

        // orthogonal complement of span(e0, direction) is fixed
        let e2 = MinkVector::basis(2, 2);
        assert_eq!(b.apply(&e2).unwrap(), e2);

        assert!(make_boost(&[1.0, 1.0], 0.3).is_err());
    }

    #[test]
    fn isometry_examples() {
        let x = v(&[0.3, -1.0, 2.0]);
        let a = v(&[1.0, 2.0, 3.0]);
        let t = MinkIsometry::translate(a.clone());
        assert_eq!(t.apply(&x).unwrap(), x.add(&a).unwrap());

        let b = make_boost(&[1.0, 0.0], 1.0).unwrap();
        let lin = MinkIsometry::linear(b.clone());
        assert_eq!(lin.apply(&x).unwrap(), b.apply(&x).unwrap());

        let g = lin.compose(&MinkIsometry::translate(MinkVector::basis(2, 1))).unwrap();
        let img = g.apply(&MinkVector::zeros(2)).unwrap();
        let expected = b.apply(&MinkVector::basis(2, 1)).unwrap();
        assert!(img.sub(&expected).unwrap().max_abs() < 1e-15);
        assert!((img.components()[0] - 1f64.sinh()).abs() < 1e-15);
        assert!((img.components()[1] - 1f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn isometry_inverse_roundtrip() {
        let b = make_boost(&[0.6, 0.8], 0.7).unwrap();
        let g = MinkIsometry::new(b, v(&[0.1, -0.2, 0.5])).unwrap();
        let x = v(&[2.0, 1.0, -1.0]);
        let back = g.inverse().apply(&g.apply(&x).unwrap()).unwrap();
        assert!(back.sub(&x).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn reproject_removes_drift() {
        let b = make_boost(&[1.0, 0.0], 2.0).unwrap();
        let mut noisy = b.entries().clone();
        noisy[(0, 1)] += 1e-7;
        noisy[(2, 2)] -= 3e-8;
        let p = LorentzMap::new(noisy).unwrap().reproject();
        assert!(p.defect() < 1e-12, "defect {}", p.defect());
        assert!((p.entries() - b.entries()).amax() < 1e-6);
    }

    #[test]
    fn rejects_unsupported_dimension() {
        assert!(MinkVector::new(vec![1.0, 0.0]).is_err());
        assert!(LorentzMap::new(DMatrix::identity(7, 7)).is_err());
    }
}
