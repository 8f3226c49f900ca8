//! Exact flat models: the Lorentz cone over a closed hyperbolic manifold and
//! the Kasner-type product `-drho^2 + rho^2 h + dr^2`, plus the Riccati
//! propagation of Gauss foliations.
//!
//! Sign convention: `d/dt g = -2 N K`, expanding slices have `tau = tr K < 0`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::flow::{Block, BlockGeometry, FlowState};

/// Default quotient volume for `n = 2`: the genus-two area `4 pi`.
pub const GENUS_TWO_AREA: f64 = 4.0 * std::f64::consts::PI;

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")))
    }
}

fn negative_tau(tau: f64) -> Result<()> {
    if tau < 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tau must be negative, got {tau}")))
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (2..=4).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// `-drho^2 + rho^2 g0` over a closed hyperbolic `n`-manifold of volume `base_volume`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeModel {
    pub dim: usize,
    pub base_volume: f64,
}

/// `-drho^2 + rho^2 h + dr^2` with `(Sigma, h)` hyperbolic of dimension
/// `n - 1` and a circle of length `circle_length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KasnerModel {
    pub dim: usize,
    pub sigma_volume: f64,
    pub circle_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Cone(ConeModel),
    Kasner(KasnerModel),
}

/// One CMC slice in block form: metric `sum a_i^2 g_i`, principal curvature
/// `k_eigenvalues[i]` on block `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceData {
    pub tau: f64,
    pub block_dims: Vec<usize>,
    pub block_metric_scales: Vec<f64>,
    pub k_eigenvalues: Vec<f64>,
    pub volume: f64,
}

impl ConeModel {
    pub fn new(dim: usize, base_volume: f64) -> Result<Self> {
        check_dim(dim)?;
        positive("base_volume", base_volume)?;
        Ok(Self { dim, base_volume })
    }

    /// Cone over the genus-two surface, base volume `4 pi`.
    pub fn genus_two() -> Self {
        Self {
            dim: 2,
            base_volume: GENUS_TWO_AREA,
        }
    }

    pub fn geometry(&self) -> BlockGeometry {
        BlockGeometry::homogeneous(vec![Block::hyperbolic(self.dim)], self.base_volume)
            .expect("valid cone geometry")
    }
}

impl KasnerModel {
    pub fn new(dim: usize, sigma_volume: f64, circle_length: f64) -> Result<Self> {
        check_dim(dim)?;
        positive("sigma_volume", sigma_volume)?;
        positive("circle_length", circle_length)?;
        Ok(Self {
            dim,
            sigma_volume,
            circle_length,
        })
    }

    pub fn geometry(&self) -> BlockGeometry {
        BlockGeometry::homogeneous(
            vec![Block::hyperbolic(self.dim - 1), Block::flat(1)],
            self.sigma_volume * self.circle_length,
        )
        .expect("valid Kasner geometry")
    }
}

/// Slice `rho = s` of the cone: `tau = -n/s`, volume `s^n Vol(M, g0)`.
pub fn cone_slice(model: &ConeModel, s: f64) -> Result<SliceData> {
    positive("s", s)?;
    let n = model.dim;
    Ok(SliceData {
        tau: -(n as f64) / s,
        block_dims: vec![n],
        block_metric_scales: vec![s * s],
        k_eigenvalues: vec![-1.0 / s],
        volume: s.powi(n as i32) * model.base_volume,
    })
}

/// Slice `rho = const` of the Kasner-type product: `tau = -(n-1)/rho`.
pub fn kasner_slice(model: &KasnerModel, rho: f64) -> Result<SliceData> {
    positive("rho", rho)?;
    let n = model.dim;
    Ok(SliceData {
        tau: -((n - 1) as f64) / rho,
        block_dims: vec![n - 1, 1],
        block_metric_scales: vec![rho * rho, 1.0],
        k_eigenvalues: vec![-1.0 / rho, 0.0],
        volume: rho.powi(n as i32 - 1) * model.sigma_volume * model.circle_length,
    })
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Cone(m) => m.dim,
            Model::Kasner(m) => m.dim,
        }
    }

    pub fn geometry(&self) -> BlockGeometry {
        match self {
            Model::Cone(m) => m.geometry(),
            Model::Kasner(m) => m.geometry(),
        }
    }

    /// The slice with mean curvature `tau`.
    pub fn slice_at(&self, tau: f64) -> Result<SliceData> {
        negative_tau(tau)?;
        match self {
            Model::Cone(m) => cone_slice(m, -(m.dim as f64) / tau),
            Model::Kasner(m) => kasner_slice(m, -((m.dim - 1) as f64) / tau),
        }
    }

    /// Initial data for the flow, lapse solved.
    pub fn state_at(&self, tau: f64) -> Result<FlowState> {
        self.slice_at(tau)?.to_flow_state(self.geometry())
    }
}

impl SliceData {
    pub fn ham(&self) -> f64 {
        let n: usize = self.block_dims.iter().sum();
        self.tau.abs().powi(n as i32) * self.volume
    }

    /// `|K|^2 = sum d_i k_i^2`.
    pub fn k_norm_sq(&self) -> f64 {
        self.block_dims
            .iter()
            .zip(&self.k_eigenvalues)
            .map(|(d, k)| *d as f64 * k * k)
            .sum()
    }

    /// Block state with covariant components `K_i = k_i a_i^2`.
    pub fn to_flow_state(&self, geometry: BlockGeometry) -> Result<FlowState> {
        if geometry.blocks.len() != self.block_dims.len()
            || geometry.blocks.iter().zip(&self.block_dims).any(|(b, d)| b.dim != *d)
        {
            return Err(Error::InvalidArgument("slice does not match the block geometry".into()));
        }
        let npts = geometry.points();
        let g: Vec<Vec<f64>> = self.block_metric_scales.iter().map(|a| vec![*a; npts]).collect();
        let k: Vec<Vec<f64>> = self
            .block_metric_scales
            .iter()
            .zip(&self.k_eigenvalues)
            .map(|(a, p)| vec![p * a; npts])
            .collect();
        FlowState::new(geometry, g, k, self.tau)
    }
}

/// Rescaled volume `|tau|^n Vol` in closed form: constant `n^n Vol(M, g0)`
/// on the cone, `(n-1)^(n-1) |tau| Vol(Sigma) R` on the Kasner product.
pub fn ham_closed_form(model: &Model, tau: f64) -> Result<f64> {
    negative_tau(tau)?;
    Ok(match model {
        Model::Cone(m) => (m.dim as f64).powi(m.dim as i32) * m.base_volume,
        Model::Kasner(m) => {
            let n1 = (m.dim - 1) as f64;
            n1.powi(m.dim as i32 - 1) * tau.abs() * m.sigma_volume * m.circle_length
        }
    })
}

// ---------------------------------------------------------------------------
// Riccati propagation of the Gauss foliation shape operator

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiState {
    pub shape_operator: DMatrix<f64>,
    pub t: f64,
}

impl RiccatiState {
    pub fn new(shape_operator: DMatrix<f64>, t: f64) -> Result<Self> {
        if !shape_operator.is_square() {
            return Err(Error::InvalidArgument("shape operator must be square".into()));
        }
        let asym = (&shape_operator - shape_operator.transpose()).amax();
        if asym > SYMMETRY_TOL * shape_operator.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "shape operator not symmetric (defect {asym:e})"
            )));
        }
        Ok(Self { shape_operator, t })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.shape_operator.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `(t_-, t_+)`: the interval around 0 free of focal times.
    pub fn focal_window(&self) -> (f64, f64) {
        let f = focal_times(self);
        let lo = f.iter().copied().filter(|t| *t < 0.0).fold(f64::NEG_INFINITY, f64::max);
        let hi = f.iter().copied().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
        (lo, hi)
    }
}

/// Per-eigenvalue blow-up times `1/kappa_i` of the closed form, ascending;
/// zero eigenvalues contribute nothing.
pub fn focal_times(state: &RiccatiState) -> Vec<f64> {
    let scale = state.shape_operator.amax().max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = state
        .eigenvalues()
        .into_iter()
        .filter(|k| k.abs() > 1e-14 * scale)
        .map(|k| 1.0 / k)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// `K(t) = (K(0)^{-1} - t)^{-1}`, with `t` measured from the state's time.
pub fn riccati_propagate(state: &RiccatiState, t: f64) -> Result<DMatrix<f64>> {
    let k = &state.shape_operator;
    let m = k.nrows();
    let inv = k
        .clone()
        .try_inverse()
        .filter(|_| {
            let e = state.eigenvalues();
            let scale = k.amax().max(f64::MIN_POSITIVE);
            e.iter().all(|x| x.abs() > 1e-14 * scale)
        })
        .ok_or_else(|| Error::Singular("K(0) is not invertible".into()))?;
    let (lo, hi) = state.focal_window();
    if !(t > lo && t < hi) {
        return Err(Error::FocalTime(t));
    }
    let shifted = inv - DMatrix::identity(m, m) * t;
    let mut out = shifted
        .try_inverse()
        .ok_or(Error::FocalTime(t))?;
    // symmetrize away rounding
    out = (&out + out.transpose()) * 0.5;
    Ok(out)
}

/// Classical RK4 for `dK/dt = K^2` with `steps` equal steps.
pub fn riccati_integrate(k0: &DMatrix<f64>, t: f64, steps: usize) -> DMatrix<f64> {
    let h = t / steps as f64;
    let f = |k: &DMatrix<f64>| k * k;
    let mut k = k0.clone();
    for _ in 0..steps {
        let k1 = f(&k);
        let k2 = f(&(&k + &k1 * (0.5 * h)));
        let k3 = f(&(&k + &k2 * (0.5 * h)));
        let k4 = f(&(&k + &k3 * h));
        k += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::flat_constraint_residual;

    #[test]
    fn cone_slice_examples() {
        let m = ConeModel::new(3, 2.5).unwrap();
        let s = cone_slice(&m, 1.0).unwrap();
        assert_eq!(s.tau, -3.0);
        assert_eq!(s.volume, 2.5);
        for sv in [0.1, 0.7, 3.0, 11.0] {
            let s = cone_slice(&m, sv).unwrap();
            assert!((s.tau.abs().powi(3) * s.volume - 27.0 * 2.5).abs() < 1e-12 * 67.5);
        }
        let m2 = ConeModel::new(2, 1.0).unwrap();
        let s = cone_slice(&m2, 2.0).unwrap();
        assert_eq!(s.tau, -1.0);
        assert_eq!(s.volume, 4.0);
        assert!(cone_slice(&m, 0.0).is_err());
        assert!(cone_slice(&m, -1.0).is_err());
    }

    #[test]
    fn kasner_slice_examples() {
        let m = KasnerModel::new(3, 1.3, 0.7).unwrap();
        let s = kasner_slice(&m, 1.0).unwrap();
        assert_eq!(s.tau, -2.0);
        let trace: f64 = s.block_dims.iter().zip(&s.k_eigenvalues).map(|(d, k)| *d as f64 * k).sum();
        assert_eq!(trace, s.tau);

        for rho in [0.3, 1.0, 4.0] {
            let a = kasner_slice(&m, rho).unwrap().ham();
            let b = kasner_slice(&m, 2.0 * rho).unwrap().ham();
            assert!((b / a - 0.5).abs() < 1e-14);
        }

        let state = s.to_flow_state(m.geometry()).unwrap();
        let (gauss, codazzi) = flat_constraint_residual(&state);
        assert!(gauss < 1e-12 && codazzi < 1e-12);
        assert!(kasner_slice(&m, 0.0).is_err());
    }

    #[test]
    fn cone_slice_is_flat_data() {
        for n in 2..=4 {
            let m = ConeModel::new(n, 1.0).unwrap();
            for s in [0.5, 1.0, 3.0] {
                let st = cone_slice(&m, s).unwrap().to_flow_state(m.geometry()).unwrap();
                let (g, c) = flat_constraint_residual(&st);
                assert!(g < 1e-12 && c < 1e-12, "n={n} s={s}: {g} {c}");
            }
        }
    }

    #[test]
    fn ham_closed_form_examples() {
        let cone = Model::Cone(ConeModel::new(3, 1.7).unwrap());
        for tau in [-10.0, -1.0, -0.1] {
            assert!((ham_closed_form(&cone, tau).unwrap() - 27.0 * 1.7).abs() < 1e-12);
        }
        let kas = Model::Kasner(KasnerModel::new(3, 1.0, 1.0).unwrap());
        assert_eq!(ham_closed_form(&kas, -2.0).unwrap(), 8.0);
        // cross-check against |tau|^n vol of the slice
        let direct = kas.slice_at(-2.0).unwrap().ham();
        assert!((direct - ham_closed_form(&kas, -2.0).unwrap()).abs() < 1e-12);
        // linear decay to zero
        let a = ham_closed_form(&kas, -1e-3).unwrap();
        let b = ham_closed_form(&kas, -2e-3).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        assert!(ham_closed_form(&kas, 0.0).is_err());
    }

    #[test]
    fn treibergs_bound_on_model_slices() {
        for n in 2..=4 {
            let tau = -1.7;
            let c = Model::Cone(ConeModel::new(n, 1.0).unwrap()).slice_at(tau).unwrap();
            assert!((c.k_norm_sq() - tau * tau / n as f64).abs() < 1e-12);
            let k = Model::Kasner(KasnerModel::new(n, 1.0, 1.0).unwrap()).slice_at(tau).unwrap();
            assert!((k.k_norm_sq() - tau * tau / (n - 1) as f64).abs() < 1e-12);
            assert!(c.k_norm_sq() <= tau * tau && k.k_norm_sq() <= tau * tau);
        }
    }

    #[test]
    fn riccati_examples() {
        let s = RiccatiState::new(-DMatrix::identity(2, 2), 0.0).unwrap();
        let k = riccati_propagate(&s, 1.0).unwrap();
        assert!((k - DMatrix::identity(2, 2) * -0.5).amax() < 1e-15);

        let s = RiccatiState::new(DMatrix::from_diagonal(&nalgebra::dvector![-1.0, -2.0]), 0.0).unwrap();
        let k = riccati_propagate(&s, 1.0).unwrap();
        assert!((k[(0, 0)] + 0.5).abs() < 1e-15);
        assert!((k[(1, 1)] + 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(k[(0, 1)], 0.0);

        let num = riccati_integrate(&s.shape_operator, 1.0, 200);
        assert!((num - k).amax() < 1e-8);
    }

    #[test]
    fn riccati_errors() {
        let sing = RiccatiState::new(DMatrix::from_diagonal(&nalgebra::dvector![-1.0, 0.0]), 0.0).unwrap();
        assert!(matches!(riccati_propagate(&sing, 0.5), Err(Error::Singular(_))));
        let s = RiccatiState::new(DMatrix::from_diagonal(&nalgebra::dvector![-1.0, -2.0]), 0.0).unwrap();
        assert!(matches!(riccati_propagate(&s, -0.5), Err(Error::FocalTime(_))));
        assert!(RiccatiState::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), 0.0).is_err());
    }

    #[test]
    fn focal_time_examples() {
        let s = RiccatiState::new(-DMatrix::identity(3, 3), 0.0).unwrap();
        assert_eq!(focal_times(&s), vec![-1.0; 3]);
        let s = RiccatiState::new(DMatrix::from_diagonal(&nalgebra::dvector![-1.0, -2.0]), 0.0).unwrap();
        assert_eq!(focal_times(&s), vec![-1.0, -0.5]);
        let rho = 2.5;
        let s = RiccatiState::new(DMatrix::from_diagonal(&nalgebra::dvector![-1.0 / rho, 0.0]), 0.0).unwrap();
        let f = focal_times(&s);
        assert_eq!(f.len(), 1);
        assert!((f[0] + rho).abs() < 1e-14);
    }

    #[test]
    fn riccati_trace_increases_to_zero() {
        let k0 = DMatrix::from_row_slice(2, 2, &[-1.5, 0.3, 0.3, -0.8]);
        let s = RiccatiState::new(k0, 0.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for t in [0.0, 0.5, 1.0, 5.0, 50.0, 5e3] {
            let tr = riccati_propagate(&s, t).unwrap().trace();
            assert!(tr > prev && tr < 0.0);
            prev = tr;
        }
        assert!(prev > -1e-3);
    }
}
