use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::coeffs::{complex_to_real, real_to_complex, SpectralCoeffs};
use super::grid::{Grid, Vec3};
use super::transform;
use super::SphereError;

/// Real function sampled on the grid nodes, with a lazily computed spectral
/// representation truncated at `grid.l_max()`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    coeffs: OnceLock<SpectralCoeffs>,
}

impl ScalarField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self, SphereError> {
        if values.len() != grid.len() {
            return Err(SphereError::Size { expected: grid.len(), got: values.len() });
        }
        Ok(ScalarField { grid: grid.clone(), values, coeffs: OnceLock::new() })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        ScalarField { grid: grid.clone(), values: vec![c; grid.len()], coeffs: OnceLock::new() }
    }

    /// Sample `f(θ, φ)` at the nodes.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (t, p) = grid.theta_phi(i);
                f(t, p)
            })
            .collect();
        ScalarField { grid: grid.clone(), values, coeffs: OnceLock::new() }
    }

    /// Sample `f(y)` for `y` the unit-sphere position of each node.
    pub fn from_points(grid: &Arc<Grid>, f: impl Fn(Vec3) -> f64) -> Self {
        let values = grid.points().iter().map(|&y| f(y)).collect();
        ScalarField { grid: grid.clone(), values, coeffs: OnceLock::new() }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: &SpectralCoeffs) -> Result<Self, SphereError> {
        if coeffs.spin() != 0 {
            return Err(SphereError::Spin(coeffs.spin()));
        }
        let values = transform::synthesize(grid, coeffs)?.into_iter().map(|v| v.re).collect();
        let cell = OnceLock::new();
        let _ = cell.set(coeffs.clone());
        Ok(ScalarField { grid: grid.clone(), values, coeffs: cell })
    }

    /// From coefficients in the real orthonormal basis (see [`complex_to_real`]).
    pub fn from_real_coeffs(grid: &Arc<Grid>, real: &[f64]) -> Result<Self, SphereError> {
        Self::from_coeffs(grid, &real_to_complex(grid.l_max(), real)?)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.coeffs = OnceLock::new();
        &mut self.values
    }

    /// Spin-0 coefficients of the grid values (cached).
    pub fn coeffs(&self) -> &SpectralCoeffs {
        self.coeffs.get_or_init(|| {
            let c: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            transform::analyze(&self.grid, 0, &c).expect("grid-sized spin-0 field")
        })
    }

    pub fn real_coeffs(&self) -> Vec<f64> {
        complex_to_real(self.coeffs())
    }

    /// Project onto degree `<= l_max` and resample.
    pub fn band_limited(&self) -> Self {
        Self::from_coeffs(&self.grid, self.coeffs()).expect("matching grid")
    }

    pub fn integrate(&self) -> f64 {
        super::ops::integrate(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        ScalarField { grid: self.grid.clone(), values, coeffs: OnceLock::new() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        ScalarField { grid: self.grid.clone(), values, coeffs: OnceLock::new() }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }
    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }
}

/// Complex spin-weighted function on the grid. Values are frame components
/// with respect to `(e_θ, e_φ)`: a frame rotation by `χ` multiplies them by
/// `e^{-i s χ}`.
#[derive(Clone, Debug)]
pub struct SpinField {
    grid: Arc<Grid>,
    spin: i32,
    values: Vec<Complex64>,
}

impl SpinField {
    pub fn new(grid: &Arc<Grid>, spin: i32, values: Vec<Complex64>) -> Result<Self, SphereError> {
        if spin.abs() > super::grid::MAX_SPIN {
            return Err(SphereError::Spin(spin));
        }
        if values.len() != grid.len() {
            return Err(SphereError::Size { expected: grid.len(), got: values.len() });
        }
        Ok(SpinField { grid: grid.clone(), spin, values })
    }

    pub fn zeros(grid: &Arc<Grid>, spin: i32) -> Self {
        SpinField { grid: grid.clone(), spin, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: &SpectralCoeffs) -> Result<Self, SphereError> {
        let values = transform::synthesize(grid, coeffs)?;
        Ok(SpinField { grid: grid.clone(), spin: coeffs.spin(), values })
    }

    /// Spin-1 representative `V_θ + i V_φ` of a tangent vector field given in
    /// Cartesian components.
    pub fn from_tangent(grid: &Arc<Grid>, v: &[Vec3]) -> Result<Self, SphereError> {
        if v.len() != grid.len() {
            return Err(SphereError::Size { expected: grid.len(), got: v.len() });
        }
        let values = v
            .iter()
            .enumerate()
            .map(|(i, x)| Complex64::new(dot(*x, grid.e_theta(i)), dot(*x, grid.e_phi(i))))
            .collect();
        Ok(SpinField { grid: grid.clone(), spin: 1, values })
    }

    /// Cartesian tangent vector of a spin-1 field.
    pub fn to_tangent(&self) -> Vec<Vec3> {
        debug_assert_eq!(self.spin, 1);
        self.values
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let (a, b) = (self.grid.e_theta(i), self.grid.e_phi(i));
                [u.re * a[0] + u.im * b[0], u.re * a[1] + u.im * b[1], u.re * a[2] + u.im * b[2]]
            })
            .collect()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn spin(&self) -> i32 {
        self.spin
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn analyze(&self) -> SpectralCoeffs {
        transform::analyze(&self.grid, self.spin, &self.values).expect("grid-sized spin field")
    }

    /// `∫ a \bar b dσ` over the round sphere.
    pub fn inner(&self, other: &SpinField) -> Complex64 {
        self.values.iter().zip(&other.values).enumerate().map(|(i, (a, b))| a * b.conj() * self.grid.weight(i)).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
