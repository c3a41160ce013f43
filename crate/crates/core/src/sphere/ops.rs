//! Differential operators, all applied diagonally on harmonic coefficients.
//!
//! `eth` raises spin with eigenvalue `√((l-s)(l+s+1))`; `eth_bar` lowers it with
//! eigenvalue `-√((l+s)(l-s+1))`. On a real scalar `f` this gives
//! `eth f = -(∂_θ f + i ∂_φ f / sinθ)` and `eth_bar eth = Δ_{S²}`.

use std::sync::Arc;

use num_complex::Complex64;

use super::coeffs::SpectralCoeffs;
use super::field::{ScalarField, SpinField};
use super::grid::{Chart, Grid, MAX_SPIN};
use super::SphereError;

pub fn eth_eigenvalue(l: usize, spin: i32) -> f64 {
    let (l, s) = (l as f64, spin as f64);
    ((l - s) * (l + s + 1.0)).max(0.0).sqrt()
}

pub fn eth_bar_eigenvalue(l: usize, spin: i32) -> f64 {
    let (l, s) = (l as f64, spin as f64);
    -((l + s) * (l - s + 1.0)).max(0.0).sqrt()
}

pub fn eth_coeffs(c: &SpectralCoeffs) -> Result<SpectralCoeffs, SphereError> {
    let s = c.spin();
    if s + 1 > MAX_SPIN {
        return Err(SphereError::Spin(s + 1));
    }
    Ok(c.map_degree(s + 1, |l| eth_eigenvalue(l, s)))
}

pub fn eth_bar_coeffs(c: &SpectralCoeffs) -> Result<SpectralCoeffs, SphereError> {
    let s = c.spin();
    if s - 1 < -MAX_SPIN {
        return Err(SphereError::Spin(s - 1));
    }
    Ok(c.map_degree(s - 1, |l| eth_bar_eigenvalue(l, s)))
}

pub fn eth(f: &SpinField) -> Result<SpinField, SphereError> {
    SpinField::from_coeffs(f.grid(), &eth_coeffs(&f.analyze())?)
}

pub fn eth_bar(f: &SpinField) -> Result<SpinField, SphereError> {
    SpinField::from_coeffs(f.grid(), &eth_bar_coeffs(&f.analyze())?)
}

/// Round-sphere quadrature `Σ w_i f_i`.
pub fn integrate(f: &ScalarField) -> f64 {
    let g = f.grid();
    f.values().iter().enumerate().map(|(i, v)| v * g.weight(i)).sum()
}

/// Quadrature of raw node values.
pub fn integrate_values(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().enumerate().map(|(i, v)| v * grid.weight(i)).sum()
}

pub fn laplace_s2(f: &ScalarField) -> ScalarField {
    let c = f.coeffs().map_degree(0, |l| -((l * (l + 1)) as f64));
    ScalarField::from_coeffs(f.grid(), &c).expect("matching grid")
}

/// Frame gradient `∂_θ f + i (1/sinθ) ∂_φ f` as a spin-1 field, evaluated
/// spectrally (finite at every node, no division by `sinθ`).
pub fn grad_frame(f: &ScalarField) -> SpinField {
    let c = f.coeffs().map_degree(1, |l| -eth_eigenvalue(l, 0));
    SpinField::from_coeffs(f.grid(), &c).expect("matching grid")
}

/// Round-metric first and second covariant derivatives of a scalar in the
/// orthonormal frame `(e_θ, e_φ)`.
#[derive(Clone, Debug)]
pub struct FrameDerivatives {
    pub d_theta: Vec<f64>,
    pub d_phi: Vec<f64>,
    pub h_tt: Vec<f64>,
    pub h_tp: Vec<f64>,
    pub h_pp: Vec<f64>,
}

impl FrameDerivatives {
    pub fn gradient(&self, i: usize) -> [f64; 2] {
        [self.d_theta[i], self.d_phi[i]]
    }
    pub fn hessian(&self, i: usize) -> [[f64; 2]; 2] {
        [[self.h_tt[i], self.h_tp[i]], [self.h_tp[i], self.h_pp[i]]]
    }
}

/// Gradient and Hessian of a spin-0 coefficient set on `grid`:
/// `Hess(m,m) = eth eth f` and `tr Hess = Δf` with `m = e_θ + i e_φ`.
pub fn frame_derivatives(grid: &Arc<Grid>, c: &SpectralCoeffs) -> FrameDerivatives {
    let d1 = c.map_degree(1, |l| eth_eigenvalue(l, 0));
    let d2 = c.map_degree(2, |l| eth_eigenvalue(l, 0) * eth_eigenvalue(l, 1));
    let lap = c.map_degree(0, |l| -((l * (l + 1)) as f64));
    let g1 = SpinField::from_coeffs(grid, &d1).expect("matching grid");
    let g2 = SpinField::from_coeffs(grid, &d2).expect("matching grid");
    let gl = ScalarField::from_coeffs(grid, &lap).expect("matching grid");
    let n = grid.len();
    let mut out = FrameDerivatives {
        d_theta: vec![0.0; n],
        d_phi: vec![0.0; n],
        h_tt: vec![0.0; n],
        h_tp: vec![0.0; n],
        h_pp: vec![0.0; n],
    };
    for i in 0..n {
        let u = g1.values()[i];
        let h = g2.values()[i];
        let tr = gl.values()[i];
        out.d_theta[i] = -u.re;
        out.d_phi[i] = -u.im;
        out.h_tt[i] = 0.5 * (tr + h.re);
        out.h_pp[i] = 0.5 * (tr - h.re);
        out.h_tp[i] = 0.5 * h.im;
    }
    out
}

/// Chart derivative `∂_z f` at every node, in the given stereographic chart.
/// Nodes outside the chart get `NaN`.
pub fn chart_dz(f: &ScalarField, chart: Chart) -> Vec<Complex64> {
    let grid = f.grid();
    let grad = grad_frame(f);
    (0..grid.len())
        .map(|i| {
            let (t, p) = grid.theta_phi(i);
            if !chart.contains(t) {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            let g = grad.values()[i];
            let conj = Complex64::new(g.re, -g.im);
            let factor = chart.log_factor(t).exp();
            match chart {
                Chart::North => -0.5 * factor * Complex64::from_polar(1.0, p) * conj,
                Chart::South => 0.5 * factor * Complex64::from_polar(1.0, -p) * conj,
            }
        })
        .collect()
}
