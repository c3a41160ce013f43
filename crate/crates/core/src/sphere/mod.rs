//! Discretisation of the round sphere: collocation grid, scalar and
//! spin-weighted harmonic transforms, differential operators, quadrature,
//! point evaluation and the two stereographic charts.

mod coeffs;
mod eval;
mod field;
mod grid;
mod ops;
mod transform;
pub mod wigner;

use thiserror::Error;

pub use coeffs::{complex_to_real, real_to_complex, SpectralCoeffs};
pub use eval::{direction_to_angles, eval_at_points, eval_real_many, eval_spin_at_points, legendre_row};
pub use field::{ScalarField, SpinField};
pub use grid::{gauss_legendre, Chart, ChartNode, Grid, Vec3, MAX_SPIN};
pub use ops::{
    chart_dz, eth, eth_bar, eth_bar_coeffs, eth_bar_eigenvalue, eth_coeffs, eth_eigenvalue, frame_derivatives,
    grad_frame, integrate, integrate_values, laplace_s2, FrameDerivatives,
};
pub use transform::{analyze, synthesize};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphereError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("size mismatch: expected {expected} values, got {got}")]
    Size { expected: usize, got: usize },
    #[error("spin weight {0} outside the supported range -2..=2")]
    Spin(i32),
}

/// Complex `Y_lm(θ, φ)` (orthonormal, Condon–Shortley phase).
pub fn sph_harm(l: usize, m: i64, theta: f64, phi: f64) -> num_complex::Complex64 {
    spin_harm(0, l, m, theta, phi)
}

/// Spin-weighted `sY_lm(θ, φ)` in this crate's convention.
pub fn spin_harm(spin: i32, l: usize, m: i64, theta: f64, phi: f64) -> num_complex::Complex64 {
    if l < spin.unsigned_abs() as usize || m.unsigned_abs() as usize > l {
        return num_complex::Complex64::new(0.0, 0.0);
    }
    let col = wigner::wigner_d_column(l, m, -(spin as i64), theta);
    let sign = if spin.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
    num_complex::Complex64::from_polar(sign * norm * col[l], m as f64 * phi)
}

/// Real orthonormal harmonic matching [`complex_to_real`]'s basis.
pub fn real_sph_harm(l: usize, m: i64, theta: f64, phi: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => sph_harm(l, 0, theta, phi).re,
        std::cmp::Ordering::Greater => s2 * sign * sph_harm(l, m, theta, phi).re,
        std::cmp::Ordering::Less => s2 * sign * sph_harm(l, -m, theta, phi).im,
    }
}

#[cfg(test)]
mod tests;
