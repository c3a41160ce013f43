//! Pointwise harmonic summation at arbitrary `(θ, φ)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::coeffs::SpectralCoeffs;
use super::field::ScalarField;
use super::wigner::{lm_index, spin_theta_row};
use crate::exec::{self, Exec};

/// Orthonormal associated Legendre values `P̃_lm(cosθ)` for `0 <= m <= l <= l_max`
/// (Condon–Shortley phase), packed by [`lm_index`]; `Y_lm = P̃_lm e^{imφ}`.
pub fn legendre_row(l_max: usize, theta: f64, out: &mut [f64]) {
    let (st, ct) = theta.sin_cos();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st;
        }
        out[lm_index(m, m as i64)] = pmm;
        if m == l_max {
            break;
        }
        let mut p_prev = pmm;
        let mut p = ((2 * m + 3) as f64).sqrt() * ct * pmm;
        out[lm_index(m + 1, m as i64)] = p;
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let next = a * (ct * p - b * p_prev);
            p_prev = p;
            p = next;
            out[lm_index(l, m as i64)] = p;
        }
    }
}

/// Evaluate several real spin-0 expansions (same `l_max`) at each point.
/// Returns one vector per field.
pub fn eval_real_many(exec: Exec, fields: &[&SpectralCoeffs], pts: &[(f64, f64)]) -> Vec<Vec<f64>> {
    if fields.is_empty() {
        return Vec::new();
    }
    let l_max = fields[0].l_max();
    let rows = exec::map_range(exec, pts.len(), |p| {
        let (theta, phi) = pts[p];
        let mut leg = vec![0.0; (l_max + 1) * (l_max + 1)];
        legendre_row(l_max, theta, &mut leg);
        let mut out = vec![0.0; fields.len()];
        let step = Complex64::from_polar(1.0, phi);
        for (fi, c) in fields.iter().enumerate() {
            let a = c.data();
            let mut total = 0.0;
            for l in 0..=l_max {
                total += a[lm_index(l, 0)].re * leg[lm_index(l, 0)];
            }
            let mut rot = Complex64::new(1.0, 0.0);
            for m in 1..=l_max as i64 {
                rot *= step;
                let mut acc = Complex64::new(0.0, 0.0);
                for l in m as usize..=l_max {
                    acc += a[lm_index(l, m)] * leg[lm_index(l, m)];
                }
                total += 2.0 * (acc * rot).re;
            }
            out[fi] = total;
        }
        out
    });
    (0..fields.len()).map(|fi| rows.iter().map(|r| r[fi]).collect()).collect()
}

/// Evaluate a scalar field's band-limited expansion at arbitrary points.
pub fn eval_at_points(f: &ScalarField, pts: &[(f64, f64)]) -> Vec<f64> {
    eval_real_many(f.grid().exec(), &[f.coeffs()], pts).pop().unwrap_or_default()
}

/// Evaluate a spin-`s` expansion at arbitrary points (frame components).
pub fn eval_spin_at_points(c: &SpectralCoeffs, pts: &[(f64, f64)]) -> Vec<Complex64> {
    let l_max = c.l_max();
    pts.iter()
        .map(|&(theta, phi)| {
            let row = spin_theta_row(l_max, c.spin(), theta);
            c.iter().map(|(l, m, a)| a * row[lm_index(l, m)] * Complex64::from_polar(1.0, m as f64 * phi)).sum()
        })
        .collect()
}

/// Colatitude/longitude of a (not necessarily unit) Cartesian direction.
pub fn direction_to_angles(y: [f64; 3]) -> (f64, f64) {
    let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    let theta = (y[2] / r).clamp(-1.0, 1.0).acos();
    let phi = y[1].atan2(y[0]).rem_euclid(2.0 * PI);
    (theta, phi)
}
