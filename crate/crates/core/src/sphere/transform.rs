//! Spin-weighted spherical-harmonic transforms on a [`Grid`]: FFT along each
//! latitude ring, Gauss–Legendre quadrature against tabulated Wigner-d rows.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::coeffs::SpectralCoeffs;
use super::grid::{Grid, MAX_SPIN};
use super::SphereError;
use crate::exec;

fn check_spin(spin: i32) -> Result<(), SphereError> {
    if spin.abs() > MAX_SPIN {
        return Err(SphereError::Spin(spin));
    }
    Ok(())
}

/// Grid values → coefficients up to `grid.l_max()`.
pub fn analyze(grid: &Grid, spin: i32, values: &[Complex64]) -> Result<SpectralCoeffs, SphereError> {
    check_spin(spin)?;
    if values.len() != grid.len() {
        return Err(SphereError::Size { expected: grid.len(), got: values.len() });
    }
    let (n_lat, n_lon, l_max) = (grid.n_lat(), grid.n_lon(), grid.l_max());
    let width = 2 * l_max + 1;
    let scale = 2.0 * PI / n_lon as f64;
    let fft = grid.fft_forward();
    let rings = exec::map_range(grid.exec(), n_lat, |j| {
        let mut buf = values[j * n_lon..(j + 1) * n_lon].to_vec();
        fft.process(&mut buf);
        let w = grid.lat_weights()[j] * scale;
        (0..width)
            .map(|mi| {
                let m = mi as i64 - l_max as i64;
                buf[m.rem_euclid(n_lon as i64) as usize] * w
            })
            .collect::<Vec<_>>()
    });
    let table = grid.spin_table(spin);
    let n_coeffs = grid.n_coeffs();
    let l_min = spin.unsigned_abs() as usize;
    let data = exec::map_range(grid.exec(), n_coeffs, |idx| {
        let l = (idx as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
        if l < l_min {
            return Complex64::new(0.0, 0.0);
        }
        let m = idx as i64 - (l * l + l) as i64;
        let mi = (m + l_max as i64) as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, ring) in rings.iter().enumerate() {
            acc += ring[mi] * table[j * n_coeffs + idx];
        }
        acc
    });
    SpectralCoeffs::from_vec(l_max, spin, data)
}

/// Coefficients → grid values.
pub fn synthesize(grid: &Grid, coeffs: &SpectralCoeffs) -> Result<Vec<Complex64>, SphereError> {
    let spin = coeffs.spin();
    check_spin(spin)?;
    if coeffs.l_max() != grid.l_max() {
        return Err(SphereError::Config(format!(
            "coefficients truncated at {} but grid resolves {}",
            coeffs.l_max(),
            grid.l_max()
        )));
    }
    let (n_lon, l_max) = (grid.n_lon(), grid.l_max());
    let table = grid.spin_table(spin);
    let n_coeffs = grid.n_coeffs();
    let l_min = spin.unsigned_abs() as usize;
    let a = coeffs.data();
    let fft = grid.fft_inverse();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    exec::for_each_chunk(grid.exec(), &mut out, n_lon, |j, ring| {
        let row = &table[j * n_coeffs..(j + 1) * n_coeffs];
        for m in -(l_max as i64)..=(l_max as i64) {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in (m.unsigned_abs() as usize).max(l_min)..=l_max {
                let idx = ((l * l + l) as i64 + m) as usize;
                acc += a[idx] * row[idx];
            }
            ring[m.rem_euclid(n_lon as i64) as usize] = acc;
        }
        fft.process(ring);
    });
    Ok(out)
}
