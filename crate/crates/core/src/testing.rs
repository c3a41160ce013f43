//! Shared fixtures for unit tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Immersion;
use crate::sphere::{real_sph_harm, Grid, ScalarField, SpectralCoeffs};

/// `(1 + ε Y_lm) y`, a radial graph over the unit sphere.
pub fn bumped(grid: &Arc<Grid>, eps: f64, l: usize, m: i64) -> Immersion {
    let pts: Vec<[f64; 3]> = grid
        .nodes()
        .iter()
        .zip(grid.points())
        .map(|(&(t, p), y)| {
            let r = 1.0 + eps * real_sph_harm(l, m, t, p);
            [r * y[0], r * y[1], r * y[2]]
        })
        .collect();
    Immersion::from_points(grid, &pts).unwrap()
}

/// Random real field with modes up to `l_content`, unit-scale amplitudes.
pub fn random_field(grid: &Arc<Grid>, l_content: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_max = grid.l_max();
    let mut r = vec![0.0; (l_max + 1) * (l_max + 1)];
    for v in r.iter_mut().take((l_content.min(l_max) + 1).pow(2)) {
        *v = rng.gen_range(-1.0..1.0);
    }
    ScalarField::from_real_coeffs(grid, &r).unwrap()
}

pub fn random_spin(l_max: usize, spin: i32, l_content: usize, seed: u64) -> SpectralCoeffs {
    use num_complex::Complex64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = SpectralCoeffs::zeros(l_max, spin);
    for l in spin.unsigned_abs() as usize..=l_content.min(l_max) {
        for m in -(l as i64)..=l as i64 {
            c.set(l, m, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    c
}

/// Radial graph without reflection symmetries.
pub fn lopsided(grid: &Arc<Grid>) -> Immersion {
    let pts: Vec<[f64; 3]> = grid
        .nodes()
        .iter()
        .zip(grid.points())
        .map(|(&(t, p), y)| {
            let r = 1.0
                + 0.04 * real_sph_harm(2, 1, t, p)
                + 0.03 * real_sph_harm(3, -2, t, p)
                + 0.02 * real_sph_harm(4, 3, t, p);
            [r * y[0], r * y[1], r * y[2]]
        })
        .collect();
    Immersion::from_points(grid, &pts).unwrap()
}
