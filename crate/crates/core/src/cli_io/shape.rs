//! Initial surfaces as radial graphs over the unit sphere.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ShapeSpec;
use crate::error::Result;
use crate::geometry::Immersion;
use crate::sphere::{real_sph_harm, Grid, ScalarField};

/// Radius function `r` of the graph `r(y) y` described by `spec`.
pub fn shape_radius(spec: &ShapeSpec, grid: &Arc<Grid>, seed: u64) -> ScalarField {
    match spec {
        ShapeSpec::Sphere => ScalarField::constant(grid, 1.0),
        ShapeSpec::ShBump(b) => ScalarField::from_fn(grid, |t, p| 1.0 + b.amplitude * real_sph_harm(b.l, b.m, t, p)),
        ShapeSpec::MultiBump(bs) => ScalarField::from_fn(grid, |t, p| {
            1.0 + bs.iter().map(|b| b.amplitude * real_sph_harm(b.l, b.m, t, p)).sum::<f64>()
        }),
        ShapeSpec::EllipsoidLike(a) => {
            ScalarField::from_points(grid, |y| a[0] * y[0] * y[0] + a[1] * y[1] * y[1] + a[2] * y[2] * y[2])
        }
        ShapeSpec::Random { l_content, amplitude } => {
            let f = random_field(grid, *l_content, seed);
            let s = amplitude / f.max_abs();
            f.map(|v| 1.0 + s * v)
        }
    }
}

/// Mean-free field with uniform real coefficients on `1 ≤ l ≤ l_content`.
pub fn random_field(grid: &Arc<Grid>, l_content: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = vec![0.0; grid.n_coeffs()];
    for v in r.iter_mut().take((l_content.min(grid.l_max()) + 1).pow(2)).skip(1) {
        *v = rng.gen_range(-1.0..1.0);
    }
    ScalarField::from_real_coeffs(grid, &r).expect("grid-sized")
}

/// Build `Φ = r(y) y` on the default grid of degree `l_max`. The result is
/// neither conformal nor normalized.
pub fn generate_shape(spec: &ShapeSpec, l_max: usize, seed: u64) -> Result<Immersion> {
    let grid = Grid::new(l_max)?;
    let r = shape_radius(spec, &grid, seed);
    let pts: Vec<[f64; 3]> =
        grid.points().iter().zip(r.values()).map(|(y, r)| [r * y[0], r * y[1], r * y[2]]).collect();
    Immersion::from_points(&grid, &pts)
}
