use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::dot;
use super::wigner::{lm_index, wigner_d_column, wigner_d_direct};
use super::*;

fn random_real(l_max: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..(l_max + 1) * (l_max + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_spin(l_max: usize, spin: i32, seed: u64) -> SpectralCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = SpectralCoeffs::zeros(l_max, spin);
    for l in spin.unsigned_abs() as usize..=l_max {
        for m in -(l as i64)..=l as i64 {
            c.set(l, m, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    c
}

#[test]
fn weights_sum_to_sphere_area() {
    for l in [2, 7, 16, 33] {
        let g = Grid::new(l).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s / (4.0 * PI) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn small_degree_is_rejected() {
    assert!(matches!(Grid::new(1), Err(SphereError::Config(_))));
    assert!(Grid::with_lat_count(8, 5).is_err());
}

#[test]
fn every_node_in_some_chart() {
    let g = Grid::new(12).unwrap();
    for (t, _) in g.nodes() {
        assert!(Chart::North.contains(t) || Chart::South.contains(t));
    }
}

#[test]
fn wigner_recurrence_matches_explicit_sum() {
    for &beta in &[0.3, 1.1, 2.0, 3.0] {
        for m in -4i64..=4 {
            for k in -2i64..=2 {
                let col = wigner_d_column(9, m, k, beta);
                for l in m.abs().max(k.abs())..=9 {
                    let d = wigner_d_direct(l, m, k, beta);
                    assert!((col[l as usize] - d).abs() < 1e-12, "l={l} m={m} k={k}");
                }
            }
        }
    }
}

#[test]
fn low_degree_harmonics_have_condon_shortley_phase() {
    let (t, p) = (0.7, 1.3);
    let y10 = sph_harm(1, 0, t, p);
    assert!((y10.re - (3.0 / (4.0 * PI)).sqrt() * t.cos()).abs() < 1e-14);
    let y11 = sph_harm(1, 1, t, p);
    let expect = Complex64::from_polar(-(3.0 / (8.0 * PI)).sqrt() * t.sin(), p);
    assert!((y11 - expect).norm() < 1e-14);
    let y22 = sph_harm(2, 2, t, p);
    let expect = Complex64::from_polar(0.25 * (15.0 / (2.0 * PI)).sqrt() * t.sin().powi(2), 2.0 * p);
    assert!((y22 - expect).norm() < 1e-14);
}

#[test]
fn spin_harmonics_orthonormal() {
    let g = Grid::new(6).unwrap();
    for s in -2..=2 {
        for (l1, m1) in [(2usize, 1i64), (3, -2), (6, 0)] {
            for (l2, m2) in [(2usize, 1i64), (3, -2), (6, 0), (4, 1)] {
                let v: Complex64 = (0..g.len())
                    .map(|i| {
                        let (t, p) = g.theta_phi(i);
                        spin_harm(s, l1, m1, t, p) * spin_harm(s, l2, m2, t, p).conj() * g.weight(i)
                    })
                    .sum();
                let expect = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert!((v - expect).norm() < 1e-12, "s={s} ({l1},{m1}) ({l2},{m2})");
            }
        }
    }
}

#[test]
fn constant_has_only_monopole() {
    let g = Grid::new(8).unwrap();
    let f = ScalarField::constant(&g, 1.0);
    let c = f.coeffs();
    assert!((c.get(0, 0).re - (4.0 * PI).sqrt()).abs() < 1e-12);
    let rest: f64 = c.iter().filter(|(l, _, _)| *l > 0).map(|(_, _, a)| a.norm()).sum();
    assert!(rest < 1e-12);
}

#[test]
fn y32_has_single_coefficient() {
    let g = Grid::new(8).unwrap();
    let vals: Vec<Complex64> = g.nodes().iter().map(|&(t, p)| sph_harm(3, 2, t, p)).collect();
    let c = analyze(&g, 0, &vals).unwrap();
    for (l, m, a) in c.iter() {
        let expect = if (l, m) == (3, 2) { 1.0 } else { 0.0 };
        assert!((a - expect).norm() < 1e-10);
    }
    let f = ScalarField::from_fn(&g, |t, p| real_sph_harm(3, 2, t, p));
    let r = f.real_coeffs();
    for (i, v) in r.iter().enumerate() {
        let expect = if i == lm_index(3, 2) { 1.0 } else { 0.0 };
        assert!((v - expect).abs() < 1e-10);
    }
}

#[test]
fn real_basis_round_trip() {
    let g = Grid::new(10).unwrap();
    let r = random_real(10, 3);
    let f = ScalarField::from_real_coeffs(&g, &r).unwrap();
    let back = f.real_coeffs();
    for (a, b) in r.iter().zip(&back) {
        assert!((a - b).abs() < 1e-12);
    }
    // Real-basis functions evaluate to the same values.
    let (t, p) = (1.0, 2.0);
    let direct: f64 = (0..=10usize)
        .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
        .map(|(l, m)| r[lm_index(l, m)] * real_sph_harm(l, m, t, p))
        .sum();
    let via = eval_at_points(&f, &[(t, p)])[0];
    assert!((direct - via).abs() < 1e-12);
}

#[test]
fn roundtrip_random_band_limited() {
    let g = Grid::new(16).unwrap();
    let f = ScalarField::from_real_coeffs(&g, &random_real(16, 11)).unwrap();
    let fresh = ScalarField::new(&g, f.values().to_vec()).unwrap();
    let again = ScalarField::from_coeffs(&g, fresh.coeffs()).unwrap();
    let err = f.values().iter().zip(again.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-10 * f.max_abs());
    for s in -2..=2 {
        let c = random_spin(16, s, (5 + s) as u64);
        let sf = SpinField::from_coeffs(&g, &c).unwrap();
        let back = sf.analyze();
        for (a, b) in c.data().iter().zip(back.data()) {
            assert!((a - b).norm() < 1e-10, "spin {s}");
        }
    }
}

#[test]
fn size_and_spin_errors() {
    let g = Grid::new(4).unwrap();
    assert!(matches!(ScalarField::new(&g, vec![0.0; 3]), Err(SphereError::Size { .. })));
    assert!(matches!(SpinField::new(&g, 3, vec![Complex64::new(0.0, 0.0); g.len()]), Err(SphereError::Spin(3))));
    let c = SpectralCoeffs::zeros(5, 0);
    assert!(matches!(synthesize(&g, &c), Err(SphereError::Config(_))));
    let two = SpinField::zeros(&g, 2);
    assert!(matches!(eth(&two), Err(SphereError::Spin(3))));
    let m2 = SpinField::zeros(&g, -2);
    assert!(matches!(eth_bar(&m2), Err(SphereError::Spin(-3))));
}

#[test]
fn gradient_of_cos_theta() {
    let g = Grid::new(8).unwrap();
    let f = ScalarField::from_fn(&g, |t, _| t.cos());
    let d = grad_frame(&f);
    for i in 0..g.len() {
        let (t, _) = g.theta_phi(i);
        assert!((d.values()[i].re + t.sin()).abs() < 1e-10);
        assert!(d.values()[i].im.abs() < 1e-10);
    }
    let c = ScalarField::constant(&g, 2.5);
    assert!(grad_frame(&c).values().iter().all(|v| v.norm() < 1e-12));
}

#[test]
fn gradient_matches_finite_differences() {
    let g = Grid::new(12).unwrap();
    let f = ScalarField::from_real_coeffs(&g, &random_real(12, 21)).unwrap();
    let d = grad_frame(&f);
    let h = 1e-5;
    for i in (0..g.len()).step_by(7) {
        let (t, p) = g.theta_phi(i);
        let v = eval_at_points(&f, &[(t + h, p), (t - h, p), (t, p + h), (t, p - h)]);
        let ft = (v[0] - v[1]) / (2.0 * h);
        let fp = (v[2] - v[3]) / (2.0 * h) / t.sin();
        assert!((d.values()[i].re - ft).abs() < 1e-6);
        assert!((d.values()[i].im - fp).abs() < 1e-6);
    }
}

#[test]
fn frame_hessian_matches_finite_differences() {
    let g = Grid::new(10).unwrap();
    let f = ScalarField::from_real_coeffs(&g, &random_real(10, 8)).unwrap();
    let fd = frame_derivatives(&g, f.coeffs());
    let h = 1e-4;
    for i in (0..g.len()).step_by(11) {
        let (t, p) = g.theta_phi(i);
        let pts = [
            (t, p),
            (t + h, p),
            (t - h, p),
            (t, p + h),
            (t, p - h),
            (t + h, p + h),
            (t + h, p - h),
            (t - h, p + h),
            (t - h, p - h),
        ];
        let v = eval_at_points(&f, &pts);
        let (s, c) = t.sin_cos();
        let f_t = (v[1] - v[2]) / (2.0 * h);
        let f_tt = (v[1] - 2.0 * v[0] + v[2]) / (h * h);
        let f_pp = (v[3] - 2.0 * v[0] + v[4]) / (h * h);
        let f_tp = (v[5] - v[6] - v[7] + v[8]) / (4.0 * h * h);
        let f_p = (v[3] - v[4]) / (2.0 * h);
        // Covariant Hessian in the orthonormal frame of the round metric.
        let h_tt = f_tt;
        let h_pp = f_pp / (s * s) + c / s * f_t;
        let h_tp = (f_tp - c / s * f_p) / s;
        let tol = |x: f64| 1e-5 * x.abs().max(1.0);
        assert!((fd.h_tt[i] - h_tt).abs() < tol(h_tt));
        assert!((fd.h_pp[i] - h_pp).abs() < tol(h_pp));
        assert!((fd.h_tp[i] - h_tp).abs() < tol(h_tp));
        assert!((fd.d_theta[i] - f_t).abs() < tol(f_t));
    }
}

#[test]
fn laplacian_eigenfunctions() {
    let g = Grid::new(8).unwrap();
    assert!(laplace_s2(&ScalarField::constant(&g, 1.0)).max_abs() < 1e-12);
    let f = ScalarField::from_fn(&g, |t, _| t.cos());
    let lf = laplace_s2(&f);
    for (a, b) in lf.values().iter().zip(f.values()) {
        assert!((a + 2.0 * b).abs() < 1e-12);
    }
    for (l, m) in [(3usize, 2i64), (5, -4), (8, 0)] {
        let y = ScalarField::from_fn(&g, |t, p| real_sph_harm(l, m, t, p));
        let ly = laplace_s2(&y);
        let k = (l * (l + 1)) as f64;
        for (a, b) in ly.values().iter().zip(y.values()) {
            assert!((a + k * b).abs() < 1e-10);
        }
    }
}

#[test]
fn laplacian_is_symmetric() {
    let g = Grid::new(14).unwrap();
    let f = ScalarField::from_real_coeffs(&g, &random_real(14, 1)).unwrap();
    let h = ScalarField::from_real_coeffs(&g, &random_real(14, 2)).unwrap();
    let a = integrate(
        &ScalarField::new(&g, f.values().iter().zip(laplace_s2(&h).values()).map(|(x, y)| x * y).collect()).unwrap(),
    );
    let b = integrate(
        &ScalarField::new(&g, h.values().iter().zip(laplace_s2(&f).values()).map(|(x, y)| x * y).collect()).unwrap(),
    );
    let nf = f.coeffs().norm();
    let nh = h.coeffs().norm();
    assert!((a - b).abs() <= 1e-9 * nf * nh);
}

#[test]
fn integrals() {
    let g = Grid::new(8).unwrap();
    assert!((integrate(&ScalarField::constant(&g, 1.0)) - 4.0 * PI).abs() < 1e-12);
    assert!(integrate(&ScalarField::from_fn(&g, |t, _| t.cos())).abs() < 1e-12);
    let c2 = integrate(&ScalarField::from_fn(&g, |t, _| t.cos().powi(2)));
    assert!((c2 - 4.0 * PI / 3.0).abs() < 1e-10);
}

fn rotation_rep(g: &std::sync::Arc<Grid>, axis: usize) -> SpinField {
    let v: Vec<Vec3> = g
        .points()
        .iter()
        .map(|y| match axis {
            0 => [0.0, -y[2], y[1]],
            1 => [y[2], 0.0, -y[0]],
            _ => [-y[1], y[0], 0.0],
        })
        .collect();
    SpinField::from_tangent(g, &v).unwrap()
}

#[test]
fn eth_annihilates_conformal_killing_fields() {
    let g = Grid::new(8).unwrap();
    for axis in 0..3 {
        let u = rotation_rep(&g, axis);
        let d = eth(&u).unwrap();
        assert!(d.values().iter().all(|v| v.norm() < 1e-10));
        // The lowering operator does not: it produces the rotation's (nonzero) curl.
        assert!(eth_bar(&u).unwrap().l2_norm() > 1.0);
    }
    // Dilation fields e_a - y_a y.
    for a in 0..3 {
        let v: Vec<Vec3> = g
            .points()
            .iter()
            .map(|y| {
                let mut e = [-y[a] * y[0], -y[a] * y[1], -y[a] * y[2]];
                e[a] += 1.0;
                e
            })
            .collect();
        let u = SpinField::from_tangent(&g, &v).unwrap();
        assert!(eth(&u).unwrap().values().iter().all(|v| v.norm() < 1e-10));
    }
    let z = SpinField::zeros(&g, 1);
    assert!(eth(&z).unwrap().l2_norm() == 0.0);
}

#[test]
fn eth_of_scalar_is_minus_frame_gradient() {
    let g = Grid::new(10).unwrap();
    let f = ScalarField::from_real_coeffs(&g, &random_real(10, 9)).unwrap();
    let sf = SpinField::new(&g, 0, f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap();
    let e = eth(&sf).unwrap();
    let gr = grad_frame(&f);
    for (a, b) in e.values().iter().zip(gr.values()) {
        assert!((a + b).norm() < 1e-10);
    }
    let lap = eth_bar(&e).unwrap();
    let l2 = laplace_s2(&f);
    for (a, b) in lap.values().iter().zip(l2.values()) {
        assert!((a.re - b).abs() < 1e-9 && a.im.abs() < 1e-9);
    }
}

/// Least-squares fit of `(-(∂_θ + i ∂_φ / sinθ) + s cotθ) η` against the raised
/// mode, with centred differences on a dense 64 × 128 grid restricted to the
/// north chart.
fn chart_least_squares_eigenvalue(spin: i32, l: usize, m: i64, raise: bool) -> f64 {
    let (nt, np) = (64usize, 128usize);
    let h = 1e-5;
    let s = spin as f64;
    let target_spin = if raise { spin + 1 } else { spin - 1 };
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for j in 0..nt {
        let t = PI / 3.0 + (2.0 * PI / 3.0 - 0.05) * (j as f64 + 0.5) / nt as f64;
        if !Chart::North.contains(t) {
            continue;
        }
        for k in 0..np {
            let p = 2.0 * PI * k as f64 / np as f64;
            let f = |tt: f64, pp: f64| spin_harm(spin, l, m, tt, pp);
            let dt = (f(t + h, p) - f(t - h, p)) / (2.0 * h);
            let dp = (f(t, p + h) - f(t, p - h)) / (2.0 * h);
            let i = Complex64::new(0.0, 1.0);
            let cot = t.cos() / t.sin();
            let op = if raise {
                -(dt + i * dp / t.sin() - s * cot * f(t, p))
            } else {
                -(dt - i * dp / t.sin() + s * cot * f(t, p))
            };
            let y = spin_harm(target_spin, l, m, t, p);
            num += op * y.conj();
            den += y.norm_sqr();
        }
    }
    assert!((num / den).im.abs() < 1e-6);
    (num / den).re
}

#[test]
fn eth_eigenvalues_match_chart_least_squares() {
    for (s, l, m) in [(0, 3usize, 1i64), (1, 2, -1), (1, 4, 2), (-1, 3, 0), (0, 5, -3)] {
        let oracle_up = chart_least_squares_eigenvalue(s, l, m, true);
        assert!((oracle_up - eth_eigenvalue(l, s)).abs() < 1e-6, "raise s={s} l={l}");
        let oracle_down = chart_least_squares_eigenvalue(s, l, m, false);
        assert!((oracle_down - eth_bar_eigenvalue(l, s)).abs() < 1e-6, "lower s={s} l={l}");
        // And the discrete operator maps the mode exactly onto the raised mode.
        let g = Grid::new(6).unwrap();
        let mut c = SpectralCoeffs::zeros(6, s);
        c.set(l, m, Complex64::new(1.0, 0.0));
        let e = eth(&SpinField::from_coeffs(&g, &c).unwrap()).unwrap().analyze();
        for (ll, mm, a) in e.iter() {
            let expect = if (ll, mm) == (l, m) { eth_eigenvalue(l, s) } else { 0.0 };
            assert!((a - expect).norm() < 1e-10);
        }
    }
}

#[test]
fn eth_adjointness() {
    let g = Grid::new(12).unwrap();
    for s in -2..=1 {
        let f = SpinField::from_coeffs(&g, &random_spin(12, s, (40 + s) as u64)).unwrap();
        let h = SpinField::from_coeffs(&g, &random_spin(12, s + 1, (50 + s) as u64)).unwrap();
        let lhs = eth(&f).unwrap().inner(&h);
        let rhs = -f.inner(&eth_bar(&h).unwrap());
        assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0), "s={s}");
    }
}

#[test]
fn frame_rotation_phase() {
    // V·(e_θ + i e_φ) rotated by χ picks up e^{-iχ}: check via the tangent round trip.
    let g = Grid::new(6).unwrap();
    let u = rotation_rep(&g, 0);
    let back = SpinField::from_tangent(&g, &u.to_tangent()).unwrap();
    for (a, b) in u.values().iter().zip(back.values()) {
        assert!((a - b).norm() < 1e-14);
    }
    let chi: f64 = 0.4;
    for i in 0..g.len() {
        let (et, ep) = (g.e_theta(i), g.e_phi(i));
        let (c, s) = (chi.cos(), chi.sin());
        let e1 = [c * et[0] + s * ep[0], c * et[1] + s * ep[1], c * et[2] + s * ep[2]];
        let e2 = [-s * et[0] + c * ep[0], -s * et[1] + c * ep[1], -s * et[2] + c * ep[2]];
        let v = u.to_tangent()[i];
        let rotated = Complex64::new(dot(v, e1), dot(v, e2));
        assert!((rotated - Complex64::from_polar(1.0, -chi) * u.values()[i]).norm() < 1e-14);
    }
}

#[test]
fn point_evaluation() {
    let g = Grid::new(10).unwrap();
    let f = ScalarField::from_real_coeffs(&g, &random_real(10, 4)).unwrap();
    let at_nodes = eval_at_points(&f, &g.nodes());
    for (a, b) in at_nodes.iter().zip(f.values()) {
        assert!((a - b).abs() < 1e-10);
    }
    let y10 = ScalarField::from_fn(&g, |t, p| real_sph_harm(1, 0, t, p));
    assert!(eval_at_points(&y10, &[(PI / 2.0, 0.0)])[0].abs() < 1e-10);

    // Dense summation through the independent Wigner-d path.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let r = f.real_coeffs();
    let pts: Vec<(f64, f64)> = (0..40).map(|_| (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI))).collect();
    let fast = eval_at_points(&f, &pts);
    for (k, &(t, p)) in pts.iter().enumerate() {
        let slow: f64 = (0..=10usize)
            .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
            .map(|(l, m)| r[lm_index(l, m)] * real_sph_harm(l, m, t, p))
            .sum();
        assert!((fast[k] - slow).abs() < 1e-8);
    }
    let c = random_spin(10, 2, 3);
    let sf = SpinField::from_coeffs(&g, &c).unwrap();
    let ev = eval_spin_at_points(&c, &g.nodes()[..20]);
    for (a, b) in ev.iter().zip(sf.values()) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn chart_derivatives_agree_on_overlap() {
    let g = Grid::new(16).unwrap();
    let f = ScalarField::from_real_coeffs(&g, &random_real(16, 6)).unwrap();
    let dz = chart_dz(&f, Chart::North);
    let dw = chart_dz(&f, Chart::South);
    for i in 0..g.len() {
        let (t, p) = g.theta_phi(i);
        let (inn, ins) = (Chart::North.contains(t), Chart::South.contains(t));
        assert_eq!(dz[i].re.is_nan(), !inn);
        assert_eq!(dw[i].re.is_nan(), !ins);
        if inn && ins {
            let z = Chart::North.coordinate(t, p);
            let w = Chart::South.coordinate(t, p);
            assert!((w * z - 1.0).norm() < 1e-12);
            let pulled = -dw[i] / (z * z);
            assert!((pulled - dz[i]).norm() <= 1e-8 * dz[i].norm().max(1.0));
        }
    }
    // Chart derivative of a coordinate function checked against the chart map.
    let x = ScalarField::from_points(&g, |y| y[0]);
    let dzx = chart_dz(&x, Chart::North);
    for i in 0..g.len() {
        let (t, p) = g.theta_phi(i);
        if !Chart::North.contains(t) {
            continue;
        }
        let z = Chart::North.coordinate(t, p);
        let h = 1e-6;
        let fx = |zz: Complex64| Chart::North.point(zz)[0];
        let d_re = (fx(z + h) - fx(z - h)) / (2.0 * h);
        let d_im = (fx(z + Complex64::new(0.0, h)) - fx(z - Complex64::new(0.0, h))) / (2.0 * h);
        let expect = 0.5 * Complex64::new(d_re, -d_im);
        assert!((expect - dzx[i]).norm() < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn roundtrip_property(seed in 0u64..10_000, l in 2usize..12, spin in -2i32..=2) {
        let g = Grid::new(l).unwrap();
        let c = random_spin(l, spin, seed);
        let f = SpinField::from_coeffs(&g, &c).unwrap();
        let back = f.analyze();
        let peak = f.values().iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let again = SpinField::from_coeffs(&g, &back).unwrap();
        for (a, b) in f.values().iter().zip(again.values()) {
            prop_assert!((a - b).norm() <= 1e-10 * peak.max(1.0));
        }
    }

    #[test]
    fn dealiased_grid_integrates_cubic_products(seed in 0u64..10_000) {
        let l = 8;
        let g = Grid::dealiased(l).unwrap();
        let fine = Grid::new(3 * l).unwrap();
        let r = random_real(l, seed);
        let f = ScalarField::from_real_coeffs(&g, &r).unwrap();
        let ff = ScalarField::from_real_coeffs(&fine, &{
            let mut v = vec![0.0; (3 * l + 1) * (3 * l + 1)];
            v[..r.len()].copy_from_slice(&r);
            v
        }).unwrap();
        let a = integrate(&f.map(|v| v * v * v));
        let b = integrate(&ff.map(|v| v * v * v));
        prop_assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
    }
}
