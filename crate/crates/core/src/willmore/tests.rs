use super::*;
use crate::geometry::{build_geometry, energies, Immersion};
use crate::sphere::{Grid, ScalarField};
use crate::testing::{bumped, random_field};

fn max_norm(f: &[ScalarField; 3]) -> f64 {
    (0..f[0].values().len()).map(|i| (0..3).map(|k| f[k].values()[i].powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

#[test]
fn spheres_are_willmore() {
    let g = Grid::dealiased(12).unwrap();
    for r in [1.0, 0.5, 3.0] {
        let im = Immersion::unit_sphere(&g).affine(r, [0.2, 0.0, -1.0]).unwrap();
        let wf = willmore_operator(&im).unwrap();
        assert!(max_norm(&wf.dw) < 1e-8);
        let div = willmore_divergence_form(&im).unwrap();
        assert!(max_norm(&div) < 1e-7);
        let res = noether_residuals(&im, &wf);
        assert!(res.iter().all(|r| *r < 1e-8), "{res:?}");
        let test = [random_field(&g, 6, 1), random_field(&g, 6, 2), random_field(&g, 6, 3)];
        assert!(weak_pairing(&im, &test).abs() < 1e-8);
    }
}

#[test]
fn non_conformal_input_is_a_gauge_error() {
    let g = Grid::dealiased(32).unwrap();
    let pts: Vec<[f64; 3]> = g
        .points()
        .iter()
        .map(|y| {
            let v = [y[0] + 0.2 * y[1], y[1], y[2]];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        })
        .collect();
    let im = Immersion::from_points(&g, &pts).unwrap();
    assert!(matches!(willmore_operator(&im), Err(Error::Gauge(_))));
    assert!(matches!(willmore_divergence_form(&im), Err(Error::Gauge(_))));
    // The general-metric path still sees a round sphere.
    let resid = max_norm(&willmore_fields(&im).dw);
    assert!(resid < 1e-6, "{resid}");
}

#[test]
fn gradient_matches_energy_finite_differences() {
    let g = Grid::dealiased(24).unwrap();
    let im = bumped(&g, 0.05, 2, 2);
    let wf = willmore_fields(&im);
    let h = 1e-5;
    for seed in 0..5 {
        let phi = random_field(&g, 4, 100 + seed);
        let pair: Vec<f64> = (0..g.len()).map(|i| wf.dw_sc.values()[i] * phi.values()[i]).collect();
        let analytic = im.integrate_g(&pair);
        let plus: Vec<f64> = phi.values().iter().map(|v| h * v).collect();
        let minus: Vec<f64> = phi.values().iter().map(|v| -h * v).collect();
        let wp = energies(&im.displaced_normally(&plus).unwrap()).w0;
        let wm = energies(&im.displaced_normally(&minus).unwrap()).w0;
        let fd = (wp - wm) / (2.0 * h);
        assert!((analytic - fd).abs() <= 1e-3 * fd.abs(), "seed {seed}: {analytic} vs {fd}");
        // The weak pairing with the vector test function φN gives the same number.
        let test = [
            ScalarField::new(&g, (0..g.len()).map(|i| phi.values()[i] * im.normal_at(i)[0]).collect()).unwrap(),
            ScalarField::new(&g, (0..g.len()).map(|i| phi.values()[i] * im.normal_at(i)[1]).collect()).unwrap(),
            ScalarField::new(&g, (0..g.len()).map(|i| phi.values()[i] * im.normal_at(i)[2]).collect()).unwrap(),
        ];
        let weak = weak_pairing(&im, &test);
        assert!((weak - fd).abs() <= 1e-3 * fd.abs(), "weak {weak} vs {fd}");
    }
}

#[test]
fn weak_pairing_matches_strong_form() {
    let g = Grid::dealiased(32).unwrap();
    let im = bumped(&g, 0.05, 3, -2);
    let wf = willmore_fields(&im);
    let test = [random_field(&g, 8, 7), random_field(&g, 8, 8), random_field(&g, 8, 9)];
    let strong: Vec<f64> =
        (0..g.len()).map(|i| (0..3).map(|k| wf.dw[k].values()[i] * test[k].values()[i]).sum()).collect();
    let strong = im.integrate_g(&strong);
    let weak = weak_pairing(&im, &test);
    assert!((weak - strong).abs() <= 1e-5 * strong.abs());
    let consts = [ScalarField::constant(&g, 1.0), ScalarField::constant(&g, -2.0), ScalarField::constant(&g, 0.5)];
    assert!(weak_pairing(&im, &consts).abs() < 1e-9);
}

#[test]
fn divergence_form_agrees_and_converges() {
    let mut last = f64::INFINITY;
    for l in [16, 24, 32] {
        let g = Grid::dealiased(l).unwrap();
        let im = bumped(&g, 0.05, 2, 2);
        let wf = willmore_fields(&im);
        let d = form_discrepancy(&im, &wf);
        if l == 32 {
            assert!(d <= 1e-5, "discrepancy {d}");
        }
        assert!(d < last);
        last = d;
    }
}

#[test]
fn noether_residuals_vanish_and_converge() {
    let mut last = [f64::INFINITY; 4];
    for l in [16, 24, 32] {
        let g = Grid::dealiased(l).unwrap();
        let im = bumped(&g, 0.05, 2, 2);
        let r = noether_residuals(&im, &willmore_fields(&im));
        if l == 32 {
            assert!(r.iter().all(|v| *v <= 1e-6), "{r:?}");
        }
        for k in 0..4 {
            assert!(r[k] <= last[k].max(1e-12), "{l}: {r:?} vs {last:?}");
        }
        last = r;
    }
}

#[test]
fn tangency_and_q_term() {
    let g = Grid::dealiased(20).unwrap();
    let im = bumped(&g, 0.07, 3, 1);
    let wf = willmore_fields(&im);
    let wmax = wf.w_form.iter().flat_map(|w| w.iter().map(|v| dot(*v, *v).sqrt())).fold(0.0, f64::max);
    for (i, ng) in im.nodes().iter().enumerate() {
        let mut t = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                t += ng.g_inv[a][b] * dot(wf.w_form[i][a], ng.dphi[b]);
            }
        }
        assert!(t.abs() <= 1e-7 * wmax);
        let q = 2.0 * (ng.mean * ng.mean - ng.gauss) * ng.mean;
        assert!((wf.q_term.values()[i] - q).abs() < 1e-9);
        let d = wf.dw_at(i);
        let sc = wf.dw_sc.values()[i];
        let tangential = [d[0] - sc * ng.normal[0], d[1] - sc * ng.normal[1], d[2] - sc * ng.normal[2]];
        assert!(dot(tangential, tangential).sqrt() <= 1e-7 * sc.abs().max(1e-12));
    }
}

#[test]
fn inversion_preserves_energy() {
    let g = Grid::dealiased(32).unwrap();
    let im = bumped(&g, 0.05, 2, 1);
    let c = [3.0, 0.5, -0.5];
    let invert = |p: [f64; 3]| {
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        let r2 = dot(d, d);
        [d[0] / r2, d[1] / r2, d[2] / r2]
    };
    let inv = Immersion::from_points(&g, &im.positions().into_iter().map(invert).collect::<Vec<_>>()).unwrap();
    let (a, b) = (energies(&im).w0, energies(&inv).w0);
    assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    // An inverted round sphere is again round, hence Willmore.
    let s = Immersion::unit_sphere(&g);
    let pts: Vec<[f64; 3]> = s.positions().into_iter().map(invert).collect();
    let comp = |k: usize| ScalarField::new(&g, pts.iter().map(|p| p[k]).collect()).unwrap();
    let sinv = build_geometry([comp(0), comp(1), comp(2)]).unwrap();
    let wf = willmore_fields(&sinv);
    assert!(max_norm(&wf.dw) < 1e-5);
}
