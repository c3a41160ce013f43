//! The Willmore operator, its divergence form, the conserved 1-form `w`,
//! the distributional pairing and the Noether residuals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{axpy, cross, dot, hopf_residual, scale, Immersion};
use crate::sphere::{eth_bar_coeffs, eth_coeffs, ScalarField, SpinField, Vec3};

/// Largest Hopf residual accepted by the conformal-gauge entry points.
pub const CONFORMAL_TOLERANCE: f64 = 1e-4;

/// `δ𝒲` and related fields for one immersion.
#[derive(Clone, Debug)]
pub struct WillmoreFields {
    /// Cartesian components of `δ𝒲` (normal-valued).
    pub dw: [ScalarField; 3],
    /// `⟨δ𝒲, N⟩ = Δ_g h + 2(h² - K) h` with `h = ⟨H, N⟩`.
    pub dw_sc: ScalarField,
    /// Frame components `(w(e_θ), w(e_φ))` of the vector-valued 1-form
    /// `w = ∇H - 2(∇H)^⊤ - |H|² dΦ`.
    pub w_form: Vec<[Vec3; 2]>,
    /// `⟨Q(A°)H, N⟩ = |A°|²_g h`.
    pub q_term: ScalarField,
}

impl WillmoreFields {
    pub fn dw_at(&self, i: usize) -> Vec3 {
        [self.dw[0].values()[i], self.dw[1].values()[i], self.dw[2].values()[i]]
    }

    /// `∫ |δ𝒲|² dσ_g`.
    pub fn dissipation(&self, im: &Immersion) -> f64 {
        let sq: Vec<f64> = self.dw_sc.values().iter().map(|v| v * v).collect();
        im.integrate_g(&sq)
    }
}

/// Willmore operator on a (numerically) conformal immersion.
pub fn willmore_operator(im: &Immersion) -> Result<WillmoreFields> {
    check_conformal(im)?;
    Ok(willmore_fields(im))
}

pub(crate) fn check_conformal(im: &Immersion) -> Result<()> {
    let r = hopf_residual(im);
    if r > CONFORMAL_TOLERANCE {
        return Err(Error::Gauge(format!(
            "Hopf residual {r:.3e} exceeds {CONFORMAL_TOLERANCE:.1e}; immersion is not conformal"
        )));
    }
    Ok(())
}

/// Willmore operator for an arbitrary parametrization. The induced metric
/// enters through `Δ_g`, so no conformality is assumed.
pub fn willmore_fields(im: &Immersion) -> WillmoreFields {
    let grid = im.grid();
    let nodes = im.nodes();
    let h = ScalarField::new(grid, nodes.iter().map(|n| n.mean).collect()).expect("grid-sized");
    let dh = im.differential(h.coeffs());
    let lap = im.laplace_from(&dh);
    let n = grid.len();
    let mut dw = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut sc = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut w_form = Vec::with_capacity(n);
    for (i, ng) in nodes.iter().enumerate() {
        let hv = h.values()[i];
        let a0 = [
            [ng.a[0][0] - hv * ng.g[0][0], ng.a[0][1] - hv * ng.g[0][1]],
            [ng.a[1][0] - hv * ng.g[1][0], ng.a[1][1] - hv * ng.g[1][1]],
        ];
        q[i] = ng.norm_sq(&a0) * hv;
        let f = lap[i] + 2.0 * (hv * hv - ng.gauss) * hv;
        sc[i] = f;
        for k in 0..3 {
            dw[k][i] = f * ng.normal[k];
        }
        let grad = dh.gradient(i);
        let mut w = [[0.0; 3]; 2];
        for (a, wa) in w.iter_mut().enumerate() {
            axpy(wa, grad[a], ng.normal);
            axpy(wa, -hv, ng.d_normal(a));
            axpy(wa, -hv * hv, ng.dphi[a]);
        }
        w_form.push(w);
    }
    let field = |v: Vec<f64>| ScalarField::new(grid, v).expect("grid-sized");
    let [d0, d1, d2] = dw;
    WillmoreFields { dw: [field(d0), field(d1), field(d2)], dw_sc: field(sc), w_form, q_term: field(q) }
}

/// Divergence `∇^{*g}` of a vector-valued 1-form given by frame components.
/// The round covariant derivative comes from the spin-1 representative
/// `ω = w(e_θ) + i w(e_φ)`: its symmetric part has trace `-Re eth_bar ω` and
/// `(m, m)` component `-eth ω`.
pub fn divergence_g(im: &Immersion, form: &[[Vec3; 2]]) -> Vec<Vec3> {
    let mut out = vec![[0.0; 3]; im.grid().len()];
    for k in 0..3 {
        let comp: Vec<[f64; 2]> = form.iter().map(|w| [w[0][k], w[1][k]]).collect();
        for (o, v) in out.iter_mut().zip(divergence_g_scalar(im, &comp)) {
            o[k] = v;
        }
    }
    out
}

/// Divergence `∇^{*g}` of a scalar 1-form given by frame components.
pub fn divergence_g_scalar(im: &Immersion, form: &[[f64; 2]]) -> Vec<f64> {
    let grid = im.grid();
    let omega: Vec<Complex64> = form.iter().map(|w| Complex64::new(w[0], w[1])).collect();
    let c = SpinField::new(grid, 1, omega).expect("grid-sized").analyze();
    let up = SpinField::from_coeffs(grid, &eth_coeffs(&c).expect("spin 1 -> 2")).expect("grid");
    let down = SpinField::from_coeffs(grid, &eth_bar_coeffs(&c).expect("spin 1 -> 0")).expect("grid");
    (0..grid.len())
        .map(|i| {
            let ng = &im.nodes()[i];
            let tr = -down.values()[i].re;
            let mm = -up.values()[i];
            let s = [[0.5 * (tr + mm.re), 0.5 * mm.im], [0.5 * mm.im, 0.5 * (tr - mm.re)]];
            ng.trace(&s) - ng.trace_conn[0] * form[i][0] - ng.trace_conn[1] * form[i][1]
        })
        .collect()
}

/// `δ𝒲 = ∇^{*g} w`, computed from the 1-form `w` alone.
pub fn willmore_divergence_form(im: &Immersion) -> Result<[ScalarField; 3]> {
    check_conformal(im)?;
    Ok(divergence_form_unchecked(im, &willmore_fields(im)))
}

pub fn divergence_form_unchecked(im: &Immersion, wf: &WillmoreFields) -> [ScalarField; 3] {
    let d = divergence_g(im, &wf.w_form);
    let grid = im.grid();
    let comp = |k: usize| ScalarField::new(grid, d.iter().map(|v| v[k]).collect()).expect("grid-sized");
    [comp(0), comp(1), comp(2)]
}

/// `∫ (⟨H, Δ_g φ⟩ - ⟨⟨A°,H⟩^♯ + ⟨A,H⟩^♯, ∇φ⟩_g) dσ_g`.
pub fn weak_pairing(im: &Immersion, test: &[ScalarField; 3]) -> f64 {
    let grid = im.grid();
    let d: Vec<_> = test.iter().map(|f| im.differential(f.coeffs())).collect();
    let lap: Vec<Vec<f64>> = d.iter().map(|fd| im.laplace_from(fd)).collect();
    let vals: Vec<f64> = (0..grid.len())
        .map(|i| {
            let ng = &im.nodes()[i];
            let h = ng.mean;
            let hv = im.mean_vector(i);
            let lphi = [lap[0][i], lap[1][i], lap[2][i]];
            // X_a = -2h ∂_aN - h² ∂_aΦ.
            let mut x = [[0.0; 3]; 2];
            for (a, xa) in x.iter_mut().enumerate() {
                axpy(xa, -2.0 * h, ng.d_normal(a));
                axpy(xa, -h * h, ng.dphi[a]);
            }
            let dphi_b = |b: usize| -> Vec3 {
                let g = |k: usize| if b == 0 { d[k].d_theta[i] } else { d[k].d_phi[i] };
                [g(0), g(1), g(2)]
            };
            let mut pair = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    pair += ng.g_inv[a][b] * dot(x[a], dphi_b(b));
                }
            }
            dot(hv, lphi) - pair
        })
        .collect();
    im.integrate_g(&vals)
}

/// Norms of the closed-surface integrals of the translation, rotation,
/// dilation and inversion conservation laws; each vanishes in the continuum.
pub fn noether_residuals(im: &Immersion, wf: &WillmoreFields) -> [f64; 4] {
    let n = im.grid().len();
    let mut v1 = Vec::with_capacity(n);
    let mut v2 = Vec::with_capacity(n);
    let mut v3 = Vec::with_capacity(n);
    let mut v4 = Vec::with_capacity(n);
    for i in 0..n {
        let p = im.position(i);
        let d = wf.dw_at(i);
        let pd = dot(p, d);
        v1.push(d);
        v2.push(cross(p, d));
        v3.push(pd);
        let mut inv = scale(2.0 * pd, p);
        axpy(&mut inv, -dot(p, p), d);
        axpy(&mut inv, 4.0, im.mean_vector(i));
        v4.push(inv);
    }
    let nv = |v: Vec3| dot(v, v).sqrt();
    [nv(im.integrate_g_vec(&v1)), nv(im.integrate_g_vec(&v2)), im.integrate_g(&v3).abs(), nv(im.integrate_g_vec(&v4))]
}

/// `(max |⟨w, dΦ⟩_g|, max |w|)` over the nodes.
pub fn tangency_defect(im: &Immersion, wf: &WillmoreFields) -> (f64, f64) {
    let mut t_max: f64 = 0.0;
    let mut w_max: f64 = 0.0;
    for (ng, w) in im.nodes().iter().zip(&wf.w_form) {
        let mut t = 0.0;
        for a in 0..2 {
            w_max = w_max.max(dot(w[a], w[a]).sqrt());
            for b in 0..2 {
                t += ng.g_inv[a][b] * dot(w[a], ng.dphi[b]);
            }
        }
        t_max = t_max.max(t.abs());
    }
    (t_max, w_max)
}

/// Relative `L²(dσ_g)` discrepancy between the two forms of `δ𝒲`.
pub fn form_discrepancy(im: &Immersion, wf: &WillmoreFields) -> f64 {
    let div = divergence_form_unchecked(im, wf);
    let n = im.grid().len();
    let diff: Vec<f64> = (0..n)
        .map(|i| {
            let a = wf.dw_at(i);
            let b = [div[0].values()[i], div[1].values()[i], div[2].values()[i]];
            (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
        })
        .collect();
    im.integrate_g(&diff).sqrt() / (1.0 + wf.dissipation(im).sqrt())
}

#[cfg(test)]
mod tests;
