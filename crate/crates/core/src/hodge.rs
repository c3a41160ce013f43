//! Hodge potentials of the conserved 1-forms and the second-order system
//! they satisfy.
//!
//! Every 1-form `ω` on the closed surface splits as `dA + *dB` with
//! `Δ_g A = ∇^{*g} ω` and `Δ_g B = -∇^{*g}(*ω)`; there are no harmonic
//! 1-forms on S². Potentials are normalized to zero `dσ_g`-mean. Products of
//! two 1-forms are contracted with `g^{ab}`.

use crate::error::{Error, Result};
use crate::geometry::{axpy, cross, dot, scale, Immersion, NodeGeometry};
use crate::sphere::{ScalarField, SpectralCoeffs, Vec3};
use crate::willmore::{divergence_g_scalar, noether_residuals, WillmoreFields};

/// Largest translation Noether residual for which `Δ_g 𝓛 = δ𝒲` is solved.
pub const SOLVABILITY_TOLERANCE: f64 = 1e-6;
/// Largest relative Poisson residual accepted.
pub const POISSON_TOLERANCE: f64 = 1e-7;
const POISSON_TARGET: f64 = 1e-11;
const POISSON_MAX_ITER: usize = 80;

/// Scalar 1-form in frame components, one entry per node.
pub type Form = Vec<[f64; 2]>;
/// Vector-valued 1-form in frame components.
pub type VecForm = Vec<[Vec3; 2]>;

#[derive(Clone, Debug)]
pub struct HodgePotentials {
    /// `𝓛`, with `w = d𝓛 + *dL`.
    pub scr_l: [ScalarField; 3],
    pub l: [ScalarField; 3],
    /// `𝓡`, with `-dΦ×H - (*dΦ)×L = d𝓡 + *dR`.
    pub scr_r: [ScalarField; 3],
    pub r: [ScalarField; 3],
    /// `𝓢`, with `-⟨*dΦ, L⟩ = d𝓢 + *dS`.
    pub scr_s: ScalarField,
    pub s: ScalarField,
    /// Largest relative residual over the fourteen Poisson solves.
    pub poisson_residual: f64,
}

impl HodgePotentials {
    /// All fourteen potentials, in declaration order.
    pub fn fields(&self) -> Vec<&ScalarField> {
        let mut v: Vec<&ScalarField> = Vec::with_capacity(14);
        v.extend(self.scr_l.iter());
        v.extend(self.l.iter());
        v.extend(self.scr_r.iter());
        v.extend(self.r.iter());
        v.push(&self.scr_s);
        v.push(&self.s);
        v
    }

    pub fn fields_mut(&mut self) -> Vec<&mut ScalarField> {
        let mut v: Vec<&mut ScalarField> = Vec::with_capacity(14);
        v.extend(self.scr_l.iter_mut());
        v.extend(self.l.iter_mut());
        v.extend(self.scr_r.iter_mut());
        v.extend(self.r.iter_mut());
        v.push(&mut self.scr_s);
        v.push(&mut self.s);
        v
    }
}

/// Metric Hodge star of a frame covector: `*α = -α ∘ J` with `J = N×·`.
pub fn star(ng: &NodeGeometry, alpha: [f64; 2]) -> [f64; 2] {
    let rho = ng.area_density;
    [(ng.g[1][0] * alpha[0] - ng.g[0][0] * alpha[1]) / rho, (ng.g[1][1] * alpha[0] - ng.g[0][1] * alpha[1]) / rho]
}

pub fn star_vec(ng: &NodeGeometry, alpha: [Vec3; 2]) -> [Vec3; 2] {
    let mut out = [[0.0; 3]; 2];
    for k in 0..3 {
        let s = star(ng, [alpha[0][k], alpha[1][k]]);
        out[0][k] = s[0];
        out[1][k] = s[1];
    }
    out
}

/// `g^{ab} f(α_a, β_b)`.
fn contract<A: Copy, B: Copy, T>(
    ng: &NodeGeometry,
    alpha: [A; 2],
    beta: [B; 2],
    f: impl Fn(A, B) -> T,
    add: impl Fn(T, T) -> T,
    mul: impl Fn(f64, T) -> T,
) -> T {
    let mut acc = mul(ng.g_inv[0][0], f(alpha[0], beta[0]));
    for (a, b) in [(0, 1), (1, 0), (1, 1)] {
        acc = add(acc, mul(ng.g_inv[a][b], f(alpha[a], beta[b])));
    }
    acc
}

fn contract_cross(ng: &NodeGeometry, alpha: [Vec3; 2], beta: [Vec3; 2]) -> Vec3 {
    contract(ng, alpha, beta, cross, add3, scale)
}

fn contract_dot(ng: &NodeGeometry, alpha: [Vec3; 2], beta: [Vec3; 2]) -> f64 {
    contract(ng, alpha, beta, dot, |x, y| x + y, |s, x| s * x)
}

/// `g^{ab} α_a β_b` for vector-valued `α` and scalar `β`.
fn contract_scale(ng: &NodeGeometry, alpha: [Vec3; 2], beta: [f64; 2]) -> Vec3 {
    contract(ng, alpha, beta, |v, s| scale(s, v), add3, scale)
}

fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn d_scalar(im: &Immersion, f: &ScalarField) -> Form {
    let fd = im.differential(f.coeffs());
    (0..im.grid().len()).map(|i| fd.gradient(i)).collect()
}

fn d_vector(im: &Immersion, f: &[ScalarField; 3]) -> VecForm {
    let d: Vec<Form> = f.iter().map(|c| d_scalar(im, c)).collect();
    (0..im.grid().len()).map(|i| [[d[0][i][0], d[1][i][0], d[2][i][0]], [d[0][i][1], d[1][i][1], d[2][i][1]]]).collect()
}

fn component(v: &[Vec3], k: usize) -> Vec<f64> {
    v.iter().map(|x| x[k]).collect()
}

fn form_component(v: &VecForm, k: usize) -> Form {
    v.iter().map(|x| [x[0][k], x[1][k]]).collect()
}

/// Solution of `Δ_g u = f` with zero `dσ_g`-mean, after removing the
/// `dσ_g`-mean of `f`. Richardson iteration preconditioned by the round
/// Laplacian weighted with the area density, which is exact for conformal
/// metrics. Returns the solution and its relative residual.
pub fn poisson_g(im: &Immersion, f: &[f64]) -> (ScalarField, f64) {
    let grid = im.grid();
    let rho: Vec<f64> = im.nodes().iter().map(|n| n.area_density).collect();
    let weighted = |v: &[f64]| -> SpectralCoeffs {
        let mut c = ScalarField::new(grid, v.iter().zip(&rho).map(|(a, r)| a * r).collect())
            .expect("grid-sized")
            .coeffs()
            .clone();
        c.set(0, 0, 0.0.into());
        c
    };
    let target = weighted(f);
    let scale_t = target.norm();
    let mut u = ScalarField::zeros(grid);
    if scale_t == 0.0 {
        return (u, 0.0);
    }
    let inv = |l: usize| if l == 0 { 0.0 } else { -1.0 / (l * (l + 1)) as f64 };
    let mut rel = f64::INFINITY;
    for _ in 0..POISSON_MAX_ITER {
        let mut r = target.clone();
        r.axpy(-1.0, &weighted(&im.laplace_g_coeffs(u.coeffs())));
        let new_rel = r.norm() / scale_t;
        if new_rel <= POISSON_TARGET || new_rel >= rel {
            rel = rel.min(new_rel);
            break;
        }
        rel = new_rel;
        let du = ScalarField::from_coeffs(grid, &r.map_degree(0, inv)).expect("grid-sized");
        u = u.add(&du);
    }
    let mean = im.integrate_g(u.values()) / im.area();
    (u.map(|v| v - mean), rel)
}

struct Solver<'a> {
    im: &'a Immersion,
    worst: f64,
}

impl Solver<'_> {
    fn solve(&mut self, f: &[f64]) -> ScalarField {
        let (u, r) = poisson_g(self.im, f);
        self.worst = self.worst.max(r);
        u
    }

    /// Co-exact potential `B` of a scalar form.
    fn coexact(&mut self, form: &Form) -> ScalarField {
        let starred: Form = form.iter().zip(self.im.nodes()).map(|(a, ng)| star(ng, *a)).collect();
        let div = divergence_g_scalar(self.im, &starred);
        self.solve(&div.iter().map(|v| -v).collect::<Vec<_>>())
    }

    fn coexact_vec(&mut self, form: &VecForm) -> [ScalarField; 3] {
        [0, 1, 2].map(|k| self.coexact(&form_component(form, k)))
    }

    fn solve_vec(&mut self, f: &[Vec3]) -> [ScalarField; 3] {
        [0, 1, 2].map(|k| self.solve(&component(f, k)))
    }
}

/// `-dΦ×H - (*dΦ)×L`.
pub fn r_form(im: &Immersion, l: &[ScalarField; 3]) -> VecForm {
    (0..im.grid().len())
        .map(|i| {
            let ng = im.node(i);
            let h = im.mean_vector(i);
            let lv = [l[0].values()[i], l[1].values()[i], l[2].values()[i]];
            let sd = star_vec(ng, ng.dphi);
            [0, 1].map(|a| {
                let mut v = scale(-1.0, cross(ng.dphi[a], h));
                axpy(&mut v, -1.0, cross(sd[a], lv));
                v
            })
        })
        .collect()
}

/// `-⟨*dΦ, L⟩`.
pub fn s_form(im: &Immersion, l: &[ScalarField; 3]) -> Form {
    (0..im.grid().len())
        .map(|i| {
            let ng = im.node(i);
            let lv = [l[0].values()[i], l[1].values()[i], l[2].values()[i]];
            let sd = star_vec(ng, ng.dphi);
            [-dot(sd[0], lv), -dot(sd[1], lv)]
        })
        .collect()
}

/// Solve for all six potentials.
pub fn solve_potentials(im: &Immersion, wf: &WillmoreFields) -> Result<HodgePotentials> {
    let r1 = noether_residuals(im, wf)[0];
    if !(r1 <= SOLVABILITY_TOLERANCE) {
        return Err(Error::Consistency(format!(
            "translation residual {r1:.3e} exceeds {SOLVABILITY_TOLERANCE:.1e}; Δ_g𝓛 = δ𝒲 is not solvable"
        )));
    }
    let n = im.grid().len();
    let mut sv = Solver { im, worst: 0.0 };
    let dw: Vec<Vec3> = (0..n).map(|i| wf.dw_at(i)).collect();
    let scr_l = sv.solve_vec(&dw);
    let l = sv.coexact_vec(&wf.w_form);

    let dl = d_vector(im, &scr_l);
    let mut src_r = Vec::with_capacity(n);
    let mut src_s = Vec::with_capacity(n);
    for (i, dli) in dl.iter().enumerate() {
        let ng = im.node(i);
        src_r.push(scale(-1.0, contract_cross(ng, ng.dphi, *dli)));
        src_s.push(-contract_dot(ng, ng.dphi, *dli));
    }
    let scr_r = sv.solve_vec(&src_r);
    let scr_s = sv.solve(&src_s);
    let r = sv.coexact_vec(&r_form(im, &l));
    let s = sv.coexact(&s_form(im, &l));

    let hp = HodgePotentials { scr_l, l, scr_r, r, scr_s, s, poisson_residual: sv.worst };
    if !(hp.poisson_residual <= POISSON_TOLERANCE) {
        return Err(Error::Consistency(format!(
            "Poisson residual {:.3e} exceeds {POISSON_TOLERANCE:.1e}",
            hp.poisson_residual
        )));
    }
    Ok(hp)
}

/// `dA + *dB` for vector potentials.
pub fn recombine(im: &Immersion, a: &[ScalarField; 3], b: &[ScalarField; 3]) -> VecForm {
    let da = d_vector(im, a);
    let db = d_vector(im, b);
    (0..im.grid().len())
        .map(|i| {
            let sb = star_vec(im.node(i), db[i]);
            [add3(da[i][0], sb[0]), add3(da[i][1], sb[1])]
        })
        .collect()
}

pub fn recombine_scalar(im: &Immersion, a: &ScalarField, b: &ScalarField) -> Form {
    let da = d_scalar(im, a);
    let db = d_scalar(im, b);
    (0..im.grid().len())
        .map(|i| {
            let sb = star(im.node(i), db[i]);
            [da[i][0] + sb[0], da[i][1] + sb[1]]
        })
        .collect()
}

/// `(∫ |α|²_g dσ_g)^{1/2}` of a vector-valued form.
pub fn form_norm(im: &Immersion, f: &VecForm) -> f64 {
    let v: Vec<f64> = f.iter().enumerate().map(|(i, a)| contract_dot(im.node(i), *a, *a)).collect();
    im.integrate_g(&v).max(0.0).sqrt()
}

pub fn scalar_form_norm(im: &Immersion, f: &Form) -> f64 {
    form_norm(im, &lift(f))
}

fn lift(f: &Form) -> VecForm {
    f.iter().map(|a| [[a[0], 0.0, 0.0], [a[1], 0.0, 0.0]]).collect()
}

fn diff(a: &VecForm, b: &VecForm) -> VecForm {
    a.iter().zip(b).map(|(x, y)| [0, 1].map(|c| [0, 1, 2].map(|k| x[c][k] - y[c][k]))).collect()
}

/// Relative reconstruction errors `‖dA + *dB - ω‖ / (1 + ‖ω‖)` of the
/// three decompositions, in the order `w`, `R`-form, `S`-form.
pub fn reconstruction_errors(im: &Immersion, wf: &WillmoreFields, hp: &HodgePotentials) -> [f64; 3] {
    let rel = |got: &VecForm, want: &VecForm| form_norm(im, &diff(got, want)) / (1.0 + form_norm(im, want));
    let w = wf.w_form.clone();
    let wr = r_form(im, &hp.l);
    let ws = lift(&s_form(im, &hp.l));
    [
        rel(&recombine(im, &hp.scr_l, &hp.l), &w),
        rel(&recombine(im, &hp.scr_r, &hp.r), &wr),
        rel(&lift(&recombine_scalar(im, &hp.scr_s, &hp.s)), &ws),
    ]
}

/// `|∫ ⟨dA, *dB⟩_g dσ_g|` for the three decompositions.
pub fn orthogonality(im: &Immersion, hp: &HodgePotentials) -> [f64; 3] {
    let pairing = |da: &VecForm, db: &VecForm| {
        let v: Vec<f64> = (0..im.grid().len())
            .map(|i| {
                let ng = im.node(i);
                contract_dot(ng, da[i], star_vec(ng, db[i]))
            })
            .collect();
        im.integrate_g(&v).abs()
    };
    [
        pairing(&d_vector(im, &hp.scr_l), &d_vector(im, &hp.l)),
        pairing(&d_vector(im, &hp.scr_r), &d_vector(im, &hp.r)),
        pairing(&lift(&d_scalar(im, &hp.scr_s)), &lift(&d_scalar(im, &hp.s))),
    ]
}

/// `L²(dσ_g)` norms of the three residuals
/// `Δ_gΦ - dΦ×ρ - ⟨dΦ, σ⟩`,
/// `Δ_gR - dN×ρ + ⟨dN, σ⟩ - (*dΦ)×d𝓛`,
/// `Δ_gS - ⟨dN, ρ⟩ - ⟨*dΦ, d𝓛⟩`
/// with `ρ = d𝓡 + *dR` and `σ = d𝓢 + *dS`.
pub fn system_residuals(im: &Immersion, _wf: &WillmoreFields, hp: &HodgePotentials) -> [f64; 3] {
    let n = im.grid().len();
    let rho = recombine(im, &hp.scr_r, &hp.r);
    let sigma = recombine_scalar(im, &hp.scr_s, &hp.s);
    let dl = d_vector(im, &hp.scr_l);
    let lap_phi = im.laplace_phi();
    let lap_r: Vec<Vec<f64>> = hp.r.iter().map(|f| im.laplace_g_coeffs(f.coeffs())).collect();
    let lap_s = im.laplace_g_coeffs(hp.s.coeffs());
    let mut e1 = Vec::with_capacity(n);
    let mut e2 = Vec::with_capacity(n);
    let mut e3 = Vec::with_capacity(n);
    for i in 0..n {
        let ng = im.node(i);
        let dn = [ng.d_normal(0), ng.d_normal(1)];
        let sd = star_vec(ng, ng.dphi);

        let mut v1 = lap_phi[i];
        axpy(&mut v1, -1.0, contract_cross(ng, ng.dphi, rho[i]));
        axpy(&mut v1, -1.0, contract_scale(ng, ng.dphi, sigma[i]));
        e1.push(dot(v1, v1));

        let mut v2 = [lap_r[0][i], lap_r[1][i], lap_r[2][i]];
        axpy(&mut v2, -1.0, contract_cross(ng, dn, rho[i]));
        axpy(&mut v2, 1.0, contract_scale(ng, dn, sigma[i]));
        axpy(&mut v2, -1.0, contract_cross(ng, sd, dl[i]));
        e2.push(dot(v2, v2));

        let v3 = lap_s[i] - contract_dot(ng, dn, rho[i]) - contract_dot(ng, sd, dl[i]);
        e3.push(v3 * v3);
    }
    [e1, e2, e3].map(|e| im.integrate_g(&e).max(0.0).sqrt())
}

/// `‖Δ_gΦ - 2H‖_{L²(dσ_g)}`.
pub fn mean_curvature_check(im: &Immersion) -> f64 {
    let lap = im.laplace_phi();
    let v: Vec<f64> = (0..im.grid().len())
        .map(|i| {
            let mut d = lap[i];
            axpy(&mut d, -2.0, im.mean_vector(i));
            dot(d, d)
        })
        .collect();
    im.integrate_g(&v).sqrt()
}

/// `‖Δ_gΦ‖_{L²(dσ_g)}`, the scale for the system residual bound.
pub fn laplace_phi_norm(im: &Immersion) -> f64 {
    let v: Vec<f64> = im.laplace_phi().iter().map(|x| dot(*x, *x)).collect();
    im.integrate_g(&v).sqrt()
}
