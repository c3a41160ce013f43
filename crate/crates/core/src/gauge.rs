//! Möbius gauge machinery: Killing fields, the action of `Aut(S²)`, the
//! balance functional with its Newton solver, the `∂̄` solver on tangent
//! fields, conformal tangential velocities and conformalization of data.
//!
//! Tangent fields on the sphere are carried as spin-1 fields
//! `u = V·e_θ + i V·e_φ`. In that representation the Cauchy–Riemann operator
//! on `(1,0)` fields is the spin-raising [`eth`](crate::sphere::eth); its kernel
//! is the six-dimensional span of the conformal Killing fields (all `l = 1`).

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    axpy, balance_residual, build_geometry, cross, dot, energies, hopf_residual, norm, scale, Immersion,
};
use crate::sphere::{
    direction_to_angles, eth_eigenvalue, eval_real_many, Grid, ScalarField, SpectralCoeffs, SpinField, Vec3,
};
use crate::willmore::{check_conformal, WillmoreFields};

type C = Complex64;

/// Chart radius for the exponential coordinates on `Aut(S²)`.
pub const CHART_RADIUS: f64 = 1.0;

/// `dI(Z_a)(y)`: rotations about the axes (`a < 3`) and spherical dilations
/// toward them (`a >= 3`).
pub fn killing_vector(a: usize, y: Vec3) -> Vec3 {
    match a {
        0 => [0.0, -y[2], y[1]],
        1 => [y[2], 0.0, -y[0]],
        2 => [-y[1], y[0], 0.0],
        _ => {
            let k = a - 3;
            let mut e = scale(-y[k], y);
            e[k] += 1.0;
            e
        }
    }
}

/// The six conformal Killing fields on a grid.
#[derive(Clone, Debug)]
pub struct KillingBasis {
    /// Cartesian values `dI(Z_a)` at the nodes.
    pub fields: [Vec<Vec3>; 6],
    /// Spin-1 representatives.
    pub spins: [SpinField; 6],
}

pub fn killing_fields(grid: &Arc<Grid>) -> KillingBasis {
    let fields: [Vec<Vec3>; 6] = std::array::from_fn(|a| grid.points().iter().map(|&y| killing_vector(a, y)).collect());
    let spins = std::array::from_fn(|a| SpinField::from_tangent(grid, &fields[a]).expect("grid-sized"));
    KillingBasis { fields, spins }
}

/// `sl(2, C)` generator of `Z_a`, acting on `ζ = (y1 + i y2)/(1 - y3)` by
/// `ζ' = β + 2αζ - γζ²` for `[[α, β], [γ, -α]]`.
pub fn generator(a: usize) -> [[C; 2]; 2] {
    let z = C::new(0.0, 0.0);
    let h = 0.5;
    let (al, be, ga) = match a {
        0 => (z, C::new(0.0, h), C::new(0.0, h)),
        1 => (z, C::new(-h, 0.0), C::new(h, 0.0)),
        2 => (C::new(0.0, h), z, z),
        3 => (z, C::new(h, 0.0), C::new(h, 0.0)),
        4 => (z, C::new(0.0, h), C::new(0.0, -h)),
        _ => (C::new(h, 0.0), z, z),
    };
    [[al, be], [ga, -al]]
}

/// Element of `Aut(S²) ≅ PSL(2, C)`, stored with unit determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusMap {
    pub m: [[C; 2]; 2],
}

fn matmul(a: &[[C; 2]; 2], b: &[[C; 2]; 2]) -> [[C; 2]; 2] {
    let mut o = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

/// Unit-norm homogeneous coordinates of a sphere point.
fn homogeneous(y: Vec3) -> (C, C) {
    let (u, v) = if y[2] <= 0.0 {
        (C::new(y[0], y[1]), C::new(1.0 - y[2], 0.0))
    } else {
        (C::new(1.0 + y[2], 0.0), C::new(y[0], -y[1]))
    };
    let n = (u.norm_sqr() + v.norm_sqr()).sqrt();
    (u / n, v / n)
}

fn from_homogeneous(u: C, v: C) -> Vec3 {
    let d = u.norm_sqr() + v.norm_sqr();
    let w = u * v.conj();
    [2.0 * w.re / d, 2.0 * w.im / d, (u.norm_sqr() - v.norm_sqr()) / d]
}

impl MobiusMap {
    pub fn identity() -> Self {
        let (o, z) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
        MobiusMap { m: [[o, z], [z, o]] }
    }

    /// Normalizes to unit determinant.
    pub fn from_matrix(m: [[C; 2]; 2]) -> Self {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let s = det.sqrt();
        MobiusMap { m: [[m[0][0] / s, m[0][1] / s], [m[1][0] / s, m[1][1] / s]] }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap::from_matrix(matmul(&self.m, &other.m))
    }

    pub fn inverse(&self) -> MobiusMap {
        let m = &self.m;
        MobiusMap { m: [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]] }
    }

    /// Action on a unit vector.
    pub fn apply(&self, y: Vec3) -> Vec3 {
        let (u, v) = homogeneous(y);
        let m = &self.m;
        from_homogeneous(m[0][0] * u + m[0][1] * v, m[1][0] * u + m[1][1] * v)
    }

    /// Action on the stereographic coordinate `ζ`.
    pub fn apply_zeta(&self, z: C) -> C {
        let m = &self.m;
        (m[0][0] * z + m[0][1]) / (m[1][0] * z + m[1][1])
    }

    /// Conformal factor `f` with `ψ* g_{S²} = f² g_{S²}` (so `|dψ|² = 2f²`).
    pub fn conformal_factor(&self, y: Vec3) -> f64 {
        let (u, v) = homogeneous(y);
        let m = &self.m;
        1.0 / ((m[0][0] * u + m[0][1] * v).norm_sqr() + (m[1][0] * u + m[1][1] * v).norm_sqr())
    }

    /// Distance from the identity as a projective matrix (sign-insensitive).
    pub fn distance_to_identity(&self) -> f64 {
        let d = |s: f64| {
            let m = &self.m;
            ((m[0][0] - s).norm_sqr() + m[0][1].norm_sqr() + m[1][0].norm_sqr() + (m[1][1] - s).norm_sqr()).sqrt()
        };
        d(1.0).min(d(-1.0))
    }
}

/// `exp(Σ s_a X_a)` for the generators of [`generator`].
pub fn mobius_exp(s: &[f64; 6]) -> Result<MobiusMap> {
    let r = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > CHART_RADIUS {
        return Err(Error::Chart(r));
    }
    Ok(mobius_exp_unchecked(s))
}

pub(crate) fn mobius_exp_unchecked(s: &[f64; 6]) -> MobiusMap {
    let mut x = [[C::new(0.0, 0.0); 2]; 2];
    for (a, &sa) in s.iter().enumerate() {
        let g = generator(a);
        for i in 0..2 {
            for j in 0..2 {
                x[i][j] += g[i][j] * sa;
            }
        }
    }
    let q2 = x[0][0] * x[0][0] + x[0][1] * x[1][0];
    let q = q2.sqrt();
    let (ch, sh) = if q.norm() < 1e-8 {
        (C::new(1.0, 0.0) + q2 / 2.0, C::new(1.0, 0.0) + q2 / 6.0)
    } else {
        (q.cosh(), q.sinh() / q)
    };
    let o = C::new(1.0, 0.0);
    let z = C::new(0.0, 0.0);
    let id = [[o, z], [z, o]];
    let mut m = [[z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = ch * id[i][j] + sh * x[i][j];
        }
    }
    MobiusMap::from_matrix(m)
}

/// Fraction of spectral energy above degree `0.9 l_max`, over all
/// components of `Φ` (the mean excluded).
fn top_decade_fraction(im: &Immersion) -> f64 {
    let l_max = im.grid().l_max();
    let cut = (9 * l_max) / 10;
    let (mut top, mut all) = (0.0, 0.0);
    for c in im.phi_coeffs() {
        for (l, p) in c.power_spectrum().iter().enumerate().skip(1) {
            all += p;
            if l > cut {
                top += p;
            }
        }
    }
    if all == 0.0 {
        0.0
    } else {
        top / all
    }
}

/// `Φ ∘ ψ`, resampled by evaluating the expansion of `Φ` at `ψ(nodes)`.
pub fn pullback(im: &Immersion, psi: &MobiusMap) -> Result<Immersion> {
    let grid = im.grid();
    let pts: Vec<(f64, f64)> = grid.points().iter().map(|&y| direction_to_angles(psi.apply(y))).collect();
    let out = resample(im, &pts)?;
    let frac = top_decade_fraction(&out);
    if frac > 0.01 {
        return Err(Error::Resolution(format!(
            "{:.1}% of the pulled-back spectrum lies in the top decade",
            100.0 * frac
        )));
    }
    Ok(out)
}

/// Immersion whose node values are `Φ` evaluated at the given angles.
fn resample(im: &Immersion, pts: &[(f64, f64)]) -> Result<Immersion> {
    let grid = im.grid();
    let c = im.phi_coeffs();
    let vals = eval_real_many(grid.exec(), &c, pts);
    let mut it = vals.into_iter().map(|v| ScalarField::new(grid, v));
    let phi = [it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?];
    build_geometry(phi)
}

/// Well-balance residual of `Φ ∘ ψ`.
pub fn balance_f(im: &Immersion, psi: &MobiusMap) -> Result<[f64; 6]> {
    Ok(balance_residual(&pullback(im, psi)?))
}

/// How the rebalance Newton iteration forms its Jacobian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Jacobian {
    /// Central differences in the exponential coordinates, refreshed each
    /// iteration.
    FiniteDifference,
    /// Right-trivialized derivative assembled from the Killing fields of the
    /// current iterate (one pullback per iteration).
    Analytic,
}

#[derive(Clone, Copy, Debug)]
pub struct RebalanceOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub jacobian: Jacobian,
    /// Optional closeness guard on `dlm_distance` of the input.
    pub max_dlm: Option<f64>,
}

impl Default for RebalanceOptions {
    fn default() -> Self {
        RebalanceOptions { tol: 1e-8, max_iter: 25, fd_step: 1e-5, jacobian: Jacobian::FiniteDifference, max_dlm: None }
    }
}

/// Result of [`rebalance`].
#[derive(Clone, Debug)]
pub struct Rebalanced {
    pub immersion: Immersion,
    pub psi: MobiusMap,
    pub s: [f64; 6],
    pub iterations: usize,
    pub residual: f64,
}

fn norm6(v: &[f64; 6]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve a dense 6×6 system by Gaussian elimination with partial pivoting.
pub(crate) fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    for col in 0..6 {
        let piv = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..6 {
            let f = a[r][col] / a[col][col];
            for c in col..6 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for r in (0..6).rev() {
        let s: f64 = (r + 1..6).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Derivative of the balance functional of `Ψ` along `Ψ ∘ exp(t Z_a)`,
/// one column per Killing field.
pub fn balance_jacobian(im: &Immersion, basis: &KillingBasis) -> [[f64; 6]; 6] {
    let mut j = [[0.0; 6]; 6];
    for a in 0..6 {
        let tv = tangent_push(im, &basis.spins[a]);
        let rate = balance_rate(im, &tv);
        for r in 0..6 {
            j[r][a] = rate[r];
        }
    }
    j
}

/// `dΦ(U)` at the nodes for a spin-1 field `u`.
pub fn tangent_push(im: &Immersion, u: &SpinField) -> Vec<Vec3> {
    im.nodes()
        .iter()
        .zip(u.values())
        .map(|(ng, v)| {
            let mut out = [0.0; 3];
            axpy(&mut out, v.re, ng.dphi[0]);
            axpy(&mut out, v.im, ng.dphi[1]);
            out
        })
        .collect()
}

/// First variation of [`balance_residual`] under the velocity field `v`
/// (Cartesian node values): `(∫ I Σ_a⟨∂_aΦ, ∂_a v⟩ dσ, ∫ v × I dσ)`.
pub fn balance_rate(im: &Immersion, v: &[Vec3]) -> [f64; 6] {
    let grid = im.grid();
    let comps: Vec<_> = (0..3)
        .map(|k| {
            let f = ScalarField::new(grid, v.iter().map(|p| p[k]).collect()).expect("grid-sized");
            im.differential(f.coeffs())
        })
        .collect();
    let mut out = [0.0; 6];
    for i in 0..grid.len() {
        let ng = &im.nodes()[i];
        let dv_t = [comps[0].d_theta[i], comps[1].d_theta[i], comps[2].d_theta[i]];
        let dv_p = [comps[0].d_phi[i], comps[1].d_phi[i], comps[2].d_phi[i]];
        let de2l = dot(ng.dphi[0], dv_t) + dot(ng.dphi[1], dv_p);
        let y = grid.point(i);
        let w = grid.weight(i);
        let c = cross(v[i], y);
        for k in 0..3 {
            out[k] += w * de2l * y[k];
            out[3 + k] += w * c[k];
        }
    }
    out
}

/// Newton iteration for the Möbius map that makes `Φ ∘ ψ` well balanced.
pub fn rebalance(im: &Immersion) -> Result<Rebalanced> {
    rebalance_with(im, &RebalanceOptions::default())
}

pub fn rebalance_with(im: &Immersion, opts: &RebalanceOptions) -> Result<Rebalanced> {
    if let Some(max) = opts.max_dlm {
        let d = crate::geometry::dlm_distance(im);
        if d > max {
            return Err(Error::Admissibility(format!("dlm distance {d:.3e} exceeds the chart bound {max:.3e}")));
        }
    }
    let basis = killing_fields(im.grid());
    let mut s = [0.0; 6];
    let mut psi = MobiusMap::identity();
    let mut current = im.clone();
    let mut f = balance_residual(&current);
    let mut iterations = 0;
    while norm6(&f) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::GaugeConvergence(format!(
                "balance residual {:.3e} after {iterations} Newton iterations",
                norm6(&f)
            )));
        }
        let step = match opts.jacobian {
            Jacobian::FiniteDifference => {
                let mut j = [[0.0; 6]; 6];
                for a in 0..6 {
                    let mut sp = s;
                    let mut sm = s;
                    sp[a] += opts.fd_step;
                    sm[a] -= opts.fd_step;
                    let fp = balance_f(im, &mobius_exp_unchecked(&sp))?;
                    let fm = balance_f(im, &mobius_exp_unchecked(&sm))?;
                    for r in 0..6 {
                        j[r][a] = (fp[r] - fm[r]) / (2.0 * opts.fd_step);
                    }
                }
                let rhs = f.map(|v| -v);
                solve6(j, rhs).ok_or_else(|| Error::GaugeConvergence("singular balance Jacobian".into()))?
            }
            Jacobian::Analytic => {
                // Right-trivialized step: psi <- psi ∘ exp(δ).
                let j = balance_jacobian(&current, &basis);
                let rhs = f.map(|v| -v);
                let d = solve6(j, rhs).ok_or_else(|| Error::GaugeConvergence("singular balance Jacobian".into()))?;
                psi = psi.compose(&mobius_exp_unchecked(&d));
                d
            }
        };
        match opts.jacobian {
            Jacobian::FiniteDifference => {
                for a in 0..6 {
                    s[a] += step[a];
                }
                if norm6(&s) > CHART_RADIUS {
                    return Err(Error::Chart(norm6(&s)));
                }
                psi = mobius_exp_unchecked(&s);
            }
            Jacobian::Analytic => {
                for a in 0..6 {
                    s[a] += step[a];
                }
                if psi.distance_to_identity() > 2.0 * CHART_RADIUS {
                    return Err(Error::Chart(psi.distance_to_identity()));
                }
            }
        }
        current = pullback(im, &psi)?;
        f = balance_residual(&current);
        iterations += 1;
    }
    Ok(Rebalanced { immersion: current, psi, s, iterations, residual: norm6(&f) })
}

/// `Φ + dΦ(Σ s_a Z_a)`: the reparametrization `Φ ∘ exp(s)` to first order,
/// for tiny `s` where the second-order remainder is below round-off.
pub fn reparametrize_infinitesimal(im: &Immersion, basis: &KillingBasis, s: &[f64; 6]) -> Result<Immersion> {
    let grid = im.grid();
    let mut u = SpinField::zeros(grid, 1);
    for (a, sa) in s.iter().enumerate() {
        for (x, z) in u.values_mut().iter_mut().zip(basis.spins[a].values()) {
            *x += z * *sa;
        }
    }
    let d = tangent_push(im, &u);
    let coeffs: Vec<SpectralCoeffs> = (0..3)
        .map(|k| {
            let f = ScalarField::new(grid, d.iter().map(|v| v[k]).collect()).expect("grid-sized");
            let mut c = im.phi()[k].coeffs().clone();
            c.axpy(1.0, f.coeffs());
            c
        })
        .collect();
    Immersion::from_coeffs(grid, [&coeffs[0], &coeffs[1], &coeffs[2]])
}

/// Largest Möbius coordinate step taken by [`rebalance_small`].
pub const INFINITESIMAL_STEP: f64 = 1e-5;

/// Chord-Newton rebalance for a nearly balanced immersion, moving by
/// [`reparametrize_infinitesimal`] with a fixed Jacobian. Fails with
/// [`Error::GaugeConvergence`] if a step would exceed
/// [`INFINITESIMAL_STEP`] or the residual does not drop below `tol` within
/// `max_iter` iterations; callers then fall back to [`rebalance_with`].
pub fn rebalance_small(
    im: &Immersion,
    basis: &KillingBasis,
    jac: &[[f64; 6]; 6],
    tol: f64,
    max_iter: usize,
) -> Result<(Immersion, usize)> {
    let mut current = im.clone();
    for it in 0..=max_iter {
        let f = balance_residual(&current);
        if norm6(&f) <= tol {
            return Ok((current, it));
        }
        if it == max_iter {
            break;
        }
        let d =
            solve6(*jac, f.map(|v| -v)).ok_or_else(|| Error::GaugeConvergence("singular balance Jacobian".into()))?;
        if norm6(&d) > INFINITESIMAL_STEP {
            return Err(Error::GaugeConvergence(format!("Möbius correction {:.3e} is not infinitesimal", norm6(&d))));
        }
        current = reparametrize_infinitesimal(&current, basis, &d)?;
    }
    Err(Error::GaugeConvergence("chord iteration did not converge".into()))
}

/// A tangent vector field on the sphere and its push-forward.
#[derive(Clone, Debug)]
pub struct TangentialVelocity {
    /// Spin-1 representative `U¹ + i U²` in the round frame.
    pub u: SpinField,
    /// `dΦ(U)` at the nodes.
    pub immersed: Vec<Vec3>,
    /// Coefficients of the projection of `U` onto `Z_1..Z_6`.
    pub killing_part: [f64; 6],
}

impl TangentialVelocity {
    pub fn zero(im: &Immersion) -> Self {
        let grid = im.grid();
        TangentialVelocity {
            u: SpinField::zeros(grid, 1),
            immersed: vec![[0.0; 3]; grid.len()],
            killing_part: [0.0; 6],
        }
    }

    fn from_spin(im: &Immersion, u: SpinField, basis: &KillingBasis) -> Self {
        let immersed = tangent_push(im, &u);
        let killing_part = std::array::from_fn(|a| {
            let z = &basis.spins[a];
            u.inner(z).re / z.inner(z).re
        });
        TangentialVelocity { u, immersed, killing_part }
    }
}

/// The Cauchy–Riemann operator on spin-1 tangent fields.
pub fn dbar(u: &SpinField) -> Result<SpinField> {
    Ok(crate::sphere::eth(u)?)
}

/// Real dimension of the kernel of [`dbar`] on spin-1 fields up to `l_max`.
pub fn dbar_kernel_dimension(l_max: usize) -> usize {
    (1..=l_max).filter(|&l| eth_eigenvalue(l, 1).abs() < 1e-12).map(|l| 2 * (2 * l + 1)).sum()
}

/// Spin-1 coefficients of the normal solution of `dbar u = rhs`.
pub fn dbar_normal_coeffs(rhs: &SpectralCoeffs) -> Result<SpectralCoeffs> {
    if rhs.spin() != 2 {
        return Err(crate::sphere::SphereError::Spin(rhs.spin()).into());
    }
    let u = rhs.map_degree(1, |l| {
        let e = eth_eigenvalue(l, 1);
        if e.abs() < 1e-12 {
            0.0
        } else {
            1.0 / e
        }
    });
    Ok(u)
}

/// Normal solution `U` of `dbar U = rhs`: the unique solution orthogonal to
/// every conformal Killing field.
pub fn dbar_solve_normal(im: &Immersion, rhs: &SpinField) -> Result<TangentialVelocity> {
    let basis = killing_fields(im.grid());
    let c = dbar_normal_coeffs(&rhs.analyze())?;
    let u = SpinField::from_coeffs(im.grid(), &c)?;
    Ok(TangentialVelocity::from_spin(im, u, &basis))
}

/// First variation of `Q = g(m, m)` under a velocity field `w` (node
/// values): `Q̇ = 2⟨dΦ(m), dw(m)⟩`.
pub fn hopf_rate(im: &Immersion, w: &[Vec3]) -> Vec<C> {
    let grid = im.grid();
    let d: Vec<_> = (0..3)
        .map(|k| {
            let f = ScalarField::new(grid, w.iter().map(|v| v[k]).collect()).expect("grid-sized");
            im.differential(f.coeffs())
        })
        .collect();
    im.nodes()
        .iter()
        .enumerate()
        .map(|(i, ng)| {
            let mut out = C::new(0.0, 0.0);
            for k in 0..3 {
                let dphi = C::new(ng.dphi[0][k], ng.dphi[1][k]);
                out += dphi * C::new(d[k].d_theta[i], d[k].d_phi[i]);
            }
            out * 2.0
        })
        .collect()
}

/// Right-hand side `e^{-2λ}(Q̇_w + κ Q)/2` of the gauge equation for `U`.
/// The tangential velocity `dΦ(U)` changes `Q` by `-2e^{2λ} eth u` to first
/// order, so `w + dΦ(U)` relaxes `Q` at rate `κ` (and keeps it fixed at
/// `κ = 0`).
fn gauge_rhs(im: &Immersion, w: &[Vec3], kappa: f64) -> SpinField {
    let rate = hopf_rate(im, w);
    let vals = im
        .nodes()
        .iter()
        .zip(rate)
        .map(|(ng, qd)| {
            let e2l = 0.5 * (ng.g[0][0] + ng.g[1][1]);
            let q = C::new(ng.g[0][0] - ng.g[1][1], 2.0 * ng.g[0][1]);
            (qd + q * kappa) * (0.5 / e2l)
        })
        .collect();
    SpinField::new(im.grid(), 2, vals).expect("grid-sized")
}

fn minus_dw(wf: &WillmoreFields, n: usize) -> Vec<Vec3> {
    (0..n).map(|i| wf.dw_at(i).map(|x| -x)).collect()
}

/// Tangential velocity of the conformal gauge (Killing part zero).
pub fn conformal_tangential_velocity(im: &Immersion, wf: &WillmoreFields) -> Result<TangentialVelocity> {
    conformal_tangential_for(im, &minus_dw(wf, im.grid().len()), 0.0)
}

/// Normal-solution velocity that also relaxes an existing Hopf residual at
/// rate `kappa`.
pub fn conformal_tangential_velocity_relaxed(
    im: &Immersion,
    wf: &WillmoreFields,
    kappa: f64,
) -> Result<TangentialVelocity> {
    conformal_tangential_for(im, &minus_dw(wf, im.grid().len()), kappa)
}

/// Normal-solution tangential velocity completing an arbitrary velocity `w`
/// to a conformality-preserving one.
pub fn conformal_tangential_for(im: &Immersion, w: &[Vec3], kappa: f64) -> Result<TangentialVelocity> {
    check_conformal(im)?;
    dbar_solve_normal(im, &gauge_rhs(im, w, kappa))
}

/// Conformal-gauge velocity whose Killing part keeps the balance functional
/// stationary, optionally with conformality relaxation rate `kappa`.
pub fn balanced_tangential_velocity(
    im: &Immersion,
    wf: &WillmoreFields,
    basis: &KillingBasis,
    kappa: f64,
) -> Result<TangentialVelocity> {
    let jac = balance_jacobian(im, basis);
    balanced_tangential_for(im, &minus_dw(wf, im.grid().len()), basis, &jac, kappa)
}

/// As [`conformal_tangential_for`], plus the Killing field that makes the
/// balance functional stationary along `w + dΦ(U)`.
pub fn balanced_tangential_for(
    im: &Immersion,
    w: &[Vec3],
    basis: &KillingBasis,
    jac: &[[f64; 6]; 6],
    kappa: f64,
) -> Result<TangentialVelocity> {
    let normal = conformal_tangential_for(im, w, kappa)?;
    let mut v = normal.immersed.clone();
    for (vi, wi) in v.iter_mut().zip(w) {
        axpy(vi, 1.0, *wi);
    }
    let rate = balance_rate(im, &v);
    let omega = solve6(*jac, rate.map(|r| -r)).ok_or_else(|| Error::Gauge("singular balance Jacobian".into()))?;
    let mut u = normal.u.clone();
    for (a, w) in omega.iter().enumerate() {
        for (x, z) in u.values_mut().iter_mut().zip(basis.spins[a].values()) {
            *x += z * *w;
        }
    }
    Ok(TangentialVelocity::from_spin(im, u, basis))
}

/// Options for [`conformalize`].
#[derive(Clone, Copy, Debug)]
pub struct ConformalizeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub substeps: usize,
    /// Required relative residual reduction per iteration.
    pub min_reduction: f64,
    /// Residual accepted when iterations stall at the resolution floor.
    pub accept: f64,
    pub max_initial: f64,
}

impl Default for ConformalizeOptions {
    fn default() -> Self {
        ConformalizeOptions {
            tol: 1e-9,
            max_iter: 30,
            substeps: 4,
            min_reduction: 0.05,
            accept: 1e-9,
            max_initial: 0.3,
        }
    }
}

/// Outcome of [`conformalize`].
#[derive(Clone, Debug)]
pub struct Conformalized {
    pub immersion: Immersion,
    pub iterations: usize,
    pub residual: f64,
}

/// Reparametrize `Φ` (surface image unchanged) until its Hopf residual is
/// below `tol`.
pub fn conformalize(im: &Immersion, tol: f64) -> Result<Immersion> {
    let opts = ConformalizeOptions { tol, accept: tol, ..Default::default() };
    Ok(conformalize_with(im, &opts)?.immersion)
}

pub fn conformalize_with(im: &Immersion, opts: &ConformalizeOptions) -> Result<Conformalized> {
    let grid = im.grid().clone();
    let mut current = im.clone();
    let mut r = hopf_residual(&current);
    if r > opts.max_initial {
        return Err(Error::Conformalization(format!("initial Hopf residual {r:.3e} exceeds {:.2}", opts.max_initial)));
    }
    let mut iterations = 0;
    while r > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::Conformalization(format!("residual {r:.3e} after {iterations} iterations")));
        }
        let rhs: Vec<C> = current
            .nodes()
            .iter()
            .map(|ng| {
                let e2l = 0.5 * (ng.g[0][0] + ng.g[1][1]);
                C::new(ng.g[0][0] - ng.g[1][1], 2.0 * ng.g[0][1]) * (0.5 / e2l)
            })
            .collect();
        let c = dbar_normal_coeffs(&SpinField::new(&grid, 2, rhs)?.analyze())?;
        let x = SpinField::from_coeffs(&grid, &c)?;
        // Cartesian components on S², analyzed for evaluation off the grid.
        let cart = x.to_tangent();
        let fields: Vec<ScalarField> = (0..3)
            .map(|k| ScalarField::new(&grid, cart.iter().map(|v| v[k]).collect()))
            .collect::<std::result::Result<_, _>>()?;
        let coeffs: Vec<&SpectralCoeffs> = fields.iter().map(|f| f.coeffs()).collect();
        // Φ ← Φ ∘ χ with χ the time-1 flow of X.
        let velocity = |pts: &[Vec3]| -> Vec<Vec3> {
            let ang: Vec<(f64, f64)> = pts.iter().map(|&p| direction_to_angles(p)).collect();
            let v = eval_real_many(grid.exec(), &coeffs, &ang);
            (0..pts.len()).map(|i| [v[0][i], v[1][i], v[2][i]]).collect()
        };
        let mut flow: Vec<Vec3> = grid.points().to_vec();
        let h = 1.0 / opts.substeps as f64;
        for _ in 0..opts.substeps {
            let k1 = velocity(&flow);
            let mid: Vec<Vec3> = flow
                .iter()
                .zip(&k1)
                .map(|(p, k)| {
                    let mut q = *p;
                    axpy(&mut q, 0.5 * h, *k);
                    scale(1.0 / norm(q), q)
                })
                .collect();
            let k2 = velocity(&mid);
            for (p, k) in flow.iter_mut().zip(&k2) {
                axpy(p, h, *k);
                *p = scale(1.0 / norm(*p), *p);
            }
        }
        let ang: Vec<(f64, f64)> = flow.iter().map(|&p| direction_to_angles(p)).collect();
        let next = resample(&current, &ang)?;
        let r_next = hopf_residual(&next);
        if r_next > (1.0 - opts.min_reduction) * r {
            if r.min(r_next) <= opts.accept {
                if r_next < r {
                    current = next;
                    r = r_next;
                    iterations += 1;
                }
                break;
            }
            return Err(Error::Conformalization(format!("residual stalled at {r_next:.3e} (previous {r:.3e})")));
        }
        current = next;
        r = r_next;
        iterations += 1;
    }
    Ok(Conformalized { immersion: current, iterations, residual: r })
}

/// Options for [`normalize_datum`].
#[derive(Clone, Copy, Debug)]
pub struct NormalizeOptions {
    /// Admissibility threshold on `W0`.
    pub epsilon: f64,
    /// Conformalization target.
    pub hopf_tol: f64,
    /// Largest Hopf residual accepted if conformalization stalls first.
    pub hopf_accept: f64,
    pub rebalance: RebalanceOptions,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { epsilon: 0.1, hopf_tol: 1e-10, hopf_accept: 1e-8, rebalance: RebalanceOptions::default() }
    }
}

/// Report of the datum pipeline.
#[derive(Clone, Debug)]
pub struct NormalizedDatum {
    pub immersion: Immersion,
    pub psi: MobiusMap,
    pub conformalize_iterations: usize,
    pub rebalance_iterations: usize,
}

/// Conformalize, scale to area `4π`, center, and well-balance.
pub fn normalize_datum(im: &Immersion) -> Result<Immersion> {
    Ok(normalize_datum_with(im, &NormalizeOptions::default())?.immersion)
}

pub fn normalize_datum_with(im: &Immersion, opts: &NormalizeOptions) -> Result<NormalizedDatum> {
    let w0 = energies(im).w0;
    if !(w0 < opts.epsilon) {
        return Err(Error::Admissibility(format!("W0 = {w0:.4e} is not below epsilon = {:.3e}", opts.epsilon)));
    }
    let conf = conformalize_with(
        im,
        &ConformalizeOptions { tol: opts.hopf_tol, accept: opts.hopf_accept, ..Default::default() },
    )?;
    let centered = |im: &Immersion| -> Result<Immersion> {
        let a = (4.0 * std::f64::consts::PI / im.area()).sqrt();
        let b = im.barycenter();
        im.affine(a, scale(-a, b))
    };
    let scaled = centered(&conf.immersion)?;
    let reb = rebalance_with(&scaled, &opts.rebalance)?;
    let fin = centered(&reb.immersion)?;
    Ok(NormalizedDatum {
        immersion: fin,
        psi: reb.psi,
        conformalize_iterations: conf.iterations,
        rebalance_iterations: reb.iterations,
    })
}
