//! Time integration of the conformal-gauge, normal and DeTurck-gauged
//! Willmore flows.
//!
//! Each step moves `Φ` by a velocity `V = -δ𝒲 + T` with a tangential part
//! `T` fixed by the variant, using a first-order implicit–explicit update
//! stabilized by a round biharmonic term:
//!
//! `Φⁿ⁺¹ = Φⁿ + τ (1 + τ c Δ²_{S²})⁻¹ V`,
//!
//! which is diagonal on spherical-harmonic coefficients.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::{
    balance_jacobian, balanced_tangential_for, conformal_tangential_for, killing_fields, rebalance_small,
    rebalance_with, Jacobian, KillingBasis, RebalanceOptions, TangentialVelocity,
};
use crate::geometry::{axpy, balance_residual, dot, energies, hopf_residual, norm, EnergyReport, Immersion};
use crate::sphere::{ScalarField, SpectralCoeffs, Vec3};
use crate::willmore::{noether_residuals, willmore_fields, WillmoreFields};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Conformal,
    Normal,
    Deturck,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Conformal => "conformal",
            Variant::Normal => "normal",
            Variant::Deturck => "deturck",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "conformal" => Some(Variant::Conformal),
            "normal" => Some(Variant::Normal),
            "deturck" => Some(Variant::Deturck),
            _ => None,
        }
    }
}

/// How the conformal variant fixes the Killing part of its tangential
/// velocity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KillingPart {
    /// Normal solution of the `∂̄` problem; balance restored by rebalancing.
    Zero,
    /// Chosen so that the balance functional is stationary to first order.
    Balanced,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub variant: Variant,
    /// Largest (and initial) time step.
    pub dt: f64,
    pub t_end: f64,
    /// Biharmonic stabilizer; `None` uses `½ max e^{-4λ}` refreshed each step.
    pub stabilizer: Option<f64>,
    /// Rebalance check cadence in steps (conformal variant only).
    pub rebalance_every: usize,
    /// Balance residual above which a rebalance Newton solve is run.
    pub rebalance_tol: f64,
    pub jacobian: Jacobian,
    pub killing_part: KillingPart,
    /// Hopf relaxation rate in units of `1/dt`.
    pub hopf_relaxation: f64,
    pub stop_w0: f64,
    pub max_hopf: f64,
    /// Bound on `sup |e^λ - 1|`.
    pub max_lambda_excursion: f64,
    /// Allowed increase of `W0` over one step.
    pub energy_slack: f64,
    pub max_halvings: usize,
    pub grow_after: usize,
    pub grow_factor: f64,
    pub max_steps: Option<usize>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            variant: Variant::Conformal,
            dt: 1e-4,
            t_end: 0.5,
            stabilizer: None,
            rebalance_every: 1,
            rebalance_tol: 1e-8,
            jacobian: Jacobian::Analytic,
            killing_part: KillingPart::Balanced,
            hopf_relaxation: 0.5,
            stop_w0: 1e-10,
            max_hopf: 1e-5,
            max_lambda_excursion: 0.5,
            energy_slack: 1e-12,
            max_halvings: 5,
            grow_after: 20,
            grow_factor: 1.2,
            max_steps: None,
        }
    }
}

impl FlowConfig {
    /// `τ c (L(L+1))²`: how strongly the stabilizer damps the top degree.
    pub fn stability_number(&self, c: f64, l_max: usize) -> f64 {
        let e = (l_max * (l_max + 1)) as f64;
        self.dt * c * e * e
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::Consistency(format!("{k}: {m}")));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if !(self.t_end >= 0.0) {
            return bad("t_end", "must be non-negative");
        }
        if self.stabilizer.is_some_and(|c| !(c >= 0.0)) {
            return bad("stabilizer", "must be non-negative");
        }
        if self.rebalance_every == 0 {
            return bad("rebalance_every", "must be at least 1");
        }
        for (k, v) in [
            ("rebalance_tol", self.rebalance_tol),
            ("stop_w0", self.stop_w0),
            ("max_hopf", self.max_hopf),
            ("max_lambda_excursion", self.max_lambda_excursion),
            ("grow_factor", self.grow_factor),
        ] {
            if !(v > 0.0) {
                return bad(k, "must be positive");
            }
        }
        if !(self.hopf_relaxation >= 0.0 && self.hopf_relaxation < 2.0) {
            return bad("hopf_relaxation", "must lie in [0, 2)");
        }
        Ok(())
    }
}

/// One point of a trajectory.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub im: Immersion,
    pub wf: WillmoreFields,
    pub last_u: Option<TangentialVelocity>,
    pub step_index: usize,
}

impl FlowState {
    pub fn new(im: Immersion) -> Self {
        Self::at(im, 0.0, 0)
    }

    pub fn at(im: Immersion, t: f64, step_index: usize) -> Self {
        let wf = willmore_fields(&im);
        FlowState { t, im, wf, last_u: None, step_index }
    }
}

/// Diagnostics of one accepted step, evaluated at its end point.
#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub t: f64,
    pub dt_used: f64,
    pub energies: EnergyReport,
    pub hopf: f64,
    pub balance: f64,
    pub noether: [f64; 4],
    /// `(W0(t + dt) - W0(t)) / dt`.
    pub dissipation_lhs: f64,
    /// `-∫ |δ𝒲|² dσ_g` at the start of the step.
    pub dissipation_rhs: f64,
    pub rebalance_iterations: usize,
    pub stabilizer: f64,
}

/// Shared per-run data.
pub struct FlowContext {
    pub basis: KillingBasis,
    /// DeTurck reference metric (the initial datum).
    pub reference: Immersion,
}

impl FlowContext {
    pub fn new(reference: &Immersion) -> Self {
        FlowContext { basis: killing_fields(reference.grid()), reference: reference.clone() }
    }
}

fn norm6(v: &[f64; 6]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn breach(t: f64, reason: String) -> Error {
    Error::FlowClass { t, reason }
}

fn lambda_excursion(im: &Immersion) -> f64 {
    im.lambda().values().iter().map(|l| (l.exp() - 1.0).abs()).fold(0.0, f64::max)
}

/// DeTurck field `V = -½ Δ_g W` in immersed form, with
/// `W^c = g^{ab}(Γ^c_ab - Γ̆^c_ab)` and `Δ_g` the rough Laplacian of the
/// induced metric on tangent fields.
pub fn deturck_vector_field(im: &Immersion, reference: &Immersion) -> Result<[ScalarField; 3]> {
    let grid = im.grid();
    if !Arc::ptr_eq(grid, reference.grid()) && grid.len() != reference.grid().len() {
        return Err(Error::Consistency("DeTurck reference lives on a different grid".into()));
    }
    let n = grid.len();
    let x: Vec<Vec3> = (0..n)
        .map(|i| {
            let (ng, rg) = (im.node(i), reference.node(i));
            let mut diff = [[[0.0; 2]; 2]; 2];
            for c in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        diff[c][a][b] = ng.conn[c][a][b] - rg.conn[c][a][b];
                    }
                }
            }
            let w = [ng.trace(&diff[0]), ng.trace(&diff[1])];
            let mut v = [0.0; 3];
            axpy(&mut v, w[0], ng.dphi[0]);
            axpy(&mut v, w[1], ng.dphi[1]);
            v
        })
        .collect();
    let lap: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let f = ScalarField::new(grid, x.iter().map(|v| v[k]).collect()).expect("grid-sized");
            im.laplace_g_coeffs(f.coeffs())
        })
        .collect();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let ng = im.node(i);
        let mut l = [lap[0][i], lap[1][i], lap[2][i]];
        let nn = ng.normal;
        let ln = dot(l, nn);
        axpy(&mut l, -ln, nn);
        // Curvature correction turning the projected Laplacian into the rough one.
        for a in 0..2 {
            for b in 0..2 {
                let c = ng.g_inv[a][b] * dot(x[i], ng.d_normal(a));
                axpy(&mut l, c, ng.d_normal(b));
            }
        }
        for k in 0..3 {
            out[k][i] = -0.5 * l[k];
        }
    }
    let [a, b, c] = out;
    Ok([ScalarField::new(grid, a)?, ScalarField::new(grid, b)?, ScalarField::new(grid, c)?])
}

/// Apply `(1 + τ c Δ²_{S²})⁻¹` to a Cartesian field, returning coefficients.
fn damp(grid: &Arc<crate::sphere::Grid>, v: &[Vec3], tau_c: f64) -> [SpectralCoeffs; 3] {
    std::array::from_fn(|k| {
        let f = ScalarField::new(grid, v.iter().map(|p| p[k]).collect()).expect("grid-sized");
        f.coeffs().map_degree(0, |l| {
            let e = (l * (l + 1)) as f64;
            1.0 / (1.0 + tau_c * e * e)
        })
    })
}

/// Step velocity `V` (node values and coefficients) for the configured
/// variant. The fourth-order part `-δ𝒲` (plus the DeTurck field) is damped by
/// the stabilizer; the conformal tangential part is then solved against the
/// damped field, so the gauge sees the displacement actually taken.
fn velocity(
    state: &FlowState,
    cfg: &FlowConfig,
    ctx: &FlowContext,
    dt: f64,
    c: f64,
    jac: &[[f64; 6]; 6],
) -> Result<([SpectralCoeffs; 3], Option<TangentialVelocity>)> {
    let im = &state.im;
    let wf = &state.wf;
    let grid = im.grid();
    let n = grid.len();
    let mut v: Vec<Vec3> = (0..n).map(|i| wf.dw_at(i).map(|x| -x)).collect();
    if cfg.variant == Variant::Deturck {
        let d = deturck_vector_field(im, &ctx.reference)?;
        for (i, vi) in v.iter_mut().enumerate() {
            for k in 0..3 {
                vi[k] += d[k].values()[i];
            }
        }
    }
    let mut coeffs = damp(grid, &v, dt * c);
    if cfg.variant != Variant::Conformal {
        return Ok((coeffs, None));
    }
    let damped: Vec<Vec3> = {
        let f: Vec<ScalarField> = coeffs.iter().map(|c| ScalarField::from_coeffs(grid, c).expect("grid")).collect();
        (0..n).map(|i| [f[0].values()[i], f[1].values()[i], f[2].values()[i]]).collect()
    };
    let kappa = cfg.hopf_relaxation / dt;
    let tv = match cfg.killing_part {
        KillingPart::Zero => conformal_tangential_for(im, &damped, kappa),
        KillingPart::Balanced => balanced_tangential_for(im, &damped, &ctx.basis, jac, kappa),
    }
    .map_err(|e| breach(state.t, e.to_string()))?;
    for k in 0..3 {
        let f = ScalarField::new(grid, tv.immersed.iter().map(|p| p[k]).collect()).expect("grid-sized");
        coeffs[k].axpy(1.0, f.coeffs());
    }
    Ok((coeffs, Some(tv)))
}

/// One step of size `dt` (no adaptivity).
pub fn step(state: &FlowState, cfg: &FlowConfig, ctx: &FlowContext, dt: f64) -> Result<(FlowState, StepReport)> {
    let im = &state.im;
    let grid = im.grid();
    if cfg.variant == Variant::Conformal {
        let h = hopf_residual(im);
        if h > cfg.max_hopf {
            return Err(breach(state.t, format!("Hopf residual {h:.3e} above {:.1e}", cfg.max_hopf)));
        }
    }
    let e0 = energies(im);
    let diss = state.wf.dissipation(im);
    let c = cfg
        .stabilizer
        .unwrap_or_else(|| 0.5 * im.lambda().values().iter().map(|l| (-4.0 * l).exp()).fold(0.0, f64::max));
    let jac = if cfg.variant == Variant::Conformal { balance_jacobian(im, &ctx.basis) } else { [[0.0; 6]; 6] };
    let (v, tv) = velocity(state, cfg, ctx, dt, c, &jac)?;
    let coeffs: Vec<_> = (0..3)
        .map(|k| {
            let mut out = im.phi()[k].coeffs().clone();
            out.axpy(dt, &v[k]);
            out
        })
        .collect();
    let t = state.t + dt;
    let mut next =
        Immersion::from_coeffs(grid, [&coeffs[0], &coeffs[1], &coeffs[2]]).map_err(|e| breach(t, e.to_string()))?;
    let mut rebalance_iterations = 0;
    if cfg.variant == Variant::Conformal && (state.step_index + 1) % cfg.rebalance_every == 0 {
        let r = norm6(&balance_residual(&next));
        if r > cfg.rebalance_tol {
            // The Jacobian at the start of the step serves as the chord.
            match rebalance_small(&next, &ctx.basis, &jac, cfg.rebalance_tol, 4) {
                Ok((im, it)) => {
                    next = im;
                    rebalance_iterations = it;
                }
                Err(_) => {
                    let opts =
                        RebalanceOptions { tol: cfg.rebalance_tol, jacobian: cfg.jacobian, ..Default::default() };
                    let rb = rebalance_with(&next, &opts).map_err(|e| breach(t, format!("rebalance: {e}")))?;
                    rebalance_iterations = rb.iterations;
                    next = rb.immersion;
                }
            }
        }
    }
    let e1 = energies(&next);
    if e1.w0 > e0.w0 + cfg.energy_slack {
        return Err(breach(t, format!("W0 increased from {:.6e} to {:.6e}", e0.w0, e1.w0)));
    }
    let hopf = hopf_residual(&next);
    if cfg.variant == Variant::Conformal && hopf > cfg.max_hopf {
        return Err(breach(t, format!("Hopf residual {hopf:.3e} above {:.1e}", cfg.max_hopf)));
    }
    let ex = lambda_excursion(&next);
    if ex > cfg.max_lambda_excursion {
        return Err(breach(t, format!("conformal factor excursion {ex:.3e} above {:.2}", cfg.max_lambda_excursion)));
    }
    let wf = willmore_fields(&next);
    let report = StepReport {
        t,
        dt_used: dt,
        hopf,
        balance: norm6(&balance_residual(&next)),
        noether: noether_residuals(&next, &wf),
        dissipation_lhs: (e1.w0 - e0.w0) / dt,
        dissipation_rhs: -diss,
        rebalance_iterations,
        stabilizer: c,
        energies: e1,
    };
    let out = FlowState { t, im: next, wf, last_u: tv, step_index: state.step_index + 1 };
    Ok((out, report))
}

pub fn step_conformal(state: &FlowState, cfg: &FlowConfig, ctx: &FlowContext) -> Result<(FlowState, StepReport)> {
    step(state, &FlowConfig { variant: Variant::Conformal, ..cfg.clone() }, ctx, cfg.dt)
}

pub fn step_normal(state: &FlowState, cfg: &FlowConfig, ctx: &FlowContext) -> Result<(FlowState, StepReport)> {
    step(state, &FlowConfig { variant: Variant::Normal, ..cfg.clone() }, ctx, cfg.dt)
}

pub fn step_deturck(state: &FlowState, cfg: &FlowConfig, ctx: &FlowContext) -> Result<(FlowState, StepReport)> {
    step(state, &FlowConfig { variant: Variant::Deturck, ..cfg.clone() }, ctx, cfg.dt)
}

/// Why a run ended.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    ReachedEnd,
    MaxSteps,
    Aborted(String),
}

/// Adaptive stepping state carried across steps (and checkpoints).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stepper {
    pub dt: f64,
    pub clean_steps: usize,
    pub halvings: usize,
}

impl Stepper {
    pub fn new(cfg: &FlowConfig) -> Self {
        Stepper { dt: cfg.dt, clean_steps: 0, halvings: 0 }
    }
}

fn is_breach(e: &Error) -> bool {
    matches!(
        e,
        Error::FlowClass { .. }
            | Error::Degenerate { .. }
            | Error::Gauge(_)
            | Error::GaugeConvergence(_)
            | Error::Chart(_)
            | Error::Resolution(_)
    )
}

/// Advance until `t_end`, `W0 ≤ stop_w0`, `max_steps`, or a persistent
/// breach. `observe` sees every accepted step; its errors abort the run.
pub fn run_flow_with(
    start: FlowState,
    stepper: Stepper,
    cfg: &FlowConfig,
    ctx: &FlowContext,
    mut observe: impl FnMut(&FlowState, &StepReport, &Stepper) -> Result<()>,
) -> Result<(FlowState, Stepper, Outcome)> {
    cfg.validate()?;
    let mut state = start;
    let mut st = stepper;
    let eps = 1e-12 * cfg.dt;
    loop {
        if energies(&state.im).w0 <= cfg.stop_w0 {
            return Ok((state, st, Outcome::Converged));
        }
        if state.t >= cfg.t_end - eps {
            return Ok((state, st, Outcome::ReachedEnd));
        }
        if cfg.max_steps.is_some_and(|m| state.step_index >= m) {
            return Ok((state, st, Outcome::MaxSteps));
        }
        let mut halvings = 0;
        let (next, report) = loop {
            let dt = st.dt.min(cfg.t_end - state.t);
            match step(&state, cfg, ctx, dt) {
                Ok(r) => break r,
                Err(e) if is_breach(&e) => {
                    if halvings >= cfg.max_halvings {
                        return Ok((state, st, Outcome::Aborted(e.to_string())));
                    }
                    halvings += 1;
                    st.halvings += 1;
                    st.dt *= 0.5;
                    st.clean_steps = 0;
                }
                Err(e) => return Err(e),
            }
        };
        if halvings == 0 {
            st.clean_steps += 1;
            if st.clean_steps >= cfg.grow_after && st.dt < cfg.dt {
                st.dt = (st.dt * cfg.grow_factor).min(cfg.dt);
                st.clean_steps = 0;
            }
        }
        observe(&next, &report, &st)?;
        state = next;
    }
}

/// Reports and selected states of a run.
pub struct Trajectory {
    pub reports: Vec<StepReport>,
    /// `(t, immersion)` at the requested sample times (first step at or
    /// after each).
    pub samples: Vec<(f64, Immersion)>,
    pub initial: EnergyReport,
    pub final_state: FlowState,
    pub outcome: Outcome,
}

/// Run from a datum, collecting reports and samples at `sample_times`.
pub fn run_flow(datum: &Immersion, cfg: &FlowConfig, sample_times: &[f64]) -> Result<Trajectory> {
    let ctx = FlowContext::new(datum);
    let mut reports = Vec::new();
    let mut samples = Vec::new();
    let mut next_sample = 0;
    let tol = 1e-9 * cfg.dt;
    let (final_state, _, outcome) =
        run_flow_with(FlowState::new(datum.clone()), Stepper::new(cfg), cfg, &ctx, |s, r, _| {
            while next_sample < sample_times.len() && s.t >= sample_times[next_sample] - tol {
                samples.push((s.t, s.im.clone()));
                next_sample += 1;
            }
            reports.push(r.clone());
            Ok(())
        })?;
    Ok(Trajectory { reports, samples, initial: energies(datum), final_state, outcome })
}

/// Symmetric sampled Hausdorff distance between the image surfaces.
///
/// Each surface is sampled on a lat-long lattice `refine` times finer than
/// the grid. Every sample is projected onto the other surface by
/// Gauss–Newton on its spectral parametrization, seeded at the nearest
/// lattice sample there.
pub fn sampled_hausdorff(a: &Immersion, b: &Immersion, refine: usize) -> f64 {
    let sa = Lattice::new(a, refine);
    let sb = Lattice::new(b, refine);
    sa.pts.iter().map(|p| sb.distance(b, *p)).chain(sb.pts.iter().map(|p| sa.distance(a, *p))).fold(0.0, f64::max)
}

struct Lattice {
    angles: Vec<(f64, f64)>,
    pts: Vec<Vec3>,
    buckets: std::collections::HashMap<(i64, i64, i64), Vec<usize>>,
}

const BUCKET: f64 = 0.05;

fn bucket(p: &Vec3) -> (i64, i64, i64) {
    ((p[0] / BUCKET).floor() as i64, (p[1] / BUCKET).floor() as i64, (p[2] / BUCKET).floor() as i64)
}

fn eval_phi(im: &Immersion, ang: &[(f64, f64)]) -> Vec<Vec3> {
    let v = crate::sphere::eval_real_many(im.grid().exec(), &im.phi_coeffs(), ang);
    (0..ang.len()).map(|i| [v[0][i], v[1][i], v[2][i]]).collect()
}

impl Lattice {
    fn new(im: &Immersion, refine: usize) -> Self {
        let grid = im.grid();
        let (nt, np) = (grid.n_lat() * refine.max(1), grid.n_lon() * refine.max(1));
        let angles: Vec<(f64, f64)> = (0..nt)
            .flat_map(|i| {
                let th = std::f64::consts::PI * (i as f64 + 0.5) / nt as f64;
                (0..np).map(move |j| (th, 2.0 * std::f64::consts::PI * j as f64 / np as f64))
            })
            .collect();
        let pts = eval_phi(im, &angles);
        let mut buckets: std::collections::HashMap<_, Vec<usize>> = std::collections::HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            buckets.entry(bucket(p)).or_default().push(i);
        }
        Lattice { angles, pts, buckets }
    }

    fn nearest(&self, p: Vec3) -> usize {
        let d2 = |q: &Vec3| (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>();
        let (kx, ky, kz) = bucket(&p);
        let (mut best, mut arg) = (f64::INFINITY, 0);
        let mut r = 1;
        loop {
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        for &j in self.buckets.get(&(kx + dx, ky + dy, kz + dz)).into_iter().flatten() {
                            let d = d2(&self.pts[j]);
                            if d < best {
                                best = d;
                                arg = j;
                            }
                        }
                    }
                }
            }
            // Anything outside the searched cube is at least r·h away.
            if best.sqrt() <= r as f64 * BUCKET || r > 64 {
                return arg;
            }
            r += 1;
        }
    }

    /// Distance from `p` to the surface `im` sampled by this lattice.
    fn distance(&self, im: &Immersion, p: Vec3) -> f64 {
        let (mut th, mut ph) = self.angles[self.nearest(p)];
        let sub = |x: Vec3, y: Vec3| [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
        let h = 1e-6;
        let mut best = norm(sub(eval_phi(im, &[(th, ph)])[0], p));
        for _ in 0..4 {
            let v = eval_phi(im, &[(th, ph), (th + h, ph), (th - h, ph), (th, ph + h), (th, ph - h)]);
            let r = sub(p, v[0]);
            let jt = sub(v[1], v[2]).map(|x| x / (2.0 * h));
            let jp = sub(v[3], v[4]).map(|x| x / (2.0 * h));
            let (a, b, c) = (dot(jt, jt), dot(jt, jp), dot(jp, jp));
            let mu = 1e-12 * (a + c);
            let det = (a + mu) * (c + mu) - b * b;
            if det <= 0.0 {
                break;
            }
            let (rt, rp) = (dot(jt, r), dot(jp, r));
            th += ((c + mu) * rt - b * rp) / det;
            ph += ((a + mu) * rp - b * rt) / det;
            best = best.min(norm(sub(eval_phi(im, &[(th, ph)])[0], p)));
        }
        best
    }
}

#[cfg(test)]
mod tests;
