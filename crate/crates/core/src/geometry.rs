//! Induced geometry of an immersion `Φ: S² → R³`.
//!
//! All quantities are evaluated pointwise in the round orthonormal frame
//! `(e_θ, e_φ)`, with the pullback metric kept general (not assumed
//! conformal). Derivatives of `Φ` come from its harmonic expansion, so the
//! poles need no special treatment.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::sphere::{frame_derivatives, Chart, FrameDerivatives, Grid, ScalarField, SpectralCoeffs, SpinField, Vec3};

pub type Mat2 = [[f64; 2]; 2];

/// Smallest admissible `e^{2λ}` and frame cross-product norm.
const DEGENERACY_FLOOR: f64 = 1e-10;

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn axpy(acc: &mut Vec3, s: f64, v: Vec3) {
    acc[0] += s * v[0];
    acc[1] += s * v[1];
    acc[2] += s * v[2];
}

#[inline]
pub(crate) fn scale(s: f64, v: Vec3) -> Vec3 {
    [s * v[0], s * v[1], s * v[2]]
}

#[inline]
pub(crate) fn norm(v: Vec3) -> f64 {
    dot(v, v).sqrt()
}

/// Per-node geometric data.
#[derive(Clone, Copy, Debug, Default)]
pub struct NodeGeometry {
    /// `∂_θΦ` and `(1/sinθ)∂_φΦ`.
    pub dphi: [Vec3; 2],
    /// Round covariant Hessian of `Φ` in the frame.
    pub hess: [[Vec3; 2]; 2],
    pub g: Mat2,
    pub g_inv: Mat2,
    /// `√det g`, the induced area element relative to the round one.
    pub area_density: f64,
    pub normal: Vec3,
    /// Second fundamental form `⟨Hess Φ, N⟩`.
    pub a: Mat2,
    /// `⟨H, N⟩ = ½ g^{ab} A_ab`; equals -1 on the outward unit sphere.
    pub mean: f64,
    pub gauss: f64,
    /// Connection difference `D^c_ab = Γ^c_ab - Γ̊^c_ab` (a tensor).
    pub conn: [Mat2; 2],
    /// Its trace `W^c = g^{ab} D^c_ab`.
    pub trace_conn: [f64; 2],
}

impl NodeGeometry {
    /// Tangent vector `g^{ab} ω_b ∂_aΦ` of a frame covector.
    pub fn sharp(&self, omega: [f64; 2]) -> Vec3 {
        let up = self.raise(omega);
        let mut v = [0.0; 3];
        axpy(&mut v, up[0], self.dphi[0]);
        axpy(&mut v, up[1], self.dphi[1]);
        v
    }

    pub fn raise(&self, omega: [f64; 2]) -> [f64; 2] {
        [
            self.g_inv[0][0] * omega[0] + self.g_inv[0][1] * omega[1],
            self.g_inv[1][0] * omega[0] + self.g_inv[1][1] * omega[1],
        ]
    }

    /// `g^{ab} M_ab`.
    pub fn trace(&self, m: &Mat2) -> f64 {
        let gi = &self.g_inv;
        gi[0][0] * m[0][0] + 2.0 * gi[0][1] * m[0][1] + gi[1][1] * m[1][1]
    }

    /// `g^{ac} g^{bd} M_ab M_cd`.
    pub fn norm_sq(&self, m: &Mat2) -> f64 {
        let mut up = [[0.0; 2]; 2];
        for a in 0..2 {
            for d in 0..2 {
                up[a][d] = (0..2).map(|b| self.g_inv[a][b] * m[b][d]).sum();
            }
        }
        (0..2).map(|a| (0..2).map(|b| up[a][b] * up[b][a]).sum::<f64>()).sum()
    }

    /// Shape operator `S^a_b = g^{ac} A_cb`, so that `∂_b N = -S^a_b ∂_aΦ`.
    pub fn shape_operator(&self) -> Mat2 {
        let mut s = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                s[a][b] = (0..2).map(|c| self.g_inv[a][c] * self.a[c][b]).sum();
            }
        }
        s
    }

    /// `∂_b N` in Cartesian components.
    pub fn d_normal(&self, b: usize) -> Vec3 {
        let s = self.shape_operator();
        let mut v = [0.0; 3];
        axpy(&mut v, -s[0][b], self.dphi[0]);
        axpy(&mut v, -s[1][b], self.dphi[1]);
        v
    }
}

/// Second-order data stored as grid fields.
#[derive(Clone, Debug)]
pub struct FundamentalForms {
    /// `A_θθ, A_θφ, A_φφ`.
    pub a: [ScalarField; 3],
    /// Trace-free part `A° = A - ⟨H,N⟩ g`, same layout.
    pub a0: [ScalarField; 3],
    /// `A(m, m)` with `m = e_θ + i e_φ` (spin 2); equals `A°(m, m)` when
    /// the metric is conformal.
    pub h0: SpinField,
    /// Scalar mean curvature, positive on the outward sphere.
    pub h_sc: ScalarField,
    pub k: ScalarField,
    /// `½ g(m, m)` (spin 2): the Hopf differential in frame components.
    pub hopf: SpinField,
}

/// An immersion with its geometry cached at construction.
#[derive(Clone, Debug)]
pub struct Immersion {
    grid: Arc<Grid>,
    phi: [ScalarField; 3],
    nodes: Vec<NodeGeometry>,
    lambda: ScalarField,
    normal: [ScalarField; 3],
    forms: FundamentalForms,
}

/// Integrals reported by [`energies`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub area: f64,
    pub barycenter: [f64; 3],
    pub gauss_bonnet: f64,
    pub euler_char: f64,
    pub hopf_l2: f64,
    pub dlm_distance: f64,
}

fn mat_of(fd: &[FrameDerivatives; 3], i: usize) -> ([Vec3; 2], [[Vec3; 2]; 2]) {
    let d = [[fd[0].d_theta[i], fd[1].d_theta[i], fd[2].d_theta[i]], [fd[0].d_phi[i], fd[1].d_phi[i], fd[2].d_phi[i]]];
    let tt = [fd[0].h_tt[i], fd[1].h_tt[i], fd[2].h_tt[i]];
    let tp = [fd[0].h_tp[i], fd[1].h_tp[i], fd[2].h_tp[i]];
    let pp = [fd[0].h_pp[i], fd[1].h_pp[i], fd[2].h_pp[i]];
    (d, [[tt, tp], [tp, pp]])
}

fn node_geometry(dphi: [Vec3; 2], hess: [[Vec3; 2]; 2]) -> Option<NodeGeometry> {
    let g = [[dot(dphi[0], dphi[0]), dot(dphi[0], dphi[1])], [dot(dphi[1], dphi[0]), dot(dphi[1], dphi[1])]];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let c = cross(dphi[0], dphi[1]);
    let cn = norm(c);
    if !(det > DEGENERACY_FLOOR * DEGENERACY_FLOOR
        && cn > DEGENERACY_FLOOR
        && 0.5 * (g[0][0] + g[1][1]) > DEGENERACY_FLOOR)
    {
        return None;
    }
    let g_inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    let normal = scale(1.0 / cn, c);
    let mut a = [[0.0; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            a[p][q] = dot(hess[p][q], normal);
        }
    }
    let mut ng = NodeGeometry { dphi, hess, g, g_inv, area_density: det.sqrt(), normal, a, ..Default::default() };
    ng.mean = 0.5 * ng.trace(&a);
    ng.gauss = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
    for cidx in 0..2 {
        for p in 0..2 {
            for q in 0..2 {
                let low = [dot(hess[p][q], dphi[0]), dot(hess[p][q], dphi[1])];
                ng.conn[cidx][p][q] = g_inv[cidx][0] * low[0] + g_inv[cidx][1] * low[1];
            }
        }
        ng.trace_conn[cidx] = ng.trace(&ng.conn[cidx]);
    }
    Some(ng)
}

/// Build the geometry of `Φ` (each component is first projected onto its
/// band-limited expansion).
pub fn build_geometry(phi: [ScalarField; 3]) -> Result<Immersion> {
    let grid = phi[0].grid().clone();
    for f in &phi[1..] {
        if f.grid().len() != grid.len() {
            return Err(crate::sphere::SphereError::Size { expected: grid.len(), got: f.grid().len() }.into());
        }
    }
    let phi = [phi[0].band_limited(), phi[1].band_limited(), phi[2].band_limited()];
    Immersion::assemble(grid, phi)
}

impl Immersion {
    fn assemble(grid: Arc<Grid>, phi: [ScalarField; 3]) -> Result<Self> {
        let fd = [
            frame_derivatives(&grid, phi[0].coeffs()),
            frame_derivatives(&grid, phi[1].coeffs()),
            frame_derivatives(&grid, phi[2].coeffs()),
        ];
        let nodes_opt = exec::map_range(grid.exec(), grid.len(), |i| {
            let (d, h) = mat_of(&fd, i);
            node_geometry(d, h)
        });
        let mut nodes = Vec::with_capacity(grid.len());
        for (i, n) in nodes_opt.into_iter().enumerate() {
            match n {
                Some(n) => nodes.push(n),
                None => {
                    let (theta, phi) = grid.theta_phi(i);
                    return Err(Error::Degenerate { node: i, theta, phi });
                }
            }
        }
        let field = |f: &dyn Fn(&NodeGeometry) -> f64| {
            ScalarField::new(&grid, nodes.iter().map(f).collect()).expect("grid-sized")
        };
        let lambda = field(&|n| 0.5 * (0.5 * (n.g[0][0] + n.g[1][1])).ln());
        let normal = [field(&|n| n.normal[0]), field(&|n| n.normal[1]), field(&|n| n.normal[2])];
        let a = [field(&|n| n.a[0][0]), field(&|n| n.a[0][1]), field(&|n| n.a[1][1])];
        let a0 = [
            field(&|n| n.a[0][0] - n.mean * n.g[0][0]),
            field(&|n| n.a[0][1] - n.mean * n.g[0][1]),
            field(&|n| n.a[1][1] - n.mean * n.g[1][1]),
        ];
        let h0 = nodes.iter().map(|n| Complex64::new(n.a[0][0] - n.a[1][1], 2.0 * n.a[0][1])).collect();
        let hopf = nodes.iter().map(|n| 0.5 * Complex64::new(n.g[0][0] - n.g[1][1], 2.0 * n.g[0][1])).collect();
        let forms = FundamentalForms {
            a,
            a0,
            h0: SpinField::new(&grid, 2, h0)?,
            h_sc: field(&|n| -n.mean),
            k: field(&|n| n.gauss),
            hopf: SpinField::new(&grid, 2, hopf)?,
        };
        Ok(Immersion { grid, phi, nodes, lambda, normal, forms })
    }

    /// The standard embedding `I`.
    pub fn unit_sphere(grid: &Arc<Grid>) -> Self {
        let phi = [
            ScalarField::from_points(grid, |y| y[0]),
            ScalarField::from_points(grid, |y| y[1]),
            ScalarField::from_points(grid, |y| y[2]),
        ];
        build_geometry(phi).expect("the round sphere is nondegenerate")
    }

    pub fn from_coeffs(grid: &Arc<Grid>, c: [&SpectralCoeffs; 3]) -> Result<Self> {
        let phi = [
            ScalarField::from_coeffs(grid, c[0])?,
            ScalarField::from_coeffs(grid, c[1])?,
            ScalarField::from_coeffs(grid, c[2])?,
        ];
        Immersion::assemble(grid.clone(), phi)
    }

    /// From Cartesian node positions.
    pub fn from_points(grid: &Arc<Grid>, pts: &[Vec3]) -> Result<Self> {
        let comp = |k: usize| ScalarField::new(grid, pts.iter().map(|p| p[k]).collect());
        build_geometry([comp(0)?, comp(1)?, comp(2)?])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn phi(&self) -> &[ScalarField; 3] {
        &self.phi
    }
    pub fn phi_coeffs(&self) -> [&SpectralCoeffs; 3] {
        [self.phi[0].coeffs(), self.phi[1].coeffs(), self.phi[2].coeffs()]
    }
    /// `Φ` at node `i`.
    pub fn position(&self, i: usize) -> Vec3 {
        [self.phi[0].values()[i], self.phi[1].values()[i], self.phi[2].values()[i]]
    }
    pub fn positions(&self) -> Vec<Vec3> {
        (0..self.grid.len()).map(|i| self.position(i)).collect()
    }
    pub fn node(&self, i: usize) -> &NodeGeometry {
        &self.nodes[i]
    }
    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }
    /// `λ` with `e^{2λ} = ½ tr_{g_{S²}} g`.
    pub fn lambda(&self) -> &ScalarField {
        &self.lambda
    }
    pub fn normal(&self) -> &[ScalarField; 3] {
        &self.normal
    }
    pub fn normal_at(&self, i: usize) -> Vec3 {
        self.nodes[i].normal
    }
    pub fn forms(&self) -> &FundamentalForms {
        &self.forms
    }
    /// Mean curvature vector `H = ½ tr_g A · N`.
    pub fn mean_vector(&self, i: usize) -> Vec3 {
        scale(self.nodes[i].mean, self.nodes[i].normal)
    }

    /// `Σ w_i f_i √det g_i`, i.e. `∫ f dσ_g`.
    pub fn integrate_g(&self, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(i, v)| v * self.nodes[i].area_density * self.grid.weight(i)).sum()
    }

    pub fn integrate_g_vec(&self, values: &[Vec3]) -> Vec3 {
        let mut acc = [0.0; 3];
        for (i, v) in values.iter().enumerate() {
            axpy(&mut acc, self.nodes[i].area_density * self.grid.weight(i), *v);
        }
        acc
    }

    pub fn area(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.nodes[i].area_density * self.grid.weight(i)).sum()
    }

    /// Area-weighted average of `Φ`.
    pub fn barycenter(&self) -> Vec3 {
        let s = self.integrate_g_vec(&self.positions());
        scale(1.0 / self.area(), s)
    }

    /// Frame covector `(∂_θ f, (1/sinθ) ∂_φ f)` of a scalar, spectrally.
    pub fn differential(&self, f: &SpectralCoeffs) -> FrameDerivatives {
        frame_derivatives(&self.grid, f)
    }

    /// Laplace–Beltrami operator of the induced metric applied to a scalar.
    pub fn laplace_g_coeffs(&self, f: &SpectralCoeffs) -> Vec<f64> {
        let fd = self.differential(f);
        self.laplace_from(&fd)
    }

    pub(crate) fn laplace_from(&self, fd: &FrameDerivatives) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                let n = &self.nodes[i];
                let hess = fd.hessian(i);
                n.trace(&hess) - n.trace_conn[0] * fd.d_theta[i] - n.trace_conn[1] * fd.d_phi[i]
            })
            .collect()
    }

    pub fn laplace_g(&self, f: &ScalarField) -> ScalarField {
        ScalarField::new(&self.grid, self.laplace_g_coeffs(f.coeffs())).expect("grid-sized")
    }

    /// `Δ_g Φ` at every node (equals `2H`).
    pub fn laplace_phi(&self) -> Vec<Vec3> {
        let l: Vec<Vec<f64>> = self.phi.iter().map(|f| self.laplace_g_coeffs(f.coeffs())).collect();
        (0..self.grid.len()).map(|i| [l[0][i], l[1][i], l[2][i]]).collect()
    }

    /// `aΦ + k`.
    pub fn affine(&self, a: f64, k: Vec3) -> Result<Self> {
        let phi =
            [self.phi[0].map(|v| a * v + k[0]), self.phi[1].map(|v| a * v + k[1]), self.phi[2].map(|v| a * v + k[2])];
        build_geometry(phi)
    }

    /// `Φ + f N` for node values `f`.
    pub fn displaced_normally(&self, f: &[f64]) -> Result<Self> {
        let pts: Vec<Vec3> = (0..self.grid.len())
            .map(|i| {
                let mut p = self.position(i);
                axpy(&mut p, f[i], self.nodes[i].normal);
                p
            })
            .collect();
        Immersion::from_points(&self.grid, &pts)
    }

    /// Same immersion resampled on another grid (zero-padding or truncating
    /// the expansion).
    pub fn regrid(&self, grid: &Arc<Grid>) -> Result<Self> {
        let c = self.phi_coeffs();
        let lift = |c: &SpectralCoeffs| {
            let mut out = SpectralCoeffs::zeros(grid.l_max(), 0);
            for (l, m, a) in c.iter() {
                if l <= grid.l_max() {
                    out.set(l, m, a);
                }
            }
            out
        };
        Immersion::from_coeffs(grid, [&lift(c[0]), &lift(c[1]), &lift(c[2])])
    }
}

/// Willmore energies, area, barycenter and the topological and closeness
/// diagnostics.
pub fn energies(im: &Immersion) -> EnergyReport {
    let n = im.grid.len();
    let mut w0 = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut k = vec![0.0; n];
    for (i, ng) in im.nodes.iter().enumerate() {
        let a2 = ng.norm_sq(&ng.a);
        w0[i] = 0.5 * (a2 - 2.0 * ng.mean * ng.mean);
        w1[i] = ng.mean * ng.mean;
        w2[i] = 0.25 * a2;
        k[i] = ng.gauss;
    }
    let (w0, w1, w2) = (im.integrate_g(&w0), im.integrate_g(&w1), im.integrate_g(&w2));
    EnergyReport {
        w0,
        w1,
        w2,
        area: im.area(),
        barycenter: im.barycenter(),
        gauss_bonnet: im.integrate_g(&k),
        euler_char: (w1 - w0) / (2.0 * std::f64::consts::PI),
        hopf_l2: hopf_residual(im),
        dlm_distance: dlm_distance(im),
    }
}

/// Round-metric `L²` norm of the Hopf differential; zero iff `Φ` is conformal.
pub fn hopf_residual(im: &Immersion) -> f64 {
    im.forms.hopf.l2_norm()
}

/// The Hopf differential `g_zz` in one stereographic chart (NaN outside it).
pub fn chart_hopf(im: &Immersion, chart: Chart) -> Vec<Complex64> {
    let grid = &im.grid;
    (0..grid.len())
        .map(|i| {
            let (t, p) = grid.theta_phi(i);
            if !chart.contains(t) {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            let q = 2.0 * im.forms.hopf.values()[i].conj();
            let f = 0.25 * (2.0 * chart.log_factor(t)).exp();
            match chart {
                Chart::North => f * Complex64::from_polar(1.0, 2.0 * p) * q,
                Chart::South => f * Complex64::from_polar(1.0, -2.0 * p) * q,
            }
        })
        .collect()
}

/// `(∫ I e^{2λ} dσ, ∫ Φ × I dσ)`: zero iff `Φ` is well balanced.
pub fn balance_residual(im: &Immersion) -> [f64; 6] {
    let grid = &im.grid;
    let mut out = [0.0; 6];
    for i in 0..grid.len() {
        let w = grid.weight(i);
        let y = grid.point(i);
        let ng = &im.nodes[i];
        let e2l = 0.5 * (ng.g[0][0] + ng.g[1][1]);
        let c = cross(im.position(i), y);
        for k in 0..3 {
            out[k] += w * e2l * y[k];
            out[3 + k] += w * c[k];
        }
    }
    out
}

/// Spectral `W^{2,2}` norm `(Σ (1 + l(l+1))² |a_lm|²)^{1/2}`.
pub fn w22_norm(c: &SpectralCoeffs) -> f64 {
    c.iter()
        .map(|(l, _, a)| {
            let f = 1.0 + (l * (l + 1)) as f64;
            f * f * a.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Coefficients of the coordinate functions `y_1, y_2, y_3`.
pub fn identity_coeffs(grid: &Arc<Grid>) -> [SpectralCoeffs; 3] {
    let c = |k: usize| ScalarField::from_points(grid, |y| y[k]).coeffs().clone();
    [c(0), c(1), c(2)]
}

/// `‖Φ - I‖_{W^{2,2}}` over the three components.
pub fn distance_to_identity_w22(im: &Immersion) -> f64 {
    let id = identity_coeffs(&im.grid);
    let mut s = 0.0;
    for k in 0..3 {
        let mut d = im.phi[k].coeffs().clone();
        d.axpy(-1.0, &id[k]);
        s += w22_norm(&d).powi(2);
    }
    s.sqrt()
}

/// `‖Φ - I - c‖_{W^{2,2}} + ‖e^λ - 1‖_∞` with `c` the round average of `Φ`.
pub fn dlm_distance(im: &Immersion) -> f64 {
    let id = identity_coeffs(&im.grid);
    let mut s = 0.0;
    for k in 0..3 {
        let mut d = im.phi[k].coeffs().clone();
        d.axpy(-1.0, &id[k]);
        d.set(0, 0, Complex64::new(0.0, 0.0));
        s += w22_norm(&d).powi(2);
    }
    let sup = im.lambda.values().iter().fold(0.0f64, |m, l| m.max((l.exp() - 1.0).abs()));
    s.sqrt() + sup
}
