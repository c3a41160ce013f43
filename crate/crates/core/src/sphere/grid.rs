use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::wigner::spin_theta_row;
use super::SphereError;
use crate::exec::{self, Exec};

/// Largest spin weight carried by any field.
pub const MAX_SPIN: i32 = 2;

pub type Vec3 = [f64; 3];

/// Stereographic charts of the round sphere. Both are orientation preserving
/// for the outward normal and related by `w = 1/z` on the overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    /// Projection from the north pole, `z = (y1 - i y2) / (1 - y3)`; excludes
    /// the cap `θ < π/3`.
    North,
    /// Projection from the south pole, `w = (y1 + i y2) / (1 + y3)`; excludes
    /// the cap `θ > 2π/3`.
    South,
}

impl Chart {
    pub fn contains(self, theta: f64) -> bool {
        match self {
            Chart::North => theta >= PI / 3.0,
            Chart::South => theta <= 2.0 * PI / 3.0,
        }
    }

    pub fn coordinate(self, theta: f64, phi: f64) -> Complex64 {
        match self {
            Chart::North => Complex64::from_polar(1.0 / (theta / 2.0).tan(), -phi),
            Chart::South => Complex64::from_polar((theta / 2.0).tan(), phi),
        }
    }

    /// `log(2 / (1 + |z|^2))`, the log of the round metric's flat-chart factor.
    pub fn log_factor(self, theta: f64) -> f64 {
        match self {
            Chart::North => (2.0 * (theta / 2.0).sin().powi(2)).ln(),
            Chart::South => (2.0 * (theta / 2.0).cos().powi(2)).ln(),
        }
    }

    /// Inverse stereographic map.
    pub fn point(self, z: Complex64) -> Vec3 {
        let r2 = z.norm_sqr();
        let d = 1.0 + r2;
        match self {
            Chart::North => [2.0 * z.re / d, -2.0 * z.im / d, (r2 - 1.0) / d],
            Chart::South => [2.0 * z.re / d, 2.0 * z.im / d, (1.0 - r2) / d],
        }
    }
}

/// Per-node chart data.
#[derive(Clone, Copy, Debug)]
pub struct ChartNode {
    pub z_north: Complex64,
    pub z_south: Complex64,
    /// Chart whose interior contains the node with the larger margin.
    pub preferred: Chart,
}

/// Gauss–Legendre (colatitude) × uniform (longitude) collocation grid.
pub struct Grid {
    l_max: usize,
    n_lat: usize,
    n_lon: usize,
    theta: Vec<f64>,
    lat_weights: Vec<f64>,
    phi: Vec<f64>,
    points: Vec<Vec3>,
    e_theta: Vec<Vec3>,
    e_phi: Vec<Vec3>,
    charts: Vec<ChartNode>,
    tables: [OnceLock<Vec<f64>>; (2 * MAX_SPIN + 1) as usize],
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    exec: Exec,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("l_max", &self.l_max)
            .field("n_lat", &self.n_lat)
            .field("n_lon", &self.n_lon)
            .field("exec", &self.exec)
            .finish()
    }
}

/// Gauss–Legendre nodes `x_i` (descending) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

impl Grid {
    /// Standard grid: `l_max + 1` Gauss nodes × `2 l_max + 2` longitudes;
    /// quadrature exact up to degree `2 l_max + 1`.
    pub fn new(l_max: usize) -> Result<Arc<Self>, SphereError> {
        Self::with_lat_count(l_max, l_max + 1)
    }

    /// Oversampled grid for quadratic/cubic products of degree-`l_max` fields:
    /// `⌈3 l_max / 2⌉ + 1` Gauss nodes.
    pub fn dealiased(l_max: usize) -> Result<Arc<Self>, SphereError> {
        Self::with_lat_count(l_max, (3 * l_max + 1) / 2 + 1)
    }

    pub fn with_lat_count(l_max: usize, n_lat: usize) -> Result<Arc<Self>, SphereError> {
        Self::build(l_max, n_lat, Exec::default())
    }

    /// Same grid with a different execution policy.
    pub fn with_exec(&self, exec: Exec) -> Arc<Self> {
        Self::build(self.l_max, self.n_lat, exec).expect("validated on first build")
    }

    fn build(l_max: usize, n_lat: usize, exec: Exec) -> Result<Arc<Self>, SphereError> {
        if l_max < 2 {
            return Err(SphereError::Config(format!("l_max must be >= 2, got {l_max}")));
        }
        if n_lat < l_max + 1 {
            return Err(SphereError::Config(format!("{n_lat} latitude rings cannot resolve degree {l_max}")));
        }
        let n_lon = 2 * n_lat;
        let (x, lat_weights) = gauss_legendre(n_lat);
        let theta: Vec<f64> = x.iter().map(|v| v.acos()).collect();
        let phi: Vec<f64> = (0..n_lon).map(|k| 2.0 * PI * k as f64 / n_lon as f64).collect();
        let n = n_lat * n_lon;
        let mut points = Vec::with_capacity(n);
        let mut e_theta = Vec::with_capacity(n);
        let mut e_phi = Vec::with_capacity(n);
        let mut charts = Vec::with_capacity(n);
        for &t in &theta {
            let (st, ct) = t.sin_cos();
            for &p in &phi {
                let (sp, cp) = p.sin_cos();
                points.push([st * cp, st * sp, ct]);
                e_theta.push([ct * cp, ct * sp, -st]);
                e_phi.push([-sp, cp, 0.0]);
                charts.push(ChartNode {
                    z_north: Chart::North.coordinate(t, p),
                    z_south: Chart::South.coordinate(t, p),
                    preferred: if t >= PI / 2.0 { Chart::North } else { Chart::South },
                });
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            l_max,
            n_lat,
            n_lon,
            theta,
            lat_weights,
            phi,
            points,
            e_theta,
            e_phi,
            charts,
            tables: Default::default(),
            fft_fwd: planner.plan_fft_forward(n_lon),
            fft_inv: planner.plan_fft_inverse(n_lon),
            exec,
        }))
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }
    pub fn n_lat(&self) -> usize {
        self.n_lat
    }
    pub fn n_lon(&self) -> usize {
        self.n_lon
    }
    pub fn len(&self) -> usize {
        self.n_lat * self.n_lon
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn n_coeffs(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }
    pub fn exec(&self) -> Exec {
        self.exec
    }
    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }
    pub fn phis(&self) -> &[f64] {
        &self.phi
    }
    pub fn lat_weights(&self) -> &[f64] {
        &self.lat_weights
    }
    /// Ring `j` and longitude `k` of a node index.
    pub fn ring_of(&self, node: usize) -> (usize, usize) {
        (node / self.n_lon, node % self.n_lon)
    }
    pub fn theta_phi(&self, node: usize) -> (f64, f64) {
        let (j, k) = self.ring_of(node);
        (self.theta[j], self.phi[k])
    }
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.theta_phi(i)).collect()
    }
    /// Unit-sphere position `I(node)`.
    pub fn point(&self, node: usize) -> Vec3 {
        self.points[node]
    }
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }
    pub fn e_theta(&self, node: usize) -> Vec3 {
        self.e_theta[node]
    }
    pub fn e_phi(&self, node: usize) -> Vec3 {
        self.e_phi[node]
    }
    pub fn chart_node(&self, node: usize) -> ChartNode {
        self.charts[node]
    }

    /// Quadrature weight of a node (round area element).
    pub fn weight(&self, node: usize) -> f64 {
        let (j, _) = self.ring_of(node);
        self.lat_weights[j] * 2.0 * PI / self.n_lon as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Packed `Θ_lm(θ_j)` table for one spin, rings × `(l_max+1)^2`.
    pub(crate) fn spin_table(&self, spin: i32) -> &[f64] {
        let slot = (spin + MAX_SPIN) as usize;
        self.tables[slot].get_or_init(|| {
            let rows = exec::map_range(self.exec, self.n_lat, |j| spin_theta_row(self.l_max, spin, self.theta[j]));
            rows.concat()
        })
    }

    pub(crate) fn fft_forward(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_fwd
    }
    pub(crate) fn fft_inverse(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_inv
    }
}
