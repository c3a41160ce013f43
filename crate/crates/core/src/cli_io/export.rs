//! Surface meshes, lossless coefficient dumps and the diagnostics table.
//!
//! Mesh: vertices are the grid nodes ring by ring (north to south, longitude
//! increasing) followed by the north and south poles, which are evaluated
//! from the expansion. Faces are outward oriented triangles: two per grid
//! quad between neighbouring rings plus one fan per pole, `2 n_lat n_lon` in
//! total. Coordinates are printed with 17 significant digits.
//!
//! Coefficient dump: ASCII header lines ending with `data`, then the six
//! fields `phi_x phi_y phi_z ref_x ref_y ref_z` as little-endian `f64`
//! real-orthonormal coefficients, `(l_max + 1)²` each, indexed `l² + l + m`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{StepReport, Stepper};
use crate::geometry::{EnergyReport, Immersion};
use crate::sphere::{eval_at_points, real_to_complex, Grid, Vec3};

pub const COEFF_MAGIC: &str = "willflow-coeffs v1";
pub const CSV_VERSION: &str = "# willflow-diagnostics v1";
pub const CSV_COLUMNS: &str =
    "t,w0,w1,w2,area,bx,by,bz,hopf,balance,r1,r2,r3,r4,diss_lhs,diss_rhs,dlm,dt,dlm_ratio,area_ratio";

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

/// Mesh as vertex positions and 0-based outward triangles.
pub fn mesh(im: &Immersion) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let grid = im.grid();
    let (nl, nk) = (grid.n_lat(), grid.n_lon());
    let mut verts = im.positions();
    let poles: Vec<Vec<f64>> =
        im.phi().iter().map(|f| eval_at_points(f, &[(0.0, 0.0), (std::f64::consts::PI, 0.0)])).collect();
    let (north, south) = (nl * nk, nl * nk + 1);
    verts.push([poles[0][0], poles[1][0], poles[2][0]]);
    verts.push([poles[0][1], poles[1][1], poles[2][1]]);
    let at = |j: usize, k: usize| j * nk + k % nk;
    let mut faces = Vec::with_capacity(2 * nl * nk);
    for k in 0..nk {
        faces.push([north, at(0, k), at(0, k + 1)]);
    }
    for j in 0..nl - 1 {
        for k in 0..nk {
            faces.push([at(j, k), at(j + 1, k), at(j + 1, k + 1)]);
            faces.push([at(j, k), at(j + 1, k + 1), at(j, k + 1)]);
        }
    }
    for k in 0..nk {
        faces.push([south, at(nl - 1, k + 1), at(nl - 1, k)]);
    }
    (verts, faces)
}

pub fn obj_text(im: &Immersion) -> String {
    let (verts, faces) = mesh(im);
    let mut s = String::with_capacity(80 * (verts.len() + faces.len()));
    let _ = writeln!(
        s,
        "# willflow mesh l_max {} n_lat {} n_lon {}",
        im.grid().l_max(),
        im.grid().n_lat(),
        im.grid().n_lon()
    );
    for v in &verts {
        let _ = writeln!(s, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    for f in &faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_obj(im: &Immersion, path: &Path) -> Result<()> {
    fs::write(path, obj_text(im)).map_err(|e| io_err(path, e))
}

/// Vertices and 0-based faces of an OBJ file written by [`write_obj`].
pub fn read_obj(path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let v: Vec<f64> = it.map(|x| x.parse().map_err(|_| format_err(path, line))).collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(format_err(path, line));
                }
                verts.push([v[0], v[1], v[2]]);
            }
            Some("f") => {
                let f: Vec<usize> = it.map(|x| x.parse().map_err(|_| format_err(path, line))).collect::<Result<_>>()?;
                if f.len() != 3 || f.iter().any(|&i| i == 0) {
                    return Err(format_err(path, line));
                }
                faces.push([f[0] - 1, f[1] - 1, f[2] - 1]);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

/// Everything needed to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub l_max: usize,
    pub n_lat: usize,
    pub t: f64,
    pub step_index: usize,
    pub stepper: Stepper,
    pub seed: u64,
    /// Real coefficients of `Φ`.
    pub phi: [Vec<f64>; 3],
    /// Real coefficients of the initial datum.
    pub reference: [Vec<f64>; 3],
}

impl Checkpoint {
    pub fn new(im: &Immersion, reference: &Immersion, t: f64, step_index: usize, stepper: Stepper, seed: u64) -> Self {
        let rc = |im: &Immersion| [0, 1, 2].map(|k| im.phi()[k].real_coeffs());
        Checkpoint {
            l_max: im.grid().l_max(),
            n_lat: im.grid().n_lat(),
            t,
            step_index,
            stepper,
            seed,
            phi: rc(im),
            reference: rc(reference),
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Grid::with_lat_count(self.l_max, self.n_lat)?)
    }

    fn build(grid: &Arc<Grid>, c: &[Vec<f64>; 3]) -> Result<Immersion> {
        let cc = [0, 1, 2].map(|k| real_to_complex(grid.l_max(), &c[k]));
        let [a, b, d] = cc;
        Immersion::from_coeffs(grid, [&a?, &b?, &d?])
    }

    pub fn immersion(&self, grid: &Arc<Grid>) -> Result<Immersion> {
        Self::build(grid, &self.phi)
    }

    pub fn reference_immersion(&self, grid: &Arc<Grid>) -> Result<Immersion> {
        Self::build(grid, &self.reference)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut h = String::new();
        let _ = writeln!(h, "{COEFF_MAGIC}");
        let _ = writeln!(h, "l_max {}", self.l_max);
        let _ = writeln!(h, "n_lat {}", self.n_lat);
        let _ = writeln!(h, "t {:?}", self.t);
        let _ = writeln!(h, "step {}", self.step_index);
        let _ = writeln!(h, "dt {:?}", self.stepper.dt);
        let _ = writeln!(h, "clean_steps {}", self.stepper.clean_steps);
        let _ = writeln!(h, "halvings {}", self.stepper.halvings);
        let _ = writeln!(h, "seed {}", self.seed);
        let _ = writeln!(h, "fields phi_x phi_y phi_z ref_x ref_y ref_z");
        let _ = writeln!(h, "count {}", (self.l_max + 1) * (self.l_max + 1));
        let _ = writeln!(h, "data");
        let mut out = h.into_bytes();
        for f in self.phi.iter().chain(&self.reference) {
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |r: &str| format_err(path, r);
        let mut pos = 0;
        let mut header = std::collections::HashMap::new();
        let mut first = true;
        loop {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| bad("header not terminated"))?;
            let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not UTF-8"))?;
            pos += end + 1;
            if first {
                if line != COEFF_MAGIC {
                    return Err(bad("missing magic line"));
                }
                first = false;
                continue;
            }
            if line == "data" {
                break;
            }
            let (k, v) = line.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
            header.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| header.get(k).ok_or_else(|| bad(&format!("missing header `{k}`")));
        let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(&format!("bad `{k}`"))) };
        let flt = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(&format!("bad `{k}`"))) };
        let l_max = int("l_max")?;
        let count = int("count")?;
        if count != (l_max + 1) * (l_max + 1) {
            return Err(bad("count does not match l_max"));
        }
        if get("fields")? != "phi_x phi_y phi_z ref_x ref_y ref_z" {
            return Err(bad("unexpected field list"));
        }
        let body = &bytes[pos..];
        if body.len() != 6 * count * 8 {
            return Err(bad(&format!("expected {} data bytes, found {}", 6 * count * 8, body.len())));
        }
        let vals: Vec<f64> =
            body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let field = |i: usize| vals[i * count..(i + 1) * count].to_vec();
        Ok(Checkpoint {
            l_max,
            n_lat: int("n_lat")?,
            t: flt("t")?,
            step_index: int("step")?,
            stepper: Stepper { dt: flt("dt")?, clean_steps: int("clean_steps")?, halvings: int("halvings")? },
            seed: int("seed")? as u64,
            phi: [field(0), field(1), field(2)],
            reference: [field(3), field(4), field(5)],
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// One diagnostics row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow(pub [f64; 20]);

impl DiagnosticsRow {
    /// Row for the state reached by `report`. `initial` is the datum's report;
    /// the ratios are `dlm / √W0` and `|𝒜 - 𝒜₀| / (𝒜₀ W0(datum))`.
    pub fn from_report(r: &StepReport, initial: &EnergyReport) -> Self {
        Self::build(
            r.t,
            &r.energies,
            r.hopf,
            r.balance,
            r.noether,
            r.dissipation_lhs,
            r.dissipation_rhs,
            r.dt_used,
            initial,
        )
    }

    /// Row for a state without a step (`dt` and dissipation columns `NaN`).
    pub fn initial(
        t: f64,
        e: &EnergyReport,
        hopf: f64,
        balance: f64,
        noether: [f64; 4],
        initial: &EnergyReport,
    ) -> Self {
        Self::build(t, e, hopf, balance, noether, f64::NAN, f64::NAN, f64::NAN, initial)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        t: f64,
        e: &EnergyReport,
        hopf: f64,
        balance: f64,
        r: [f64; 4],
        lhs: f64,
        rhs: f64,
        dt: f64,
        initial: &EnergyReport,
    ) -> Self {
        let dlm_ratio = if e.w0 > 0.0 { e.dlm_distance / e.w0.sqrt() } else { f64::NAN };
        let area_ratio =
            if initial.w0 > 0.0 { (e.area - initial.area).abs() / (initial.area * initial.w0) } else { f64::NAN };
        DiagnosticsRow([
            t,
            e.w0,
            e.w1,
            e.w2,
            e.area,
            e.barycenter[0],
            e.barycenter[1],
            e.barycenter[2],
            hopf,
            balance,
            r[0],
            r[1],
            r[2],
            r[3],
            lhs,
            rhs,
            e.dlm_distance,
            dt,
            dlm_ratio,
            area_ratio,
        ])
    }

    pub fn t(&self) -> f64 {
        self.0[0]
    }

    pub fn csv_line(&self) -> String {
        self.0.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
    }

    pub fn parse(line: &str) -> Option<Self> {
        let v: Vec<f64> = line.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
        Some(DiagnosticsRow(v.try_into().ok()?))
    }
}

pub fn csv_header() -> String {
    format!("{CSV_VERSION}\n{CSV_COLUMNS}\n")
}

/// Rows of a diagnostics file, validating its two header lines.
pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_VERSION) || lines.next() != Some(CSV_COLUMNS) {
        return Err(format_err(path, "unexpected diagnostics header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| DiagnosticsRow::parse(l).ok_or_else(|| format_err(path, format!("bad row `{l}`"))))
        .collect()
}
