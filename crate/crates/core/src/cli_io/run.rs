//! Run orchestration: datum pipeline, stepping with diagnostics and
//! snapshots, checkpoint resume, summaries and the invariant suites.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{serialize_config, ExportFormat, RunConfig};
use super::export::{csv_header, io_err, read_csv, write_obj, Checkpoint, DiagnosticsRow};
use super::shape::generate_shape;
use crate::error::{Error, Result};
use crate::flow::{run_flow_with, FlowContext, FlowState, Outcome, Stepper};
use crate::gauge::{normalize_datum_with, NormalizeOptions};
use crate::geometry::{balance_residual, distance_to_identity_w22, energies, hopf_residual, Immersion};
use crate::hodge::{laplace_phi_norm, mean_curvature_check, solve_potentials, system_residuals};
use crate::willmore::{form_discrepancy, noether_residuals, tangency_defect, willmore_fields};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ADMISSIBILITY: i32 = 3;
pub const EXIT_FLOW_CLASS: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_VERIFY: i32 = 6;
pub const EXIT_NUMERICAL: i32 = 7;

/// Process exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        Error::Admissibility(_) | Error::Conformalization(_) | Error::Degenerate { .. } => EXIT_ADMISSIBILITY,
        Error::FlowClass { .. } => EXIT_FLOW_CLASS,
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

/// Generate the configured shape and take it through the datum pipeline.
pub fn prepare_datum(cfg: &RunConfig) -> Result<Immersion> {
    let raw = generate_shape(&cfg.shape, cfg.l_max, cfg.seed)?;
    let opts = NormalizeOptions { epsilon: cfg.epsilon, ..Default::default() };
    Ok(normalize_datum_with(&raw, &opts)?.immersion)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Machine-readable run summary, computed from the full diagnostics table.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub variant: String,
    pub l_max: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub t_final: f64,
    pub w0_initial: f64,
    pub w0_final: f64,
    /// `|W0(T) - W0(0) + Σ dt ∫|δ𝒲|² dσ_g|`.
    pub energy_defect: f64,
    pub dissipated: f64,
    pub relative_defect: f64,
    pub max_hopf: f64,
    pub max_balance: f64,
    pub max_area_ratio: f64,
    /// `max |C(t) - C(0)| / W0(datum)`.
    pub max_barycenter_ratio: f64,
    pub max_dlm_ratio: f64,
    pub final_w22_distance: f64,
    pub halvings: usize,
    pub breach: bool,
    pub wall_time_s: f64,
}

fn summarize(
    cfg: &RunConfig,
    rows: &[DiagnosticsRow],
    final_im: &Immersion,
    stepper: &Stepper,
    outcome: Outcome,
    wall: f64,
) -> RunSummary {
    let first = rows.first().map(|r| r.0).unwrap_or([f64::NAN; 20]);
    let last = rows.last().map(|r| r.0).unwrap_or([f64::NAN; 20]);
    let steps = &rows[1.min(rows.len())..];
    let dissipated: f64 = steps.iter().map(|r| -r.0[17] * r.0[15]).sum();
    let defect = (last[1] - first[1] + dissipated).abs();
    let max = |k: usize| rows.iter().map(|r| r.0[k]).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let bary = rows
        .iter()
        .map(|r| norm(&[r.0[5] - first[5], r.0[6] - first[6], r.0[7] - first[7]]) / first[1])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    RunSummary {
        variant: cfg.flow.variant.name().into(),
        l_max: cfg.l_max,
        seed: cfg.seed,
        breach: matches!(outcome, Outcome::Aborted(_)),
        outcome,
        steps: steps.len(),
        t_final: last[0],
        w0_initial: first[1],
        w0_final: last[1],
        energy_defect: defect,
        dissipated,
        relative_defect: if dissipated > 0.0 { defect / dissipated } else { f64::NAN },
        max_hopf: max(8),
        max_balance: max(9),
        max_area_ratio: max(19),
        max_barycenter_ratio: bary,
        max_dlm_ratio: max(18),
        final_w22_distance: distance_to_identity_w22(final_im),
        halvings: stepper.halvings,
        wall_time_s: wall,
    }
}

fn snapshot(cfg: &RunConfig, dir: &Path, name: &str, ck: &Checkpoint, im: &Immersion) -> Result<()> {
    for f in &cfg.output.formats {
        match f {
            ExportFormat::Coeffs => ck.write(&dir.join(format!("{name}.wfc")))?,
            ExportFormat::Obj => write_obj(im, &dir.join(format!("{name}.obj")))?,
        }
    }
    Ok(())
}

pub const CSV_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.cfg";

/// Run `cfg` writing into `out`, from the generated datum or from `start`.
///
/// Files: `config.cfg` (canonical), `diagnostics.csv`, `snap_<step>.*`
/// every `snapshot_every` steps, `final.*` and `summary.json`. On resume the
/// diagnostics table is cut back to the checkpoint's step before appending.
pub fn execute(cfg: &RunConfig, out: &Path, start: Option<&Checkpoint>) -> Result<RunSummary> {
    let clock = Instant::now();
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let cfg_path = out.join(CONFIG_FILE);
    fs::write(&cfg_path, serialize_config(cfg)).map_err(|e| io_err(&cfg_path, e))?;
    let csv_path = out.join(CSV_FILE);

    let (state, reference, stepper) = match start {
        None => {
            let datum = prepare_datum(cfg)?;
            (FlowState::new(datum.clone()), datum, Stepper::new(&cfg.flow))
        }
        Some(ck) => {
            let grid = ck.grid()?;
            let im = ck.immersion(&grid)?;
            (FlowState::at(im, ck.t, ck.step_index), ck.reference_immersion(&grid)?, ck.stepper)
        }
    };
    let initial = energies(&reference);
    let mut kept = match start {
        None => Vec::new(),
        Some(ck) => match read_csv(&csv_path) {
            Ok(rows) => rows.into_iter().take(ck.step_index + 1).collect(),
            Err(Error::Io { .. }) => Vec::new(),
            Err(e) => return Err(e),
        },
    };
    if kept.is_empty() {
        let wf = &state.wf;
        kept.push(DiagnosticsRow::initial(
            state.t,
            &energies(&state.im),
            hopf_residual(&state.im),
            norm(&balance_residual(&state.im)),
            noether_residuals(&state.im, wf),
            &initial,
        ));
    }
    {
        let mut f = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
        let mut text = csv_header();
        for r in &kept {
            text.push_str(&r.csv_line());
            text.push('\n');
        }
        f.write_all(text.as_bytes()).map_err(|e| io_err(&csv_path, e))?;
    }
    let mut csv = BufWriter::new(OpenOptions::new().append(true).open(&csv_path).map_err(|e| io_err(&csv_path, e))?);

    let ctx = FlowContext::new(&reference);
    let every = cfg.output.snapshot_every;
    let (final_state, stepper, outcome) = run_flow_with(state, stepper, &cfg.flow, &ctx, |s, r, st| {
        let row = DiagnosticsRow::from_report(r, &initial);
        writeln!(csv, "{}", row.csv_line()).map_err(|e| io_err(&csv_path, e))?;
        if every > 0 && s.step_index % every == 0 {
            csv.flush().map_err(|e| io_err(&csv_path, e))?;
            let ck = Checkpoint::new(&s.im, &reference, s.t, s.step_index, *st, cfg.seed);
            snapshot(cfg, out, &format!("snap_{:07}", s.step_index), &ck, &s.im)?;
        }
        Ok(())
    })?;
    csv.flush().map_err(|e| io_err(&csv_path, e))?;
    drop(csv);

    let ck = Checkpoint::new(&final_state.im, &reference, final_state.t, final_state.step_index, stepper, cfg.seed);
    snapshot(cfg, out, "final", &ck, &final_state.im)?;
    let rows = read_csv(&csv_path)?;
    let summary = summarize(cfg, &rows, &final_state.im, &stepper, outcome, clock.elapsed().as_secs_f64());
    let sp = out.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&sp, json).map_err(|e| io_err(&sp, e))?;
    Ok(summary)
}

/// Report of the datum pipeline alone.
#[derive(Clone, Debug, Serialize)]
pub struct NormalizeSummary {
    pub w0: f64,
    pub area: f64,
    pub hopf: f64,
    pub balance: f64,
    pub dlm_distance: f64,
}

/// Generate and normalize the datum, writing `datum.*` and
/// `datum.json` into `out`.
pub fn normalize_only(cfg: &RunConfig, out: &Path) -> Result<NormalizeSummary> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let datum = prepare_datum(cfg)?;
    let e = energies(&datum);
    let s = NormalizeSummary {
        w0: e.w0,
        area: e.area,
        hopf: hopf_residual(&datum),
        balance: norm(&balance_residual(&datum)),
        dlm_distance: e.dlm_distance,
    };
    let ck = Checkpoint::new(&datum, &datum, 0.0, 0, Stepper::new(&cfg.flow), cfg.seed);
    let mut c = cfg.clone();
    if c.output.formats.is_empty() {
        c.output.formats.push(ExportFormat::Coeffs);
    }
    snapshot(&c, out, "datum", &ck, &datum)?;
    let p = out.join("datum.json");
    fs::write(&p, serde_json::to_string_pretty(&s).expect("serializes")).map_err(|e| io_err(&p, e))?;
    Ok(s)
}

/// Continue from a checkpoint. The configuration defaults to the
/// `config.cfg` next to the checkpoint, the output directory to its parent.
pub fn resume(checkpoint: &Path, cfg: Option<&RunConfig>, out: Option<&Path>) -> Result<RunSummary> {
    let ck = Checkpoint::read(checkpoint)?;
    let parent = checkpoint.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let dir = out.map(Path::to_path_buf).unwrap_or(parent.clone());
    let loaded;
    let cfg = match cfg {
        Some(c) => c,
        None => {
            let p = parent.join(CONFIG_FILE);
            let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            loaded = super::config::parse_config(&text)?;
            &loaded
        }
    };
    if cfg.l_max != ck.l_max {
        return Err(Error::Format {
            path: checkpoint.display().to_string(),
            reason: format!("checkpoint has l_max {} but the configuration asks for {}", ck.l_max, cfg.l_max),
        });
    }
    execute(cfg, &dir, Some(&ck))
}

/// One invariant check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, bound: f64) -> Check {
    Check { name, value, bound, pass: value <= bound }
}

/// Invariant suites on one immersion. Geometric identities hold for any
/// parametrization; `gauge` adds the conformal and balance conditions.
pub fn verify_state(im: &Immersion, gauge: bool) -> Vec<Check> {
    let e = energies(im);
    let wf = willmore_fields(im);
    let mut out = vec![
        check("euler_characteristic", (e.euler_char - 2.0).abs(), 1e-6),
        check("laplace_phi_equals_2h", mean_curvature_check(im), 1e-7),
    ];
    let nr = noether_residuals(im, &wf);
    for (name, v) in
        ["noether_translation", "noether_rotation", "noether_dilation", "noether_inversion"].into_iter().zip(nr)
    {
        out.push(check(name, v, 1e-6));
    }
    let (t, w) = tangency_defect(im, &wf);
    out.push(check("w_tangency", t, 1e-7 * w + 1e-12));
    out.push(check("divergence_form", form_discrepancy(im, &wf), 1e-5));
    match solve_potentials(im, &wf) {
        Ok(hp) => {
            let b = 1e-4 * (1.0 + laplace_phi_norm(im));
            for (name, v) in
                ["hodge_system_1", "hodge_system_2", "hodge_system_3"].into_iter().zip(system_residuals(im, &wf, &hp))
            {
                out.push(check(name, v, b));
            }
        }
        Err(_) => out.push(check("hodge_potentials", f64::INFINITY, 0.0)),
    }
    if gauge {
        out.push(check("hopf", hopf_residual(im), 1e-5));
        out.push(check("balance", norm(&balance_residual(im)), 1e-7));
    }
    out
}
