//! Line-oriented run configuration.
//!
//! Grammar: `[section]` headers, `key = value` lines, `#` comments and blank
//! lines. Sections are `flow`, `shape` and `output`; every key belongs to
//! exactly one of them. Lists are comma separated; a multi-bump entry is
//! `l:m:amplitude`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{ConfigErrorKind, Error, Result};
use crate::flow::{FlowConfig, KillingPart, Variant};
use crate::gauge::Jacobian;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub l: usize,
    pub m: i64,
    pub amplitude: f64,
}

/// Initial surface, as a radial graph `r(y) y` over the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub enum ShapeSpec {
    Sphere,
    /// `r = 1 + a Y_lm` (real harmonic).
    ShBump(Bump),
    /// `r = 1 + Σ aᵢ Y_{lᵢmᵢ}`.
    MultiBump(Vec<Bump>),
    /// `r = a y₁² + b y₂² + c y₃²`, a degree-2 graph with the given axes.
    EllipsoidLike([f64; 3]),
    /// `r = 1 + a f` with `f` drawn from the seeded generator: uniform
    /// real coefficients on `1 ≤ l ≤ l_content`, scaled to unit sup norm.
    Random {
        l_content: usize,
        amplitude: f64,
    },
}

impl ShapeSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ShapeSpec::Sphere => "sphere",
            ShapeSpec::ShBump(_) => "sh_bump",
            ShapeSpec::MultiBump(_) => "multi_bump",
            ShapeSpec::EllipsoidLike(_) => "ellipsoid_like",
            ShapeSpec::Random { .. } => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Obj,
    Coeffs,
}

impl ExportFormat {
    pub fn name(self) -> &'static str {
        match self {
            ExportFormat::Obj => "obj",
            ExportFormat::Coeffs => "coeffs",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    /// Snapshot cadence in accepted steps; 0 disables periodic snapshots.
    pub snapshot_every: usize,
    pub formats: Vec<ExportFormat>,
    /// Checkpoint to continue from instead of generating the datum.
    pub resume: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), snapshot_every: 0, formats: vec![ExportFormat::Coeffs], resume: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub flow: FlowConfig,
    pub l_max: usize,
    pub shape: ShapeSpec,
    pub seed: u64,
    /// Admissibility threshold on `W0` of the datum.
    pub epsilon: f64,
    pub output: OutputConfig,
}

pub const DEFAULT_L_MAX: usize = 32;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EPSILON: f64 = 0.1;

const FLOW_KEYS: &[&str] = &[
    "variant",
    "l_max",
    "dt",
    "t_end",
    "stabilizer",
    "rebalance_every",
    "rebalance_tol",
    "jacobian",
    "killing_part",
    "hopf_relaxation",
    "stop_w0",
    "max_hopf",
    "max_lambda_excursion",
    "energy_slack",
    "max_halvings",
    "grow_after",
    "grow_factor",
    "max_steps",
];
const SHAPE_KEYS: &[&str] = &["kind", "l", "m", "amplitude", "bumps", "axes", "l_content", "seed", "epsilon"];
const OUTPUT_KEYS: &[&str] = &["dir", "snapshot_every", "formats", "resume"];

fn cfg_err(line: usize, kind: ConfigErrorKind) -> Error {
    Error::Config { line, kind }
}

fn range(line: usize, key: &str, msg: impl Into<String>) -> Error {
    cfg_err(line, ConfigErrorKind::OutOfRange { key: key.into(), msg: msg.into() })
}

struct Entries {
    map: BTreeMap<(String, String), (String, usize)>,
    last_line: usize,
}

impl Entries {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.map.remove(&(section.to_string(), key.to_string()))
    }

    fn parse<T>(
        &mut self,
        section: &str,
        key: &str,
        f: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => f(&v).map(Some).map_err(|m| range(line, key, m)),
        }
    }

    fn required<T>(
        &mut self,
        section: &str,
        key: &str,
        f: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        self.parse(section, key, f)?
            .ok_or_else(|| cfg_err(self.last_line, ConfigErrorKind::Missing(format!("{section}.{key}"))))
    }
}

fn float(pred: impl Fn(f64) -> bool, what: &'static str) -> impl Fn(&str) -> std::result::Result<f64, String> {
    move |s| {
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() && pred(v) {
            Ok(v)
        } else {
            Err(format!("{s} {what}"))
        }
    }
}

fn positive() -> impl Fn(&str) -> std::result::Result<f64, String> {
    float(|v| v > 0.0, "must be positive")
}

fn integer(min: i64, max: i64) -> impl Fn(&str) -> std::result::Result<i64, String> {
    move |s| {
        let v: i64 = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
        if (min..=max).contains(&v) {
            Ok(v)
        } else {
            Err(format!("{v} outside [{min}, {max}]"))
        }
    }
}

fn list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect()
}

fn parse_bump(s: &str) -> std::result::Result<Bump, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("bump `{s}` is not l:m:amplitude"));
    }
    let l = integer(1, 1000)(parts[0])? as usize;
    let m = integer(-(l as i64), l as i64)(parts[1])?;
    let amplitude = float(|_| true, "")(parts[2])?;
    Ok(Bump { l, m, amplitude })
}

/// Parse and validate a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    let mut section: Option<String> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    cfg_err(line, ConfigErrorKind::Syntax(format!("unterminated section header `{content}`")))
                })?
                .trim();
            if !["flow", "shape", "output"].contains(&name) {
                return Err(cfg_err(line, ConfigErrorKind::Syntax(format!("unknown section [{name}]"))));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| {
            cfg_err(line, ConfigErrorKind::Syntax(format!("expected `key = value`, got `{content}`")))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(cfg_err(line, ConfigErrorKind::Syntax("empty key or value".into())));
        }
        let sec = section
            .clone()
            .ok_or_else(|| cfg_err(line, ConfigErrorKind::Syntax(format!("key `{k}` outside any section"))))?;
        let known = match sec.as_str() {
            "flow" => FLOW_KEYS,
            "shape" => SHAPE_KEYS,
            _ => OUTPUT_KEYS,
        };
        if !known.contains(&k) {
            return Err(cfg_err(line, ConfigErrorKind::UnknownKey(format!("{sec}.{k}"))));
        }
        if map.insert((sec.clone(), k.to_string()), (v.to_string(), line)).is_some() {
            return Err(cfg_err(line, ConfigErrorKind::Syntax(format!("duplicate key `{sec}.{k}`"))));
        }
    }
    let mut e = Entries { map, last_line: last_line + 1 };
    let d = FlowConfig::default();

    let variant = e.required("flow", "variant", |s| {
        Variant::parse(s).ok_or_else(|| format!("`{s}` is not one of conformal, normal, deturck"))
    })?;
    let t_end = e.required("flow", "t_end", float(|v| v >= 0.0, "must be non-negative"))?;
    let l_max = e.parse("flow", "l_max", integer(4, 256))?.map_or(DEFAULT_L_MAX, |v| v as usize);
    let flow = FlowConfig {
        variant,
        t_end,
        dt: e.parse("flow", "dt", positive())?.unwrap_or(d.dt),
        stabilizer: match e.take("flow", "stabilizer") {
            None => d.stabilizer,
            Some((s, _)) if s == "auto" => None,
            Some((s, line)) => Some(
                float(|v| v >= 0.0, "must be non-negative or `auto`")(&s).map_err(|m| range(line, "stabilizer", m))?,
            ),
        },
        rebalance_every: e
            .parse("flow", "rebalance_every", integer(1, i64::MAX))?
            .map_or(d.rebalance_every, |v| v as usize),
        rebalance_tol: e.parse("flow", "rebalance_tol", positive())?.unwrap_or(d.rebalance_tol),
        jacobian: e
            .parse("flow", "jacobian", |s| match s {
                "analytic" => Ok(Jacobian::Analytic),
                "finite_difference" => Ok(Jacobian::FiniteDifference),
                _ => Err(format!("`{s}` is not one of analytic, finite_difference")),
            })?
            .unwrap_or(d.jacobian),
        killing_part: e
            .parse("flow", "killing_part", |s| match s {
                "balanced" => Ok(KillingPart::Balanced),
                "zero" => Ok(KillingPart::Zero),
                _ => Err(format!("`{s}` is not one of balanced, zero")),
            })?
            .unwrap_or(d.killing_part),
        hopf_relaxation: e
            .parse("flow", "hopf_relaxation", float(|v| (0.0..2.0).contains(&v), "must lie in [0, 2)"))?
            .unwrap_or(d.hopf_relaxation),
        stop_w0: e.parse("flow", "stop_w0", positive())?.unwrap_or(d.stop_w0),
        max_hopf: e.parse("flow", "max_hopf", positive())?.unwrap_or(d.max_hopf),
        max_lambda_excursion: e.parse("flow", "max_lambda_excursion", positive())?.unwrap_or(d.max_lambda_excursion),
        energy_slack: e
            .parse("flow", "energy_slack", float(|v| v >= 0.0, "must be non-negative"))?
            .unwrap_or(d.energy_slack),
        max_halvings: e.parse("flow", "max_halvings", integer(0, 60))?.map_or(d.max_halvings, |v| v as usize),
        grow_after: e.parse("flow", "grow_after", integer(1, i64::MAX))?.map_or(d.grow_after, |v| v as usize),
        grow_factor: e
            .parse("flow", "grow_factor", float(|v| v >= 1.0, "must be at least 1"))?
            .unwrap_or(d.grow_factor),
        max_steps: match e.take("flow", "max_steps") {
            None => d.max_steps,
            Some((s, _)) if s == "none" => None,
            Some((s, line)) => Some(integer(0, i64::MAX)(&s).map_err(|m| range(line, "max_steps", m))? as usize),
        },
    };

    let kind_line = e.map.get(&("shape".to_string(), "kind".to_string())).map(|x| x.1);
    let kind = e.required("shape", "kind", |s| Ok::<_, String>(s.to_string()))?;
    let shape = match kind.as_str() {
        "sphere" => ShapeSpec::Sphere,
        "sh_bump" => {
            let l = e.required("shape", "l", integer(1, l_max as i64))? as usize;
            let m = e.required("shape", "m", integer(-(l as i64), l as i64))?;
            let amplitude = e.required("shape", "amplitude", float(|_| true, ""))?;
            ShapeSpec::ShBump(Bump { l, m, amplitude })
        }
        "multi_bump" => {
            let (s, line) = e
                .take("shape", "bumps")
                .ok_or_else(|| cfg_err(e.last_line, ConfigErrorKind::Missing("shape.bumps".into())))?;
            let bumps = list(&s)
                .into_iter()
                .map(parse_bump)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|m| range(line, "bumps", m))?;
            if bumps.is_empty() || bumps.iter().any(|b| b.l > l_max) {
                return Err(range(line, "bumps", format!("need at least one bump, each with l <= l_max = {l_max}")));
            }
            ShapeSpec::MultiBump(bumps)
        }
        "ellipsoid_like" => {
            let (s, line) = e
                .take("shape", "axes")
                .ok_or_else(|| cfg_err(e.last_line, ConfigErrorKind::Missing("shape.axes".into())))?;
            let v = list(&s)
                .into_iter()
                .map(positive())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|m| range(line, "axes", m))?;
            if v.len() != 3 {
                return Err(range(line, "axes", format!("expected 3 axes, got {}", v.len())));
            }
            ShapeSpec::EllipsoidLike([v[0], v[1], v[2]])
        }
        "random" => {
            let l_content = e.required("shape", "l_content", integer(1, l_max as i64))? as usize;
            let amplitude = e.required("shape", "amplitude", float(|_| true, ""))?;
            ShapeSpec::Random { l_content, amplitude }
        }
        other => {
            return Err(range(
                kind_line.unwrap_or(0),
                "kind",
                format!("`{other}` is not one of sphere, sh_bump, multi_bump, ellipsoid_like, random"),
            ))
        }
    };
    let seed = e.parse("shape", "seed", integer(0, i64::MAX))?.map_or(DEFAULT_SEED, |v| v as u64);
    let epsilon = e.parse("shape", "epsilon", positive())?.unwrap_or(DEFAULT_EPSILON);

    let od = OutputConfig::default();
    let output = OutputConfig {
        dir: e.take("output", "dir").map_or(od.dir, |x| x.0),
        snapshot_every: e
            .parse("output", "snapshot_every", integer(0, i64::MAX))?
            .map_or(od.snapshot_every, |v| v as usize),
        formats: match e.take("output", "formats") {
            None => od.formats,
            Some((s, _)) if s == "none" => Vec::new(),
            Some((s, line)) => {
                let mut out = Vec::new();
                for f in list(&s) {
                    let fmt = match f {
                        "obj" => ExportFormat::Obj,
                        "coeffs" => ExportFormat::Coeffs,
                        _ => return Err(range(line, "formats", format!("`{f}` is not one of obj, coeffs"))),
                    };
                    if !out.contains(&fmt) {
                        out.push(fmt);
                    }
                }
                out
            }
        },
        resume: e.take("output", "resume").map(|x| x.0),
    };

    // Keys valid in general but not for this shape kind.
    if let Some(((sec, key), (_, line))) = e.map.into_iter().next() {
        return Err(range(line, &key, format!("`{sec}.{key}` is not used by shape kind `{kind}`")));
    }
    Ok(RunConfig { flow, l_max, shape, seed, epsilon, output })
}

/// Shortest decimal that parses back to the same `f64`.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{v:?}")
    } else {
        format!("{v:e}")
    }
}

fn bump_text(b: &Bump) -> String {
    format!("{}:{}:{}", b.l, b.m, num(b.amplitude))
}

/// Canonical text with every key spelled out.
pub fn serialize_config(c: &RunConfig) -> String {
    let f = &c.flow;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("[flow]\nvariant", f.variant.name().into());
    kv("l_max", c.l_max.to_string());
    kv("dt", num(f.dt));
    kv("t_end", num(f.t_end));
    kv("stabilizer", f.stabilizer.map_or("auto".into(), num));
    kv("rebalance_every", f.rebalance_every.to_string());
    kv("rebalance_tol", num(f.rebalance_tol));
    kv(
        "jacobian",
        match f.jacobian {
            Jacobian::Analytic => "analytic",
            Jacobian::FiniteDifference => "finite_difference",
        }
        .into(),
    );
    kv(
        "killing_part",
        match f.killing_part {
            KillingPart::Balanced => "balanced",
            KillingPart::Zero => "zero",
        }
        .into(),
    );
    kv("hopf_relaxation", num(f.hopf_relaxation));
    kv("stop_w0", num(f.stop_w0));
    kv("max_hopf", num(f.max_hopf));
    kv("max_lambda_excursion", num(f.max_lambda_excursion));
    kv("energy_slack", num(f.energy_slack));
    kv("max_halvings", f.max_halvings.to_string());
    kv("grow_after", f.grow_after.to_string());
    kv("grow_factor", num(f.grow_factor));
    kv("max_steps", f.max_steps.map_or("none".into(), |v| v.to_string()));
    kv("\n[shape]\nkind", c.shape.kind().into());
    match &c.shape {
        ShapeSpec::Sphere => {}
        ShapeSpec::ShBump(b) => {
            kv("l", b.l.to_string());
            kv("m", b.m.to_string());
            kv("amplitude", num(b.amplitude));
        }
        ShapeSpec::MultiBump(bs) => kv("bumps", bs.iter().map(bump_text).collect::<Vec<_>>().join(", ")),
        ShapeSpec::EllipsoidLike(a) => kv("axes", a.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", ")),
        ShapeSpec::Random { l_content, amplitude } => {
            kv("l_content", l_content.to_string());
            kv("amplitude", num(*amplitude));
        }
    }
    kv("seed", c.seed.to_string());
    kv("epsilon", num(c.epsilon));
    kv("\n[output]\ndir", c.output.dir.clone());
    kv("snapshot_every", c.output.snapshot_every.to_string());
    kv(
        "formats",
        if c.output.formats.is_empty() {
            "none".into()
        } else {
            c.output.formats.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
        },
    );
    if let Some(r) = &c.output.resume {
        kv("resume", r.clone());
    }
    s
}
