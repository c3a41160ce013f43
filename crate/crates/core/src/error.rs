use thiserror::Error;

use crate::sphere::SphereError;

/// Failure classes of the simulator. Each maps to a distinct CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error("degenerate immersion at node {node} (theta = {theta:.6}, phi = {phi:.6})")]
    Degenerate { node: usize, theta: f64, phi: f64 },
    #[error("gauge error: {0}")]
    Gauge(String),
    #[error("Mobius chart error: |s| = {0:.3e} exceeds the chart radius")]
    Chart(f64),
    #[error("gauge Newton iteration did not converge: {0}")]
    GaugeConvergence(String),
    #[error("conformalization stalled: {0}")]
    Conformalization(String),
    #[error("datum not admissible: {0}")]
    Admissibility(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("flow left the admissible class at t = {t:.6e}: {reason}")]
    FlowClass { t: f64, reason: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {kind}")]
    Config { line: usize, kind: ConfigErrorKind },
    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("value out of range for `{key}`: {msg}")]
    OutOfRange { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
}

pub type Result<T> = std::result::Result<T, Error>;
