//! Batch front end: configuration, initial shapes, exports, checkpoints and
//! run orchestration.

mod config;
mod export;
mod run;
mod shape;

pub use config::{
    parse_config, serialize_config, Bump, ExportFormat, OutputConfig, RunConfig, ShapeSpec, DEFAULT_EPSILON,
    DEFAULT_L_MAX, DEFAULT_SEED,
};
pub use export::{
    csv_header, mesh, obj_text, read_csv, read_obj, write_obj, Checkpoint, DiagnosticsRow, COEFF_MAGIC, CSV_COLUMNS,
    CSV_VERSION,
};
pub use run::{
    execute, exit_code, normalize_only, prepare_datum, resume, verify_state, Check, NormalizeSummary, RunSummary,
    CONFIG_FILE, CSV_FILE, EXIT_ADMISSIBILITY, EXIT_CONFIG, EXIT_FLOW_CLASS, EXIT_IO, EXIT_NUMERICAL, EXIT_OK,
    EXIT_VERIFY, SUMMARY_FILE,
};
pub use shape::{generate_shape, random_field, shape_radius};
