use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use willflow::cli_io::{
    exit_code, normalize_only, parse_config, resume, verify_state, Checkpoint, RunConfig, EXIT_FLOW_CLASS, EXIT_OK,
    EXIT_VERIFY,
};
use willflow::error::{Error, Result};
use willflow::flow::Outcome;
use willflow::geometry::Immersion;
use willflow::sphere::Grid;

#[derive(Parser)]
#[command(name = "willflow", version, about = "Spectral Willmore flow of immersed spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, normalize and flow the configured datum.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the datum pipeline only.
    Normalize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the invariant suites on `sphere` or a coefficient dump.
    Verify {
        #[arg(long)]
        state: String,
        /// Degree for `sphere`.
        #[arg(long, default_value_t = 32)]
        l_max: usize,
        /// Skip the conformal and balance checks.
        #[arg(long)]
        no_gauge: bool,
    },
    /// Continue a run from a coefficient dump.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to `config.cfg` next to the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

fn report(s: &willflow::cli_io::RunSummary) -> i32 {
    println!("{}", serde_json::to_string_pretty(s).expect("summary serializes"));
    if matches!(s.outcome, Outcome::Aborted(_)) {
        EXIT_FLOW_CLASS
    } else {
        EXIT_OK
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            if let Some(ck) = &cfg.output.resume {
                let dir = out_dir(&cfg, out);
                return Ok(report(&resume(Path::new(ck), Some(&cfg), Some(&dir))?));
            }
            let dir = out_dir(&cfg, out);
            Ok(report(&willflow::cli_io::execute(&cfg, &dir, None)?))
        }
        Command::Normalize { config, out } => {
            let cfg = load(&config)?;
            let s = normalize_only(&cfg, &out_dir(&cfg, out))?;
            println!("{}", serde_json::to_string_pretty(&s).expect("serializes"));
            Ok(EXIT_OK)
        }
        Command::Verify { state, l_max, no_gauge } => {
            let im = if state == "sphere" {
                Immersion::unit_sphere(&Grid::new(l_max)?)
            } else {
                let ck = Checkpoint::read(Path::new(&state))?;
                ck.immersion(&ck.grid()?)?
            };
            let checks = verify_state(&im, !no_gauge);
            let mut ok = true;
            for c in &checks {
                ok &= c.pass;
                println!(
                    "{} {:<22} {:.3e} (bound {:.1e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.bound
                );
            }
            Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Resume { checkpoint, config, out } => {
            let cfg = config.as_deref().map(load).transpose()?;
            Ok(report(&resume(&checkpoint, cfg.as_ref(), out.as_deref())?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
