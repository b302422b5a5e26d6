//! `numkit` command-line front end. [`run`] is the whole program; `main`
//! only forwards the process arguments and exit code.

pub mod args;
pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

use numkit_core::model::{parse_model_with, parse_portfolio, MarketModel, ParseOptions, Portfolio};

use args::{Cli, Command};
use commands::Outcome;
use config::{parse_config, FileConfig, RunConfig};
use report::{envelope, render, ReportConfig, Status};

/// Caps the worker pool; unset or empty means one worker per core.
pub const THREADS_ENV: &str = "NUMKIT_THREADS";

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Error.exit_code() } else { 0 };
        }
    };
    let file = match &cli.config {
        Some(path) => match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_config(&t))
        {
            Ok(f) => f,
            Err(e) => return usage_error(cli.out.as_deref(), &format!("config {}: {e}", path.display())),
        },
        None => FileConfig::default(),
    };
    let out = cli.out.clone();
    let cfg = match RunConfig::resolve(cli, file) {
        Ok(cfg) => cfg,
        Err(e) => return usage_error(out.as_deref(), &e),
    };
    let threads = match thread_count() {
        Ok(t) => t,
        Err(e) => return usage_error(cfg.out.as_deref(), &e),
    };
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| execute(&cfg)),
        Err(e) => usage_error(cfg.out.as_deref(), &e.to_string()),
    }
}

fn thread_count() -> Result<usize, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
        Err(_) => Ok(0),
    }
}

fn usage_error(out: Option<&Path>, message: &str) -> i32 {
    eprintln!("error: {message}");
    if let Some(path) = out {
        let report = json!({
            "schema_version": report::REPORT_SCHEMA_VERSION,
            "tool": "numkit",
            "status": Status::Error,
            "exit_code": Status::Error.exit_code(),
            "error": { "kind": "usage", "message": message },
        });
        let _ = std::fs::write(path, render(&report));
    }
    Status::Error.exit_code()
}

struct Inputs {
    model: Option<MarketModel>,
    model_bytes: Option<Vec<u8>>,
    portfolio: Option<Portfolio>,
    portfolio_bytes: Option<Vec<u8>>,
}

fn io_failure(what: &str, path: &Path, e: std::io::Error) -> Outcome {
    Outcome {
        status: Status::Error,
        result: json!({ "error": { "kind": "io", "message": format!("{what} {}: {e}", path.display()), "steps": [] } }),
        plots: Vec::new(),
    }
}

fn load(cfg: &RunConfig) -> Result<Inputs, (Outcome, Option<Vec<u8>>)> {
    let mut inputs = Inputs {
        model: None,
        model_bytes: None,
        portfolio: None,
        portfolio_bytes: None,
    };
    if let Some(path) = &cfg.model {
        let bytes = std::fs::read(path).map_err(|e| (io_failure("model", path, e), None))?;
        let text = String::from_utf8_lossy(&bytes);
        let opts = ParseOptions {
            max_atoms: cfg.max_atoms,
        };
        let model = parse_model_with(&text, &opts).map_err(|e| (Outcome::failed(&e), Some(bytes.clone())))?;
        inputs.model = Some(model);
        inputs.model_bytes = Some(bytes);
    }
    if let Some(path) = &cfg.portfolio {
        let bytes = std::fs::read(path).map_err(|e| (io_failure("portfolio", path, e), inputs.model_bytes.clone()))?;
        let g = parse_portfolio(&String::from_utf8_lossy(&bytes))
            .map_err(|e| (Outcome::failed(&e), inputs.model_bytes.clone()))?;
        inputs.portfolio = Some(g);
        inputs.portfolio_bytes = Some(bytes);
    }
    Ok(inputs)
}

fn execute(cfg: &RunConfig) -> i32 {
    let (outcome, model_bytes, portfolio_bytes) = match load(cfg) {
        Err((mut outcome, bytes)) => {
            // Unreadable or malformed input is a validation failure whatever the error kind.
            outcome.status = Status::Error;
            (outcome, bytes, None)
        }
        Ok(inputs) => {
            let outcome = dispatch(cfg, &inputs);
            (outcome, inputs.model_bytes, inputs.portfolio_bytes)
        }
    };
    let report_cfg = ReportConfig::new(cfg, model_bytes.as_deref(), portfolio_bytes.as_deref());
    let report = envelope(cfg.command.name(), outcome.status, &report_cfg, outcome.result);
    let text = render(&report);
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: writing {}: {e}", path.display());
                return Status::Error.exit_code();
            }
        }
        None => print!("{text}"),
    }
    if outcome.status != Status::Ok {
        if let Some(err) = report.get("error") {
            eprintln!("error: {}", err["message"].as_str().unwrap_or("unknown"));
        }
    }
    for (name, svg) in &outcome.plots {
        let path = plot_path(cfg, name);
        if let Err(e) = std::fs::write(&path, svg) {
            eprintln!("warning: writing {}: {e}", path.display());
        }
    }
    outcome.status.exit_code()
}

fn dispatch(cfg: &RunConfig, inputs: &Inputs) -> Outcome {
    if cfg.command == Command::Lln {
        return commands::lln(cfg);
    }
    let model = inputs.model.as_ref().expect("model presence checked with the flags");
    let g = inputs.portfolio.as_ref();
    match cfg.command {
        Command::Validate => commands::validate(model),
        Command::Detect => commands::detect(model),
        Command::Solve => commands::solve(model, cfg).0,
        Command::Simulate => commands::simulate(model, cfg),
        Command::Verify => commands::verify(model, g, cfg),
        Command::MeasureChange => commands::measure_change(model, g, cfg),
        Command::Full => commands::full(model, g, cfg),
        Command::Lln => unreachable!("handled above"),
    }
}

/// `<dir>/<report stem>-<name>.svg`, or `numkit-<command>-<name>.svg` in the working directory.
pub fn plot_path(cfg: &RunConfig, name: &str) -> PathBuf {
    match &cfg.out {
        Some(out) => {
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
            out.with_file_name(format!("{stem}-{name}.svg"))
        }
        None => PathBuf::from(format!("numkit-{}-{name}.svg", cfg.command.name())),
    }
}
