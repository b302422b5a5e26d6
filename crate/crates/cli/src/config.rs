use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_PATHS: usize = 20_000;
pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_Z: f64 = 4.0;
pub const DEFAULT_STRATEGIES: usize = 5;
pub const DEFAULT_LEVELS: usize = 7;

/// Optional TOML file; every key can also be given as a flag, and flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<PathBuf>,
    pub portfolio: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
    pub z: Option<f64>,
    pub strategies: Option<usize>,
    pub levels: Option<usize>,
    pub max_atoms: Option<usize>,
    pub plot: Option<bool>,
}

pub fn parse_config(text: &str) -> Result<FileConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<PathBuf>,
    pub portfolio: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub dump: Option<PathBuf>,
    pub seed: u64,
    pub n_paths: usize,
    pub epsilon: f64,
    pub tol: f64,
    pub z: f64,
    pub strategies: usize,
    pub levels: usize,
    pub max_atoms: usize,
    pub plot: bool,
}

/// Tolerances echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub foc: f64,
    pub z: f64,
    pub lp_slack: f64,
    pub density_residual: f64,
    pub y_min: f64,
}

impl RunConfig {
    pub fn resolve(cli: Cli, file: FileConfig) -> Result<Self, String> {
        let cfg = RunConfig {
            command: cli.command,
            model: cli.model.or(file.model),
            portfolio: cli.portfolio.or(file.portfolio),
            out: cli.out,
            dump: cli.dump,
            seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            n_paths: cli.paths.or(file.paths).unwrap_or(DEFAULT_PATHS),
            epsilon: cli.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON),
            tol: cli.tol.or(file.tol).unwrap_or(DEFAULT_TOL),
            z: cli.z.or(file.z).unwrap_or(DEFAULT_Z),
            strategies: cli.strategies.or(file.strategies).unwrap_or(DEFAULT_STRATEGIES),
            levels: cli.levels.or(file.levels).unwrap_or(DEFAULT_LEVELS),
            max_atoms: file.max_atoms.unwrap_or(numkit_core::model::LevyAtomMeasure::DEFAULT_MAX_ATOMS),
            plot: cli.plot || file.plot.unwrap_or(false),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        if self.seed == 0 {
            return Err("--seed must be positive".into());
        }
        if self.n_paths == 0 {
            return Err("--paths must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err("--epsilon must be positive".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err("--tol must be positive".into());
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err("--z must be positive".into());
        }
        if self.levels == 0 || self.levels > 40 {
            return Err("--levels must be between 1 and 40".into());
        }
        if self.command != Command::Lln && self.model.is_none() {
            return Err("--model is required".into());
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            foc: self.tol,
            z: self.z,
            lp_slack: numkit_core::arbdetect::SLACK_TOL,
            density_residual: numkit_core::measure::RESIDUAL_TOL,
            y_min: numkit_core::measure::Y_MIN,
        }
    }
}
