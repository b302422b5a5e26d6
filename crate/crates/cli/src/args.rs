use std::path::PathBuf;

use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Check a model file
    Validate,
    /// Scan every step for immediate arbitrage
    Detect,
    /// Compute the growth-optimal portfolio
    Solve,
    /// Simulate paths and check step moments
    Simulate,
    /// Monte Carlo deflator test, ratio identities and integrability profile
    Verify,
    /// Jump-intensity measure change removing the numéraire drift
    MeasureChange,
    /// Truncation and counting law-of-large-numbers suites
    Lln,
    /// validate, detect, solve, verify and measure-change in one report
    Full,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Detect => "detect",
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::MeasureChange => "measure-change",
            Command::Lln => "lln",
            Command::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "numkit", version, about = "Growth-optimal portfolio analysis for finite-atom market models")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Model file (JSON)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report file; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed (positive)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths
    #[arg(long)]
    pub paths: Option<usize>,
    /// Total-variation budget of the measure change
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// First-order-condition and drift tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Standard-error multiple of the Monte Carlo decision rule
    #[arg(long)]
    pub z: Option<f64>,
    /// Number of random test strategies
    #[arg(long)]
    pub strategies: Option<usize>,
    /// Truncation levels n = 1, 2, 4, ... for `lln`
    #[arg(long)]
    pub levels: Option<usize>,
    /// Portfolio file; defaults to the solver's optimum
    #[arg(long)]
    pub portfolio: Option<PathBuf>,
    /// Binary dump of simulated increments (`simulate` only)
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Write SVG plots next to the report
    #[arg(long)]
    pub plot: bool,
    /// TOML file with defaults for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}
