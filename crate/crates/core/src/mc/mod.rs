//! Monte Carlo engine: path simulation and the statistical checks built on it.

pub mod deflator;
pub mod dump;
pub mod lln;
pub mod nupbr;
pub mod simulate;

pub use deflator::{
    deflator_run, deflator_run_on, deflator_test, probe_strategies, terminal_ratios, DeflatorRun, MartingaleVerdict,
    StrategyVerdict, VerificationReport,
};
pub use dump::{encode_path_dump, read_path_dump, read_path_dump_from, write_path_dump, PathDump};
pub use lln::{lln_counting_test, lln_truncation_test, CountingDesign, LlnReport, TruncationDesign};
pub use nupbr::{doubling_grid, nupbr_probe, NupbrReport, NupbrVerdict};
pub use simulate::{moment_check, price_path, simulate, simulate_with, MomentCheck, PathBundle, SimulationConfig, StrategyLoadings};
