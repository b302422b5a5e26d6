use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use numkit_core::Error;

use crate::config::RunConfig;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Ordered by precedence when statuses are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Indeterminate,
    Violation,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Error => 1,
            Status::Violation => 2,
            Status::Indeterminate => 3,
        }
    }
}

pub fn error_status(e: &Error) -> Status {
    match e {
        Error::Diverged { .. } => Status::Violation,
        Error::NotConverged { .. } | Error::Indeterminate(_) => Status::Indeterminate,
        Error::Steps(list) => list.iter().map(|(_, e)| error_status(e)).max().unwrap_or(Status::Error),
        _ => Status::Error,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Schema(_) => "schema",
        Error::Invariant { .. } => "invariant",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::DomainViolation { .. } => "domain_violation",
        Error::Diverged { .. } => "diverged",
        Error::NotConverged { .. } => "not_converged",
        Error::Indeterminate(_) => "indeterminate",
        Error::Inadmissible { .. } => "inadmissible",
        Error::MemoryBudget { .. } => "memory_budget",
        Error::Precondition(_) => "precondition",
        Error::Dump(_) => "dump",
        Error::Steps(_) => "steps",
    }
}

pub fn error_value(e: &Error) -> Value {
    let mut v = json!({
        "kind": error_kind(e),
        "message": e.to_string(),
        "steps": e.steps(),
    });
    if let Error::Diverged { direction, radius } = e {
        v["direction"] = json!(direction);
        v["radius"] = json!(radius);
    }
    v
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Inputs that fully determine a report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub model_sha256: Option<String>,
    pub portfolio_sha256: Option<String>,
    pub seed: u64,
    pub n_paths: usize,
    pub epsilon: f64,
    pub strategies: usize,
    pub levels: usize,
    pub max_atoms: usize,
    pub tolerances: crate::config::Tolerances,
    pub generator: &'static str,
}

impl ReportConfig {
    pub fn new(cfg: &RunConfig, model_bytes: Option<&[u8]>, portfolio_bytes: Option<&[u8]>) -> Self {
        ReportConfig {
            model_sha256: model_bytes.map(sha256_hex),
            portfolio_sha256: portfolio_bytes.map(sha256_hex),
            seed: cfg.seed,
            n_paths: cfg.n_paths,
            epsilon: cfg.epsilon,
            strategies: cfg.strategies,
            levels: cfg.levels,
            max_atoms: cfg.max_atoms,
            tolerances: cfg.tolerances(),
            generator: numkit_core::rng::GENERATOR_ID,
        }
    }
}

/// Envelope fields followed by the command's own result fields at top level.
pub fn envelope(command: &str, status: Status, config: &ReportConfig, result: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
    map.insert("tool".into(), json!("numkit"));
    map.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    map.insert("command".into(), json!(command));
    map.insert("status".into(), json!(status));
    map.insert("exit_code".into(), json!(status.exit_code()));
    map.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    match result {
        Value::Object(fields) => map.extend(fields),
        Value::Null => {}
        other => {
            map.insert("result".into(), other);
        }
    }
    Value::Object(map)
}

pub fn render(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
