use serde_json::{json, Value};

use numkit_core::arbdetect::{scan_model, ArbitrageVerdict};
use numkit_core::growthopt::{integrability_profile, solve_model, transform_model, SolveDiagnostics, SolveOptions};
use numkit_core::mc::lln::{CountingDesign, LlnReport, TruncationDesign};
use numkit_core::mc::{
    deflator_run_on, lln_counting_test, lln_truncation_test, moment_check, price_path, probe_strategies, simulate_with,
    write_path_dump, DeflatorRun, MartingaleVerdict, PathBundle, PathDump, SimulationConfig,
};
use numkit_core::measure::{sigma_change, verify_sigma_change_run, DensityStatus};
use numkit_core::model::{portfolio_document, sigma_special_check, MarketModel, Portfolio, StepKind};
use numkit_core::stochexp::ratio_transform_check;
use numkit_core::Error;

use crate::config::RunConfig;
use crate::plot;
use crate::report::{error_status, error_value, Status};

/// Paths on which the pathwise ratio identity is evaluated.
pub const IDENTITY_PATHS: usize = 1000;

pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub plots: Vec<(String, String)>,
}

impl Outcome {
    fn new(status: Status, result: Value) -> Self {
        Outcome {
            status,
            result,
            plots: Vec::new(),
        }
    }

    pub fn failed(e: &Error) -> Self {
        Outcome::new(error_status(e), json!({ "error": error_value(e) }))
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report value serializes")
}

pub fn validate(model: &MarketModel) -> Outcome {
    let kinds = model.grid().kinds();
    let degenerate: Vec<usize> = model
        .triplets()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_degenerate())
        .map(|(m, _)| m)
        .collect();
    Outcome::new(
        Status::Ok,
        json!({
            "valid": true,
            "dimension": model.dimension(),
            "n_steps": model.n_steps(),
            "total_clock": model.grid().total_clock(),
            "predictable_jump_steps": kinds.iter().filter(|k| **k == StepKind::PredictableJump).count(),
            "atoms": model.triplets().iter().map(|t| t.levy().len()).sum::<usize>(),
            "degenerate_steps": degenerate,
            "jump_activity": sigma_special_check(model),
        }),
    )
}

pub fn detect(model: &MarketModel) -> Outcome {
    let report = scan_model(model);
    let status = match report.verdict {
        ArbitrageVerdict::Clean => Status::Ok,
        ArbitrageVerdict::ImmediateArbitrage => Status::Violation,
        ArbitrageVerdict::Indeterminate => Status::Indeterminate,
    };
    Outcome::new(status, to_value(&report))
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        foc_tol: cfg.tol,
        ..SolveOptions::default()
    }
}

pub fn solve(model: &MarketModel, cfg: &RunConfig) -> (Outcome, Option<Portfolio>) {
    match solve_model(model, &solve_options(cfg)) {
        Ok((g, diags)) => solve_outcome(g, diags, cfg),
        Err(e) => (Outcome::failed(&e), None),
    }
}

fn solve_outcome(g: Portfolio, diags: Vec<SolveDiagnostics>, cfg: &RunConfig) -> (Outcome, Option<Portfolio>) {
    let status = if diags.iter().all(|d| d.foc_residual <= cfg.tol) {
        Status::Ok
    } else {
        Status::Indeterminate
    };
    let out = Outcome::new(
        status,
        json!({
            "weights": portfolio_document(&g).weights,
            "diagnostics": diags,
        }),
    );
    (out, Some(g))
}

/// The supplied portfolio, or the solver's optimum with its diagnostics.
pub fn numeraire(
    model: &MarketModel,
    supplied: Option<&Portfolio>,
    cfg: &RunConfig,
) -> Result<(Portfolio, Option<Vec<SolveDiagnostics>>), Outcome> {
    match supplied {
        Some(g) => g.validate_for(model).map(|_| (g.clone(), None)).map_err(|e| Outcome::failed(&e)),
        None => solve_model(model, &solve_options(cfg))
            .map(|(g, d)| (g, Some(d)))
            .map_err(|e| Outcome::failed(&e)),
    }
}

pub fn simulate(model: &MarketModel, cfg: &RunConfig) -> Outcome {
    let bundle = match simulate_with(model, &SimulationConfig::new(cfg.n_paths, cfg.seed)) {
        Ok(b) => b,
        Err(e) => return Outcome::failed(&e),
    };
    if let Some(path) = &cfg.dump {
        let written = std::fs::File::create(path)
            .map_err(|e| Error::Dump(format!("{}: {e}", path.display())))
            .and_then(|f| write_path_dump(&PathDump::from_bundle(&bundle), std::io::BufWriter::new(f)));
        if let Err(e) = written {
            return Outcome::failed(&e);
        }
    }
    let moments = moment_check(model, &bundle, cfg.z);
    let passed = moments.iter().all(|m| m.passed);
    Outcome::new(
        if passed { Status::Ok } else { Status::Violation },
        json!({
            "n_paths": bundle.n_paths,
            "n_steps": bundle.n_steps,
            "dimension": bundle.dimension,
            "total_jumps": bundle.total_jumps(),
            "moments_passed": passed,
            "moments": moments,
        }),
    )
}

fn ratio_plot(title: &str, run: &DeflatorRun) -> Vec<(String, String)> {
    let series: Vec<(String, Vec<f64>)> = run
        .ratios
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("f{i}"), r.clone()))
        .collect();
    match plot::histogram_svg(title, "terminal wealth ratio", &series, 60) {
        Ok(svg) => vec![("ratios".into(), svg)],
        Err(_) => Vec::new(),
    }
}

fn verdict_status(v: MartingaleVerdict) -> Status {
    match v {
        MartingaleVerdict::Violation => Status::Violation,
        _ => Status::Ok,
    }
}

fn identity_summary(model: &MarketModel, bundle: &PathBundle, g: &Portfolio, strategies: &[Portfolio]) -> Result<Value, Error> {
    let paths = bundle.n_paths.min(IDENTITY_PATHS);
    let mut max_rel: f64 = 0.0;
    let mut max_recip: f64 = 0.0;
    let mut failures = 0usize;
    for p in 0..paths {
        let path = price_path(model, bundle, p);
        for f in strategies {
            let check = ratio_transform_check(f.weights(), g.weights(), &path)?;
            max_rel = max_rel.max(check.max_rel_error);
            max_recip = max_recip.max(check.reciprocal_error);
            failures += usize::from(!check.passed);
        }
    }
    Ok(json!({
        "paths": paths,
        "strategies": strategies.len(),
        "max_rel_error": max_rel,
        "max_reciprocal_error": max_recip,
        "failures": failures,
        "passed": failures == 0,
    }))
}

pub fn verify(model: &MarketModel, supplied: Option<&Portfolio>, cfg: &RunConfig) -> Outcome {
    match numeraire(model, supplied, cfg) {
        Ok((g, diags)) => verify_with(model, &g, diags.as_deref(), cfg),
        Err(out) => out,
    }
}

/// `diags` is present when `g` came from the solver; its optimality is then checked too.
pub fn verify_with(model: &MarketModel, g: &Portfolio, diags: Option<&[SolveDiagnostics]>, cfg: &RunConfig) -> Outcome {
    let attempt = || -> Result<Outcome, Error> {
        let bundle = simulate_with(model, &SimulationConfig::new(cfg.n_paths, cfg.seed))?;
        let strategies = probe_strategies(model, cfg.strategies, cfg.seed);
        let run = deflator_run_on(model, &bundle, g, &strategies, cfg.z)?;
        let identities = identity_summary(model, &bundle, g, &strategies)?;
        let profile = integrability_profile(model, g)?;
        let transformed = transform_model(model, g)?;
        let drift = transformed.triplets().iter().map(|t| t.b().amax()).fold(0.0, f64::max);

        let mut status = verdict_status(run.report.verdict);
        if identities["passed"] != json!(true) {
            status = status.max(Status::Violation);
        }
        if let Some(d) = diags {
            if d.iter().any(|d| d.foc_residual > cfg.tol) || drift > cfg.tol {
                status = status.max(Status::Indeterminate);
            }
        }
        let mut out = Outcome::new(
            status,
            json!({
                "numeraire": portfolio_document(g).weights,
                "numeraire_source": if diags.is_some() { "solver" } else { "portfolio_file" },
                "solver_diagnostics": diags,
                "numeraire_drift": drift,
                "strategies": strategies.iter().map(|f| portfolio_document(f).weights).collect::<Vec<_>>(),
                "deflator": run.report,
                "ratio_identity": identities,
                "integrability": profile,
            }),
        );
        if cfg.plot {
            out.plots = ratio_plot("Deflated wealth ratios", &run);
        }
        Ok(out)
    };
    attempt().unwrap_or_else(|e| Outcome::failed(&e))
}

pub fn measure_change(model: &MarketModel, supplied: Option<&Portfolio>, cfg: &RunConfig) -> Outcome {
    match numeraire(model, supplied, cfg) {
        Ok((g, _)) => measure_change_with(model, &g, cfg),
        Err(out) => out,
    }
}

pub fn measure_change_with(model: &MarketModel, g: &Portfolio, cfg: &RunConfig) -> Outcome {
    let attempt = || -> Result<Outcome, Error> {
        let densities = sigma_change(model, g, cfg.epsilon)?;
        let status = match densities.status {
            DensityStatus::Feasible => Status::Ok,
            DensityStatus::InfeasibleWithinBudget | DensityStatus::StructurallyInfeasible => Status::Violation,
            DensityStatus::Indeterminate => Status::Indeterminate,
        };
        if status != Status::Ok {
            return Ok(Outcome::new(
                status,
                json!({ "densities": densities, "verification": Value::Null }),
            ));
        }
        let strategies = probe_strategies(model, cfg.strategies, cfg.seed);
        let (verification, run) =
            verify_sigma_change_run(model, g, &densities, &strategies, cfg.n_paths, cfg.seed, cfg.z)?;
        let mut out = Outcome::new(
            verdict_status(verification.report.verdict),
            json!({ "densities": densities, "verification": verification }),
        );
        if cfg.plot {
            out.plots = ratio_plot("Wealth ratios under the reweighted measure", &run);
        }
        Ok(out)
    };
    attempt().unwrap_or_else(|e| Outcome::failed(&e))
}

pub fn lln(cfg: &RunConfig) -> Outcome {
    let attempt = || -> Result<Outcome, Error> {
        let trunc_div = lln_truncation_test(&TruncationDesign::divergent(), cfg.levels, cfg.n_paths, cfg.seed)?;
        let trunc_bdd = lln_truncation_test(&TruncationDesign::bounded(), cfg.levels, cfg.n_paths, cfg.seed)?;
        let count_div = lln_counting_test(&CountingDesign::divergent(), cfg.levels, cfg.n_paths, cfg.seed)?;
        let count_bdd = lln_counting_test(&CountingDesign::bounded(), cfg.levels, cfg.n_paths, cfg.seed)?;
        let passed = trunc_div.monotone && count_div.monotone && trunc_bdd.stabilized && count_bdd.stabilized;
        let mut out = Outcome::new(
            if passed { Status::Ok } else { Status::Violation },
            json!({
                "passed": passed,
                "truncation": { "divergent": trunc_div, "bounded": trunc_bdd },
                "counting": { "divergent": count_div, "bounded": count_bdd },
            }),
        );
        if cfg.plot {
            let curve = |r: &LlnReport| -> Vec<(f64, f64)> {
                r.levels.iter().map(|l| (l.n as f64, l.tails[0].probability)).collect()
            };
            let series = vec![
                ("M/L divergent".to_string(), curve(&trunc_div)),
                ("M/L bounded".to_string(), curve(&trunc_bdd)),
                ("N/R divergent".to_string(), curve(&count_div)),
                ("N/R bounded".to_string(), curve(&count_bdd)),
            ];
            if let Ok(svg) = plot::levels_svg("Tail probability at delta = 0.1", "probability", &series) {
                out.plots.push(("lln".into(), svg));
            }
        }
        Ok(out)
    };
    attempt().unwrap_or_else(|e| Outcome::failed(&e))
}

pub fn full(model: &MarketModel, supplied: Option<&Portfolio>, cfg: &RunConfig) -> Outcome {
    let mut stages = Vec::new();
    let mut result = serde_json::Map::new();
    let mut status = Status::Ok;
    let mut plots = Vec::new();
    let mut record = |name: &str, out: Outcome, status: &mut Status| {
        *status = (*status).max(out.status);
        stages.push(json!({ "stage": name, "status": out.status }));
        result.insert(name.to_string(), out.result);
        plots.extend(out.plots.into_iter().map(|(n, s)| (format!("{name}-{n}"), s)));
    };

    record("validate", validate(model), &mut status);
    let det = detect(model);
    let arbitrage = det.status == Status::Violation;
    record("detect", det, &mut status);
    if !arbitrage {
        let portfolio = match supplied {
            Some(g) => match g.validate_for(model) {
                Ok(()) => Some((g.clone(), None)),
                Err(e) => {
                    record("portfolio", Outcome::failed(&e), &mut status);
                    None
                }
            },
            None => match solve_model(model, &solve_options(cfg)) {
                Ok((g, diags)) => {
                    let (out, _) = solve_outcome(g.clone(), diags.clone(), cfg);
                    record("solve", out, &mut status);
                    Some((g, Some(diags)))
                }
                Err(e) => {
                    record("solve", Outcome::failed(&e), &mut status);
                    None
                }
            },
        };
        if let Some((g, diags)) = portfolio {
            record("verify", verify_with(model, &g, diags.as_deref(), cfg), &mut status);
            record("measure_change", measure_change_with(model, &g, cfg), &mut status);
        }
    }
    result.insert("stages".into(), Value::Array(stages));
    Outcome {
        status,
        result: Value::Object(result),
        plots,
    }
}
