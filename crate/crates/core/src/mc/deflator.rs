use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::simulate::{dynamics, simulate, PathBundle, StrategyLoadings};
use crate::error::Result;
use crate::growthopt::max_feasible_step;
use crate::linalg::pairwise_sum;
use crate::model::{MarketModel, Portfolio};
use crate::rng;

/// Default z multiple for the decision rule.
pub const DEFAULT_Z: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartingaleVerdict {
    MartingaleConsistent,
    SupermartingaleConsistent,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyVerdict {
    pub strategy: usize,
    pub mean: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub verdict: MartingaleVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub n_paths: usize,
    pub seed: u64,
    pub z_threshold: f64,
    pub verdict: MartingaleVerdict,
    pub entries: Vec<StrategyVerdict>,
}

/// `|mean − 1| ≤ z·SE` → martingale-consistent; `mean ≤ 1 + z·SE` →
/// supermartingale-consistent; otherwise a violation.
pub fn classify(mean: f64, se: f64, z: f64) -> MartingaleVerdict {
    if (mean - 1.0).abs() <= z * se {
        MartingaleVerdict::MartingaleConsistent
    } else if mean <= 1.0 + z * se {
        MartingaleVerdict::SupermartingaleConsistent
    } else {
        MartingaleVerdict::Violation
    }
}

pub fn summarize(strategy: usize, ratios: &[f64], z: f64) -> StrategyVerdict {
    let n = ratios.len() as f64;
    let mean = pairwise_sum(ratios) / n;
    let sq: Vec<f64> = ratios.iter().map(|r| (r - mean) * (r - mean)).collect();
    let var = if ratios.len() > 1 { pairwise_sum(&sq) / (n - 1.0) } else { 0.0 };
    let std_error = (var / n).sqrt();
    let z_score = if std_error > 0.0 {
        (mean - 1.0) / std_error
    } else if mean == 1.0 {
        0.0
    } else {
        (mean - 1.0).signum() * f64::INFINITY
    };
    StrategyVerdict {
        strategy,
        mean,
        std_error,
        z_score,
        verdict: classify(mean, std_error, z),
    }
}

/// Terminal `E(f·S)_T / E(g·S)_T` on every path of `bundle`.
pub fn terminal_ratios(model: &MarketModel, bundle: &PathBundle, g: &Portfolio, f: &Portfolio) -> Result<Vec<f64>> {
    let dyns = dynamics(model);
    let lg = StrategyLoadings::from_dynamics(&dyns, g)?;
    let lf = StrategyLoadings::from_dynamics(&dyns, f)?;
    (0..bundle.n_paths)
        .into_par_iter()
        .map(|p| Ok((lf.log_terminal(bundle, p)? - lg.log_terminal(bundle, p)?).exp()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeflatorRun {
    pub report: VerificationReport,
    pub ratios: Vec<Vec<f64>>,
}

pub fn deflator_test(
    model: &MarketModel,
    g: &Portfolio,
    f_list: &[Portfolio],
    n_paths: usize,
    seed: u64,
) -> Result<VerificationReport> {
    deflator_run(model, g, f_list, n_paths, seed, DEFAULT_Z).map(|r| r.report)
}

/// Like [`deflator_test`] with an explicit z multiple, keeping the samples.
pub fn deflator_run(
    model: &MarketModel,
    g: &Portfolio,
    f_list: &[Portfolio],
    n_paths: usize,
    seed: u64,
    z: f64,
) -> Result<DeflatorRun> {
    let bundle = simulate(model, n_paths, seed)?;
    deflator_run_on(model, &bundle, g, f_list, z)
}

pub fn deflator_run_on(
    model: &MarketModel,
    bundle: &PathBundle,
    g: &Portfolio,
    f_list: &[Portfolio],
    z: f64,
) -> Result<DeflatorRun> {
    let mut entries = Vec::with_capacity(f_list.len());
    let mut ratios = Vec::with_capacity(f_list.len());
    for (i, f) in f_list.iter().enumerate() {
        let r = terminal_ratios(model, bundle, g, f)?;
        entries.push(summarize(i, &r, z));
        ratios.push(r);
    }
    let verdict = entries
        .iter()
        .map(|e| e.verdict)
        .max()
        .unwrap_or(MartingaleVerdict::MartingaleConsistent);
    Ok(DeflatorRun {
        report: VerificationReport {
            n_paths: bundle.n_paths,
            seed: bundle.seed,
            z_threshold: z,
            verdict,
            entries,
        },
        ratios,
    })
}

/// Deterministic admissible strategies: per step a random direction with a
/// random length of at most 2, kept where `1 + v·x ≥ 0.5` for every atom.
pub fn probe_strategies(model: &MarketModel, count: usize, seed: u64) -> Vec<Portfolio> {
    let d = model.dimension();
    (0..count)
        .map(|j| {
            let weights = model
                .triplets()
                .iter()
                .enumerate()
                .map(|(m, t)| {
                    let mut rng = rng::step_rng(seed, rng::domain::PROBE, j as u64, m as u64);
                    let mut dir = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
                    let norm = dir.norm();
                    if norm > 0.0 {
                        dir /= norm;
                    }
                    let reach = max_feasible_step(t, &DVector::zeros(d), &dir, 0.5);
                    dir * (rng.gen::<f64>() * reach.min(2.0))
                })
                .collect();
            Portfolio::new(weights)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rule() {
        assert_eq!(classify(1.0, 0.0, 4.0), MartingaleVerdict::MartingaleConsistent);
        assert_eq!(classify(1.03, 0.01, 4.0), MartingaleVerdict::MartingaleConsistent);
        assert_eq!(classify(0.9, 0.01, 4.0), MartingaleVerdict::SupermartingaleConsistent);
        assert_eq!(classify(1.05, 0.01, 4.0), MartingaleVerdict::Violation);
    }

    #[test]
    fn constant_ratios_have_zero_error() {
        let s = summarize(0, &[1.0; 10], 4.0);
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.z_score, 0.0);
        assert_eq!(s.verdict, MartingaleVerdict::MartingaleConsistent);
    }
}
