use rayon::prelude::*;
use serde::Serialize;

use super::simulate::{dynamics, simulate, StrategyLoadings};
use crate::error::Result;
use crate::linalg::quantile;
use crate::model::{MarketModel, Portfolio};

/// Minimum last-step growth of the tail quantile to call it unsaturated.
pub const SATURATION_TOL: f64 = 0.05;
pub const TAIL_LEVEL: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NupbrVerdict {
    Bounded,
    UnboundedSuspect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NupbrReport {
    pub n_paths: usize,
    pub seed: u64,
    /// 99.9% quantile of terminal wealth per grid strategy.
    pub quantiles: Vec<f64>,
    /// `q_{j+1} / q_j`.
    pub growth: Vec<f64>,
    pub verdict: NupbrVerdict,
}

/// Tail quantiles of terminal wealth over a leverage grid (typically a
/// doubling sequence of one direction). Flags `unbounded-suspect` when the
/// largest leverage has the largest quantile and it still grew by more than
/// [`SATURATION_TOL`] on the last doubling.
pub fn nupbr_probe(model: &MarketModel, f_grid: &[Portfolio], n_paths: usize, seed: u64) -> Result<NupbrReport> {
    let bundle = simulate(model, n_paths, seed)?;
    let dyns = dynamics(model);
    let mut quantiles = Vec::with_capacity(f_grid.len());
    for f in f_grid {
        let lf = StrategyLoadings::from_dynamics(&dyns, f)?;
        let wealth = (0..n_paths)
            .into_par_iter()
            .map(|p| lf.log_terminal(&bundle, p).map(f64::exp))
            .collect::<Result<Vec<_>>>()?;
        quantiles.push(quantile(&wealth, TAIL_LEVEL));
    }
    let growth: Vec<f64> = quantiles.windows(2).map(|w| w[1] / w[0]).collect();
    let at_max = quantiles
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &q)| if q >= best.1 { (i, q) } else { best })
        .0
        + 1
        == quantiles.len();
    let verdict = match growth.last() {
        Some(&g) if at_max && g >= 1.0 + SATURATION_TOL => NupbrVerdict::UnboundedSuspect,
        _ => NupbrVerdict::Bounded,
    };
    Ok(NupbrReport {
        n_paths,
        seed,
        quantiles,
        growth,
        verdict,
    })
}

/// `f, 2f, 4f, …` (`levels` entries).
pub fn doubling_grid(f: &Portfolio, levels: usize) -> Vec<Portfolio> {
    (0..levels).map(|j| f.scaled(2f64.powi(j as i32))).collect()
}
