//! Truncation laws of large numbers.
//!
//! Both suites reuse one set of draws for every truncation level, so the
//! tail-probability curves are coupled across `n`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::simulate::simulate;
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::model::{ClockGrid, LocalTriplet, MarketModel, StepKind};
use crate::rng::{self, domain};

pub const TAIL_DELTAS: [f64; 2] = [0.1, 0.05];
/// Monotonicity slack in binomial standard errors.
pub const MONOTONE_SE: f64 = 2.0;
const STABLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlnKind {
    Truncation,
    Counting,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProbability {
    pub delta: f64,
    pub probability: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnLevel {
    pub n: u64,
    /// `L^n_T` (truncation) or `R^n_T` (counting); deterministic for these designs.
    pub denominator: f64,
    pub mean_abs_deviation: f64,
    pub tails: Vec<TailProbability>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnReport {
    pub kind: LlnKind,
    pub n_paths: usize,
    pub seed: u64,
    pub levels: Vec<LlnLevel>,
    /// Denominator strictly grows on the last level.
    pub divergent: bool,
    /// Every tail curve is nonincreasing within [`MONOTONE_SE`] standard errors.
    pub monotone: bool,
    /// The last two levels give the same statistic on every path.
    pub stabilized: bool,
    /// No compensator mass at all.
    pub vacuous: bool,
}

/// `M^n = Σ H^n_m · J_m` with `H^n = H·1{|H| ≤ n}` and `J` the increments of
/// a driftless driver model.
#[derive(Debug, Clone)]
pub struct TruncationDesign {
    pub driver: MarketModel,
    pub h: Vec<DVector<f64>>,
}

impl TruncationDesign {
    pub fn new(driver: MarketModel, h: Vec<DVector<f64>>) -> Result<Self> {
        if h.len() != driver.n_steps() {
            return Err(Error::DimensionMismatch {
                step: None,
                expected: driver.n_steps(),
                found: h.len(),
            });
        }
        for (m, (t, hm)) in driver.triplets().iter().zip(&h).enumerate() {
            if hm.len() != driver.dimension() {
                return Err(Error::DimensionMismatch {
                    step: Some(m),
                    expected: driver.dimension(),
                    found: hm.len(),
                });
            }
            if t.b().amax() != 0.0 {
                return Err(Error::Precondition(format!("driver step {m} has nonzero drift")));
            }
        }
        Ok(TruncationDesign { driver, h })
    }

    /// `m ↦ 2^m` against a 1-d driver with diffusion 50 and symmetric atoms
    /// ±0.5 of intensity 2, ten steps of clock 0.1.
    pub fn divergent() -> Self {
        let h = (0..10).map(|m| DVector::from_element(1, 2f64.powi(m))).collect();
        Self::new(reference_driver(), h).expect("valid design")
    }

    /// `m ↦ 1 + (m mod 3)` on the same driver: the weights never exceed 3.
    pub fn bounded() -> Self {
        let h = (0..10).map(|m| DVector::from_element(1, 1.0 + (m % 3) as f64)).collect();
        Self::new(reference_driver(), h).expect("valid design")
    }

    /// Per-step conditional covariance density `q` of `J`.
    fn q(&self) -> Vec<DMatrix<f64>> {
        let d = self.driver.dimension();
        self.driver
            .triplets()
            .iter()
            .zip(self.driver.grid().delta_a())
            .zip(self.driver.grid().kinds())
            .map(|((t, &da), kind)| {
                let mut q = t.c().clone();
                for a in t.levy().atoms() {
                    q += &a.x * a.x.transpose() * a.k;
                }
                if *kind == StepKind::PredictableJump {
                    let mu = t.levy().first_moment(d);
                    q -= &mu * mu.transpose() * da;
                }
                q
            })
            .collect()
    }
}

fn reference_driver() -> MarketModel {
    let steps = 10;
    let grid = ClockGrid::uniform(steps, 1.0, 1.0).expect("valid grid");
    let t = LocalTriplet::scalar(0.0, 50.0, &[(0.5, 2.0), (-0.5, 2.0)]).expect("valid triplet");
    MarketModel::new(1, grid, vec![t; steps]).expect("valid model")
}

/// Counting processes with deterministic compensator increments `ΔÑ_m`,
/// switched on at level `n` when `G_m ≤ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingDesign {
    pub increments: Vec<f64>,
    pub g: Vec<f64>,
}

impl CountingDesign {
    pub fn new(increments: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if increments.len() != g.len() {
            return Err(Error::DimensionMismatch {
                step: None,
                expected: increments.len(),
                found: g.len(),
            });
        }
        if increments.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Precondition("compensator increments must be finite and nonnegative".into()));
        }
        if g.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Precondition("G must be finite and nonnegative".into()));
        }
        Ok(CountingDesign { increments, g })
    }

    /// `ΔÑ_m = 10·4^m`, `G_m = 2^m`, ten steps.
    pub fn divergent() -> Self {
        let increments = (0..10).map(|m| 10.0 * 4f64.powi(m)).collect();
        let g = (0..10).map(|m| 2f64.powi(m)).collect();
        Self::new(increments, g).expect("valid design")
    }

    /// `ΔÑ_m = 50`, `G_m = m mod 2`, ten steps.
    pub fn bounded() -> Self {
        Self::new(vec![50.0; 10], (0..10).map(|m| (m % 2) as f64).collect()).expect("valid design")
    }
}

fn levels(n_levels: usize) -> Vec<u64> {
    (0..n_levels).map(|j| 1u64 << j).collect()
}

/// Statistics for one level given per-path values of the tested quantity
/// (`M/L` or `N/R − 1`).
fn level_stats(n: u64, denominator: f64, values: &[f64]) -> LlnLevel {
    let count = values.len() as f64;
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let tails = TAIL_DELTAS
        .iter()
        .map(|&delta| {
            let hits = abs.iter().filter(|&&v| v > delta).count() as f64;
            let p = hits / count;
            TailProbability {
                delta,
                probability: p,
                std_error: (p * (1.0 - p) / count).sqrt(),
            }
        })
        .collect();
    LlnLevel {
        n,
        denominator,
        mean_abs_deviation: pairwise_sum(&abs) / count,
        tails,
    }
}

fn assemble(kind: LlnKind, n_paths: usize, seed: u64, samples: Vec<(u64, f64, Vec<f64>)>) -> LlnReport {
    let levels: Vec<LlnLevel> = samples.iter().map(|(n, den, v)| level_stats(*n, *den, v)).collect();
    let monotone = levels.windows(2).all(|w| {
        w[0].tails.iter().zip(&w[1].tails).all(|(a, b)| {
            let slack = MONOTONE_SE * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            b.probability <= a.probability + slack
        })
    });
    let stabilized = match samples.as_slice() {
        [.., (_, _, prev), (_, _, last)] => prev
            .iter()
            .zip(last)
            .all(|(a, b)| (a - b).abs() <= STABLE_TOL * (1.0 + a.abs())),
        _ => true,
    };
    let divergent = match levels.as_slice() {
        [.., prev, last] => last.denominator > prev.denominator,
        _ => false,
    };
    let vacuous = levels.last().map_or(true, |l| l.denominator == 1.0);
    LlnReport {
        kind,
        n_paths,
        seed,
        levels,
        divergent,
        monotone,
        stabilized,
        vacuous,
    }
}

/// Empirical `P(|M^n_T / L^n_T| > δ)` for `n = 1, 2, 4, …`.
pub fn lln_truncation_test(design: &TruncationDesign, n_levels: usize, n_paths: usize, seed: u64) -> Result<LlnReport> {
    let model = &design.driver;
    let bundle = simulate(model, n_paths, seed)?;
    let q = design.q();
    let da = model.grid().delta_a();
    let samples = levels(n_levels)
        .into_iter()
        .map(|n| {
            let hn: Vec<DVector<f64>> = design
                .h
                .iter()
                .map(|h| if h.norm() <= n as f64 { h.clone() } else { DVector::zeros(h.len()) })
                .collect();
            let terms: Vec<f64> = hn
                .iter()
                .zip(&q)
                .zip(da)
                .map(|((h, q), a)| h.dot(&(q * h)) * a)
                .collect();
            let l = 1.0 + pairwise_sum(&terms);
            let ratios: Vec<f64> = (0..n_paths)
                .into_par_iter()
                .map(|p| {
                    let m: f64 = hn
                        .iter()
                        .enumerate()
                        .map(|(s, h)| h.iter().zip(bundle.delta_s(p, s)).map(|(a, b)| a * b).sum::<f64>())
                        .sum();
                    m / l
                })
                .collect();
            (n, l, ratios)
        })
        .collect();
    Ok(assemble(LlnKind::Truncation, n_paths, seed, samples))
}

/// Empirical `P(|N^n_T / R^n_T − 1| > δ)` for `n = 1, 2, 4, …`.
/// With no compensator mass the ratio is `0/1` and the report is `vacuous`.
pub fn lln_counting_test(design: &CountingDesign, n_levels: usize, n_paths: usize, seed: u64) -> Result<LlnReport> {
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    let steps = design.increments.len();
    let counts: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            (0..steps)
                .map(|m| {
                    let mut rng = rng::step_rng(seed, domain::COUNTING, p as u64, m as u64);
                    rng::poisson(&mut rng, design.increments[m]) as f64
                })
                .collect()
        })
        .collect();
    let samples = levels(n_levels)
        .into_iter()
        .map(|n| {
            let active: Vec<bool> = design.g.iter().map(|&g| g <= n as f64).collect();
            let comp: Vec<f64> = design
                .increments
                .iter()
                .zip(&active)
                .map(|(&x, &on)| if on { x } else { 0.0 })
                .collect();
            let r = 1.0 + pairwise_sum(&comp);
            let dev: Vec<f64> = counts
                .iter()
                .map(|c| {
                    let n_t: f64 = c.iter().zip(&active).filter(|(_, &on)| on).map(|(x, _)| x).sum();
                    n_t / r - 1.0
                })
                .collect();
            (n, r, dev)
        })
        .collect();
    Ok(assemble(LlnKind::Counting, n_paths, seed, samples))
}
