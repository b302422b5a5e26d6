//! Equivalent measure changes on finite-atom jump measures.
//!
//! A density reweights atom intensities `kᵢ ↦ kᵢYᵢ`, which moves the
//! untruncated drift to `b + Σ kᵢ(Yᵢ − 1)xᵢ`. The per-step problem finds the
//! cheapest `Y` in total variation `Σ kᵢ|Yᵢ − 1|` that removes the drift.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::growthopt::transform_model;
use crate::linalg::{kernel_split, pairwise_sum};
use crate::mc::deflator::{deflator_run, DeflatorRun};
use crate::mc::PathBundle;
use crate::model::{LocalTriplet, MarketModel, Portfolio, StepKind};

/// Lower bound on density values.
pub const Y_MIN: f64 = 1e-6;
/// Drift and neutrality residual accepted for a feasible density.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Slack when comparing the optimal cost with the budget.
pub const BUDGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityStatus {
    Feasible,
    InfeasibleWithinBudget,
    Indeterminate,
    StructurallyInfeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDensity {
    pub y: Vec<f64>,
    pub tv_cost: f64,
    pub status: DensityStatus,
    /// `b + Σ kᵢ(Yᵢ − 1)xᵢ` for the returned `y` (or `b` when no density exists).
    pub residual_drift: Vec<f64>,
    /// Part of the constraint right-hand side outside the span of the atoms.
    pub unspanned: Option<Vec<f64>>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySolution {
    pub epsilon: f64,
    pub status: DensityStatus,
    /// Steps whose status is not `feasible`.
    pub failing_steps: Vec<usize>,
    /// Largest per-step cost; the per-step budget is `ε/2`.
    pub max_step_cost: f64,
    /// `Σ ΔA_m · tv_cost_m`.
    pub integrated_cost: f64,
    pub steps: Vec<StepDensity>,
}

impl DensitySolution {
    pub fn densities(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.y.clone()).collect()
    }
}

fn residual(triplet: &LocalTriplet, y: &[f64]) -> DVector<f64> {
    let mut r = triplet.b().clone();
    for (a, yi) in triplet.levy().atoms().iter().zip(y) {
        r += &a.x * (a.k * (yi - 1.0));
    }
    r
}

fn neutrality(triplet: &LocalTriplet, y: &[f64]) -> f64 {
    let terms: Vec<f64> = triplet.levy().atoms().iter().zip(y).map(|(a, yi)| a.k * (yi - 1.0)).collect();
    pairwise_sum(&terms)
}

fn tv_cost(triplet: &LocalTriplet, y: &[f64]) -> f64 {
    let terms: Vec<f64> = triplet.levy().atoms().iter().zip(y).map(|(a, yi)| a.k * (yi - 1.0).abs()).collect();
    pairwise_sum(&terms)
}

fn infeasible(triplet: &LocalTriplet, status: DensityStatus, unspanned: Option<Vec<f64>>, detail: String) -> StepDensity {
    StepDensity {
        y: vec![1.0; triplet.levy().len()],
        tv_cost: 0.0,
        status,
        residual_drift: triplet.b().iter().copied().collect(),
        unspanned,
        detail: Some(detail),
    }
}

/// Cheapest drift-removing density for one step against the budget `ε/2`.
pub fn sigma_density_step(triplet: &LocalTriplet, kind: StepKind, epsilon: f64) -> Result<StepDensity> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let atoms = triplet.levy().atoms();
    let n = atoms.len();
    let d = triplet.dimension();
    if triplet.b().amax() <= RESIDUAL_TOL {
        let y = vec![1.0; n];
        return Ok(StepDensity {
            residual_drift: residual(triplet, &y).iter().copied().collect(),
            y,
            tv_cost: 0.0,
            status: DensityStatus::Feasible,
            unspanned: None,
            detail: None,
        });
    }
    if n == 0 {
        return Ok(infeasible(
            triplet,
            DensityStatus::StructurallyInfeasible,
            Some(triplet.b().iter().copied().collect()),
            "nonzero drift and no atoms to reweight".into(),
        ));
    }

    // Equality system M·(Y − 1) = r.
    let neutral = kind == StepKind::PredictableJump;
    let rows = d + usize::from(neutral);
    let mut m = DMatrix::<f64>::zeros(rows, n);
    for (i, a) in atoms.iter().enumerate() {
        for j in 0..d {
            m[(j, i)] = a.k * a.x[j];
        }
        if neutral {
            m[(d, i)] = a.k;
        }
    }
    let mut r = DVector::<f64>::zeros(rows);
    r.rows_mut(0, d).copy_from(&(-triplet.b()));

    // Orthonormal basis of range(M): the complement of ker(Mᵀ).
    let cols: Vec<DVector<f64>> = (0..n).map(|i| m.column(i).into_owned()).collect();
    let (_, range) = kernel_split(&cols, rows);
    let unspanned = &r - &range * (range.transpose() * &r);
    if unspanned.amax() > RESIDUAL_TOL {
        return Ok(infeasible(
            triplet,
            DensityStatus::StructurallyInfeasible,
            Some(unspanned.iter().copied().collect()),
            "drift has a component outside the span of the atoms".into(),
        ));
    }
    let reduced = range.transpose() * &m;
    let rhs = range.transpose() * &r;

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let p: Vec<_> = atoms.iter().map(|a| problem.add_var(a.k, (0.0, f64::INFINITY))).collect();
    let q: Vec<_> = atoms.iter().map(|a| problem.add_var(a.k, (0.0, 1.0 - Y_MIN))).collect();
    for row in 0..reduced.nrows() {
        let mut expr = Vec::with_capacity(2 * n);
        for i in 0..n {
            expr.push((p[i], reduced[(row, i)]));
            expr.push((q[i], -reduced[(row, i)]));
        }
        problem.add_constraint(expr.as_slice(), ComparisonOp::Eq, rhs[row]);
    }
    let solution = match problem.solve() {
        Ok(s) => s,
        Err(minilp::Error::Infeasible) => {
            return Ok(infeasible(
                triplet,
                DensityStatus::StructurallyInfeasible,
                None,
                format!("no density with Y ≥ {Y_MIN} removes the drift"),
            ))
        }
        Err(e) => {
            return Ok(infeasible(triplet, DensityStatus::Indeterminate, None, format!("LP failure: {e}")));
        }
    };
    let y: Vec<f64> = (0..n).map(|i| 1.0 + solution[p[i]] - solution[q[i]]).collect();
    let res = residual(triplet, &y);
    let neutral_res = if neutral { neutrality(triplet, &y).abs() } else { 0.0 };
    let cost = tv_cost(triplet, &y);
    let (status, detail) = if res.amax() > RESIDUAL_TOL || neutral_res > RESIDUAL_TOL || y.iter().any(|&v| v < Y_MIN) {
        (
            DensityStatus::Indeterminate,
            Some(format!(
                "LP solution fails verification (drift residual {:e}, neutrality {:e})",
                res.amax(),
                neutral_res
            )),
        )
    } else if cost <= epsilon / 2.0 + BUDGET_TOL {
        (DensityStatus::Feasible, None)
    } else {
        (
            DensityStatus::InfeasibleWithinBudget,
            Some(format!("minimal cost {cost} exceeds budget {}", epsilon / 2.0)),
        )
    };
    Ok(StepDensity {
        y,
        tv_cost: cost,
        status,
        residual_drift: res.iter().copied().collect(),
        unspanned: None,
        detail,
    })
}

/// Per-step densities for the model expressed in units of `E(g·S)`.
pub fn sigma_change(model: &MarketModel, g: &Portfolio, epsilon: f64) -> Result<DensitySolution> {
    let transformed = transform_model(model, g)?;
    sigma_change_direct(&transformed, epsilon)
}

/// Per-step densities for the model as given (no numéraire change).
pub fn sigma_change_direct(model: &MarketModel, epsilon: f64) -> Result<DensitySolution> {
    let steps = model
        .triplets()
        .par_iter()
        .zip(model.grid().kinds().par_iter())
        .map(|(t, &kind)| sigma_density_step(t, kind, epsilon))
        .collect::<Result<Vec<_>>>()?;
    let failing_steps: Vec<usize> = steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.status != DensityStatus::Feasible)
        .map(|(m, _)| m)
        .collect();
    let status = steps.iter().map(|s| s.status).max().unwrap_or(DensityStatus::Feasible);
    let costs: Vec<f64> = steps
        .iter()
        .zip(model.grid().delta_a())
        .map(|(s, da)| s.tv_cost * da)
        .collect();
    Ok(DensitySolution {
        epsilon,
        status,
        failing_steps,
        max_step_cost: steps.iter().map(|s| s.tv_cost).fold(0.0, f64::max),
        integrated_cost: pairwise_sum(&costs),
        steps,
    })
}

/// The model under the reweighted measure: intensities `kᵢYᵢ` and drift
/// `b + Σ kᵢ(Yᵢ − 1)xᵢ`; `c` is unchanged.
pub fn reweighted_model(model: &MarketModel, densities: &[Vec<f64>]) -> Result<MarketModel> {
    if densities.len() != model.n_steps() {
        return Err(Error::DimensionMismatch {
            step: None,
            expected: model.n_steps(),
            found: densities.len(),
        });
    }
    let triplets = model
        .triplets()
        .iter()
        .zip(densities)
        .enumerate()
        .map(|(m, (t, y))| {
            if y.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Precondition(format!("density at step {m} is not strictly positive")));
            }
            let levy = t.levy().reweight(y).map_err(|e| match e {
                Error::DimensionMismatch { expected, found, .. } => Error::DimensionMismatch {
                    step: Some(m),
                    expected,
                    found,
                },
                other => other,
            })?;
            LocalTriplet::new(residual(t, y), t.c().clone(), levy)
        })
        .collect::<Result<Vec<_>>>()?;
    model.with_triplets(triplets)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltWeights {
    pub n: u64,
    /// `1 / (1 + n⁻¹ Σ|x|²)` per path.
    pub unnormalized: Vec<f64>,
    /// Normalizing constant making the sample mean 1.
    pub c_n: f64,
    pub weights: Vec<f64>,
    pub mean_abs_deviation: f64,
}

/// Weights from per-path sums of squared jump sizes.
pub fn quadratic_tilt_from_sums(sums: &[f64], n: u64) -> Result<TiltWeights> {
    if sums.is_empty() {
        return Err(Error::Precondition("no paths".into()));
    }
    if n == 0 {
        return Err(Error::Precondition("tilt level n must be at least 1".into()));
    }
    let unnormalized: Vec<f64> = sums.iter().map(|s| 1.0 / (1.0 + s / n as f64)).collect();
    let c_n = sums.len() as f64 / pairwise_sum(&unnormalized);
    let weights: Vec<f64> = unnormalized.iter().map(|w| w * c_n).collect();
    let dev: Vec<f64> = weights.iter().map(|w| (w - 1.0).abs()).collect();
    Ok(TiltWeights {
        n,
        mean_abs_deviation: pairwise_sum(&dev) / sums.len() as f64,
        unnormalized,
        c_n,
        weights,
    })
}

/// Quadratic tilt `c_n / (1 + n⁻¹ Σ_jumps |x|²)` of each simulated path.
pub fn quadratic_tilt_weights(model: &MarketModel, bundle: &PathBundle, n: u64) -> Result<TiltWeights> {
    let sq: Vec<Vec<f64>> = model
        .triplets()
        .iter()
        .map(|t| t.levy().atoms().iter().map(|a| a.x.norm_squared()).collect())
        .collect();
    let sums: Vec<f64> = (0..bundle.n_paths)
        .into_par_iter()
        .map(|p| {
            (0..bundle.n_steps)
                .map(|m| bundle.jumps(p, m).iter().map(|&i| sq[m][i as usize]).sum::<f64>())
                .sum()
        })
        .collect();
    quadratic_tilt_from_sums(&sums, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaVerification {
    /// Largest `|b^g|` of the reweighted model after the numéraire change.
    pub transformed_drift: f64,
    pub report: crate::mc::VerificationReport,
}

/// Simulates the reweighted model and runs the deflator test with numéraire
/// `g` against `strategies`. Densities must be feasible at every step.
pub fn verify_sigma_change(
    model: &MarketModel,
    g: &Portfolio,
    densities: &DensitySolution,
    strategies: &[Portfolio],
    n_paths: usize,
    seed: u64,
) -> Result<SigmaVerification> {
    verify_sigma_change_run(model, g, densities, strategies, n_paths, seed, crate::mc::deflator::DEFAULT_Z)
        .map(|(v, _)| v)
}

pub fn verify_sigma_change_run(
    model: &MarketModel,
    g: &Portfolio,
    densities: &DensitySolution,
    strategies: &[Portfolio],
    n_paths: usize,
    seed: u64,
    z: f64,
) -> Result<(SigmaVerification, DeflatorRun)> {
    if densities.status != DensityStatus::Feasible {
        return Err(Error::Precondition(format!(
            "densities are not feasible at steps {:?}",
            densities.failing_steps
        )));
    }
    let reweighted = reweighted_model(model, &densities.densities())?;
    let transformed = transform_model(&reweighted, g)?;
    let transformed_drift = transformed.triplets().iter().map(|t| t.b().amax()).fold(0.0, f64::max);
    if transformed_drift > RESIDUAL_TOL {
        return Err(Error::Precondition(format!(
            "reweighted model keeps drift {transformed_drift:e} in numéraire units"
        )));
    }
    let run = deflator_run(&reweighted, g, strategies, n_paths, seed, z)?;
    Ok((
        SigmaVerification {
            transformed_drift,
            report: run.report.clone(),
        },
        run,
    ))
}
