//! Null investments and immediate-arbitrage directions per step.
//!
//! A direction `v` is *null* when it has no jump, diffusion or drift exposure,
//! and an *immediate arbitrage* when it never loses on a jump
//! (`v·xᵢ ≥ 0`), carries no diffusion (`cv = 0`), has net drift
//! `v·b ≥ K(v·x)`, and is not null. Detection is two linear programs over the
//! box `|v|∞ ≤ 1`:
//!
//! * LP-A maximizes the net drift `v·b − Σ kᵢ v·xᵢ`,
//! * LP-B maximizes the expected jump gain `Σ kᵢ v·xᵢ`,
//!
//! both under the cone constraints above. The set is nonempty iff either
//! optimum is strictly positive.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{kernel_split, range_basis};
use crate::model::{LocalTriplet, MarketModel};

/// Optimal slack at or below this is treated as zero.
pub const SLACK_TOL: f64 = 1e-9;
/// Tolerance for certificate membership checks.
pub const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArbitrageVerdict {
    Clean,
    ImmediateArbitrage,
    /// The LP backend failed or returned a point that does not verify.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageCheck {
    pub verdict: ArbitrageVerdict,
    pub certificate: Option<DVector<f64>>,
    /// Best of the two LP optima.
    pub slack: f64,
    pub detail: Option<String>,
}

/// Orthonormal basis (columns) of `N = {v : v·xᵢ = 0 ∀i, cv = 0, v·b = 0}`.
pub fn null_investments(triplet: &LocalTriplet) -> DMatrix<f64> {
    null_split(triplet).0
}

/// `(N, N⊥)` as column bases.
pub fn null_split(triplet: &LocalTriplet) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = triplet.dimension();
    let mut rows: Vec<DVector<f64>> = triplet.levy().atoms().iter().map(|a| a.x.clone()).collect();
    for i in 0..d {
        rows.push(triplet.c().row(i).transpose());
    }
    rows.push(triplet.b().clone());
    kernel_split(&rows, d)
}

/// Membership predicate for the immediate-arbitrage set, with tolerance.
pub fn is_immediate_arbitrage(triplet: &LocalTriplet, v: &DVector<f64>, tol: f64) -> bool {
    let atoms = triplet.levy().atoms();
    if atoms.iter().any(|a| v.dot(&a.x) < -tol) {
        return false;
    }
    if (triplet.c() * v).amax() > tol {
        return false;
    }
    let drift = v.dot(triplet.b());
    let jump_mean: f64 = atoms.iter().map(|a| a.k * v.dot(&a.x)).sum();
    if drift < jump_mean - tol {
        return false;
    }
    drift > tol || atoms.iter().any(|a| v.dot(&a.x) > tol)
}

enum LpOutcome {
    Optimum { value: f64, v: DVector<f64> },
    Failed(String),
}

fn solve_direction_lp(triplet: &LocalTriplet, range_c: &DMatrix<f64>, objective: &DVector<f64>) -> LpOutcome {
    let d = triplet.dimension();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..d).map(|j| problem.add_var(objective[j], (-1.0, 1.0))).collect();
    let row = |coef: &DVector<f64>| -> Vec<(minilp::Variable, f64)> {
        vars.iter().zip(coef.iter()).map(|(&v, &c)| (v, c)).collect()
    };
    for a in triplet.levy().atoms() {
        problem.add_constraint(row(&a.x).as_slice(), ComparisonOp::Ge, 0.0);
    }
    for j in 0..range_c.ncols() {
        let u = range_c.column(j).into_owned();
        problem.add_constraint(row(&u).as_slice(), ComparisonOp::Eq, 0.0);
    }
    let net_drift = triplet.b() - triplet.levy().first_moment(d);
    problem.add_constraint(row(&net_drift).as_slice(), ComparisonOp::Ge, 0.0);
    match problem.solve() {
        Ok(sol) => {
            let v = DVector::from_iterator(d, vars.iter().map(|&x| sol[x]));
            LpOutcome::Optimum {
                value: objective.dot(&v),
                v,
            }
        }
        Err(e) => LpOutcome::Failed(e.to_string()),
    }
}

pub fn detect_immediate_arbitrage(triplet: &LocalTriplet) -> ArbitrageCheck {
    let d = triplet.dimension();
    if triplet.is_degenerate() {
        return ArbitrageCheck {
            verdict: ArbitrageVerdict::Clean,
            certificate: None,
            slack: 0.0,
            detail: None,
        };
    }
    let range_c = range_basis(triplet.c());
    let jump_mean = triplet.levy().first_moment(d);
    let net_drift = triplet.b() - &jump_mean;

    let mut best: Option<(f64, DVector<f64>)> = None;
    for objective in [&net_drift, &jump_mean] {
        match solve_direction_lp(triplet, &range_c, objective) {
            LpOutcome::Optimum { value, v } => {
                if best.as_ref().map_or(true, |(s, _)| value > *s) {
                    best = Some((value, v));
                }
            }
            LpOutcome::Failed(msg) => {
                // v = 0 is always feasible, so a failure is numerical.
                return ArbitrageCheck {
                    verdict: ArbitrageVerdict::Indeterminate,
                    certificate: None,
                    slack: f64::NAN,
                    detail: Some(format!("LP failure: {msg}")),
                };
            }
        }
    }
    let (slack, v) = best.expect("two LPs solved");
    if slack <= SLACK_TOL {
        return ArbitrageCheck {
            verdict: ArbitrageVerdict::Clean,
            certificate: None,
            slack: slack.max(0.0),
            detail: None,
        };
    }
    if is_immediate_arbitrage(triplet, &v, CERTIFICATE_TOL) {
        ArbitrageCheck {
            verdict: ArbitrageVerdict::ImmediateArbitrage,
            certificate: Some(v),
            slack,
            detail: None,
        }
    } else {
        ArbitrageCheck {
            verdict: ArbitrageVerdict::Indeterminate,
            certificate: Some(v),
            slack,
            detail: Some("LP optimizer failed certificate verification".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepArbitrage {
    pub step: usize,
    pub null_basis: Vec<Vec<f64>>,
    pub verdict: ArbitrageVerdict,
    pub certificate: Option<Vec<f64>>,
    pub slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageReport {
    pub verdict: ArbitrageVerdict,
    /// Steps carrying an immediate-arbitrage certificate.
    pub arbitrage_steps: Vec<usize>,
    pub indeterminate_steps: Vec<usize>,
    pub steps: Vec<StepArbitrage>,
}

/// Scans every step. Clean overall iff every step is clean; any
/// arbitrage step dominates, otherwise any indeterminate step does.
pub fn scan_model(model: &MarketModel) -> ArbitrageReport {
    let steps: Vec<StepArbitrage> = model
        .triplets()
        .par_iter()
        .enumerate()
        .map(|(m, t)| {
            let basis = null_investments(t);
            let check = detect_immediate_arbitrage(t);
            StepArbitrage {
                step: m,
                null_basis: (0..basis.ncols())
                    .map(|j| basis.column(j).iter().cloned().collect())
                    .collect(),
                verdict: check.verdict,
                certificate: check.certificate.map(|v| v.iter().cloned().collect()),
                slack: check.slack,
                detail: check.detail,
            }
        })
        .collect();
    let arbitrage_steps: Vec<usize> = steps
        .iter()
        .filter(|s| s.verdict == ArbitrageVerdict::ImmediateArbitrage)
        .map(|s| s.step)
        .collect();
    let indeterminate_steps: Vec<usize> = steps
        .iter()
        .filter(|s| s.verdict == ArbitrageVerdict::Indeterminate)
        .map(|s| s.step)
        .collect();
    let verdict = if !arbitrage_steps.is_empty() {
        ArbitrageVerdict::ImmediateArbitrage
    } else if !indeterminate_steps.is_empty() {
        ArbitrageVerdict::Indeterminate
    } else {
        ArbitrageVerdict::Clean
    };
    ArbitrageReport {
        verdict,
        arbitrage_steps,
        indeterminate_steps,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, ClockGrid, LevyAtomMeasure};

    fn triplet(b: &[f64], c: &[f64], atoms: &[(&[f64], f64)]) -> LocalTriplet {
        let d = b.len();
        let levy = LevyAtomMeasure::new(atoms.iter().map(|(x, k)| Atom::new(x.to_vec(), *k)).collect()).unwrap();
        LocalTriplet::new(DVector::from_column_slice(b), DMatrix::from_row_slice(d, d, c), levy).unwrap()
    }

    #[test]
    fn null_space_examples() {
        let t = triplet(&[0.1, 0.0], &[0.04, 0.0, 0.0, 0.0], &[(&[0.5, 0.0], 1.0), (&[-0.3, 0.0], 2.0)]);
        let n = null_investments(&t);
        assert_eq!(n.ncols(), 1);
        assert!((n[(0, 0)]).abs() < 1e-12);
        assert!((n[(1, 0)].abs() - 1.0).abs() < 1e-12);

        let merton = LocalTriplet::scalar(0.05, 0.04, &[]).unwrap();
        assert_eq!(null_investments(&merton).ncols(), 0);

        assert_eq!(null_investments(&LocalTriplet::zero(3)).ncols(), 3);
    }

    #[test]
    fn designed_arbitrage_is_flagged() {
        let t = LocalTriplet::scalar(1.0, 0.0, &[(1.0, 0.5)]).unwrap();
        let check = detect_immediate_arbitrage(&t);
        assert_eq!(check.verdict, ArbitrageVerdict::ImmediateArbitrage);
        let v = check.certificate.unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(check.slack > 0.49);
    }

    #[test]
    fn diffusion_or_two_sided_jumps_are_clean() {
        let merton = LocalTriplet::scalar(0.05, 0.04, &[]).unwrap();
        assert_eq!(detect_immediate_arbitrage(&merton).verdict, ArbitrageVerdict::Clean);
        let two_sided = LocalTriplet::scalar(0.1, 0.0, &[(0.5, 1.0), (-0.5, 1.0)]).unwrap();
        assert_eq!(detect_immediate_arbitrage(&two_sided).verdict, ArbitrageVerdict::Clean);
    }

    #[test]
    fn pure_drift_without_risk_is_arbitrage() {
        let t = LocalTriplet::scalar(-0.3, 0.0, &[]).unwrap();
        let check = detect_immediate_arbitrage(&t);
        assert_eq!(check.verdict, ArbitrageVerdict::ImmediateArbitrage);
        assert!((check.certificate.unwrap()[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_jumps_with_compensating_drift_only() {
        // v·b = K(vx) exactly: no net drift, but jumps are one-sided, so v ∉ N.
        let t = LocalTriplet::scalar(0.5, 0.0, &[(1.0, 0.5)]).unwrap();
        assert_eq!(detect_immediate_arbitrage(&t).verdict, ArbitrageVerdict::ImmediateArbitrage);
        // Drift below the jump compensator: shorting loses on jumps, going long
        // loses on drift.
        let t = LocalTriplet::scalar(0.4, 0.0, &[(1.0, 0.5)]).unwrap();
        assert_eq!(detect_immediate_arbitrage(&t).verdict, ArbitrageVerdict::Clean);
    }

    #[test]
    fn scan_names_the_arbitrage_step() {
        let clean = LocalTriplet::scalar(0.05, 0.04, &[]).unwrap();
        let arb = LocalTriplet::scalar(1.0, 0.0, &[(1.0, 0.5)]).unwrap();
        let grid = ClockGrid::uniform(3, 1.0, 0.9).unwrap();
        let model = MarketModel::new(1, grid, vec![clean.clone(), arb, clean.clone()]).unwrap();
        let report = scan_model(&model);
        assert_eq!(report.verdict, ArbitrageVerdict::ImmediateArbitrage);
        assert_eq!(report.arbitrage_steps, vec![1]);

        let ok = MarketModel::new(1, ClockGrid::uniform(2, 1.0, 1.0).unwrap(), vec![clean.clone(), clean]).unwrap();
        assert_eq!(scan_model(&ok).verdict, ArbitrageVerdict::Clean);

        let empty = MarketModel::new(1, ClockGrid::new(vec![], vec![], vec![]).unwrap(), vec![]).unwrap();
        assert_eq!(scan_model(&empty).verdict, ArbitrageVerdict::Clean);
    }
}
