//! Discrete-path stochastic exponentials and logarithms.
//!
//! Per step, the continuous part of an increment enters as
//! `exp(gauss + drift − ½ qv)` and each jump multiplicatively as `(1 + j)`.
//! With this convention the exponential/logarithm pair, the reciprocal
//! formula and the ratio identity `E(f·S)/E(g·S) = E((f−g)·S^g)` hold
//! exactly up to floating-point rounding.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::quantile;

/// One step of a scalar semimartingale `R`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepIncrement {
    /// Continuous-martingale increment.
    pub cont_gauss: f64,
    /// Its quadratic variation over the step (≥ 0).
    pub cont_qv: f64,
    /// Finite-variation continuous increment.
    pub drift: f64,
    /// Realized jumps, each `> −1` for paths fed to exponentials.
    pub jumps: Vec<f64>,
}

impl StepIncrement {
    pub fn jump(j: f64) -> Self {
        StepIncrement {
            jumps: vec![j],
            ..Default::default()
        }
    }

    /// `ΔR` for the step.
    pub fn total(&self) -> f64 {
        self.cont_gauss + self.drift + self.jumps.iter().sum::<f64>()
    }

    pub fn is_pure_jump(&self) -> bool {
        self.cont_gauss == 0.0 && self.cont_qv == 0.0 && self.drift == 0.0
    }

    fn check_jumps(&self, step: usize) -> Result<()> {
        match self.jumps.iter().find(|&&j| !(j > -1.0)) {
            Some(&j) => Err(Error::Inadmissible {
                path: 0,
                step,
                margin: 1.0 + j,
            }),
            None => Ok(()),
        }
    }

    /// `log` of the step's multiplicative factor.
    pub fn log_factor(&self) -> f64 {
        self.cont_gauss + self.drift - 0.5 * self.cont_qv + self.jumps.iter().map(|j| j.ln_1p()).sum::<f64>()
    }

    pub fn factor(&self) -> f64 {
        (self.cont_gauss + self.drift - 0.5 * self.cont_qv).exp() * self.jumps.iter().map(|j| 1.0 + j).product::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IncrementPath {
    pub steps: Vec<StepIncrement>,
}

impl IncrementPath {
    pub fn new(steps: Vec<StepIncrement>) -> Self {
        IncrementPath { steps }
    }

    pub fn zeros(n: usize) -> Self {
        IncrementPath {
            steps: vec![StepIncrement::default(); n],
        }
    }

    pub fn pure_jump(jumps: &[f64]) -> Self {
        IncrementPath {
            steps: jumps.iter().map(|&j| StepIncrement::jump(j)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Running values `R_0 = 0, R_1, …, R_M`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut r = 0.0;
        out.push(r);
        for s in &self.steps {
            r += s.total();
            out.push(r);
        }
        out
    }

    pub fn quadratic_variation_cont(&self) -> f64 {
        self.steps.iter().map(|s| s.cont_qv).sum()
    }
}

/// `E(R)_0 = 1, …, E(R)_M`.
pub fn stoch_exp(path: &IncrementPath) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(path.len() + 1);
    let mut w = 1.0;
    out.push(w);
    for (m, s) in path.steps.iter().enumerate() {
        s.check_jumps(m)?;
        w *= s.factor();
        out.push(w);
    }
    Ok(out)
}

/// `log E(R)_M`, summed in log space.
pub fn log_stoch_exp_terminal(path: &IncrementPath) -> Result<f64> {
    let mut acc = 0.0;
    for (m, s) in path.steps.iter().enumerate() {
        s.check_jumps(m)?;
        acc += s.log_factor();
    }
    Ok(acc)
}

/// Discrete stochastic logarithm: `ΔR_m = W_m / W_{m−1} − 1`, returned as
/// pure jumps.
pub fn stoch_log(wealth: &[f64]) -> Result<IncrementPath> {
    match wealth.first() {
        None => return Err(Error::Precondition("empty wealth path".into())),
        Some(&w0) if w0 != 1.0 => return Err(Error::Precondition(format!("wealth must start at 1, got {w0}"))),
        _ => {}
    }
    if let Some((m, &w)) = wealth.iter().enumerate().find(|(_, &w)| !(w > 0.0)) {
        return Err(Error::Precondition(format!("nonpositive wealth {w} at index {m}")));
    }
    Ok(IncrementPath {
        steps: wealth
            .windows(2)
            .map(|w| StepIncrement::jump(w[1] / w[0] - 1.0))
            .collect(),
    })
}

/// `Z = L(1/E(R))`: jumps `−ΔR/(1+ΔR)`, continuous part negated with its
/// quadratic variation added to the drift.
pub fn reciprocal_log(path: &IncrementPath) -> Result<IncrementPath> {
    path.steps
        .iter()
        .enumerate()
        .map(|(m, s)| {
            s.check_jumps(m)?;
            Ok(StepIncrement {
                cont_gauss: -s.cont_gauss,
                cont_qv: s.cont_qv,
                drift: -s.drift + s.cont_qv,
                jumps: s.jumps.iter().map(|&j| -j / (1.0 + j)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(IncrementPath::new)
}

/// Realized vector price increments over one step, split by component.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceStep {
    /// Continuous martingale part `σ ξ √ΔA`.
    pub gauss: DVector<f64>,
    /// Quadratic variation `c ΔA` of the continuous part.
    pub qv: DMatrix<f64>,
    /// Continuous finite-variation part.
    pub drift: DVector<f64>,
    pub jumps: Vec<DVector<f64>>,
}

impl PriceStep {
    pub fn delta_s(&self) -> DVector<f64> {
        self.jumps.iter().fold(&self.gauss + &self.drift, |acc, j| acc + j)
    }
}

pub type PricePath = Vec<PriceStep>;

/// Increments of the scalar integral `f·S` along a price path.
pub fn strategy_increments(f: &[DVector<f64>], path: &[PriceStep]) -> Result<IncrementPath> {
    if f.len() != path.len() {
        return Err(Error::DimensionMismatch {
            step: None,
            expected: path.len(),
            found: f.len(),
        });
    }
    Ok(IncrementPath {
        steps: f
            .iter()
            .zip(path)
            .map(|(w, p)| StepIncrement {
                cont_gauss: w.dot(&p.gauss),
                cont_qv: w.dot(&(&p.qv * w)),
                drift: w.dot(&p.drift),
                jumps: p.jumps.iter().map(|x| w.dot(x)).collect(),
            })
            .collect(),
    })
}

/// Price path of `S^g`: drift reduced by `(c g) ΔA`, jumps mapped to
/// `x/(1 + g·x)`, continuous martingale part unchanged.
pub fn numeraire_path(g: &[DVector<f64>], path: &[PriceStep]) -> Result<PricePath> {
    g.iter()
        .zip(path)
        .enumerate()
        .map(|(m, (w, p))| {
            let jumps = p
                .jumps
                .iter()
                .map(|x| {
                    let denom = 1.0 + w.dot(x);
                    if denom > 0.0 {
                        Ok(x / denom)
                    } else {
                        Err(Error::Inadmissible { path: 0, step: m, margin: denom })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PriceStep {
                gauss: p.gauss.clone(),
                qv: p.qv.clone(),
                drift: &p.drift - &p.qv * w,
                jumps,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCheck {
    /// `E(f·S)/E(g·S)` at each time.
    pub lhs: Vec<f64>,
    /// `E((f−g)·S^g)` at each time.
    pub rhs: Vec<f64>,
    pub max_rel_error: f64,
    /// `max |E(−g·S^g)·E(g·S) − 1|`.
    pub reciprocal_error: f64,
    pub pure_jump: bool,
    pub tolerance: f64,
    pub passed: bool,
}

pub const PURE_JUMP_TOL: f64 = 1e-12;
pub const MIXED_TOL: f64 = 1e-10;

/// Evaluates both sides of the ratio identity on one realized path.
pub fn ratio_transform_check(f: &[DVector<f64>], g: &[DVector<f64>], path: &[PriceStep]) -> Result<RatioCheck> {
    let fs = strategy_increments(f, path)?;
    let gs = strategy_increments(g, path)?;
    let wf = stoch_exp(&fs)?;
    let wg = stoch_exp(&gs)?;
    let sg = numeraire_path(g, path)?;
    let diff: Vec<DVector<f64>> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    let rhs = stoch_exp(&strategy_increments(&diff, &sg)?)?;
    let neg_g: Vec<DVector<f64>> = g.iter().map(|w| -w).collect();
    let inv = stoch_exp(&strategy_increments(&neg_g, &sg)?)?;

    let lhs: Vec<f64> = wf.iter().zip(&wg).map(|(a, b)| a / b).collect();
    let max_rel_error = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| ((l - r) / l.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max);
    let reciprocal_error = inv.iter().zip(&wg).map(|(a, b)| (a * b - 1.0).abs()).fold(0.0, f64::max);
    let pure_jump = path
        .iter()
        .all(|p| p.gauss.iter().chain(p.drift.iter()).chain(p.qv.iter()).all(|&v| v == 0.0));
    let tolerance = if pure_jump { PURE_JUMP_TOL } else { MIXED_TOL };
    Ok(RatioCheck {
        passed: max_rel_error <= tolerance && reciprocal_error <= tolerance,
        lhs,
        rhs,
        max_rel_error,
        reciprocal_error,
        pure_jump,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailQuantiles {
    pub q99: f64,
    pub q999: f64,
}

impl TailQuantiles {
    fn of(values: &[f64]) -> Self {
        TailQuantiles {
            q99: quantile(values, 0.99),
            q999: quantile(values, 0.999),
        }
    }
}

/// Upper-tail quantiles, across a sample of paths, of the quantities whose
/// boundedness in probability is linked by the equivalence chain
/// `(a) ⇔ (a′) ⇔ (a″) ⇔ (b) ⇔ (c) ⇒ (d) ⇔ (d′)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessStats {
    pub n_paths: usize,
    /// (a) `sup_t |R_t|`
    pub sup_abs_r: TailQuantiles,
    /// (a′) `sup_t R_t`
    pub sup_r: TailQuantiles,
    /// (a″) `|R_T|`
    pub abs_terminal_r: TailQuantiles,
    /// (b) `E(R)_T`
    pub terminal_exp: TailQuantiles,
    /// (c) `sup_t E(R)_t`
    pub sup_exp: TailQuantiles,
    /// (d) `sup_t |Z_t|` with `Z = L(1/E(R))`
    pub sup_abs_z: TailQuantiles,
    /// (d′) `−inf_t Z_t`
    pub neg_inf_z: TailQuantiles,
    /// `½⟨R^c⟩_T + Σ (log(1+ΔR) − ΔR/(1+ΔR))`
    pub gamma1: TailQuantiles,
    /// `⟨R^c⟩_T + Σ (ΔR)²/(1+ΔR)`
    pub gamma2: TailQuantiles,
}

struct PathSummary {
    sup_abs_r: f64,
    sup_r: f64,
    abs_terminal_r: f64,
    terminal_exp: f64,
    sup_exp: f64,
    sup_abs_z: f64,
    neg_inf_z: f64,
    gamma1: f64,
    gamma2: f64,
}

fn summarize_path(path: &IncrementPath) -> Result<PathSummary> {
    let z = reciprocal_log(path)?;
    let mut r = 0.0_f64;
    let mut zr = 0.0_f64;
    let mut log_e = 0.0_f64;
    let (mut sup_abs_r, mut sup_r) = (0.0_f64, 0.0_f64);
    let mut sup_exp = 1.0_f64;
    let (mut sup_abs_z, mut inf_z) = (0.0_f64, 0.0_f64);
    let (mut gamma1, mut gamma2) = (0.0, 0.0);
    for (s, sz) in path.steps.iter().zip(&z.steps) {
        r += s.total();
        zr += sz.total();
        log_e += s.log_factor();
        sup_abs_r = sup_abs_r.max(r.abs());
        sup_r = sup_r.max(r);
        sup_exp = sup_exp.max(log_e.exp());
        sup_abs_z = sup_abs_z.max(zr.abs());
        inf_z = inf_z.min(zr);
        gamma1 += 0.5 * s.cont_qv;
        gamma2 += s.cont_qv;
        for &j in &s.jumps {
            gamma1 += j.ln_1p() - j / (1.0 + j);
            gamma2 += j * j / (1.0 + j);
        }
    }
    Ok(PathSummary {
        sup_abs_r,
        sup_r,
        abs_terminal_r: r.abs(),
        terminal_exp: log_e.exp(),
        sup_exp,
        sup_abs_z,
        neg_inf_z: -inf_z,
        gamma1,
        gamma2,
    })
}

pub fn boundedness_stats(sample: &[IncrementPath]) -> Result<BoundednessStats> {
    if sample.is_empty() {
        return Err(Error::Precondition("empty sample".into()));
    }
    let summaries = sample.iter().map(summarize_path).collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&PathSummary) -> f64| -> TailQuantiles {
        TailQuantiles::of(&summaries.iter().map(f).collect::<Vec<_>>())
    };
    Ok(BoundednessStats {
        n_paths: sample.len(),
        sup_abs_r: col(|s| s.sup_abs_r),
        sup_r: col(|s| s.sup_r),
        abs_terminal_r: col(|s| s.abs_terminal_r),
        terminal_exp: col(|s| s.terminal_exp),
        sup_exp: col(|s| s.sup_exp),
        sup_abs_z: col(|s| s.sup_abs_z),
        neg_inf_z: col(|s| s.neg_inf_z),
        gamma1: col(|s| s.gamma1),
        gamma2: col(|s| s.gamma2),
    })
}

/// Tail growth factor from first to last family member beyond which a
/// quantity is flagged as exploding.
pub const EXPLOSION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostic {
    pub a: bool,
    pub a_prime: bool,
    pub a_double_prime: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
    pub d_prime: bool,
    pub gamma1: bool,
    pub gamma2: bool,
    /// The flags co-move as the equivalence chain requires.
    pub consistent: bool,
}

fn explodes(first: f64, last: f64) -> bool {
    last > EXPLOSION_FACTOR * first.abs().max(1.0)
}

/// Flags which quantities explode (in their 99% tail quantile) across an
/// indexed family of samples, and whether the flags co-move as the chain
/// demands. `true` means "exploding", i.e. not bounded in probability.
pub fn chain_diagnostic(family: &[BoundednessStats]) -> Option<ChainDiagnostic> {
    let (first, last) = (family.first()?, family.last()?);
    let flag = |f: fn(&BoundednessStats) -> TailQuantiles| explodes(f(first).q99, f(last).q99);
    let a = flag(|s| s.sup_abs_r);
    let a_prime = flag(|s| s.sup_r);
    let a_double_prime = flag(|s| s.abs_terminal_r);
    let b = flag(|s| s.terminal_exp);
    let c = flag(|s| s.sup_exp);
    let d = flag(|s| s.sup_abs_z);
    let d_prime = flag(|s| s.neg_inf_z);
    let gamma1 = flag(|s| s.gamma1);
    let gamma2 = flag(|s| s.gamma2);
    let upper = [a, a_prime, a_double_prime, b, c];
    let consistent = upper.iter().all(|&x| x == a) && d == d_prime && (c || !d) && gamma1 == gamma2;
    Some(ChainDiagnostic {
        a,
        a_prime,
        a_double_prime,
        b,
        c,
        d,
        d_prime,
        gamma1,
        gamma2,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_jump_product() {
        let w = stoch_exp(&IncrementPath::pure_jump(&[0.1, -0.2])).unwrap();
        assert!((w[2] - 0.88).abs() < 1e-15);
    }

    #[test]
    fn zero_path_stays_at_one() {
        assert_eq!(stoch_exp(&IncrementPath::zeros(5)).unwrap(), vec![1.0; 6]);
    }

    #[test]
    fn continuous_step() {
        let p = IncrementPath::new(vec![StepIncrement {
            cont_gauss: 0.3,
            cont_qv: 0.09,
            ..Default::default()
        }]);
        assert!((stoch_exp(&p).unwrap()[1] - 0.255_f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn jump_at_minus_one_is_rejected() {
        assert!(stoch_exp(&IncrementPath::pure_jump(&[0.1, -1.0])).is_err());
        assert!(reciprocal_log(&IncrementPath::pure_jump(&[-1.5])).is_err());
    }

    #[test]
    fn log_examples() {
        let r = stoch_log(&[1.0, 1.1, 0.88]).unwrap();
        let totals: Vec<f64> = r.steps.iter().map(|s| s.total()).collect();
        assert!((totals[0] - 0.1).abs() < 1e-15);
        assert!((totals[1] + 0.2).abs() < 1e-15);
        assert!(stoch_log(&[1.0; 4]).unwrap().steps.iter().all(|s| s.total() == 0.0));
        assert!(stoch_log(&[1.0, 0.0]).is_err());
        assert!(stoch_log(&[2.0, 1.0]).is_err());
    }

    #[test]
    fn reciprocal_examples() {
        let z = reciprocal_log(&IncrementPath::pure_jump(&[0.1])).unwrap();
        assert!((z.steps[0].jumps[0] + 1.0 / 11.0).abs() < 1e-16);
        let prod = stoch_exp(&IncrementPath::pure_jump(&[0.1])).unwrap()[1] * stoch_exp(&z).unwrap()[1];
        assert!((prod - 1.0).abs() < 1e-15);
        assert_eq!(reciprocal_log(&IncrementPath::zeros(3)).unwrap(), IncrementPath::zeros(3));
    }

    fn scalar_jump_path(jumps: &[f64]) -> PricePath {
        jumps
            .iter()
            .map(|&j| PriceStep {
                gauss: DVector::zeros(1),
                qv: DMatrix::zeros(1, 1),
                drift: DVector::zeros(1),
                jumps: vec![DVector::from_element(1, j)],
            })
            .collect()
    }

    #[test]
    fn ratio_one_step_arithmetic() {
        let path = scalar_jump_path(&[0.2]);
        let f = vec![DVector::from_element(1, 1.0)];
        let g = vec![DVector::from_element(1, 0.5)];
        let check = ratio_transform_check(&f, &g, &path).unwrap();
        assert!((check.lhs[1] - 1.2 / 1.1).abs() < 1e-15);
        assert!((check.rhs[1] - (1.0 + 0.5 * (0.2 / 1.1))).abs() < 1e-15);
        assert!(check.passed && check.pure_jump);
    }

    #[test]
    fn ratio_with_equal_strategies_is_one() {
        let path = scalar_jump_path(&[0.2, -0.3, 0.05]);
        let g = vec![DVector::from_element(1, 0.7); 3];
        let check = ratio_transform_check(&g, &g, &path).unwrap();
        assert!(check.lhs.iter().all(|&v| v == 1.0));
        assert!(check.rhs.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_paths_have_deterministic_stats() {
        let sample = vec![IncrementPath::zeros(4); 10];
        let s = boundedness_stats(&sample).unwrap();
        assert_eq!(s.sup_abs_r.q999, 0.0);
        assert_eq!(s.terminal_exp.q99, 1.0);
        assert_eq!(s.sup_exp.q999, 1.0);
        assert_eq!(s.sup_abs_z.q99, 0.0);
        assert_eq!(s.neg_inf_z.q99, 0.0);
        assert!(boundedness_stats(&[]).is_err());
    }
}
