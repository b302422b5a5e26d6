//! Growth-optimal portfolio per step.
//!
//! Maximizes the concave log-growth rate
//!
//! ```text
//! Ψ(v) = b·v − ½ vᵀcv − Σᵢ kᵢ (v·xᵢ − log(1 + v·xᵢ)),   v ∈ D = {1 + v·xᵢ > 0}
//! ```
//!
//! on `D ∩ N⊥` by damped Newton with a fraction-to-boundary rule. The
//! optimum `v⁰` is certified by the drift functional
//! `F(v, v⁰) = (v − v⁰)·(b − cv⁰) − Σ kᵢ (v − v⁰)·xᵢ (v⁰·xᵢ)/(1 + v⁰·xᵢ)`,
//! which is `≤ 0` on `D` at a maximizer and identically zero at an interior one.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arbdetect::null_split;
use crate::error::{Error, Result};
use crate::model::{DriftConvention, LocalTriplet, MarketModel, Portfolio};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Stop once the projected gradient is this small.
    pub grad_tol: f64,
    /// Success threshold on the final projected gradient and the FOC residual.
    pub foc_tol: f64,
    /// `|v|` beyond which a still-increasing Ψ is reported as divergence.
    pub divergence_radius: f64,
    pub fraction_to_boundary: f64,
    /// Iterates keep `min_i (1 + v·xᵢ)` at least this large.
    pub boundary_margin: f64,
    pub armijo: f64,
    pub foc_samples: usize,
    pub foc_seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 200,
            grad_tol: 1e-13,
            foc_tol: 1e-8,
            divergence_radius: 1e6,
            fraction_to_boundary: 0.99,
            boundary_margin: 1e-12,
            armijo: 1e-4,
            foc_samples: 256,
            foc_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    /// Optimal growth rate Ψ⁰ (≥ 0 since Ψ(0) = 0).
    pub psi_star: f64,
    /// Norm of the gradient projected on `N⊥`.
    pub grad_norm: f64,
    /// Largest sampled `F(v, v⁰)`.
    pub foc_residual: f64,
    pub iterations: usize,
    pub restricted_dim: usize,
    /// `min_i (1 + v⁰·xᵢ)`; infinite without atoms.
    pub boundary_margin: f64,
}

fn jump_terms(triplet: &LocalTriplet, v: &DVector<f64>) -> Result<Vec<f64>> {
    triplet
        .levy()
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let y = v.dot(&a.x);
            if 1.0 + y > 0.0 {
                Ok(y)
            } else {
                Err(Error::DomainViolation {
                    atom: i,
                    margin: 1.0 + y,
                })
            }
        })
        .collect()
}

/// Ψ(v). With finitely many atoms the value is finite on all of `D`; points
/// outside `D` are a domain error rather than `−∞`.
pub fn psi_value(triplet: &LocalTriplet, v: &DVector<f64>) -> Result<f64> {
    let ys = jump_terms(triplet, v)?;
    let quad = 0.5 * v.dot(&(triplet.c() * v));
    let jumps: f64 = triplet
        .levy()
        .atoms()
        .iter()
        .zip(&ys)
        .map(|(a, &y)| a.k * (y - y.ln_1p()))
        .sum();
    Ok(triplet.b().dot(v) - quad - jumps)
}

/// `∇Ψ(v) = b − cv − Σ kᵢ xᵢ (v·xᵢ)/(1 + v·xᵢ)`.
pub fn psi_gradient(triplet: &LocalTriplet, v: &DVector<f64>) -> Result<DVector<f64>> {
    let ys = jump_terms(triplet, v)?;
    let mut g = triplet.b() - triplet.c() * v;
    for (a, &y) in triplet.levy().atoms().iter().zip(&ys) {
        g -= &a.x * (a.k * y / (1.0 + y));
    }
    Ok(g)
}

/// `∇²Ψ(v) = −c − Σ kᵢ xᵢxᵢᵀ/(1 + v·xᵢ)²`.
pub fn psi_hessian(triplet: &LocalTriplet, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let ys = jump_terms(triplet, v)?;
    let mut h = -triplet.c().clone();
    for (a, &y) in triplet.levy().atoms().iter().zip(&ys) {
        let w = a.k / ((1.0 + y) * (1.0 + y));
        h -= &a.x * a.x.transpose() * w;
    }
    Ok(h)
}

/// Drift functional `F(v, v0)` of the wealth ratio `E(v·S)/E(v0·S)`.
pub fn f_value(triplet: &LocalTriplet, v: &DVector<f64>, v0: &DVector<f64>) -> Result<f64> {
    jump_terms(triplet, v)?;
    let y0 = jump_terms(triplet, v0)?;
    let diff = v - v0;
    let linear = diff.dot(&(triplet.b() - triplet.c() * v0));
    let jumps: f64 = triplet
        .levy()
        .atoms()
        .iter()
        .zip(&y0)
        .map(|(a, &y)| a.k * diff.dot(&a.x) * y / (1.0 + y))
        .sum();
    Ok(linear - jumps)
}

/// Largest step `t` keeping `1 + (v + tΔ)·xᵢ ≥ margin` for all atoms.
pub(crate) fn max_feasible_step(triplet: &LocalTriplet, v: &DVector<f64>, dir: &DVector<f64>, margin: f64) -> f64 {
    triplet
        .levy()
        .atoms()
        .iter()
        .filter_map(|a| {
            let slope = dir.dot(&a.x);
            (slope < 0.0).then(|| (1.0 + v.dot(&a.x) - margin) / -slope)
        })
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

pub fn solve_growth_optimal(triplet: &LocalTriplet, opts: &SolveOptions) -> Result<(DVector<f64>, SolveDiagnostics)> {
    let d = triplet.dimension();
    let (_, complement) = null_split(triplet);
    let r = complement.ncols();
    let mut v = DVector::<f64>::zeros(d);
    let mut psi = 0.0_f64;

    let project = |g: &DVector<f64>| complement.transpose() * g;
    let mut iterations = 0;
    let mut last_gradient_step = 1.0_f64;

    if r > 0 {
        loop {
            let grad = psi_gradient(triplet, &v)?;
            let g_r = project(&grad);
            let grad_norm = g_r.norm();
            if grad_norm <= opts.grad_tol {
                break;
            }
            if iterations >= opts.max_iterations {
                if grad_norm <= opts.foc_tol {
                    break;
                }
                return Err(Error::NotConverged { iterations, grad_norm });
            }
            iterations += 1;

            let h_r = complement.transpose() * psi_hessian(triplet, &v)? * &complement;
            let neg_h = -h_r;
            let (step_r, newton) = match Cholesky::new(neg_h) {
                Some(chol) => (chol.solve(&g_r), true),
                None => (g_r.clone(), false),
            };
            let dir = &complement * &step_r;
            let slope = grad.dot(&dir);
            if !(slope > 0.0) {
                break;
            }

            let t_boundary = max_feasible_step(triplet, &v, &dir, opts.boundary_margin);
            let mut t = if newton { 1.0 } else { (2.0 * last_gradient_step).max(1.0) };
            if t_boundary.is_finite() {
                t = t.min(opts.fraction_to_boundary * t_boundary);
            }
            let mut accepted = None;
            // Near the optimum the predicted ascent drops below the rounding of Ψ and
            // Armijo cannot discriminate; accept the Newton step if it shrinks the gradient.
            if newton && slope <= 64.0 * f64::EPSILON * (1.0 + psi.abs()) {
                let trial = &v + &dir * t;
                if let (Ok(p), Ok(g_trial)) = (psi_value(triplet, &trial), psi_gradient(triplet, &trial)) {
                    if project(&g_trial).norm() < grad_norm {
                        accepted = Some((trial, p));
                    }
                }
            }
            for _ in 0..80 {
                if accepted.is_some() {
                    break;
                }
                let trial = &v + &dir * t;
                if let Ok(p) = psi_value(triplet, &trial) {
                    if p >= psi + opts.armijo * t * slope {
                        accepted = Some((trial, p));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, p)) => {
                    if !newton {
                        last_gradient_step = t;
                    }
                    let improved = p > psi;
                    v = trial;
                    psi = p;
                    let radius = v.norm();
                    if radius > opts.divergence_radius && improved {
                        return Err(Error::Diverged {
                            direction: (&v / radius).iter().cloned().collect(),
                            radius,
                        });
                    }
                }
                // No ascent possible at machine precision.
                None => break,
            }
        }
    }

    let grad_norm = if r > 0 { project(&psi_gradient(triplet, &v)?).norm() } else { 0.0 };
    if grad_norm > opts.foc_tol {
        return Err(Error::NotConverged { iterations, grad_norm });
    }
    let foc_residual = sampled_foc_residual(triplet, &v, opts)?;
    let diagnostics = SolveDiagnostics {
        psi_star: psi,
        grad_norm,
        foc_residual,
        iterations,
        restricted_dim: r,
        boundary_margin: triplet.levy().domain_margin(&v).1,
    };
    Ok((v, diagnostics))
}

/// Draws points of `D` around `v0` (radius up to 10, staying inside the
/// domain) and returns the largest `F(v, v0)`.
pub fn sampled_foc_residual(triplet: &LocalTriplet, v0: &DVector<f64>, opts: &SolveOptions) -> Result<f64> {
    let d = triplet.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.foc_seed);
    let mut worst = 0.0_f64;
    for _ in 0..opts.foc_samples {
        let v = sample_domain_point(triplet, v0, 10.0, &mut rng, d);
        worst = worst.max(f_value(triplet, &v, v0)?);
    }
    Ok(worst)
}

pub(crate) fn sample_domain_point(
    triplet: &LocalTriplet,
    center: &DVector<f64>,
    radius: f64,
    rng: &mut impl Rng,
    d: usize,
) -> DVector<f64> {
    let mut dir = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    let norm = dir.norm();
    if norm > 0.0 {
        dir /= norm;
    }
    let reach = max_feasible_step(triplet, center, &dir, 0.0);
    let limit = radius.min(0.999 * reach);
    center + dir * (rng.gen::<f64>() * limit)
}

/// Solves every step independently. Failures are collected with their step
/// indices.
pub fn solve_model(model: &MarketModel, opts: &SolveOptions) -> Result<(Portfolio, Vec<SolveDiagnostics>)> {
    let results: Vec<Result<(DVector<f64>, SolveDiagnostics)>> = model
        .triplets()
        .par_iter()
        .map(|t| solve_growth_optimal(t, opts))
        .collect();
    let mut weights = Vec::with_capacity(results.len());
    let mut diagnostics = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (m, r) in results.into_iter().enumerate() {
        match r {
            Ok((v, diag)) => {
                weights.push(v);
                diagnostics.push(diag);
            }
            Err(e) => failures.push((m, e)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Steps(failures));
    }
    Ok((Portfolio::new(weights), diagnostics))
}

/// Characteristics of `S^g`, the price in units of the wealth `E(g·S)`:
/// `b^g = b − cg − Σ kᵢ (g·xᵢ) xᵢ/(1 + g·xᵢ)`, `c^g = c`, atoms
/// `xᵢ ↦ xᵢ/(1 + g·xᵢ)` with unchanged intensities.
pub fn numeraire_transform(triplet: &LocalTriplet, g: &DVector<f64>) -> Result<LocalTriplet> {
    let ys = jump_terms(triplet, g)?;
    let mut b = triplet.b() - triplet.c() * g;
    for (a, &y) in triplet.levy().atoms().iter().zip(&ys) {
        b -= &a.x * (a.k * y / (1.0 + y));
    }
    let levy = triplet.levy().pushforward(|x| x / (1.0 + g.dot(x)))?;
    LocalTriplet::new(b, triplet.c().clone(), levy)
}

pub fn transform_model(model: &MarketModel, g: &Portfolio) -> Result<MarketModel> {
    g.validate_for(model)?;
    let triplets = model
        .triplets()
        .iter()
        .zip(g.weights())
        .map(|(t, w)| numeraire_transform(t, w))
        .collect::<Result<Vec<_>>>()?;
    model.with_triplets(triplets)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityStep {
    /// `|c^{1/2} g|²`
    pub diffusion: f64,
    /// `K(|g·x|² ∧ 1)`
    pub jumps: f64,
    /// `|g·b^h − K(g·x 1{|x|≤1, |g·x|>1})|`
    pub drift: f64,
    /// `ΔA` times the sum of the three terms.
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityProfile {
    pub steps: Vec<IntegrabilityStep>,
    pub cumulative: Vec<f64>,
    pub total: f64,
}

/// Per-step terms of the semimartingale integrability criterion for `g`.
pub fn integrability_profile(model: &MarketModel, g: &Portfolio) -> Result<IntegrabilityProfile> {
    g.validate_for(model)?;
    let mut steps = Vec::with_capacity(model.n_steps());
    let mut cumulative = Vec::with_capacity(model.n_steps());
    let mut total = 0.0;
    for ((t, w), &da) in model.triplets().iter().zip(g.weights()).zip(model.grid().delta_a()) {
        let diffusion = w.dot(&(t.c() * w));
        let jumps = t.levy().integrate(|x| {
            let y = w.dot(x);
            (y * y).min(1.0)
        });
        let b_h = crate::model::truncation_convert(t.b(), t.levy(), DriftConvention::Truncated);
        let correction = t.levy().integrate(|x| {
            let y = w.dot(x);
            if x.norm() <= 1.0 && y.abs() > 1.0 {
                y
            } else {
                0.0
            }
        });
        let drift = (w.dot(&b_h) - correction).abs();
        let weighted = da * (diffusion + jumps + drift);
        total += weighted;
        cumulative.push(total);
        steps.push(IntegrabilityStep {
            diffusion,
            jumps,
            drift,
            weighted,
        });
    }
    Ok(IntegrabilityProfile {
        steps,
        cumulative,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClockGrid;

    fn s(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn merton() -> LocalTriplet {
        LocalTriplet::scalar(0.05, 0.04, &[]).unwrap()
    }

    fn jump() -> LocalTriplet {
        LocalTriplet::scalar(0.1, 0.0, &[(-0.5, 1.0)]).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert!((psi_value(&merton(), &s(1.25)).unwrap() - 0.03125).abs() < 1e-15);
        assert_eq!(psi_value(&jump(), &s(0.0)).unwrap(), 0.0);
        // 0.1/3 + 1/6 + ln(5/6), evaluated independently
        let expected = 0.1 / 3.0 + 1.0 / 6.0 + (5.0_f64 / 6.0).ln();
        assert!((psi_value(&jump(), &s(1.0 / 3.0)).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.017678).abs() < 1e-6);
    }

    #[test]
    fn psi_outside_domain_is_an_error() {
        assert!(matches!(psi_value(&jump(), &s(2.0)), Err(Error::DomainViolation { atom: 0, .. })));
        assert!(psi_gradient(&jump(), &s(3.0)).is_err());
    }

    #[test]
    fn gradient_examples() {
        let t = LocalTriplet::scalar(0.3, 0.2, &[]).unwrap();
        assert!((psi_gradient(&t, &s(0.7)).unwrap()[0] - (0.3 - 0.14)).abs() < 1e-15);
        assert_eq!(psi_gradient(&jump(), &s(0.0)).unwrap()[0], 0.1);
        assert!(psi_gradient(&jump(), &s(1.0 / 3.0)).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn f_examples() {
        let v0 = s(1.0 / 3.0);
        assert_eq!(f_value(&jump(), &v0, &v0).unwrap(), 0.0);
        assert!(f_value(&jump(), &s(0.0), &v0).unwrap().abs() < 1e-16);
        for v in [-3.0, 0.0, 1.0, 1.9] {
            assert!(f_value(&merton(), &s(v), &s(1.25)).unwrap().abs() < 1e-16);
        }
    }

    #[test]
    fn solver_closed_forms() {
        let opts = SolveOptions::default();
        let (v, diag) = solve_growth_optimal(&merton(), &opts).unwrap();
        assert!((v[0] - 1.25).abs() < 1e-12);
        assert!((diag.psi_star - 0.03125).abs() < 1e-14);

        let (v, diag) = solve_growth_optimal(&jump(), &opts).unwrap();
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!(diag.foc_residual <= 1e-8);

        let (v, diag) = solve_growth_optimal(&LocalTriplet::zero(1), &opts).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(diag.psi_star, 0.0);
        assert_eq!(diag.restricted_dim, 0);
    }

    #[test]
    fn arbitrage_step_diverges_along_certificate() {
        let t = LocalTriplet::scalar(1.0, 0.0, &[(1.0, 0.5)]).unwrap();
        match solve_growth_optimal(&t, &SolveOptions::default()) {
            Err(Error::Diverged { direction, .. }) => assert!((direction[0] - 1.0).abs() < 1e-9),
            other => panic!("expected divergence, got {other:?}"),
        }
        let riskless = LocalTriplet::scalar(0.1, 0.0, &[]).unwrap();
        assert!(matches!(
            solve_growth_optimal(&riskless, &SolveOptions::default()),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn solve_model_examples() {
        let grid = ClockGrid::uniform(2, 1.0, 1.0).unwrap();
        let model = MarketModel::new(1, grid.clone(), vec![merton(), jump()]).unwrap();
        let (g, diags) = solve_model(&model, &SolveOptions::default()).unwrap();
        assert!((g.step(0)[0] - 1.25).abs() < 1e-12);
        assert!((g.step(1)[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(diags.len(), 2);
        g.validate_for(&model).unwrap();

        let same = MarketModel::new(1, grid.clone(), vec![jump(), jump()]).unwrap();
        let (g, _) = solve_model(&same, &SolveOptions::default()).unwrap();
        assert_eq!(g.step(0), g.step(1));

        let arb = LocalTriplet::scalar(1.0, 0.0, &[(1.0, 0.5)]).unwrap();
        let bad = MarketModel::new(1, grid, vec![merton(), arb]).unwrap();
        let err = solve_model(&bad, &SolveOptions::default()).unwrap_err();
        assert_eq!(err.steps(), vec![1]);
    }

    #[test]
    fn transform_examples() {
        assert_eq!(numeraire_transform(&jump(), &s(0.0)).unwrap(), jump());
        let m = numeraire_transform(&merton(), &s(1.25)).unwrap();
        assert!(m.b()[0].abs() < 1e-16);
        assert_eq!(m.c()[(0, 0)], 0.04);
        let j = numeraire_transform(&jump(), &s(1.0 / 3.0)).unwrap();
        assert!((j.levy().atoms()[0].x[0] + 0.6).abs() < 1e-15);
        assert!(j.b()[0].abs() < 1e-16);
    }

    #[test]
    fn integrability_examples() {
        let model = MarketModel::single_step(merton()).unwrap();
        let zero = integrability_profile(&model, &Portfolio::zeros(&model)).unwrap();
        assert_eq!(zero.total, 0.0);

        let p = integrability_profile(&model, &Portfolio::constant(&model, &[1.25])).unwrap();
        assert!((p.steps[0].diffusion - 0.0625).abs() < 1e-15);
        assert_eq!(p.steps[0].jumps, 0.0);
        assert!((p.steps[0].drift - 0.0625).abs() < 1e-15);

        let model = MarketModel::single_step(jump()).unwrap();
        let p = integrability_profile(&model, &Portfolio::constant(&model, &[1.0 / 3.0])).unwrap();
        assert!((p.steps[0].jumps - 1.0 / 36.0).abs() < 1e-15);
    }
}
