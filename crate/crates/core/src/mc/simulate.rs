use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::model::{MarketModel, Portfolio, StepKind};
use crate::rng::{self, domain};
use crate::stochexp::{IncrementPath, PricePath, PriceStep, StepIncrement};

/// Default cap on bundle memory (2 GiB).
pub const DEFAULT_MEMORY_BUDGET: u128 = 2 << 30;

/// Simulation inputs for one step, derived once from its triplet.
#[derive(Debug, Clone)]
pub(crate) struct StepDynamics {
    pub kind: StepKind,
    pub delta_a: f64,
    pub sqrt_delta_a: f64,
    /// `L` with `L Lᵀ = c`.
    pub factor: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// `b − Σ kᵢ xᵢ`: raw jumps are not compensated, so the step mean is `b ΔA`.
    pub net_drift: DVector<f64>,
    pub atoms: Vec<DVector<f64>>,
    pub intensities: Vec<f64>,
}

pub(crate) fn dynamics(model: &MarketModel) -> Vec<StepDynamics> {
    let d = model.dimension();
    model
        .triplets()
        .iter()
        .zip(model.grid().delta_a())
        .zip(model.grid().kinds())
        .map(|((t, &da), &kind)| StepDynamics {
            kind,
            delta_a: da,
            sqrt_delta_a: da.sqrt(),
            factor: psd_factor(t.c()),
            c: t.c().clone(),
            net_drift: t.b() - t.levy().first_moment(d),
            atoms: t.levy().atoms().iter().map(|a| a.x.clone()).collect(),
            intensities: t.levy().atoms().iter().map(|a| a.k).collect(),
        })
        .collect()
}

/// Simulated paths. Per path and step it stores the standard normal vector
/// `ξ`, the realized jumps (atom indices, repeated for multiple jumps) and
/// the price increment
/// `ΔS = (b − Σ kᵢxᵢ) ΔA + L ξ √ΔA + Σ realized xᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBundle {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dimension: usize,
    pub seed: u64,
    pub generator: &'static str,
    gauss: Vec<f64>,
    delta_s: Vec<f64>,
    jump_offsets: Vec<usize>,
    jump_atoms: Vec<u32>,
}

impl PathBundle {
    fn cell(&self, path: usize, step: usize) -> usize {
        path * self.n_steps + step
    }

    pub fn gauss(&self, path: usize, step: usize) -> &[f64] {
        let o = self.cell(path, step) * self.dimension;
        &self.gauss[o..o + self.dimension]
    }

    pub fn delta_s(&self, path: usize, step: usize) -> &[f64] {
        let o = self.cell(path, step) * self.dimension;
        &self.delta_s[o..o + self.dimension]
    }

    /// Atom indices of the jumps realized at `(path, step)`.
    pub fn jumps(&self, path: usize, step: usize) -> &[u32] {
        let c = self.cell(path, step);
        &self.jump_atoms[self.jump_offsets[c]..self.jump_offsets[c + 1]]
    }

    pub fn total_jumps(&self) -> usize {
        self.jump_atoms.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub memory_budget: u128,
}

impl SimulationConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        SimulationConfig {
            n_paths,
            seed,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

fn estimated_bytes(model: &MarketModel, n_paths: usize) -> u128 {
    let cells = n_paths as u128 * model.n_steps() as u128;
    let per_cell = 16 * model.dimension() as u128 + 8;
    let expected_jumps: f64 = model
        .triplets()
        .iter()
        .zip(model.grid().delta_a())
        .map(|(t, da)| t.levy().total_mass() * da)
        .sum();
    cells * per_cell + (expected_jumps * n_paths as f64 * 4.0) as u128
}

pub fn simulate(model: &MarketModel, n_paths: usize, seed: u64) -> Result<PathBundle> {
    simulate_with(model, &SimulationConfig::new(n_paths, seed))
}

pub fn simulate_with(model: &MarketModel, cfg: &SimulationConfig) -> Result<PathBundle> {
    if cfg.n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    let required = estimated_bytes(model, cfg.n_paths);
    if required > cfg.memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: cfg.memory_budget,
        });
    }
    let dyns = dynamics(model);
    let d = model.dimension();
    let n_steps = model.n_steps();

    struct PathDraw {
        gauss: Vec<f64>,
        delta_s: Vec<f64>,
        jumps: Vec<Vec<u32>>,
    }

    let draws: Vec<PathDraw> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut out = PathDraw {
                gauss: Vec::with_capacity(n_steps * d),
                delta_s: Vec::with_capacity(n_steps * d),
                jumps: Vec::with_capacity(n_steps),
            };
            for (m, dy) in dyns.iter().enumerate() {
                let mut rng = rng::step_rng(cfg.seed, domain::SIMULATE, p as u64, m as u64);
                let xi = DVector::from_fn(d, |_, _| rng::standard_normal(&mut rng));
                let mut ds = &dy.net_drift * dy.delta_a + &dy.factor * &xi * dy.sqrt_delta_a;
                let mut jumps = Vec::new();
                match dy.kind {
                    StepKind::Continuous => {
                        for (i, &k) in dy.intensities.iter().enumerate() {
                            let n = rng::poisson(&mut rng, k * dy.delta_a);
                            for _ in 0..n {
                                jumps.push(i as u32);
                                ds += &dy.atoms[i];
                            }
                        }
                    }
                    StepKind::PredictableJump => {
                        let u: f64 = rand::Rng::gen(&mut rng);
                        let mut acc = 0.0;
                        for (i, &k) in dy.intensities.iter().enumerate() {
                            acc += k * dy.delta_a;
                            if u < acc {
                                jumps.push(i as u32);
                                ds += &dy.atoms[i];
                                break;
                            }
                        }
                    }
                }
                out.gauss.extend(xi.iter());
                out.delta_s.extend(ds.iter());
                out.jumps.push(jumps);
            }
            out
        })
        .collect();

    let mut bundle = PathBundle {
        n_paths: cfg.n_paths,
        n_steps,
        dimension: d,
        seed: cfg.seed,
        generator: rng::GENERATOR_ID,
        gauss: Vec::with_capacity(cfg.n_paths * n_steps * d),
        delta_s: Vec::with_capacity(cfg.n_paths * n_steps * d),
        jump_offsets: Vec::with_capacity(cfg.n_paths * n_steps + 1),
        jump_atoms: Vec::new(),
    };
    bundle.jump_offsets.push(0);
    for draw in draws {
        bundle.gauss.extend(draw.gauss);
        bundle.delta_s.extend(draw.delta_s);
        for j in draw.jumps {
            bundle.jump_atoms.extend(j);
            bundle.jump_offsets.push(bundle.jump_atoms.len());
        }
    }
    Ok(bundle)
}

/// Decomposed price increments of one simulated path.
pub fn price_path(model: &MarketModel, bundle: &PathBundle, path: usize) -> PricePath {
    dynamics(model)
        .iter()
        .enumerate()
        .map(|(m, dy)| {
            let xi = DVector::from_column_slice(bundle.gauss(path, m));
            PriceStep {
                gauss: &dy.factor * xi * dy.sqrt_delta_a,
                qv: &dy.c * dy.delta_a,
                drift: &dy.net_drift * dy.delta_a,
                jumps: bundle.jumps(path, m).iter().map(|&i| dy.atoms[i as usize].clone()).collect(),
            }
        })
        .collect()
}

/// Precomputed per-step exposures of a strategy, so wealth along a path is
/// a handful of dot products.
#[derive(Debug, Clone)]
pub struct StrategyLoadings {
    /// `√ΔA · Lᵀ f`
    gauss: Vec<DVector<f64>>,
    /// `fᵀ c f ΔA`
    qv: Vec<f64>,
    /// `f·(b − Σkx) ΔA`
    drift: Vec<f64>,
    /// `f·xᵢ` per atom
    jumps: Vec<Vec<f64>>,
}

impl StrategyLoadings {
    pub fn new(model: &MarketModel, f: &Portfolio) -> Result<Self> {
        Self::from_dynamics(&dynamics(model), f)
    }

    pub(crate) fn from_dynamics(dyns: &[StepDynamics], f: &Portfolio) -> Result<Self> {
        if f.weights().len() != dyns.len() {
            return Err(Error::DimensionMismatch {
                step: None,
                expected: dyns.len(),
                found: f.weights().len(),
            });
        }
        let mut out = StrategyLoadings {
            gauss: Vec::with_capacity(dyns.len()),
            qv: Vec::with_capacity(dyns.len()),
            drift: Vec::with_capacity(dyns.len()),
            jumps: Vec::with_capacity(dyns.len()),
        };
        for (dy, w) in dyns.iter().zip(f.weights()) {
            if w.len() != dy.net_drift.len() {
                return Err(Error::DimensionMismatch {
                    step: None,
                    expected: dy.net_drift.len(),
                    found: w.len(),
                });
            }
            out.gauss.push(dy.factor.transpose() * w * dy.sqrt_delta_a);
            out.qv.push(w.dot(&(&dy.c * w)) * dy.delta_a);
            out.drift.push(w.dot(&dy.net_drift) * dy.delta_a);
            out.jumps.push(dy.atoms.iter().map(|x| w.dot(x)).collect());
        }
        Ok(out)
    }

    /// `log E(f·S)_T` on one path.
    pub fn log_terminal(&self, bundle: &PathBundle, path: usize) -> Result<f64> {
        let mut acc = 0.0;
        for m in 0..self.qv.len() {
            let xi = bundle.gauss(path, m);
            let g: f64 = self.gauss[m].iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += g + self.drift[m] - 0.5 * self.qv[m];
            for &i in bundle.jumps(path, m) {
                let j = self.jumps[m][i as usize];
                if !(j > -1.0) {
                    return Err(Error::Inadmissible {
                        path,
                        step: m,
                        margin: 1.0 + j,
                    });
                }
                acc += j.ln_1p();
            }
        }
        Ok(acc)
    }

    /// Increments of `f·S` along one path.
    pub fn increments(&self, bundle: &PathBundle, path: usize) -> IncrementPath {
        IncrementPath::new(
            (0..self.qv.len())
                .map(|m| {
                    let xi = bundle.gauss(path, m);
                    StepIncrement {
                        cont_gauss: self.gauss[m].iter().zip(xi).map(|(a, b)| a * b).sum(),
                        cont_qv: self.qv[m],
                        drift: self.drift[m],
                        jumps: bundle.jumps(path, m).iter().map(|&i| self.jumps[m][i as usize]).collect(),
                    }
                })
                .collect(),
        )
    }
}

/// Sample moments of `ΔS` at one step against the triplet's
/// `b ΔA` and `(c + Σ kᵢ xᵢxᵢᵀ) ΔA`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub step: usize,
    pub mean: Vec<f64>,
    pub expected_mean: Vec<f64>,
    pub mean_z: Vec<f64>,
    pub variance: Vec<f64>,
    pub expected_variance: Vec<f64>,
    pub variance_z: Vec<f64>,
    pub passed: bool,
}

pub fn moment_check(model: &MarketModel, bundle: &PathBundle, z: f64) -> Vec<MomentCheck> {
    let n = bundle.n_paths as f64;
    let d = model.dimension();
    model
        .triplets()
        .iter()
        .zip(model.grid().delta_a())
        .enumerate()
        .map(|(m, (t, &da))| {
            let mut q = t.c().clone();
            for a in t.levy().atoms() {
                q += &a.x * a.x.transpose() * a.k;
            }
            // Predictable-jump steps have Bernoulli jumps: subtract the squared mean.
            if model.grid().kinds()[m] == StepKind::PredictableJump {
                let mu = t.levy().first_moment(d);
                q -= &mu * mu.transpose() * da;
            }
            let mut out = MomentCheck {
                step: m,
                mean: vec![],
                expected_mean: vec![],
                mean_z: vec![],
                variance: vec![],
                expected_variance: vec![],
                variance_z: vec![],
                passed: true,
            };
            for j in 0..d {
                let xs: Vec<f64> = (0..bundle.n_paths).map(|p| bundle.delta_s(p, m)[j]).collect();
                let mean = crate::linalg::pairwise_sum(&xs) / n;
                let centered: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
                let var = crate::linalg::pairwise_sum(&centered) / (n - 1.0).max(1.0);
                let fourth: Vec<f64> = xs.iter().map(|x| (x - mean).powi(4)).collect();
                let m4 = crate::linalg::pairwise_sum(&fourth) / n;
                let se_mean = (var / n).sqrt();
                let se_var = ((m4 - var * var).max(0.0) / n).sqrt();
                let exp_mean = t.b()[j] * da;
                let exp_var = q[(j, j)] * da;
                let zm = ratio_or_zero(mean - exp_mean, se_mean);
                let zv = ratio_or_zero(var - exp_var, se_var);
                out.passed &= zm.abs() <= z && zv.abs() <= z;
                out.mean.push(mean);
                out.expected_mean.push(exp_mean);
                out.mean_z.push(zm);
                out.variance.push(var);
                out.expected_variance.push(exp_var);
                out.variance_z.push(zv);
            }
            out
        })
        .collect()
}

fn ratio_or_zero(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}
