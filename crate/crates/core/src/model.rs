//! Per-step local characteristics `(b, c, K)` on a clock grid, plus the JSON
//! model-file format.
//!
//! Drift is stored in the untruncated convention `b = b^h + K(x·1{|x|>1})`.
//! With finitely many atoms `K(|x| ∧ |x|²)` is always finite, so the
//! conversion is always available and model files may use either convention.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|c_ij - c_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues of `c` below `-PSD_TOL` are rejected; rounding-level negatives are kept, the rest clipped to zero.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: DVector<f64>,
    pub k: f64,
}

impl Atom {
    pub fn new(x: impl Into<Vec<f64>>, k: f64) -> Self {
        Atom {
            x: DVector::from_vec(x.into()),
            k,
        }
    }
}

/// Finite Lévy measure `K = Σ kᵢ δ_{xᵢ}` (intensity per unit of clock).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevyAtomMeasure {
    atoms: Vec<Atom>,
}

impl LevyAtomMeasure {
    pub const DEFAULT_MAX_ATOMS: usize = 1024;

    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        Self::with_limit(atoms, Self::DEFAULT_MAX_ATOMS)
    }

    pub fn with_limit(atoms: Vec<Atom>, max_atoms: usize) -> Result<Self> {
        if atoms.len() > max_atoms {
            return Err(Error::invariant(
                None,
                format!("{} atoms exceed the configured maximum {max_atoms}", atoms.len()),
            ));
        }
        if let Some(first) = atoms.first() {
            let d = first.x.len();
            for (i, a) in atoms.iter().enumerate() {
                if a.x.len() != d {
                    return Err(Error::DimensionMismatch {
                        step: None,
                        expected: d,
                        found: a.x.len(),
                    });
                }
                if !a.k.is_finite() || a.k <= 0.0 {
                    return Err(Error::invariant(
                        None,
                        format!("atom {i} has non-positive intensity k = {}", a.k),
                    ));
                }
                if a.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invariant(None, format!("atom {i} has a non-finite location")));
                }
                if a.x.iter().all(|&v| v == 0.0) {
                    return Err(Error::invariant(None, format!("atom {i} sits at x = 0")));
                }
            }
            for i in 0..atoms.len() {
                for j in (i + 1)..atoms.len() {
                    if atoms[i].x == atoms[j].x {
                        return Err(Error::invariant(
                            None,
                            format!("atoms {i} and {j} share the same location"),
                        ));
                    }
                }
            }
        }
        Ok(LevyAtomMeasure { atoms })
    }

    pub fn empty() -> Self {
        LevyAtomMeasure::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `K(R^d)`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.k).sum()
    }

    /// `K(f) = Σ kᵢ f(xᵢ)`.
    pub fn integrate(&self, mut f: impl FnMut(&DVector<f64>) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.k * f(&a.x)).sum()
    }

    /// `K(x) = Σ kᵢ xᵢ`, the jump compensator per unit clock.
    pub fn first_moment(&self, d: usize) -> DVector<f64> {
        self.atoms
            .iter()
            .fold(DVector::zeros(d), |acc, a| acc + &a.x * a.k)
    }

    /// `min_i (1 + v·xᵢ)`, `+∞` without atoms.
    pub fn domain_margin(&self, v: &DVector<f64>) -> (Option<usize>, f64) {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (Some(i), 1.0 + v.dot(&a.x)))
            .fold((None, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    /// Fails unless `1 + v·xᵢ > 0` for every atom.
    pub fn check_domain(&self, v: &DVector<f64>) -> Result<()> {
        match self.domain_margin(v) {
            (Some(atom), margin) if !(margin > 0.0) => Err(Error::DomainViolation { atom, margin }),
            _ => Ok(()),
        }
    }

    /// Same atoms with intensities multiplied by `weights`.
    pub fn reweight(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.atoms.len() {
            return Err(Error::DimensionMismatch {
                step: None,
                expected: self.atoms.len(),
                found: weights.len(),
            });
        }
        let atoms = self
            .atoms
            .iter()
            .zip(weights)
            .map(|(a, &w)| Atom { x: a.x.clone(), k: a.k * w })
            .collect();
        LevyAtomMeasure::with_limit(atoms, usize::MAX)
    }

    /// Image measure under `x ↦ map(x)`, intensities unchanged.
    pub fn pushforward(&self, mut map: impl FnMut(&DVector<f64>) -> DVector<f64>) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { x: map(&a.x), k: a.k })
            .collect();
        LevyAtomMeasure::with_limit(atoms, usize::MAX)
    }
}

/// Differential characteristics at one step, per unit of clock.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTriplet {
    b: DVector<f64>,
    c: DMatrix<f64>,
    levy: LevyAtomMeasure,
}

impl LocalTriplet {
    /// Validates shapes, finiteness, symmetry and positive semidefiniteness
    /// of `c`. Slightly negative eigenvalues are clipped.
    pub fn new(b: DVector<f64>, c: DMatrix<f64>, levy: LevyAtomMeasure) -> Result<Self> {
        let d = b.len();
        if c.nrows() != d || c.ncols() != d {
            return Err(Error::DimensionMismatch {
                step: None,
                expected: d * d,
                found: c.len(),
            });
        }
        if let Some(a) = levy.atoms().first() {
            if a.x.len() != d {
                return Err(Error::DimensionMismatch {
                    step: None,
                    expected: d,
                    found: a.x.len(),
                });
            }
        }
        if b.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invariant(None, "non-finite entry in b or c"));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (c[(i, j)] - c[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::invariant(
                        None,
                        format!("c is not symmetric: c[{i},{j}] = {} vs c[{j},{i}] = {}", c[(i, j)], c[(j, i)]),
                    ));
                }
            }
        }
        let c = clip_psd(c)?;
        Ok(LocalTriplet { b, c, levy })
    }

    pub fn zero(d: usize) -> Self {
        LocalTriplet {
            b: DVector::zeros(d),
            c: DMatrix::zeros(d, d),
            levy: LevyAtomMeasure::empty(),
        }
    }

    /// Convenience constructor for one-dimensional triplets.
    pub fn scalar(b: f64, c: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        let levy = LevyAtomMeasure::new(atoms.iter().map(|&(x, k)| Atom::new(vec![x], k)).collect())?;
        LocalTriplet::new(DVector::from_element(1, b), DMatrix::from_element(1, 1, c), levy)
    }

    pub fn dimension(&self) -> usize {
        self.b.len()
    }

    /// Untruncated drift.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn levy(&self) -> &LevyAtomMeasure {
        &self.levy
    }

    /// Drift with respect to the truncation function `x·1{|x|≤1}`.
    pub fn b_h(&self) -> DVector<f64> {
        truncation_convert(&self.b, &self.levy, DriftConvention::Truncated)
    }

    pub fn is_degenerate(&self) -> bool {
        self.levy.is_empty() && self.b.iter().all(|&v| v == 0.0) && self.c.iter().all(|&v| v == 0.0)
    }
}

fn clip_psd(c: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.nrows() == 0 {
        return Ok(c);
    }
    let sym = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::invariant(
            None,
            format!("c is not positive semidefinite (min eigenvalue {min:e})"),
        ));
    }
    // Rounding-level negatives are left alone so that parsing is idempotent.
    let scale = c.amax().max(1.0);
    if min >= -64.0 * f64::EPSILON * scale {
        return Ok(c);
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftConvention {
    /// `b = b^h + K(x·1{|x|>1})`
    Untruncated,
    /// `b^h` for the truncation `h(x) = x·1{|x|≤1}`
    Truncated,
}

/// Converts a drift vector between the two conventions. `b` is interpreted
/// in the convention opposite to `direction`.
pub fn truncation_convert(b: &DVector<f64>, levy: &LevyAtomMeasure, direction: DriftConvention) -> DVector<f64> {
    let mut big = DVector::zeros(b.len());
    for a in levy.atoms() {
        if a.x.norm() > 1.0 {
            big += &a.x * a.k;
        }
    }
    match direction {
        DriftConvention::Untruncated => b + big,
        DriftConvention::Truncated => b - big,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Continuous,
    /// The clock jumps at this step: at most one jump of `S` occurs.
    PredictableJump,
}

/// `0 = t_0 < t_1 < … < t_M` with clock increments `ΔA_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockGrid {
    t_end: Vec<f64>,
    delta_a: Vec<f64>,
    kinds: Vec<StepKind>,
}

impl ClockGrid {
    pub fn new(t_end: Vec<f64>, delta_a: Vec<f64>, kinds: Vec<StepKind>) -> Result<Self> {
        if t_end.len() != delta_a.len() || t_end.len() != kinds.len() {
            return Err(Error::Schema("grid arrays differ in length".into()));
        }
        let mut prev = 0.0;
        for (m, &t) in t_end.iter().enumerate() {
            if !t.is_finite() || t <= prev {
                return Err(Error::invariant(m, format!("times must be strictly increasing from 0 (t_end = {t})")));
            }
            prev = t;
        }
        for (m, &da) in delta_a.iter().enumerate() {
            if !da.is_finite() || da < 0.0 {
                return Err(Error::invariant(m, format!("clock increment must be nonnegative (delta_a = {da})")));
            }
        }
        let total: f64 = delta_a.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::invariant(
                None,
                format!("clock normalization A_T ≤ 1 violated (A_T = {total})"),
            ));
        }
        Ok(ClockGrid { t_end, delta_a, kinds })
    }

    /// Equally spaced continuous steps on `[0, horizon]` sharing the clock mass `total_a`.
    pub fn uniform(steps: usize, horizon: f64, total_a: f64) -> Result<Self> {
        let t_end = (1..=steps).map(|m| horizon * m as f64 / steps as f64).collect();
        ClockGrid::new(t_end, vec![total_a / steps as f64; steps], vec![StepKind::Continuous; steps])
    }

    pub fn len(&self) -> usize {
        self.delta_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_a.is_empty()
    }

    pub fn t_end(&self) -> &[f64] {
        &self.t_end
    }

    pub fn delta_a(&self) -> &[f64] {
        &self.delta_a
    }

    pub fn kinds(&self) -> &[StepKind] {
        &self.kinds
    }

    pub fn total_clock(&self) -> f64 {
        self.delta_a.iter().sum()
    }
}

/// Deterministic, piecewise-constant characteristics on a clock grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    dimension: usize,
    grid: ClockGrid,
    triplets: Vec<LocalTriplet>,
}

impl MarketModel {
    pub fn new(dimension: usize, grid: ClockGrid, triplets: Vec<LocalTriplet>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Schema("dimension must be at least 1".into()));
        }
        if triplets.len() != grid.len() {
            return Err(Error::invariant(
                None,
                format!("{} triplets for {} steps", triplets.len(), grid.len()),
            ));
        }
        for (m, t) in triplets.iter().enumerate() {
            if t.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    step: Some(m),
                    expected: dimension,
                    found: t.dimension(),
                });
            }
            if grid.kinds[m] == StepKind::PredictableJump {
                let mass = grid.delta_a[m] * t.levy().total_mass();
                if mass > 1.0 + 1e-12 {
                    return Err(Error::invariant(
                        m,
                        format!("predictable jump mass ΔA·K(R^d) = {mass} exceeds 1"),
                    ));
                }
            }
        }
        Ok(MarketModel {
            dimension,
            grid,
            triplets,
        })
    }

    /// One continuous step carrying the whole clock mass.
    pub fn single_step(triplet: LocalTriplet) -> Result<Self> {
        let d = triplet.dimension();
        MarketModel::new(d, ClockGrid::uniform(1, 1.0, 1.0)?, vec![triplet])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn grid(&self) -> &ClockGrid {
        &self.grid
    }

    pub fn triplets(&self) -> &[LocalTriplet] {
        &self.triplets
    }

    pub fn n_steps(&self) -> usize {
        self.triplets.len()
    }

    /// Same grid, new characteristics.
    pub fn with_triplets(&self, triplets: Vec<LocalTriplet>) -> Result<Self> {
        MarketModel::new(self.dimension, self.grid.clone(), triplets)
    }

    /// Re-runs every model-level invariant.
    pub fn revalidate(&self) -> Result<()> {
        let triplets = self
            .triplets
            .iter()
            .enumerate()
            .map(|(m, t)| {
                let levy = LevyAtomMeasure::new(t.levy().atoms().to_vec()).map_err(|e| at_step(e, m))?;
                LocalTriplet::new(t.b().clone(), t.c().clone(), levy).map_err(|e| at_step(e, m))
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = ClockGrid::new(self.grid.t_end.clone(), self.grid.delta_a.clone(), self.grid.kinds.clone())?;
        MarketModel::new(self.dimension, grid, triplets).map(|_| ())
    }
}

fn at_step(e: Error, m: usize) -> Error {
    match e {
        Error::Invariant { step: None, message } => Error::Invariant { step: Some(m), message },
        Error::DimensionMismatch { step: None, expected, found } => Error::DimensionMismatch {
            step: Some(m),
            expected,
            found,
        },
        other => other,
    }
}

/// `K(|x| ∧ |x|²)` per step. Finite by construction for atom measures.
pub fn sigma_special_check(model: &MarketModel) -> Vec<f64> {
    model
        .triplets()
        .iter()
        .map(|t| {
            t.levy().integrate(|x| {
                let r = x.norm();
                r.min(r * r)
            })
        })
        .collect()
}

/// One weight vector per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<DVector<f64>>,
}

impl Portfolio {
    /// Unchecked; use [`Portfolio::for_model`] to enforce membership in `D`.
    pub fn new(weights: Vec<DVector<f64>>) -> Self {
        Portfolio { weights }
    }

    pub fn for_model(model: &MarketModel, weights: Vec<DVector<f64>>) -> Result<Self> {
        let p = Portfolio { weights };
        p.validate_for(model)?;
        Ok(p)
    }

    pub fn zeros(model: &MarketModel) -> Self {
        Portfolio {
            weights: vec![DVector::zeros(model.dimension()); model.n_steps()],
        }
    }

    /// Same position at every step.
    pub fn constant(model: &MarketModel, w: &[f64]) -> Self {
        Portfolio {
            weights: vec![DVector::from_column_slice(w); model.n_steps()],
        }
    }

    pub fn weights(&self) -> &[DVector<f64>] {
        &self.weights
    }

    pub fn step(&self, m: usize) -> &DVector<f64> {
        &self.weights[m]
    }

    pub fn scaled(&self, factor: f64) -> Portfolio {
        Portfolio {
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    /// Checks `1 + g_m·x > 0` for every step and atom.
    pub fn validate_for(&self, model: &MarketModel) -> Result<()> {
        if self.weights.len() != model.n_steps() {
            return Err(Error::invariant(
                None,
                format!("portfolio has {} steps, model has {}", self.weights.len(), model.n_steps()),
            ));
        }
        for (m, (w, t)) in self.weights.iter().zip(model.triplets()).enumerate() {
            if w.len() != model.dimension() {
                return Err(Error::DimensionMismatch {
                    step: Some(m),
                    expected: model.dimension(),
                    found: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::invariant(m, "non-finite portfolio weight"));
            }
            if let (Some(atom), margin) = t.levy().domain_margin(w) {
                if !(margin > 0.0) {
                    return Err(Error::invariant(
                        m,
                        format!("portfolio leaves D: 1 + g·x = {margin:e} at atom {atom}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    pub dimension: usize,
    pub steps: Vec<StepDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDocument {
    pub t_end: f64,
    pub delta_a: f64,
    pub kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_convention: Option<DriftConvention>,
    /// Row-major `d×d`.
    pub c: Vec<f64>,
    #[serde(default)]
    pub atoms: Vec<AtomDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDocument {
    pub x: Vec<f64>,
    pub k: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub max_atoms: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_atoms: LevyAtomMeasure::DEFAULT_MAX_ATOMS,
        }
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

pub fn parse_model(text: &str) -> Result<MarketModel> {
    parse_model_with(text, &ParseOptions::default())
}

pub fn parse_model_with(text: &str, opts: &ParseOptions) -> Result<MarketModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    model_from_document(&doc, opts)
}

pub fn model_from_document(doc: &ModelDocument, opts: &ParseOptions) -> Result<MarketModel> {
    if let Some(v) = doc.schema_version {
        if v != MODEL_SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported schema_version {v}")));
        }
    }
    let d = doc.dimension;
    if d == 0 {
        return Err(Error::Schema("dimension must be at least 1".into()));
    }
    let mut triplets = Vec::with_capacity(doc.steps.len());
    for (m, step) in doc.steps.iter().enumerate() {
        triplets.push(step_triplet(step, d, opts).map_err(|e| at_step(e, m))?);
    }
    let grid = ClockGrid::new(
        doc.steps.iter().map(|s| s.t_end).collect(),
        doc.steps.iter().map(|s| s.delta_a).collect(),
        doc.steps.iter().map(|s| s.kind).collect(),
    )?;
    MarketModel::new(d, grid, triplets)
}

fn step_triplet(step: &StepDocument, d: usize, opts: &ParseOptions) -> Result<LocalTriplet> {
    let (raw_b, convention) = match (&step.b, &step.b_h) {
        (Some(b), None) => (b, DriftConvention::Untruncated),
        (None, Some(b_h)) => (b_h, DriftConvention::Truncated),
        (Some(_), Some(_)) => return Err(Error::Schema("give either `b` or `b_h`, not both".into())),
        (None, None) => return Err(Error::Schema("missing drift: `b` or `b_h`".into())),
    };
    if let Some(declared) = step.drift_convention {
        if declared != convention {
            return Err(Error::Schema(format!(
                "drift_convention `{}` does not match the drift key given",
                match declared {
                    DriftConvention::Untruncated => "untruncated",
                    DriftConvention::Truncated => "truncated",
                }
            )));
        }
    }
    if raw_b.len() != d {
        return Err(Error::DimensionMismatch {
            step: None,
            expected: d,
            found: raw_b.len(),
        });
    }
    if step.c.len() != d * d {
        return Err(Error::DimensionMismatch {
            step: None,
            expected: d * d,
            found: step.c.len(),
        });
    }
    for a in &step.atoms {
        if a.x.len() != d {
            return Err(Error::DimensionMismatch {
                step: None,
                expected: d,
                found: a.x.len(),
            });
        }
    }
    let levy = LevyAtomMeasure::with_limit(
        step.atoms.iter().map(|a| Atom::new(a.x.clone(), a.k)).collect(),
        opts.max_atoms,
    )?;
    let raw_b = DVector::from_column_slice(raw_b);
    let b = match convention {
        DriftConvention::Untruncated => raw_b,
        DriftConvention::Truncated => truncation_convert(&raw_b, &levy, DriftConvention::Untruncated),
    };
    LocalTriplet::new(b, DMatrix::from_row_slice(d, d, &step.c), levy)
}

/// Normalized document: untruncated drift, explicit convention flag.
pub fn to_document(model: &MarketModel) -> ModelDocument {
    let grid = model.grid();
    let steps = model
        .triplets()
        .iter()
        .enumerate()
        .map(|(m, t)| StepDocument {
            t_end: grid.t_end[m],
            delta_a: grid.delta_a[m],
            kind: grid.kinds[m],
            b: Some(t.b().iter().cloned().collect()),
            b_h: None,
            drift_convention: Some(DriftConvention::Untruncated),
            c: t.c().transpose().iter().cloned().collect(),
            atoms: t
                .levy()
                .atoms()
                .iter()
                .map(|a| AtomDocument {
                    x: a.x.iter().cloned().collect(),
                    k: a.k,
                })
                .collect(),
        })
        .collect();
    ModelDocument {
        schema_version: Some(MODEL_SCHEMA_VERSION),
        dimension: model.dimension(),
        steps,
    }
}

pub fn serialize_model(model: &MarketModel) -> String {
    serde_json::to_string_pretty(&to_document(model)).expect("model document serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioDocument {
    pub weights: Vec<Vec<f64>>,
}

/// Reads any JSON object with a top-level `weights` array of per-step vectors
/// (the `solve` report has this shape).
pub fn parse_portfolio(text: &str) -> Result<Portfolio> {
    let doc: PortfolioDocument = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if doc.weights.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Schema("non-finite portfolio weight".into()));
    }
    Ok(Portfolio::new(
        doc.weights.into_iter().map(DVector::from_vec).collect(),
    ))
}

pub fn portfolio_document(p: &Portfolio) -> PortfolioDocument {
    PortfolioDocument {
        weights: p.weights().iter().map(|w| w.iter().cloned().collect()).collect(),
    }
}
