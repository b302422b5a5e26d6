//! Independent reference implementations used as test oracles. Nothing here
//! calls the solver, detector or LP code under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use numkit_core::model::{Atom, ClockGrid, LevyAtomMeasure, LocalTriplet, MarketModel, StepKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

/// Vectors positively spanning `R^s` (zero sum, perturbed regular simplex).
fn positive_spanning_set(rng: &mut ChaCha8Rng, s: usize) -> Vec<DVector<f64>> {
    match s {
        0 => vec![],
        1 => vec![
            DVector::from_element(1, rng.gen_range(0.1..0.6)),
            DVector::from_element(1, -rng.gen_range(0.1..0.6)),
        ],
        _ => {
            // s+1 vertices of a simplex centred at the origin.
            let mut pts: Vec<DVector<f64>> = (0..s).map(|i| DVector::from_fn(s, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
            pts.push(DVector::from_element(s, -1.0 / s as f64));
            let centre = pts.iter().fold(DVector::zeros(s), |acc, p| acc + p) / (s + 1) as f64;
            pts.iter()
                .map(|p| {
                    let scale = rng.gen_range(0.1..0.5);
                    let jitter = DVector::from_fn(s, |_, _| rng.gen_range(-0.05..0.05));
                    (p - &centre + jitter) * scale
                })
                .collect()
        }
    }
}

/// A triplet without immediate arbitrage and with a finite optimum: the
/// atoms' projections onto `ker c` positively span it.
pub fn clean_triplet(rng: &mut ChaCha8Rng, d: usize, max_atoms: usize) -> LocalTriplet {
    loop {
        let r = rng.gen_range(0..=d);
        let q = random_orthonormal(rng, d);
        let range = q.columns(0, r).into_owned();
        let kernel = q.columns(r, d - r).into_owned();
        let lambda = DVector::from_fn(r, |_, _| rng.gen_range(0.01..0.2));
        let c = &range * DMatrix::from_diagonal(&lambda) * range.transpose();
        let c = (&c + c.transpose()) * 0.5;

        let spanning = positive_spanning_set(rng, d - r);
        let extra = if spanning.len() < max_atoms { rng.gen_range(0..=max_atoms - spanning.len()) } else { 0 };
        if spanning.len() > max_atoms {
            continue;
        }
        let mut atoms = Vec::new();
        for u in &spanning {
            let w = DVector::from_fn(r, |_, _| rng.gen_range(-0.2..0.2));
            let x = &kernel * u + &range * w;
            atoms.push(Atom::new(x.iter().copied().collect::<Vec<_>>(), rng.gen_range(0.2..2.0)));
        }
        for _ in 0..extra {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
            atoms.push(Atom::new(x, rng.gen_range(0.1..1.5)));
        }
        let b = DVector::from_fn(d, |_, _| rng.gen_range(-0.2..0.2));
        let Ok(levy) = LevyAtomMeasure::new(atoms) else { continue };
        if let Ok(t) = LocalTriplet::new(b, c, levy) {
            return t;
        }
    }
}

/// A multi-step continuous model built from clean triplets.
pub fn clean_model(rng: &mut ChaCha8Rng, d: usize, steps: usize, max_atoms: usize) -> MarketModel {
    let grid = ClockGrid::uniform(steps, 1.0, 1.0).unwrap();
    let triplets = (0..steps).map(|_| clean_triplet(rng, d, max_atoms)).collect();
    MarketModel::new(d, grid, triplets).unwrap()
}

pub fn single(t: LocalTriplet) -> MarketModel {
    MarketModel::new(
        t.dimension(),
        ClockGrid::new(vec![1.0], vec![1.0], vec![StepKind::Continuous]).unwrap(),
        vec![t],
    )
    .unwrap()
}

/// Growth rate evaluated directly from its definition.
pub fn psi(t: &LocalTriplet, v: &DVector<f64>) -> f64 {
    let mut s = t.b().dot(v) - 0.5 * v.dot(&(t.c() * v));
    for a in t.levy().atoms() {
        let y = v.dot(&a.x);
        s -= a.k * (y - (1.0 + y).ln());
    }
    s
}

/// `F(v, v0) = (v − v0)·(b − c v0) − Σ k (v − v0)·x (v0·x)/(1 + v0·x)`.
pub fn drift_functional(t: &LocalTriplet, v: &DVector<f64>, v0: &DVector<f64>) -> f64 {
    let dv = v - v0;
    let mut s = dv.dot(&(t.b() - t.c() * v0));
    for a in t.levy().atoms() {
        let y0 = v0.dot(&a.x);
        s -= a.k * dv.dot(&a.x) * y0 / (1.0 + y0);
    }
    s
}

/// Largest `s` with `1 + (v + s·dir)·x ≥ margin` for every atom.
pub fn reach(t: &LocalTriplet, v: &DVector<f64>, dir: &DVector<f64>, margin: f64) -> f64 {
    t.levy()
        .atoms()
        .iter()
        .filter(|a| dir.dot(&a.x) < 0.0)
        .map(|a| (1.0 + v.dot(&a.x) - margin) / -dir.dot(&a.x))
        .fold(f64::INFINITY, f64::min)
}

/// Uniform-radius sample in `D ∩ {|v − centre| ≤ radius}` along a random direction.
pub fn domain_point(rng: &mut ChaCha8Rng, t: &LocalTriplet, centre: &DVector<f64>, radius: f64) -> DVector<f64> {
    let d = t.dimension();
    let mut dir: DVector<f64> = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    dir /= dir.norm().max(1e-300);
    let limit = radius.min(0.999 * reach(t, centre, &dir, 0.0));
    centre + dir * (rng.gen::<f64>() * limit)
}

/// Scalar optimum by successive grid refinement on `D`.
pub fn grid_search_1d(t: &LocalTriplet) -> f64 {
    let one = DVector::from_element(1, 1.0);
    let zero = DVector::zeros(1);
    let hi = reach(t, &zero, &one, 1e-14).min(1e4);
    let lo = -reach(t, &zero, &(-&one), 1e-14).min(1e4);
    let (mut a, mut b) = (lo, hi);
    let f = |v: f64| psi(t, &DVector::from_element(1, v));
    for _ in 0..60 {
        let n = 200;
        let h = (b - a) / n as f64;
        let best = (0..=n)
            .map(|i| a + i as f64 * h)
            .map(|v| (v, f(v)))
            .fold((a, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        a = (best - h).max(lo);
        b = (best + h).min(hi);
        if b - a < 1e-13 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Orthonormal basis of `ker c`.
pub fn kernel_of(c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = c.nrows();
    let eig = c.clone().symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..d)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-10)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let mut m = DMatrix::zeros(d, cols.len());
    for (j, col) in cols.iter().enumerate() {
        m.set_column(j, col);
    }
    m
}

/// Membership in the immediate-arbitrage set: `c v = 0`, `v·x ≥ 0` on every
/// atom, `v·(b − Σkx) ≥ 0`, and the position is not null.
pub fn in_arbitrage_set(t: &LocalTriplet, v: &DVector<f64>, tol: f64) -> bool {
    let d = t.dimension();
    let net = t.b() - t.levy().atoms().iter().fold(DVector::zeros(d), |acc, a| acc + &a.x * a.k);
    if (t.c() * v).amax() > tol {
        return false;
    }
    let jumps: Vec<f64> = t.levy().atoms().iter().map(|a| v.dot(&a.x)).collect();
    if jumps.iter().any(|&j| j < -tol) || net.dot(v) < -tol {
        return false;
    }
    jumps.iter().any(|&j| j > tol) || net.dot(v) > tol
}

/// Random directions in `ker c` (plus its basis vectors and their negatives)
/// tested against the membership predicate.
pub fn brute_force_arbitrage(rng: &mut ChaCha8Rng, t: &LocalTriplet, n: usize) -> Option<DVector<f64>> {
    let k = kernel_of(t.c());
    if k.ncols() == 0 {
        return None;
    }
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    for j in 0..k.ncols() {
        candidates.push(k.column(j).into_owned());
        candidates.push(-k.column(j).into_owned());
    }
    for _ in 0..n {
        let u = DVector::from_fn(k.ncols(), |_, _| rng.gen_range(-1.0..1.0));
        candidates.push(&k * u);
    }
    candidates.into_iter().find(|v| v.norm() > 0.0 && in_arbitrage_set(t, v, 1e-12))
}

/// Exhaustive search over the vertices of the piecewise-linear problem
/// `min Σ kᵢ|zᵢ|` subject to `A z = r`, `zᵢ ≥ y_min − 1`; returns `(cost, Y)`.
/// Each coordinate sits at a breakpoint (0 or its lower bound) or is free, and
/// free coordinates solve the equality system.
pub fn vertex_enumeration(k: &[f64], a: &DMatrix<f64>, r: &DVector<f64>, y_min: f64) -> Option<(f64, Vec<f64>)> {
    let n = k.len();
    let e = a.nrows();
    let lower = y_min - 1.0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            state.push(c % 3);
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut z = vec![0.0; n];
        for i in 0..n {
            if state[i] == 1 {
                z[i] = lower;
            }
        }
        let fixed = DVector::from_fn(e, |row, _| (0..n).map(|i| a[(row, i)] * z[i]).sum::<f64>());
        let rhs = r - fixed;
        if free.is_empty() {
            if rhs.amax() > 1e-12 {
                continue;
            }
        } else {
            let sub = DMatrix::from_fn(e, free.len(), |row, j| a[(row, free[j])]);
            let Some(sol) = sub.clone().svd(true, true).solve(&rhs, 1e-12).ok() else { continue };
            if (&sub * &sol - &rhs).amax() > 1e-10 {
                continue;
            }
            for (j, &i) in free.iter().enumerate() {
                z[i] = sol[j];
            }
        }
        if z.iter().any(|&zi| zi < lower - 1e-12) {
            continue;
        }
        let cost: f64 = z.iter().zip(k).map(|(zi, ki)| ki * zi.abs()).sum();
        if best.as_ref().map_or(true, |(bc, _)| cost < *bc - 1e-15) {
            best = Some((cost, z.iter().map(|zi| 1.0 + zi).collect()));
        }
    }
    best
}
