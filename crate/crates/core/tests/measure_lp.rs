mod common;

use nalgebra::{DMatrix, DVector};
use numkit_core::growthopt::{solve_model, transform_model, SolveOptions};
use numkit_core::mc::MartingaleVerdict;
use numkit_core::measure::{
    quadratic_tilt_from_sums, quadratic_tilt_weights, reweighted_model, sigma_change, sigma_density_step,
    verify_sigma_change, DensityStatus, Y_MIN,
};
use numkit_core::mc::simulate;
use numkit_core::model::{Atom, ClockGrid, LevyAtomMeasure, LocalTriplet, MarketModel, Portfolio, StepKind};
use rand::Rng;

fn two_atom() -> LocalTriplet {
    LocalTriplet::scalar(0.2, 0.0, &[(1.0, 1.0), (-0.5, 1.0)]).unwrap()
}

/// Oracle system `A (Y − 1) = −b` with the neutrality row on predictable steps.
fn oracle(t: &LocalTriplet, kind: StepKind) -> Option<(f64, Vec<f64>)> {
    let atoms = t.levy().atoms();
    let d = t.dimension();
    let neutral = kind == StepKind::PredictableJump;
    let rows = d + usize::from(neutral);
    let a = DMatrix::from_fn(rows, atoms.len(), |r, i| if r < d { atoms[i].k * atoms[i].x[r] } else { atoms[i].k });
    let rhs = DVector::from_fn(rows, |r, _| if r < d { -t.b()[r] } else { 0.0 });
    let k: Vec<f64> = atoms.iter().map(|a| a.k).collect();
    common::vertex_enumeration(&k, &a, &rhs, Y_MIN)
}

#[test]
fn zero_drift_gives_identity_density() {
    let t = LocalTriplet::scalar(0.0, 0.1, &[(0.3, 1.0), (-0.2, 0.5)]).unwrap();
    let s = sigma_density_step(&t, StepKind::Continuous, 0.5).unwrap();
    assert_eq!(s.y, vec![1.0, 1.0]);
    assert_eq!(s.tv_cost, 0.0);
    assert_eq!(s.status, DensityStatus::Feasible);
}

#[test]
fn two_atom_example_matches_vertex_enumeration() {
    let t = two_atom();
    let s = sigma_density_step(&t, StepKind::Continuous, 0.5).unwrap();
    let (cost, y) = oracle(&t, StepKind::Continuous).unwrap();
    assert!((cost - 0.2).abs() <= 1e-10);
    assert!((s.tv_cost - cost).abs() <= 1e-10);
    for (a, b) in s.y.iter().zip([0.8, 1.0]) {
        assert!((a - b).abs() <= 1e-10);
    }
    for (a, b) in s.y.iter().zip(&y) {
        assert!((a - b).abs() <= 1e-10);
    }
    assert_eq!(s.status, DensityStatus::Feasible);
    assert!(s.residual_drift[0].abs() <= 1e-9);
}

#[test]
fn single_atom_flips_at_budget() {
    let t = LocalTriplet::scalar(0.2, 0.0, &[(-0.5, 1.0)]).unwrap();
    let s = sigma_density_step(&t, StepKind::Continuous, 0.5).unwrap();
    assert_eq!(s.status, DensityStatus::InfeasibleWithinBudget);
    assert!((s.y[0] - 1.4).abs() <= 1e-10);
    assert!((s.tv_cost - 0.4).abs() <= 1e-10);
    assert_eq!(sigma_density_step(&t, StepKind::Continuous, 1.0).unwrap().status, DensityStatus::Feasible);
    assert_eq!(sigma_density_step(&t, StepKind::Continuous, 0.8).unwrap().status, DensityStatus::Feasible);
    assert_eq!(
        sigma_density_step(&t, StepKind::Continuous, 0.8 - 1e-9).unwrap().status,
        DensityStatus::InfeasibleWithinBudget
    );
}

#[test]
fn random_one_dimensional_instances_match_oracle() {
    let mut rng = common::rng(2024);
    let mut checked = 0;
    for case in 0..400 {
        let n_atoms = rng.gen_range(1..=3);
        let atoms: Vec<(f64, f64)> = (0..n_atoms)
            .map(|_| {
                let x: f64 = rng.gen_range(-0.9..1.5);
                (if x.abs() < 0.05 { 0.3 } else { x }, rng.gen_range(0.1..2.0))
            })
            .collect();
        let Ok(t) = LocalTriplet::scalar(rng.gen_range(-0.6..0.6), 0.0, &atoms) else { continue };
        let kind = if case % 3 == 0 { StepKind::PredictableJump } else { StepKind::Continuous };
        let s = sigma_density_step(&t, kind, 1.0).unwrap();
        match oracle(&t, kind) {
            Some((cost, _)) => {
                assert_ne!(s.status, DensityStatus::StructurallyInfeasible, "case {case}: {t:?}");
                assert_ne!(s.status, DensityStatus::Indeterminate, "case {case}");
                assert!((s.tv_cost - cost).abs() <= 1e-10, "case {case}: {} vs {cost}", s.tv_cost);
                assert_eq!(s.status == DensityStatus::Feasible, cost <= 0.5 + 1e-12);
                assert!(s.residual_drift[0].abs() <= 1e-9);
                assert!(s.y.iter().all(|&v| v >= Y_MIN));
                if kind == StepKind::PredictableJump {
                    let neutral: f64 = t.levy().atoms().iter().zip(&s.y).map(|(a, y)| a.k * (y - 1.0)).sum();
                    assert!(neutral.abs() <= 1e-9);
                }
                checked += 1;
            }
            None => assert_eq!(s.status, DensityStatus::StructurallyInfeasible, "case {case}"),
        }
    }
    assert!(checked > 150);
}

#[test]
fn enlarging_budget_never_loses_feasibility() {
    let mut rng = common::rng(8);
    for _ in 0..50 {
        let t = common::clean_triplet(&mut rng, 2, 4);
        let mut was_feasible = false;
        for eps in [0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0] {
            let s = sigma_density_step(&t, StepKind::Continuous, eps).unwrap();
            if was_feasible {
                assert_eq!(s.status, DensityStatus::Feasible);
            }
            was_feasible = s.status == DensityStatus::Feasible;
        }
    }
}

#[test]
fn nonzero_drift_is_never_free() {
    let mut rng = common::rng(15);
    for _ in 0..100 {
        let atoms: Vec<(f64, f64)> = vec![(rng.gen_range(0.1..1.0), 1.0), (-rng.gen_range(0.1..0.9), 1.0)];
        let b = rng.gen_range(0.01..0.3) * if rng.gen() { 1.0 } else { -1.0 };
        let t = LocalTriplet::scalar(b, 0.0, &atoms).unwrap();
        let s = sigma_density_step(&t, StepKind::Continuous, 10.0).unwrap();
        assert!(s.tv_cost > 0.0 || s.status != DensityStatus::Feasible);
    }
}

#[test]
fn unspanned_drift_is_structural() {
    // Diffusion-only drift cannot be removed by reweighting jumps.
    let t = LocalTriplet::new(
        DVector::from_vec(vec![0.1, 0.1]),
        DMatrix::from_row_slice(2, 2, &[0.04, 0.0, 0.0, 0.0]),
        LevyAtomMeasure::new(vec![Atom::new(vec![0.0, 0.5], 1.0), Atom::new(vec![0.0, -0.5], 1.0)]).unwrap(),
    )
    .unwrap();
    let s = sigma_density_step(&t, StepKind::Continuous, 1.0).unwrap();
    assert_eq!(s.status, DensityStatus::StructurallyInfeasible);
    let u = s.unspanned.unwrap();
    assert!((u[0] + 0.1).abs() < 1e-12 && u[1].abs() < 1e-12);
}

#[test]
fn solver_numeraire_needs_no_density() {
    let mut rng = common::rng(33);
    for _ in 0..10 {
        let model = common::clean_model(&mut rng, 2, 3, 4);
        let (g, _) = solve_model(&model, &SolveOptions::default()).unwrap();
        let sol = sigma_change(&model, &g, 0.5).unwrap();
        assert_eq!(sol.status, DensityStatus::Feasible);
        assert_eq!(sol.integrated_cost, 0.0);
        assert!(sol.densities().iter().flatten().all(|&y| y == 1.0));
    }
}

#[test]
fn suboptimal_numeraire_on_two_atom_example() {
    let model = MarketModel::single_step(two_atom()).unwrap();
    let zero = Portfolio::zeros(&model);
    let sol = sigma_change(&model, &zero, 0.5).unwrap();
    assert_eq!(sol.status, DensityStatus::Feasible);
    assert!((sol.steps[0].y[0] - 0.8).abs() <= 1e-10);
    assert!((sol.max_step_cost - 0.2).abs() <= 1e-10);

    // A nonzero suboptimal g gives the density of the transformed step.
    let g = Portfolio::constant(&model, &[0.1]);
    let sol = sigma_change(&model, &g, 2.0).unwrap();
    let direct = sigma_density_step(&transform_model(&model, &g).unwrap().triplets()[0], StepKind::Continuous, 2.0).unwrap();
    assert_eq!(sol.steps[0], direct);
    assert!(sol.steps[0].tv_cost > 0.0);
}

#[test]
fn structural_failure_names_the_step() {
    let good = LocalTriplet::scalar(0.0, 0.0, &[(0.5, 1.0)]).unwrap();
    let bad = LocalTriplet::scalar(0.1, 0.04, &[]).unwrap();
    let model = MarketModel::new(1, ClockGrid::uniform(3, 1.0, 1.0).unwrap(), vec![good.clone(), bad, good]).unwrap();
    let sol = sigma_change(&model, &Portfolio::zeros(&model), 0.5).unwrap();
    assert_eq!(sol.status, DensityStatus::StructurallyInfeasible);
    assert_eq!(sol.failing_steps, vec![1]);
}

#[test]
fn reweighted_two_atom_model_is_driftless() {
    let model = MarketModel::single_step(two_atom()).unwrap();
    let sol = sigma_change(&model, &Portfolio::zeros(&model), 0.5).unwrap();
    let rw = reweighted_model(&model, &sol.densities()).unwrap();
    let t = &rw.triplets()[0];
    assert!(t.b()[0].abs() <= 1e-12);
    assert!((t.levy().atoms()[0].k - 0.8).abs() <= 1e-10);
}

#[test]
fn verify_two_atom_change_is_martingale() {
    let model = MarketModel::single_step(two_atom()).unwrap();
    let zero = Portfolio::zeros(&model);
    let sol = sigma_change(&model, &zero, 0.5).unwrap();
    let f: Vec<_> = [-0.5, 0.4, 1.0].iter().map(|&v| Portfolio::constant(&model, &[v])).collect();
    let v = verify_sigma_change(&model, &zero, &sol, &f, 100_000, 4).unwrap();
    assert!(v.transformed_drift <= 1e-9);
    assert_eq!(v.report.verdict, MartingaleVerdict::MartingaleConsistent, "{:?}", v.report);
}

#[test]
fn infeasible_densities_rejected_before_simulation() {
    let t = LocalTriplet::scalar(0.2, 0.0, &[(-0.5, 1.0)]).unwrap();
    let model = MarketModel::single_step(t).unwrap();
    let zero = Portfolio::zeros(&model);
    let sol = sigma_change(&model, &zero, 0.5).unwrap();
    assert!(verify_sigma_change(&model, &zero, &sol, &[zero.clone()], 10, 1).is_err());
}

#[test]
fn tilt_formula_and_normalization() {
    let w = quadratic_tilt_from_sums(&[0.0; 5], 3).unwrap();
    assert!(w.weights.iter().all(|&x| x == 1.0));
    let w = quadratic_tilt_from_sums(&[4.0, 0.0], 4).unwrap();
    assert_eq!(w.unnormalized[0], 0.5);
    assert!(((w.weights[0] + w.weights[1]) / 2.0 - 1.0).abs() < 1e-15);
    assert!(w.weights.iter().all(|&x| x > 0.0 && x <= w.c_n));
}

#[test]
fn tilt_deviation_shrinks_with_n() {
    let model = MarketModel::single_step(LocalTriplet::scalar(0.0, 0.0, &[(1.0, 2.0), (-0.5, 1.0)]).unwrap()).unwrap();
    let bundle = simulate(&model, 20_000, 5).unwrap();
    let devs: Vec<f64> = [1, 4, 16, 64, 256]
        .iter()
        .map(|&n| quadratic_tilt_weights(&model, &bundle, n).unwrap().mean_abs_deviation)
        .collect();
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    assert!(devs[4] < 0.01);
}
