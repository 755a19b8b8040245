use std::sync::OnceLock;

use leonet_core::harness::{build_scenario, ExperimentConfig, Scenario};
use leonet_core::linalg::{Matrix, Vector};
use leonet_core::solver::{
    centralized_wls, consensus, dense_wls, gt_run, gt_solve, mean, GtParams, NodeProblem, Preconditioner,
};
use leonet_core::topology::{metropolis, GraphSchedule, GraphSnapshot};
use leonet_core::Error;
use proptest::prelude::*;

fn desk() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| build_scenario(&ExperimentConfig::desk()).unwrap())
}

fn offset(base: &Vector, seeds: &[f64]) -> Vector {
    Vector::from_iterator(base.len(), base.iter().enumerate().map(|(i, b)| b + seeds[i % seeds.len()]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences(
        node in 0usize..20,
        dx in prop::collection::vec(-1.0..1.0f64, 7),
        dz in prop::collection::vec(-1.0..1.0f64, 11),
    ) {
        let sc = desk();
        let p = &sc.problems[node];
        let x = offset(&sc.truth_local[node], &dx);
        let z = offset(&sc.truth_global, &dz);
        let g = p.grad_z(&x, &z);
        let h = 1e-3;
        let fd = Vector::from_iterator(z.len(), (0..z.len()).map(|i| {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[i] += h;
            zm[i] -= h;
            (p.objective(&x, &zp) - p.objective(&x, &zm)) / (2.0 * h)
        }));
        prop_assert!((&fd - &g).norm() <= 1e-6 * g.norm());
    }

    #[test]
    fn consensus_preserves_the_mean(
        values in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 3), 6),
        rounds in 1usize..30,
    ) {
        let g = GraphSnapshot::from_edges(0, 6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3)]);
        let w = metropolis(&g);
        let phi: Vec<Vector> = values.iter().map(|v| Vector::from_row_slice(v)).collect();
        let mixed = consensus(&phi, &w, rounds).unwrap();
        prop_assert!((mean(&mixed) - mean(&phi)).amax() <= 1e-9);
    }
}

#[test]
fn reduced_gradient_agrees_at_the_local_minimizer() {
    let sc = desk();
    let z = offset(&sc.truth_global, &[0.2, -0.7, 0.05]);
    for p in &sc.problems {
        let x = p.local_x(&z);
        let raw = p.grad_z(&x, &z);
        assert!((&raw - p.reduced_gradient(&z)).norm() <= 1e-6 * raw.norm().max(1.0));
        assert!(p.grad_x(&x, &z).amax() <= 1e-6 * raw.norm().max(1.0));
    }
}

#[test]
fn centralized_matches_dense_least_squares() {
    let sc = desk();
    let central = centralized_wls(&sc.problems).unwrap();
    let a = sc.model.partition.reassemble();
    let var = Vector::from_iterator(a.nrows(), sc.problems.iter().flat_map(|p| p.weights.iter().map(|w| 1.0 / w)));
    let y = Vector::from_iterator(a.nrows(), sc.problems.iter().flat_map(|p| p.y.iter().copied()));
    let sol = dense_wls(&a, &var, &y).unwrap();
    let p = central.z.len();
    let z = sol.rows(sol.len() - p, p);
    assert!((z - &central.z).amax() <= 1e-9 * central.z.amax());
}

#[test]
fn tracking_invariant_holds_across_graph_switches() {
    let sc = desk();
    let schedule = sc.schedule(2_000);
    assert!(2 * schedule.period < 2_000 && schedule.graphs[0] != schedule.graphs[1]);
    let params = GtParams {
        max_iterations: 2_000,
        ..GtParams::default()
    };
    let trace = gt_run(&sc.problems, &schedule, &params, &sc.initial_state(), None).unwrap();
    assert_eq!(trace.records.len(), 2_001);
    for r in &trace.records {
        assert!(r.tracking_gap <= 1e-9, "iteration {}: gap {}", r.k, r.tracking_gap);
    }
}

#[test]
fn zero_step_freezes_the_state() {
    let sc = desk();
    let z0 = offset(&sc.truth_global, &[0.3, -0.1]);
    let params = GtParams {
        step_size: 0.0,
        max_iterations: 25,
        ..GtParams::default()
    };
    let trace = gt_run(&sc.problems, &sc.schedule(25), &params, &z0, None).unwrap();
    for z in &trace.zs {
        assert!((z - &z0).amax() <= 1e-12 * z0.amax());
    }
}

/// Plain gradient tracking with a dense mixing matrix, written out directly.
fn textbook_gt(problems: &[NodeProblem], w: &Matrix, step: f64, iters: usize, z0: &Vector) -> Vec<Vector> {
    let n = problems.len();
    let grad = |l: usize, z: &Vector| {
        let p = &problems[l];
        p.grad_z(&p.local_x(z), z)
    };
    let mut z: Vec<Vector> = vec![z0.clone(); n];
    let mut g: Vec<Vector> = (0..n).map(|l| grad(l, &z[l])).collect();
    for _ in 0..iters {
        let psi: Vec<Vector> = (0..n).map(|l| &z[l] - &g[l] * step).collect();
        let znew: Vec<Vector> = (0..n)
            .map(|l| (0..n).fold(Vector::zeros(z0.len()), |acc, q| acc + &psi[q] * w[(q, l)]))
            .collect();
        let gnew: Vec<Vector> = (0..n)
            .map(|l| {
                let mixed = (0..n).fold(Vector::zeros(z0.len()), |acc, q| acc + &g[q] * w[(q, l)]);
                mixed + grad(l, &znew[l]) - grad(l, &z[l])
            })
            .collect();
        z = znew;
        g = gnew;
    }
    z
}

#[test]
fn vanilla_iteration_matches_the_textbook_recursion() {
    let sc = desk();
    let schedule = GraphSchedule::new(vec![sc.graphs[0].clone()], 40);
    let params = GtParams {
        step_size: 1e-7,
        momentum: 0.0,
        rounds: 1,
        max_iterations: 40,
        preconditioner: Preconditioner::Identity,
        ..GtParams::default()
    };
    let z0 = sc.initial_state();
    let trace = gt_run(&sc.problems, &schedule, &params, &z0, None).unwrap();
    let expected = textbook_gt(&sc.problems, &schedule.mixing[0].to_dense(), 1e-7, 40, &z0);
    let scale = expected.iter().map(|z| z.amax()).fold(0.0, f64::max);
    for (a, b) in trace.zs.iter().zip(&expected) {
        assert!((a - b).amax() <= 1e-9 * scale);
    }
}

#[test]
fn converges_to_the_centralized_solution() {
    let sc = desk();
    let central = centralized_wls(&sc.problems).unwrap();
    let params = GtParams {
        max_iterations: 1_500,
        ..GtParams::default()
    };
    let trace = gt_solve(&sc.problems, &sc.schedule(1_500), &params, &sc.initial_state(), Some(&central.z)).unwrap();
    assert!(trace.iterations_to(1e-10).is_some());
    for (x, xc) in trace.xs.iter().zip(&central.xs) {
        assert!((x - xc).amax() <= 1e-4);
    }
}

#[test]
fn divergence_is_recorded_and_reported() {
    let sc = desk();
    let params = GtParams {
        step_size: 0.4,
        momentum: 0.0,
        rounds: 1,
        max_iterations: 500,
        ..GtParams::default()
    };
    let z0 = sc.initial_state();
    let trace = gt_run(&sc.problems, &sc.schedule(500), &params, &z0, None).unwrap();
    let at = trace.diverged_at.expect("large vanilla step should diverge");
    assert_eq!(trace.iterations, at);
    assert_eq!(
        gt_solve(&sc.problems, &sc.schedule(500), &params, &z0, None).unwrap_err(),
        Error::Diverged { iteration: at }
    );
}

#[test]
fn tolerance_stops_early() {
    let sc = desk();
    let params = GtParams {
        tolerance: Some(1e-3),
        ..GtParams::default()
    };
    let trace = gt_solve(&sc.problems, &sc.schedule(4_000), &params, &sc.initial_state(), None).unwrap();
    assert!(trace.iterations < 4_000);
    assert!(trace.last().unwrap().avg_grad_norm < 1e-3);
}

#[test]
fn node_problem_rejects_bad_inputs() {
    let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let b = Matrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
    let ones = Vector::from_element(3, 1.0);
    assert!(NodeProblem::new(a.clone(), b.clone(), &ones, ones.clone()).is_ok());
    assert!(matches!(
        NodeProblem::new(a.clone(), b.clone(), &Vector::from_element(2, 1.0), ones.clone()),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(matches!(
        NodeProblem::new(a.clone(), b.clone(), &Vector::from_row_slice(&[1.0, 0.0, 1.0]), ones.clone()),
        Err(Error::NotPositiveDefinite(_))
    ));
    let dup = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
    assert!(matches!(NodeProblem::new(dup, b, &ones, ones.clone()), Err(Error::RankDeficient { .. })));
}
