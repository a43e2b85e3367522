mod common;

use common::*;
use nalgebra::DVector;
use rand::RngExt;
use subnet_outlier::solver::solve_shrinking;
use subnet_outlier::{newton_solve, objective_value, recover_coefficients, solve, SolverOptions};

fn uncapped() -> SolverOptions {
    SolverOptions {
        max_iterations: 200,
        ..SolverOptions::default()
    }
}

#[test]
fn objective_value_does_not_depend_on_the_start() {
    let mut r = rng(20);
    for trial in 0..15 {
        let n = 3 + trial % 10;
        let p = random_problem(&mut r, n, 2 + trial % 6, [0.0, 0.5, 2.0][trial % 3], 1.0);
        let values: Vec<f64> = (0..3)
            .map(|_| {
                let w0 = DVector::from_fn(2 * n, |_, _| r.random::<f64>());
                let s = newton_solve(&p, &uncapped(), Some(&w0)).unwrap();
                assert!(s.converged);
                s.objective
            })
            .collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - lo) / lo.abs().max(1e-12) <= 1e-6, "{values:?}");
    }
}

#[test]
fn trace_is_monotone_and_signs_hold() {
    let mut r = rng(21);
    for trial in 0..15 {
        let n = 4 + trial % 12;
        let p = random_problem(&mut r, n, 3, 1.0, 1.0);
        let s = newton_solve(&p, &uncapped(), None).unwrap();
        for pair in s.trace.windows(2) {
            assert!(pair[1].objective <= pair[0].objective + 1e-12);
        }
        // canonical iterates keep y_i w~_i >= 0
        for i in 0..2 * n {
            assert!(p.y[i] * s.w_tilde[i] >= -1e-12);
        }
    }
}

#[test]
fn shrinking_agrees_with_plain_newton() {
    let mut r = rng(22);
    for trial in 0..20 {
        let n = 5 + trial % 20;
        let p = random_problem(&mut r, n, 2 + trial % 8, [0.0, 0.1, 1.0, 10.0][trial % 4], 1.0);
        let plain = newton_solve(&p, &uncapped(), None).unwrap();
        // a one-step first pass forces the shrink-and-restart path
        let shrunk = solve_shrinking(&p, &uncapped(), 1).unwrap();
        assert!(shrunk.converged);
        assert!(rel_err(plain.objective, shrunk.objective) <= 1e-8);
        let a = recover_coefficients(&plain, &uncapped()).map(|c| c.support);
        let b = recover_coefficients(&shrunk, &uncapped()).map(|c| c.support);
        assert_eq!(a.ok(), b.ok(), "trial {trial}");
    }
}

#[test]
fn default_solve_reaches_tolerance_quickly() {
    let mut r = rng(23);
    let mut quick = 0;
    let total = 20;
    for trial in 0..total {
        let n = 5 + trial;
        let p = random_problem(&mut r, n, 5, 1.0, 1.0);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        let value = objective_value(&p, &s.w_tilde);
        assert_eq!(value, s.objective);
        if s.converged && s.iterations <= 10 {
            quick += 1;
        }
    }
    assert!(quick * 10 >= total * 9, "{quick}/{total}");
}

#[test]
fn recovered_weights_have_unit_l1_norm() {
    let mut r = rng(24);
    for trial in 0..10 {
        let n = 4 + trial;
        let p = random_problem(&mut r, n, 3, 0.5, 1.0);
        let c = recover_coefficients(&solve(&p, &SolverOptions::default()).unwrap(), &SolverOptions::default())
            .unwrap();
        let l1: f64 = c.w.iter().map(|v| v.abs()).sum();
        assert!((l1 - 1.0).abs() <= 1e-12);
        assert!(c.support.iter().all(|&i| c.w[i] != 0.0));
    }
}
