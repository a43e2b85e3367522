mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use subnet_outlier::summary::{edge_sum_penalty, quadratic_penalty};
use subnet_outlier::{laplacian_factor, normalized_laplacian};

/// `[[L, -L], [-L, L]]`
fn split_form(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(l);
    out.view_mut((n, n), (n, n)).copy_from(l);
    out.view_mut((0, n), (n, n)).copy_from(&(-l));
    out.view_mut((n, 0), (n, n)).copy_from(&(-l));
    out
}

fn split(w: &DVector<f64>) -> DVector<f64> {
    let n = w.len();
    DVector::from_fn(2 * n, |i, _| if i < n { w[i].max(0.0) } else { (-w[i - n]).max(0.0) })
}

#[test]
fn split_quadratic_matches_laplacian_form() {
    let mut r = rng(1);
    for trial in 0..200 {
        let n = 2 + trial % 30;
        let g = random_graph(&mut r, n, 0.4);
        let f = factor_of(&g);
        let l = f.laplacian();
        let w = random_vector(&mut r, n);
        let wt = split(&w);
        let lhs = w.dot(&(&l * &w));
        let rhs = wt.dot(&(split_form(&l) * &wt));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn signed_augmented_gram_matches_separate_terms() {
    let mut r = rng(2);
    for trial in 0..60 {
        let n = 2 + trial % 12;
        let k = 1 + trial % 5;
        let lambda1 = [0.0, 0.1, 1.0, 10.0][trial % 4];
        let p = random_problem(&mut r, n, k, lambda1, 1.0);
        let wt = DVector::from_fn(2 * n, |_, _| rand::RngExt::random::<f64>(&mut r));

        // recompute X1, X2 from the unsigned blocks
        let x1 = p.xtilde.view((0, 0), (2 * k, n)).clone_owned();
        let x2 = p.xtilde.view((0, n), (2 * k, n)).clone_owned();
        let mut signed = DMatrix::zeros(2 * k, 2 * n);
        signed.view_mut((0, 0), (2 * k, n)).copy_from(&x1);
        signed.view_mut((0, n), (2 * k, n)).copy_from(&(-x2));
        let data = (&signed * &wt).norm_squared();
        let network = match p.factor() {
            Some(f) => lambda1 * wt.dot(&(split_form(&f.laplacian()) * &wt)),
            None => 0.0,
        };
        let dy = DMatrix::from_diagonal(&p.y);
        let gram = &dy * &p.q * &dy;
        let rhs = wt.dot(&(gram * &wt));
        assert!(rel_err(data + network, rhs) <= 1e-8, "{} vs {rhs}", data + network);
    }
}

#[test]
fn laplacian_forms_agree_and_factor_reconstructs() {
    let mut r = rng(3);
    for trial in 0..100 {
        let n = 3 + trial % 25;
        let g = random_graph(&mut r, n, 0.35);
        for comp in g.connected_blocks() {
            let l = normalized_laplacian(&g, comp).unwrap();
            let w: Vec<f64> = (0..comp.len()).map(|_| normal(&mut r)).collect();
            let q = quadratic_penalty(&w, &l);
            let e = edge_sum_penalty(&w, &g, comp);
            assert!((q - e).abs() <= 1e-10 * q.abs().max(1.0));
            let f = laplacian_factor(&l).unwrap();
            let eig = l.clone().symmetric_eigen().eigenvalues;
            assert!(eig.min() >= -1e-12, "{}", eig.min());
            let err = (f.factor.transpose() * &f.factor - &l).amax();
            assert!(err <= 1e-10 * l.amax().max(1.0), "{err}");
            for i in 0..comp.len() {
                assert_eq!(l[(i, i)], 1.0);
            }
        }
    }
}

#[test]
fn random_psd_reconstruction() {
    let mut r = rng(4);
    let b = DMatrix::from_fn(20, 20, |_, _| normal(&mut r));
    let l = b.transpose() * &b;
    let l = (&l + l.transpose()) * 0.5;
    let f = laplacian_factor(&l).unwrap();
    assert!((f.factor.transpose() * &f.factor - &l).amax() <= 1e-10 * l.amax());
}
