#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use subnet_outlier::rng::{seeded, DetRng};
use subnet_outlier::{
    build_problem, component_laplacians, DesignSet, NetworkDatabase, NetworkFactor, NetworkSample, SolverProblem,
    SummaryGraph,
};

pub fn rng(seed: u64) -> DetRng {
    seeded(seed)
}

pub fn normal(r: &mut DetRng) -> f64 {
    StandardNormal.sample(r)
}

/// Random symmetric weights in (0, 1] with edge probability `density`.
pub fn random_graph(r: &mut DetRng, n: usize, density: f64) -> SummaryGraph {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < density {
                let w = 1.0 - r.random::<f64>();
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    SummaryGraph::from_adjacency(a).unwrap()
}

pub fn random_design(r: &mut DetRng, k: usize, n: usize) -> DesignSet {
    DesignSet {
        x: DMatrix::from_fn(2 * k, n, |_, _| normal(r)),
        z: DVector::from_fn(2 * k, |i, _| if i < k { 1.0 } else { -1.0 }),
        neighbor_ids: (0..k).map(|i| format!("nb{i}")).collect(),
        candidate_id: "cand".into(),
    }
}

pub fn factor_of(g: &SummaryGraph) -> Arc<NetworkFactor> {
    Arc::new(NetworkFactor::new(component_laplacians(g).unwrap(), g.n_nodes()).unwrap())
}

pub fn random_problem(r: &mut DetRng, n: usize, k: usize, lambda1: f64, lambda2: f64) -> SolverProblem {
    let design = random_design(r, k, n);
    let g = random_graph(r, n, 0.3);
    build_problem(&design, Some(&factor_of(&g)), lambda1, lambda2).unwrap()
}

pub fn random_vector(r: &mut DetRng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(r))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Database with `m` samples over `n` nodes on a path topology.
pub fn small_db(r: &mut DetRng, n: usize, m: usize) -> NetworkDatabase {
    NetworkDatabase::new(
        (0..n).map(|i| format!("g{i}")).collect(),
        (0..n - 1).map(|i| (i, i + 1)),
        (0..m)
            .map(|s| NetworkSample::new(format!("s{s:02}"), (0..n).map(|_| 2.0 + normal(r)).collect()))
            .collect(),
        None,
    )
    .unwrap()
}
