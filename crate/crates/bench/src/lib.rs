//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use subnet_outlier::{
    assemble_design, build_problem, build_summary_graph, component_laplacians, generate_synthetic, NetworkDatabase,
    NetworkFactor, SolverProblem, SummaryGraph, SynthConfig,
};

/// Synthetic database with `n_nodes` nodes and the default sample counts.
pub fn database(n_nodes: usize) -> NetworkDatabase {
    let cfg = SynthConfig {
        n_nodes,
        seed: 1,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg).expect("valid synthetic config").0
}

/// First sample id, which is also the first planted outlier when one exists.
pub fn candidate(db: &NetworkDatabase) -> String {
    db.sample_ids().next().expect("non-empty database").to_string()
}

pub fn summary_graph(db: &NetworkDatabase, candidate: &str, k: usize) -> SummaryGraph {
    let design = assemble_design(db, candidate, k, 0).expect("k in range");
    build_summary_graph(db, candidate, &design.neighbor_ids).expect("graph")
}

pub fn problem(db: &NetworkDatabase, candidate: &str, k: usize, lambda1: f64, lambda2: f64) -> SolverProblem {
    let design = assemble_design(db, candidate, k, 0).expect("k in range");
    let g = build_summary_graph(db, candidate, &design.neighbor_ids).expect("graph");
    let factor = Arc::new(NetworkFactor::new(component_laplacians(&g).expect("laplacians"), g.n_nodes()).expect("factor"));
    build_problem(&design, Some(&factor), lambda1, lambda2).expect("problem")
}
