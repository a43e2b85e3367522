//! Outlier detection for network-structured samples with explanatory subnetworks.
//!
//! Each sample is contrasted against its nearest neighbors by a sparse,
//! network-regularized squared-hinge model. The nonzero coefficients pick the
//! explanatory subnetworks, and a local outlier factor computed on those
//! nodes gives the score. Scores are combined over a `(K, lambda1)` grid by
//! taking the per-sample maximum.
//!
//! ```no_run
//! use subnet_outlier::{detect_all, load_database, Grid, SolverOptions, DEFAULT_LAMBDA2};
//!
//! let db = load_database("data/").unwrap().impute_missing();
//! let report = detect_all(&db, &Grid::default(), DEFAULT_LAMBDA2, 0, &SolverOptions::default()).unwrap();
//! println!("most outlying: {}", report.ranking[0]);
//! ```

pub mod error;
pub mod eval;
pub mod io;
pub mod lof;
pub mod model;
pub mod neighbors;
pub mod objective;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod solver;
pub mod summary;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{evaluate_report, roc_auc, subnetwork_recovery, Metrics, Recovery, Roc};
pub use io::{load_database, write_database};
pub use lof::{lof, lof_score, SubspaceScore};
pub use model::{edge, Edge, Label, NetworkDatabase, NetworkSample};
pub use neighbors::{assemble_design, cosine_distance, k_nearest, upsample, DesignSet};
pub use objective::{build_problem, evaluate, gradient, hessian, objective_value, NetworkFactor, SolverProblem};
pub use report::{report_json, to_stable_string, ReportView};
pub use scoring::{
    detect_all, detect_one, detect_sample, extract_subnetworks, CandidateContext, Detection, DetectionConfig,
    Explanation, Grid, GridPoint, OutlierReport, SampleRecord, DEFAULT_K_LIST, DEFAULT_LAMBDA1_LIST,
    DEFAULT_LAMBDA2,
};
pub use solver::{
    newton_solve, recover_coefficients, solve, IterationRecord, ModelCoefficients, Solution, SolverOptions,
};
pub use summary::{
    build_summary_graph, component_laplacians, laplacian_factor, normalized_laplacian, LaplacianFactor,
    SummaryGraph,
};
pub use synth::{generate_synthetic, write_synthetic, GroundTruth, SynthConfig, Topology};
