//! Explanations, per-configuration detection, and the parameter-grid ensemble.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lof::lof_score;
use crate::model::NetworkDatabase;
use crate::neighbors::{assemble_design, check_k, DesignSet};
use crate::objective::{build_problem, NetworkFactor};
use crate::rng::derive_seed;
use crate::solver::{recover_coefficients, solve, IterationRecord, ModelCoefficients, SolverOptions};
use crate::summary::{build_summary_graph, component_laplacians, SummaryGraph};

pub const DEFAULT_K_LIST: [usize; 5] = [10, 15, 20, 25, 30];
pub const DEFAULT_LAMBDA1_LIST: [f64; 6] = [0.1, 0.5, 1.0, 2.5, 5.0, 10.0];
pub const DEFAULT_LAMBDA2: f64 = 1.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub candidate_id: String,
    pub selected_nodes: Vec<usize>,
    /// Connected pieces of the summary graph induced on the selected nodes.
    pub subnetworks: Vec<Vec<usize>>,
    pub weights: BTreeMap<usize, f64>,
}

impl Explanation {
    pub fn empty(candidate_id: &str) -> Self {
        Self {
            candidate_id: candidate_id.to_owned(),
            ..Self::default()
        }
    }
}

pub fn extract_subnetworks(candidate_id: &str, coeffs: &ModelCoefficients, g: &SummaryGraph) -> Explanation {
    let support = &coeffs.support;
    let mut taken = vec![false; support.len()];
    let mut subnetworks = Vec::new();
    for start in 0..support.len() {
        if taken[start] {
            continue;
        }
        taken[start] = true;
        let mut piece = vec![support[start]];
        let mut queue = VecDeque::from([start]);
        while let Some(a) = queue.pop_front() {
            for b in 0..support.len() {
                if !taken[b] && g.is_edge(support[a], support[b]) {
                    taken[b] = true;
                    piece.push(support[b]);
                    queue.push_back(b);
                }
            }
        }
        piece.sort_unstable();
        subnetworks.push(piece);
    }
    subnetworks.sort();
    Explanation {
        candidate_id: candidate_id.to_owned(),
        selected_nodes: support.clone(),
        subnetworks,
        weights: support.iter().map(|&i| (i, coeffs.w[i])).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: usize,
    pub lambda1: f64,
}

impl GridPoint {
    /// Tie-break order between equally scoring configurations.
    fn preference(&self, other: &Self) -> Ordering {
        self.k.cmp(&other.k).then(self.lambda1.total_cmp(&other.lambda1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub k_list: Vec<usize>,
    pub lambda1_list: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            k_list: DEFAULT_K_LIST.to_vec(),
            lambda1_list: DEFAULT_LAMBDA1_LIST.to_vec(),
        }
    }
}

impl Grid {
    pub fn single(k: usize, lambda1: f64) -> Self {
        Self {
            k_list: vec![k],
            lambda1_list: vec![lambda1],
        }
    }

    pub fn points(&self) -> Vec<GridPoint> {
        self.k_list
            .iter()
            .flat_map(|&k| self.lambda1_list.iter().map(move |&lambda1| GridPoint { k, lambda1 }))
            .collect()
    }

    pub fn validate(&self, db: &NetworkDatabase) -> Result<()> {
        if self.k_list.is_empty() || self.lambda1_list.is_empty() {
            return Err(Error::Parameter("K and lambda1 lists must be nonempty".into()));
        }
        for &k in &self.k_list {
            check_k(db, k)?;
        }
        if let Some(bad) = self.lambda1_list.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Parameter(format!("lambda1 must be finite and >= 0, got {bad}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub score: f64,
    pub explanation: Explanation,
    pub config: DetectionConfig,
    /// The solver selected nothing and the score covers all coordinates.
    pub full_space_fallback: bool,
    pub coefficients: Option<ModelCoefficients>,
    pub trace: Vec<IterationRecord>,
}

/// Work shared by every `lambda1` for one `(candidate, K)`: the design,
/// the summary graph, and (on first use) the Laplacian factor.
pub struct CandidateContext<'a> {
    db: &'a NetworkDatabase,
    pub design: DesignSet,
    pub graph: SummaryGraph,
    factor: OnceLock<Result<Arc<NetworkFactor>, String>>,
}

impl<'a> CandidateContext<'a> {
    pub fn new(db: &'a NetworkDatabase, candidate_id: &str, k: usize, seed: u64) -> Result<Self> {
        let design = assemble_design(db, candidate_id, k, derive_seed(seed, candidate_id, k as u64))?;
        let graph = build_summary_graph(db, candidate_id, &design.neighbor_ids)?;
        Ok(Self {
            db,
            design,
            graph,
            factor: OnceLock::new(),
        })
    }

    pub fn candidate_id(&self) -> &str {
        &self.design.candidate_id
    }

    /// Whether the Laplacian factor has been computed.
    pub fn factor_computed(&self) -> bool {
        self.factor.get().is_some()
    }

    fn factor(&self) -> Result<Arc<NetworkFactor>> {
        self.factor
            .get_or_init(|| {
                component_laplacians(&self.graph)
                    .and_then(|blocks| NetworkFactor::new(blocks, self.graph.n_nodes()))
                    .map(Arc::new)
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Internal)
    }

    pub fn run(&self, lambda1: f64, lambda2: f64, opts: &SolverOptions) -> Result<Detection> {
        let factor = if lambda1 > 0.0 { Some(self.factor()?) } else { None };
        let problem = build_problem(&self.design, factor.as_ref(), lambda1, lambda2)?;
        let solution = solve(&problem, opts)?;
        let config = DetectionConfig {
            k: self.design.k(),
            lambda1,
            lambda2,
        };
        let candidate = self.candidate_id();
        let (explanation, coefficients) = match recover_coefficients(&solution, opts) {
            Ok(c) => (extract_subnetworks(candidate, &c, &self.graph), Some(c)),
            Err(Error::EmptySupport) => (Explanation::empty(candidate), None),
            Err(e) => return Err(e),
        };
        let scored = lof_score(self.db, candidate, &explanation.selected_nodes, config.k)?;
        Ok(Detection {
            score: scored.score,
            explanation,
            config,
            full_space_fallback: scored.full_space_fallback,
            coefficients,
            trace: solution.trace,
        })
    }
}

/// Scores one candidate under one configuration.
pub fn detect_one(
    db: &NetworkDatabase,
    candidate_id: &str,
    config: DetectionConfig,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Detection> {
    CandidateContext::new(db, candidate_id, config.k, seed)?.run(config.lambda1, config.lambda2, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub k: usize,
    pub lambda1: f64,
    pub score: f64,
    pub full_space_fallback: bool,
    /// Message when the solver failed and the score is the full-space LOF.
    pub failure: Option<String>,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    /// Maximum over the grid.
    pub score: f64,
    pub winning: GridPoint,
    pub explanation: Explanation,
    pub full_space_fallback: bool,
    pub per_config: Vec<ConfigScore>,
}

impl SampleRecord {
    pub fn failures(&self) -> impl Iterator<Item = &ConfigScore> {
        self.per_config.iter().filter(|c| c.failure.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    pub records: BTreeMap<String, SampleRecord>,
    /// Sample ids by descending score, ties by ascending id.
    pub ranking: Vec<String>,
    pub grid: Grid,
    pub lambda2: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl OutlierReport {
    pub fn scores(&self) -> BTreeMap<String, f64> {
        self.records.iter().map(|(id, r)| (id.clone(), r.score)).collect()
    }

    pub fn failure_count(&self) -> usize {
        self.records.values().map(|r| r.failures().count()).sum()
    }
}

fn record_for(
    db: &NetworkDatabase,
    candidate_id: &str,
    grid: &Grid,
    lambda2: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SampleRecord> {
    let mut per_config = Vec::new();
    let mut best: Option<(f64, GridPoint, Explanation, bool)> = None;
    for &k in &grid.k_list {
        let ctx = CandidateContext::new(db, candidate_id, k, seed);
        for &lambda1 in &grid.lambda1_list {
            let point = GridPoint { k, lambda1 };
            let outcome = match &ctx {
                Ok(ctx) => ctx.run(lambda1, lambda2, opts),
                Err(e) => Err(Error::Internal(e.to_string())),
            };
            let (detection, failure) = match outcome {
                Ok(d) => (d, None),
                Err(e @ (Error::Numerical { .. } | Error::Internal(_))) => {
                    let scored = lof_score(db, candidate_id, &[], k)?;
                    let d = Detection {
                        score: scored.score,
                        explanation: Explanation::empty(candidate_id),
                        config: DetectionConfig { k, lambda1, lambda2 },
                        full_space_fallback: true,
                        coefficients: None,
                        trace: match &e {
                            Error::Numerical { trace, .. } => trace.clone(),
                            _ => Vec::new(),
                        },
                    };
                    (d, Some(e.to_string()))
                }
                Err(e) => return Err(e),
            };
            let better = match &best {
                None => true,
                Some((s, p, _, _)) => match detection.score.total_cmp(s) {
                    Ordering::Greater => true,
                    Ordering::Equal => point.preference(p) == Ordering::Less,
                    Ordering::Less => false,
                },
            };
            per_config.push(ConfigScore {
                k,
                lambda1,
                score: detection.score,
                full_space_fallback: detection.full_space_fallback,
                failure,
                trace: detection.trace,
            });
            if better {
                best = Some((detection.score, point, detection.explanation, detection.full_space_fallback));
            }
        }
    }
    let (score, winning, explanation, full_space_fallback) =
        best.ok_or_else(|| Error::Parameter("empty parameter grid".into()))?;
    Ok(SampleRecord {
        sample_id: candidate_id.to_owned(),
        score,
        winning,
        explanation,
        full_space_fallback,
        per_config,
    })
}

/// Ensemble detection for a single sample (the `explain` path).
pub fn detect_sample(
    db: &NetworkDatabase,
    candidate_id: &str,
    grid: &Grid,
    lambda2: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SampleRecord> {
    grid.validate(db)?;
    opts.validate()?;
    db.index_of(candidate_id)?;
    record_for(db, candidate_id, grid, lambda2, seed, opts)
}

/// Scores every sample over the grid and keeps the per-sample maximum.
///
/// Samples are processed in parallel on the current rayon pool; the result
/// does not depend on scheduling.
pub fn detect_all(
    db: &NetworkDatabase,
    grid: &Grid,
    lambda2: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<OutlierReport> {
    grid.validate(db)?;
    opts.validate()?;
    if !(lambda2 >= 0.0 && lambda2.is_finite()) {
        return Err(Error::Parameter(format!("lambda2 must be finite and >= 0, got {lambda2}")));
    }
    let ids: Vec<&str> = db.sample_ids().collect();
    let records: Vec<SampleRecord> = ids
        .par_iter()
        .map(|id| record_for(db, id, grid, lambda2, seed, opts))
        .collect::<Result<_>>()?;
    let mut ranking: Vec<(f64, String)> = records
        .iter()
        .map(|r| (r.score, r.sample_id.clone()))
        .collect();
    ranking.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Ok(OutlierReport {
        records: records.into_iter().map(|r| (r.sample_id.clone(), r)).collect(),
        ranking: ranking.into_iter().map(|(_, id)| id).collect(),
        grid: grid.clone(),
        lambda2,
        seed,
        solver: *opts,
    })
}
