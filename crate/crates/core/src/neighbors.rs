//! Neighbor search, candidate upsampling, and the regression design matrix.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::NetworkDatabase;
use crate::rng;

/// Balanced regression design for one candidate.
///
/// Rows `0..k` hold the neighbor vectors (target +1); row `k` is the candidate
/// itself and rows `k+1..2k` its synthetic replicas (target -1).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    pub x: DMatrix<f64>,
    pub z: DVector<f64>,
    pub neighbor_ids: Vec<String>,
    pub candidate_id: String,
}

impl DesignSet {
    pub fn k(&self) -> usize {
        self.neighbor_ids.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.x.ncols()
    }
}

/// `1 - cos(x, y)`, clamped to `[0, 2]`.
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "cosine distance between lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mut dot, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((1.0 - dot / (xx.sqrt() * yy.sqrt())).clamp(0.0, 2.0))
}

/// The `k` samples closest to the candidate by cosine distance, ties broken
/// by ascending sample id. A zero vector on either side counts as distance 2.
pub fn k_nearest(db: &NetworkDatabase, candidate_id: &str, k: usize) -> Result<Vec<String>> {
    check_k(db, k)?;
    let target = db.sample(candidate_id)?;
    let mut ranked: Vec<(f64, &str)> = db
        .samples()
        .iter()
        .filter(|s| s.sample_id != candidate_id)
        .map(|s| {
            let d = match cosine_distance(&target.values, &s.values) {
                Ok(d) => d,
                Err(Error::ZeroVector) => 2.0,
                Err(e) => return Err(e),
            };
            Ok((d, s.sample_id.as_str()))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(_, id)| id.to_owned())
        .collect())
}

pub(crate) fn check_k(db: &NetworkDatabase, k: usize) -> Result<()> {
    let m = db.n_samples();
    if k == 0 || k >= m {
        return Err(Error::Parameter(format!(
            "K must satisfy 1 <= K <= m-1 = {} (got K = {k})",
            m - 1
        )));
    }
    Ok(())
}

/// Draws `K - 1` replicas of `candidate` from a diagonal Gaussian whose
/// per-node variance is the sample variance of that node over the neighbors.
pub fn upsample(candidate: &[f64], neighbors: &[&[f64]], seed: u64) -> Vec<Vec<f64>> {
    let k = neighbors.len();
    if k < 2 {
        return Vec::new();
    }
    let n = candidate.len();
    let std_dev: Vec<f64> = (0..n)
        .map(|j| {
            let mean = neighbors.iter().map(|v| v[j]).sum::<f64>() / k as f64;
            let ss: f64 = neighbors.iter().map(|v| (v[j] - mean).powi(2)).sum();
            (ss / (k - 1) as f64).sqrt()
        })
        .collect();
    let mut rng = rng::seeded(seed);
    (0..k - 1)
        .map(|_| {
            candidate
                .iter()
                .zip(&std_dev)
                .map(|(&mu, &sd)| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    // sd == 0 must reproduce the candidate exactly
                    if sd == 0.0 {
                        mu
                    } else {
                        mu + sd * e
                    }
                })
                .collect()
        })
        .collect()
}

pub fn assemble_design(
    db: &NetworkDatabase,
    candidate_id: &str,
    k: usize,
    seed: u64,
) -> Result<DesignSet> {
    let neighbor_ids = k_nearest(db, candidate_id, k)?;
    let candidate = &db.sample(candidate_id)?.values;
    let neighbors: Vec<&[f64]> = neighbor_ids
        .iter()
        .map(|id| db.sample(id).map(|s| s.values.as_slice()))
        .collect::<Result<_>>()?;
    let replicas = upsample(candidate, &neighbors, seed);

    let n = db.n_nodes();
    let rows = neighbors
        .iter()
        .copied()
        .chain(std::iter::once(candidate.as_slice()))
        .chain(replicas.iter().map(Vec::as_slice));
    let mut x = DMatrix::zeros(2 * k, n);
    for (r, row) in rows.enumerate() {
        for (c, &v) in row.iter().enumerate() {
            x[(r, c)] = v;
        }
    }
    let z = DVector::from_fn(2 * k, |i, _| if i < k { 1.0 } else { -1.0 });
    Ok(DesignSet {
        x,
        z,
        neighbor_ids,
        candidate_id: candidate_id.to_owned(),
    })
}
