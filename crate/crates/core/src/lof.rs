//! Local outlier factor over a chosen coordinate subset.

use crate::error::{Error, Result};
use crate::model::NetworkDatabase;

/// Added to mean reachability distances so that exact duplicates give a finite
/// density; duplicate clusters then score exactly 1.
const DENSITY_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceScore {
    pub score: f64,
    /// The selected set was empty and the score covers all coordinates.
    pub full_space_fallback: bool,
}

struct Neighborhoods {
    /// `neighbors[i]`: indices of the `k` nearest points to `i`, nearest first.
    neighbors: Vec<Vec<usize>>,
    k_distance: Vec<f64>,
    dist: Vec<Vec<f64>>,
}

fn neighborhoods(points: &[Vec<f64>], k: usize) -> Neighborhoods {
    let m = points.len();
    let mut dist = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut neighbors = Vec::with_capacity(m);
    let mut k_distance = Vec::with_capacity(m);
    for (i, row) in dist.iter().enumerate() {
        let mut order: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        order.truncate(k);
        k_distance.push(row[order[k - 1]]);
        neighbors.push(order);
    }
    Neighborhoods {
        neighbors,
        k_distance,
        dist,
    }
}

fn local_density(nh: &Neighborhoods, p: usize) -> f64 {
    let reach: f64 = nh.neighbors[p]
        .iter()
        .map(|&o| nh.k_distance[o].max(nh.dist[p][o]))
        .sum();
    1.0 / (reach / nh.neighbors[p].len() as f64 + DENSITY_EPS)
}

/// LOF of point `query` among `points` with `MinPts = k` and Euclidean distance.
pub fn lof(points: &[Vec<f64>], query: usize, k: usize) -> Result<f64> {
    let m = points.len();
    if k == 0 || k >= m {
        return Err(Error::Parameter(format!(
            "LOF needs 1 <= K <= m-1 = {} (got K = {k})",
            m.saturating_sub(1)
        )));
    }
    if query >= m {
        return Err(Error::Parameter(format!("query index {query} out of range")));
    }
    let nh = neighborhoods(points, k);
    let own = local_density(&nh, query);
    let around: f64 = nh.neighbors[query]
        .iter()
        .map(|&o| local_density(&nh, o))
        .sum::<f64>()
        / k as f64;
    Ok(around / own)
}

/// LOF of one sample computed only on `selected` coordinates, against every
/// other sample. An empty selection falls back to all coordinates.
pub fn lof_score(
    db: &NetworkDatabase,
    candidate_id: &str,
    selected: &[usize],
    k: usize,
) -> Result<SubspaceScore> {
    let query = db.index_of(candidate_id)?;
    let n = db.n_nodes();
    if let Some(&bad) = selected.iter().find(|&&i| i >= n) {
        return Err(Error::Parameter(format!("selected node {bad} out of range")));
    }
    let full_space_fallback = selected.is_empty();
    let points: Vec<Vec<f64>> = if full_space_fallback {
        db.samples().iter().map(|s| s.values.clone()).collect()
    } else {
        db.samples()
            .iter()
            .map(|s| selected.iter().map(|&i| s.values[i]).collect())
            .collect()
    };
    Ok(SubspaceScore {
        score: lof(&points, query, k)?,
        full_space_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkSample;
    use crate::rng;
    use rand_distr::{Distribution, Normal};

    fn db(rows: Vec<Vec<f64>>) -> NetworkDatabase {
        let n = rows[0].len();
        NetworkDatabase::new(
            (0..n).map(|i| format!("v{i}")).collect(),
            [],
            rows.into_iter()
                .enumerate()
                .map(|(i, v)| NetworkSample::new(format!("s{i:02}"), v))
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn duplicates_score_exactly_one() {
        let mut rows = vec![vec![1.0, 5.0, 9.0]; 4];
        rows.push(vec![3.0, -2.0, 0.0]);
        rows.push(vec![8.0, 1.0, 2.0]);
        let d = db(rows);
        // s00..s03 identical in the subspace {0, 1}; K = 3 duplicates of s00
        let s = lof_score(&d, "s00", &[0, 1], 3).unwrap();
        assert_eq!(s.score, 1.0);
        assert!(!s.full_space_fallback);
    }

    #[test]
    fn full_selection_matches_fallback() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.1])
            .collect();
        let d = db(rows);
        let all = lof_score(&d, "s03", &[0, 1, 2], 3).unwrap();
        let fallback = lof_score(&d, "s03", &[], 3).unwrap();
        assert!(fallback.full_space_fallback);
        assert_eq!(all.score, fallback.score);
    }

    #[test]
    fn displaced_point_scores_high() {
        let mut r = rng::seeded(5);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![noise.sample(&mut r), noise.sample(&mut r), 50.0 * noise.sample(&mut r)])
            .collect();
        rows[0][0] += 1.0; // 10 sigma
        let d = db(rows);
        let s = lof_score(&d, "s00", &[0, 1], 5).unwrap().score;
        assert!(s > 1.5, "LOF {s}");
        let inlier = lof_score(&d, "s07", &[0, 1], 5).unwrap().score;
        assert!(inlier < 1.5, "inlier LOF {inlier}");
    }

    #[test]
    fn hand_computed_line() {
        // points on a line: 0, 1, 2, 10 with K = 1
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 10.0].iter().map(|&x| vec![x]).collect();
        // k-distances: 1, 1, 1, 8; N(3) = {2}, reach(3,2) = max(1, 8) = 8
        // lrd(3) = 1/8, lrd(2) = 1/max(kd(1)=1, 1) = 1 => LOF = 8
        let v = lof(&pts, 3, 1).unwrap();
        assert!((v - 8.0).abs() < 1e-8, "{v}");
        assert!(lof(&pts, 0, 4).is_err());
    }
}
