//! Per-candidate summary graph, its normalized Laplacian, and square-root factor.
//!
//! Edge weights are edge popularity: `A(i,j) = max(E_o(i,j), mean_k E_k(i,j))`
//! over the candidate `o` and its neighbors `k`. Self-loops never occur, so
//! every non-isolated node has a unit Laplacian diagonal.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::NetworkDatabase;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryGraph {
    /// Symmetric weights in `[0, 1]` with zero diagonal.
    pub adjacency: DMatrix<f64>,
    pub degree: Vec<f64>,
    /// Connected components of the nonzero-weight graph, each sorted,
    /// ordered by smallest member. Isolated nodes are singletons.
    pub components: Vec<Vec<usize>>,
}

impl SummaryGraph {
    /// Builds a graph directly from a weight matrix.
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::Dimension(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::Validation(format!("self-loop weight on node {i}")));
            }
            for j in 0..i {
                let a = adjacency[(i, j)];
                if a != adjacency[(j, i)] || !(0.0..=1.0).contains(&a) {
                    return Err(Error::Validation(format!(
                        "weight ({i}, {j}) must be symmetric and within [0, 1]"
                    )));
                }
            }
        }
        let degree = (0..n).map(|i| adjacency.row(i).sum()).collect();
        let components = connected_components(&adjacency);
        Ok(Self {
            adjacency,
            degree,
            components,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] > 0.0
    }

    /// Components with at least two nodes; the only ones carrying a Laplacian.
    pub fn connected_blocks(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.components.iter().filter(|c| c.len() >= 2)
    }
}

fn connected_components(adjacency: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = adjacency.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && adjacency[(u, v)] > 0.0 {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn build_summary_graph(
    db: &NetworkDatabase,
    candidate_id: &str,
    neighbor_ids: &[String],
) -> Result<SummaryGraph> {
    if neighbor_ids.is_empty() {
        return Err(Error::Parameter("summary graph needs at least one neighbor".into()));
    }
    if neighbor_ids.iter().any(|id| id == candidate_id) {
        return Err(Error::Parameter(format!(
            "candidate `{candidate_id}` listed among its own neighbors"
        )));
    }
    let n = db.n_nodes();
    let k = neighbor_ids.len() as f64;
    let mut popularity = DMatrix::<f64>::zeros(n, n);
    for id in neighbor_ids {
        for &(i, j) in db.effective_edges(id)? {
            popularity[(i, j)] += 1.0;
            popularity[(j, i)] += 1.0;
        }
    }
    popularity /= k;
    for &(i, j) in db.effective_edges(candidate_id)? {
        popularity[(i, j)] = 1.0;
        popularity[(j, i)] = 1.0;
    }
    SummaryGraph::from_adjacency(popularity)
}

/// Symmetric normalized Laplacian restricted to one component.
pub fn normalized_laplacian(g: &SummaryGraph, component: &[usize]) -> Result<DMatrix<f64>> {
    if component.len() < 2 {
        return Err(Error::Parameter("Laplacian block needs at least 2 nodes".into()));
    }
    let deg: Vec<f64> = component
        .iter()
        .map(|&i| {
            let d = g.degree[i];
            if d > 0.0 {
                Ok(d)
            } else {
                Err(Error::Internal(format!(
                    "node {i} has zero degree inside a connected component"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let c = component.len();
    let mut lap = DMatrix::<f64>::identity(c, c);
    for a in 0..c {
        for b in (a + 1)..c {
            let w = g.adjacency[(component[a], component[b])];
            if w > 0.0 {
                let v = -w / (deg[a] * deg[b]).sqrt();
                lap[(a, b)] = v;
                lap[(b, a)] = v;
            }
        }
    }
    Ok(lap)
}

/// Eigen-factorization `L = U diag(eig) U^T = S^T S` with `S = diag(eig)^(1/2) U^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianFactor {
    pub laplacian: DMatrix<f64>,
    pub factor: DMatrix<f64>,
    /// Eigenvalues with round-off negatives clamped to zero.
    pub eigenvalues: DVector<f64>,
}

pub fn laplacian_factor(laplacian: &DMatrix<f64>) -> Result<LaplacianFactor> {
    let n = laplacian.nrows();
    if laplacian.ncols() != n {
        return Err(Error::Dimension(format!(
            "Laplacian must be square, got {}x{}",
            n,
            laplacian.ncols()
        )));
    }
    let scale = laplacian.amax().max(1.0);
    let asym = (laplacian - laplacian.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok(LaplacianFactor {
            laplacian: laplacian.clone(),
            factor: DMatrix::zeros(0, 0),
            eigenvalues: DVector::zeros(0),
        });
    }
    let sym = (laplacian + laplacian.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let eigenvalues = eig.eigenvalues.map(|v| v.max(0.0));
    let mut factor = eig.eigenvectors.transpose();
    for (r, &lam) in eigenvalues.iter().enumerate() {
        factor.row_mut(r).scale_mut(lam.sqrt());
    }
    Ok(LaplacianFactor {
        laplacian: laplacian.clone(),
        factor,
        eigenvalues,
    })
}

/// One connected component's Laplacian, indexed by `nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLaplacian {
    pub nodes: Vec<usize>,
    pub laplacian: DMatrix<f64>,
}

impl ComponentLaplacian {
    /// Principal submatrix on the kept members of this block, in block order.
    /// `keep` maps a global node index to its new position, if kept. A single
    /// survivor still carries its unit diagonal, so it stays a 1x1 block.
    pub fn restrict(&self, keep: &dyn Fn(usize) -> Option<usize>) -> Option<ComponentLaplacian> {
        let picked: Vec<(usize, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(local, &node)| keep(node).map(|new| (local, new)))
            .collect();
        if picked.is_empty() {
            return None;
        }
        let lap = DMatrix::from_fn(picked.len(), picked.len(), |a, b| {
            self.laplacian[(picked[a].0, picked[b].0)]
        });
        Some(ComponentLaplacian {
            nodes: picked.into_iter().map(|(_, new)| new).collect(),
            laplacian: lap,
        })
    }
}

/// Laplacian blocks for every non-singleton component.
pub fn component_laplacians(g: &SummaryGraph) -> Result<Vec<ComponentLaplacian>> {
    g.connected_blocks()
        .map(|comp| {
            Ok(ComponentLaplacian {
                nodes: comp.clone(),
                laplacian: normalized_laplacian(g, comp)?,
            })
        })
        .collect()
}

/// Block-diagonal `S` over `n` nodes (rows and columns in node order);
/// nodes outside every block get zero rows and columns.
pub fn block_factor(blocks: &[ComponentLaplacian], n: usize) -> Result<DMatrix<f64>> {
    let mut s = DMatrix::zeros(n, n);
    for block in blocks {
        let f = laplacian_factor(&block.laplacian)?;
        for (a, &row) in block.nodes.iter().enumerate() {
            for (b, &col) in block.nodes.iter().enumerate() {
                s[(row, col)] = f.factor[(a, b)];
            }
        }
    }
    Ok(s)
}

/// `w^T L w` for a Laplacian block.
pub fn quadratic_penalty(w: &[f64], laplacian: &DMatrix<f64>) -> f64 {
    let w = DVector::from_column_slice(w);
    w.dot(&(laplacian * &w))
}

/// Edge form of the same penalty over one component:
/// `sum_{i<j} A(i,j) (w_i/sqrt(deg i) - w_j/sqrt(deg j))^2`.
pub fn edge_sum_penalty(w: &[f64], g: &SummaryGraph, component: &[usize]) -> f64 {
    let mut total = 0.0;
    for (a, &i) in component.iter().enumerate() {
        for (b, &j) in component.iter().enumerate().skip(a + 1) {
            let weight = g.adjacency[(i, j)];
            if weight > 0.0 {
                let d = w[a] / g.degree[i].sqrt() - w[b] / g.degree[j].sqrt();
                total += weight * d * d;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkSample;

    fn db_with_edges(edge_sets: Vec<Vec<(usize, usize)>>, n: usize) -> NetworkDatabase {
        let samples = edge_sets
            .into_iter()
            .enumerate()
            .map(|(i, es)| NetworkSample::new(format!("s{i}"), vec![1.0; n]).with_edges(es))
            .collect();
        NetworkDatabase::new((0..n).map(|i| format!("v{i}")).collect(), [], samples, None).unwrap()
    }

    fn ids(range: std::ops::Range<usize>) -> Vec<String> {
        range.map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn popularity_weights() {
        // s0 is the candidate; s1..s4 the neighbors
        let db = db_with_edges(
            vec![
                vec![(0, 1)],
                vec![(1, 2)],
                vec![(1, 2)],
                vec![(2, 3)],
                vec![],
            ],
            4,
        );
        let g = build_summary_graph(&db, "s0", &ids(1..5)).unwrap();
        assert_eq!(g.adjacency[(0, 1)], 1.0);
        assert_eq!(g.adjacency[(1, 2)], 0.5);
        assert_eq!(g.adjacency[(2, 1)], 0.5);
        assert_eq!(g.adjacency[(2, 3)], 0.25);
        assert_eq!(g.adjacency[(0, 3)], 0.0);
        assert_eq!(g.degree, vec![1.0, 1.5, 0.75, 0.25]);
        assert_eq!(g.components, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn identical_topologies_give_unit_weights() {
        let es = vec![(0, 1), (1, 2), (3, 4)];
        let db = db_with_edges(vec![es.clone(); 4], 6);
        let g = build_summary_graph(&db, "s2", &ids(0..2)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if es.contains(&(i.min(j), i.max(j))) { 1.0 } else { 0.0 };
                assert_eq!(g.adjacency[(i, j)], expect);
            }
        }
        assert_eq!(g.components, vec![vec![0, 1, 2], vec![3, 4], vec![5]]);
        assert_eq!(g.connected_blocks().count(), 2);
    }

    #[test]
    fn rejects_candidate_among_neighbors() {
        let db = db_with_edges(vec![vec![]; 3], 2);
        assert!(build_summary_graph(&db, "s0", &ids(0..2)).is_err());
        assert!(build_summary_graph(&db, "s0", &[]).is_err());
    }

    #[test]
    fn two_node_laplacian() {
        let g = SummaryGraph::from_adjacency(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let l = normalized_laplacian(&g, &[0, 1]).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert_eq!(quadratic_penalty(&[1.0, 0.0], &l), 1.0);
        assert_eq!(edge_sum_penalty(&[1.0, 0.0], &g, &[0, 1]), 1.0);
    }

    #[test]
    fn triangle_spectrum() {
        let a = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let g = SummaryGraph::from_adjacency(a).unwrap();
        let l = normalized_laplacian(&g, &[0, 1, 2]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[(i, j)], if i == j { 1.0 } else { -0.5 });
            }
        }
        let f = laplacian_factor(&l).unwrap();
        let mut eig: Vec<f64> = f.eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        // characteristic polynomial of I - J/2 + I/2: roots 0 and 3/2 (double)
        assert!(eig[0].abs() < 1e-12);
        assert!((eig[1] - 1.5).abs() < 1e-12 && (eig[2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn null_space_vector_has_zero_penalty() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.0, 0.25, 0.5, 0.25, 0.0]);
        let g = SummaryGraph::from_adjacency(a).unwrap();
        let l = normalized_laplacian(&g, &[0, 1, 2]).unwrap();
        let w: Vec<f64> = g.degree.iter().map(|d| 3.0 * d.sqrt()).collect();
        assert!(quadratic_penalty(&w, &l).abs() < 1e-12);
        assert!(edge_sum_penalty(&w, &g, &[0, 1, 2]).abs() < 1e-12);
    }

    #[test]
    fn zero_and_identity_factors() {
        let z = laplacian_factor(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(z.factor, DMatrix::zeros(4, 4));
        let id = DMatrix::<f64>::identity(5, 5);
        let f = laplacian_factor(&id).unwrap();
        assert!((f.factor.transpose() * &f.factor - &id).amax() < 1e-14);
        assert!((&f.factor * f.factor.transpose() - &id).amax() < 1e-14);
    }

    #[test]
    fn factor_rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(laplacian_factor(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn restriction_and_block_factor() {
        let a = DMatrix::from_fn(4, 4, |i, j| if i != j && i < 3 && j < 3 { 1.0 } else { 0.0 });
        let g = SummaryGraph::from_adjacency(a).unwrap();
        let blocks = component_laplacians(&g).unwrap();
        assert_eq!(blocks.len(), 1);
        let s = block_factor(&blocks, 4).unwrap();
        let l = s.transpose() * &s;
        assert!((l[(0, 0)] - 1.0).abs() < 1e-12 && (l[(0, 1)] + 0.5).abs() < 1e-12);
        assert_eq!(l.row(3).amax(), 0.0);

        let keep = |i: usize| match i {
            0 => Some(0),
            2 => Some(1),
            _ => None,
        };
        let r = blocks[0].restrict(&keep).unwrap();
        assert_eq!(r.nodes, vec![0, 1]);
        assert_eq!(r.laplacian, DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]));
        let single = blocks[0].restrict(&|i| (i == 1).then_some(0)).unwrap();
        assert_eq!(single.laplacian, DMatrix::from_element(1, 1, 1.0));
        assert!(blocks[0].restrict(&|_| None).is_none());
    }
}
