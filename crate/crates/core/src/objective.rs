//! Augmented design, Gram matrix, and the squared-hinge primal objective.
//!
//! With `X1 = X - z 1^T` and `X2 = X + z 1^T`, the augmented design is
//!
//! ```text
//!          [ X1          X2         ]   2K rows
//! Xtilde = [ sqrt(l1) S  sqrt(l1) S ]   n rows
//! ```
//!
//! and `Q = Xtilde^T Xtilde`. Signs are carried by `y = (1,..,1,-1,..,-1)`, so
//! the objective over `w` (length `2n`) is
//! `w^T Q w + l2 * sum_i max(0, 1 - y_i Q_i^T w)^2`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::neighbors::DesignSet;
use crate::summary::{block_factor, ComponentLaplacian};

/// Laplacian blocks of a summary graph and their stacked square-root factor.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFactor {
    pub blocks: Vec<ComponentLaplacian>,
    /// `n x n`, block diagonal, with `S^T S` equal to the block Laplacian.
    pub s: DMatrix<f64>,
}

impl NetworkFactor {
    pub fn new(blocks: Vec<ComponentLaplacian>, n: usize) -> Result<Self> {
        let s = block_factor(&blocks, n)?;
        Ok(Self { blocks, s })
    }

    /// Full `n x n` Laplacian assembled from the blocks.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.s.nrows();
        let mut l = DMatrix::zeros(n, n);
        for b in &self.blocks {
            for (a, &i) in b.nodes.iter().enumerate() {
                for (c, &j) in b.nodes.iter().enumerate() {
                    l[(i, j)] = b.laplacian[(a, c)];
                }
            }
        }
        l
    }
}

#[derive(Debug, Clone)]
pub struct SolverProblem {
    pub xtilde: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    design_x: DMatrix<f64>,
    z: DVector<f64>,
    factor: Option<Arc<NetworkFactor>>,
}

impl SolverProblem {
    /// Number of nodes `n`; the problem has `2n` coefficients.
    pub fn n_nodes(&self) -> usize {
        self.design_x.ncols()
    }

    pub fn dim(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn factor(&self) -> Option<&NetworkFactor> {
        self.factor.as_deref()
    }

    pub(crate) fn design_x(&self) -> &DMatrix<f64> {
        &self.design_x
    }

    pub(crate) fn z(&self) -> &DVector<f64> {
        &self.z
    }
}

/// Builds the problem for one design and one `(lambda1, lambda2)`.
///
/// The network factor is only read when `lambda1 > 0`.
pub fn build_problem(
    design: &DesignSet,
    factor: Option<&Arc<NetworkFactor>>,
    lambda1: f64,
    lambda2: f64,
) -> Result<SolverProblem> {
    assemble(&design.x, &design.z, factor.cloned(), lambda1, lambda2)
}

pub(crate) fn assemble(
    x: &DMatrix<f64>,
    z: &DVector<f64>,
    factor: Option<Arc<NetworkFactor>>,
    lambda1: f64,
    lambda2: f64,
) -> Result<SolverProblem> {
    if !(lambda1 >= 0.0 && lambda1.is_finite()) || !(lambda2 >= 0.0 && lambda2.is_finite()) {
        return Err(Error::Parameter(format!(
            "lambda1 and lambda2 must be finite and nonnegative (got {lambda1}, {lambda2})"
        )));
    }
    let (rows, n) = x.shape();
    if z.len() != rows {
        return Err(Error::Dimension(format!(
            "design has {rows} rows but {} targets",
            z.len()
        )));
    }
    let factor = if lambda1 > 0.0 {
        let f = factor.ok_or_else(|| {
            Error::Parameter("lambda1 > 0 requires a network factor".into())
        })?;
        if f.s.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "network factor is {:?}, expected ({n}, {n})",
                f.s.shape()
            )));
        }
        Some(f)
    } else {
        None
    };

    let mut xtilde = DMatrix::zeros(rows + n, 2 * n);
    for j in 0..n {
        for r in 0..rows {
            xtilde[(r, j)] = x[(r, j)] - z[r];
            xtilde[(r, n + j)] = x[(r, j)] + z[r];
        }
    }
    if let Some(f) = &factor {
        let root = lambda1.sqrt();
        for j in 0..n {
            for r in 0..n {
                let v = root * f.s[(r, j)];
                xtilde[(rows + r, j)] = v;
                xtilde[(rows + r, n + j)] = v;
            }
        }
    }
    let q = xtilde.tr_mul(&xtilde);
    let q = (&q + q.transpose()) * 0.5;
    let y = DVector::from_fn(2 * n, |i, _| if i < n { 1.0 } else { -1.0 });
    Ok(SolverProblem {
        xtilde,
        q,
        y,
        lambda1,
        lambda2,
        design_x: x.clone(),
        z: z.clone(),
        factor,
    })
}

/// Quantities shared by the value, gradient, and Hessian at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub qw: DVector<f64>,
    /// `1 - y_i (Qw)_i`, positive exactly on the active set.
    pub residual: DVector<f64>,
    pub value: f64,
}

impl Evaluation {
    pub fn is_active(&self, i: usize) -> bool {
        self.residual[i] > 0.0
    }

    pub fn active_set(&self) -> Vec<usize> {
        (0..self.residual.len()).filter(|&i| self.is_active(i)).collect()
    }
}

pub fn evaluate(p: &SolverProblem, w: &DVector<f64>) -> Evaluation {
    let qw = &p.q * w;
    let residual = DVector::from_fn(w.len(), |i, _| 1.0 - p.y[i] * qw[i]);
    let loss: f64 = residual.iter().filter(|r| **r > 0.0).map(|r| r * r).sum();
    let value = w.dot(&qw) + p.lambda2 * loss;
    Evaluation { qw, residual, value }
}

pub fn objective_value(p: &SolverProblem, w: &DVector<f64>) -> f64 {
    evaluate(p, w).value
}

pub(crate) fn gradient_at(p: &SolverProblem, e: &Evaluation) -> DVector<f64> {
    // 2Qw - 2 l2 sum_active Q_i y_i r_i = 2Q(w - l2 * v), v_i = y_i r_i on the active set
    let mut g = &e.qw * 2.0;
    if p.lambda2 > 0.0 {
        let coef = DVector::from_fn(e.residual.len(), |i, _| {
            if e.is_active(i) {
                p.y[i] * e.residual[i]
            } else {
                0.0
            }
        });
        g.gemv(-2.0 * p.lambda2, &p.q, &coef, 1.0);
    }
    g
}

pub fn gradient(p: &SolverProblem, w: &DVector<f64>) -> DVector<f64> {
    gradient_at(p, &evaluate(p, w))
}

pub fn hessian(p: &SolverProblem, w: &DVector<f64>) -> DMatrix<f64> {
    let e = evaluate(p, w);
    let mut h = &p.q * 2.0;
    let active = e.active_set();
    if p.lambda2 > 0.0 && !active.is_empty() {
        let qa = p.q.select_columns(&active);
        h.gemm(2.0 * p.lambda2, &qa, &qa.transpose(), 1.0);
    }
    (&h + h.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::{component_laplacians, SummaryGraph};

    fn toy_design(k: usize, n: usize) -> DesignSet {
        let x = DMatrix::from_fn(2 * k, n, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.5 - 1.0);
        DesignSet {
            x,
            z: DVector::from_fn(2 * k, |i, _| if i < k { 1.0 } else { -1.0 }),
            neighbor_ids: (0..k).map(|i| format!("s{i}")).collect(),
            candidate_id: "c".into(),
        }
    }

    fn path_factor(n: usize) -> Arc<NetworkFactor> {
        let a = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
        let g = SummaryGraph::from_adjacency(a).unwrap();
        Arc::new(NetworkFactor::new(component_laplacians(&g).unwrap(), n).unwrap())
    }

    #[test]
    fn shapes() {
        let d = toy_design(3, 5);
        let p = build_problem(&d, Some(&path_factor(5)), 0.5, 1.0).unwrap();
        assert_eq!(p.xtilde.shape(), (11, 10));
        assert_eq!(p.q.shape(), (10, 10));
        assert_eq!(p.y.iter().filter(|&&v| v > 0.0).count(), 5);
        assert_eq!(p.y.iter().filter(|&&v| v < 0.0).count(), 5);
    }

    #[test]
    fn zero_lambda1_ignores_factor() {
        let d = toy_design(2, 4);
        let p = build_problem(&d, None, 0.0, 1.0).unwrap();
        assert_eq!(p.xtilde.rows(4, 4).amax(), 0.0);
        assert!(p.factor().is_none());
        let with = build_problem(&d, Some(&path_factor(4)), 0.0, 1.0).unwrap();
        assert_eq!(with.q, p.q);
        assert!(build_problem(&d, None, 0.1, 1.0).is_err());
        assert!(build_problem(&d, None, -1.0, 1.0).is_err());
    }

    #[test]
    fn factor_laplacian_roundtrip() {
        let f = path_factor(4);
        let l = f.laplacian();
        assert!((f.s.transpose() * &f.s - &l).amax() < 1e-12);
        assert_eq!(l[(0, 0)], 1.0);
    }

    #[test]
    fn value_at_origin_and_in_flat_region() {
        let d = toy_design(2, 3);
        let p = build_problem(&d, Some(&path_factor(3)), 1.0, 2.5).unwrap();
        let zero = DVector::zeros(6);
        assert_eq!(objective_value(&p, &zero), 2.5 * 6.0);
        let g0 = gradient(&p, &zero);
        let expect = -(&p.q * &p.y) * (2.0 * 2.5);
        assert!((g0 - expect).amax() < 1e-12);

        // with lambda2 = 0 every point is in the "flat" regime
        let p0 = build_problem(&d, None, 0.0, 0.0).unwrap();
        let w = DVector::from_fn(6, |i, _| i as f64 * 0.1);
        let quad = w.dot(&(&p0.q * &w));
        assert_eq!(objective_value(&p0, &w), quad);
        assert_eq!(gradient(&p0, &w), &p0.q * &w * 2.0);
        assert_eq!(hessian(&p0, &w), &p0.q * 2.0);
    }

    #[test]
    fn flat_region_has_no_loss() {
        // one node, K = 1: Q is 2x2 and large multiples of y push every margin past 1
        let d = DesignSet {
            x: DMatrix::from_row_slice(2, 1, &[2.0, -3.0]),
            z: DVector::from_row_slice(&[1.0, -1.0]),
            neighbor_ids: vec!["a".into()],
            candidate_id: "c".into(),
        };
        let p = build_problem(&d, None, 0.0, 1.0).unwrap();
        // Q = [[5, 11], [11, 25]] and Q w = (2, -2): both margins equal 2
        let w = DVector::from_row_slice(&[18.0, -8.0]);
        let e = evaluate(&p, &w);
        assert!(e.active_set().is_empty(), "{:?}", e.residual);
        assert_eq!(e.value, w.dot(&(&p.q * &w)));
        assert_eq!(gradient(&p, &w), &p.q * &w * 2.0);
    }
}
