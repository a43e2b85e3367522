//! Newton's method on the squared-hinge primal with Armijo backtracking.
//!
//! On a fixed active set `A` the Hessian factors as `H = 2Q(I + l2 P_A Q)`
//! where `P_A` selects the active coordinates. `Q` is rank deficient
//! (`2K + n < 2n` rows back it), so instead of inverting `H` we take the
//! particular Newton solution
//!
//! ```text
//! w_new = 0 off A,   (I / l2 + Q_AA) w_new_A = y_A
//! ```
//!
//! which satisfies `H (w - w_new) = g` exactly. `Q_AA + I / l2` is positive
//! definite, and the iterate stays supported on the active set.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{self, assemble, Evaluation, NetworkFactor, SolverProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once `max_i |g_i|` falls to this value.
    pub gradient_tolerance: f64,
    /// Absolute cut below which a recovered coefficient counts as zero.
    pub sparsify_threshold: f64,
    pub line_search_shrink: f64,
    pub armijo_constant: f64,
    /// Drop near-zero node pairs and restart when the first pass hits the cap.
    pub shrinking: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            gradient_tolerance: 1e-6,
            sparsify_threshold: 1e-8,
            line_search_shrink: 0.5,
            armijo_constant: 1e-4,
            shrinking: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.sparsify_threshold > 0.0
            && self.line_search_shrink > 0.0
            && self.line_search_shrink < 1.0
            && self.armijo_constant > 0.0
            && self.armijo_constant < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid solver options {self:?}")))
        }
    }
}

/// One Newton iteration: state at the start of the iteration and the step taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub active_size: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub w_tilde: DVector<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCoefficients {
    /// Length `n`, unit L1 norm.
    pub w: Vec<f64>,
    pub support: Vec<usize>,
    pub iterations_used: usize,
    pub final_objective: f64,
}

/// Uniform start `1 / 2n`.
pub fn default_initial(dim: usize) -> DVector<f64> {
    DVector::from_element(dim, 1.0 / dim.max(1) as f64)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Minimizer of the quadratic model on the current active set (see module docs).
fn newton_target(p: &SolverProblem, e: &Evaluation) -> Result<DVector<f64>> {
    let dim = p.dim();
    let mut target = DVector::zeros(dim);
    if p.lambda2 == 0.0 {
        return Ok(target);
    }
    let active = e.active_set();
    if active.is_empty() {
        return Ok(target);
    }
    let a = active.len();
    let inv = 1.0 / p.lambda2;
    let mut m = DMatrix::from_fn(a, a, |r, c| p.q[(active[r], active[c])]);
    for d in 0..a {
        m[(d, d)] += inv;
    }
    let rhs = DVector::from_fn(a, |r, _| p.y[active[r]]);
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            for d in 0..a {
                m[(d, d)] += 1e-10;
            }
            m.lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Internal("singular Newton system".into()))?
        }
    };
    for (r, &i) in active.iter().enumerate() {
        target[i] = sol[r];
    }
    Ok(target)
}

/// Largest `shrink^j` (`j <= 20`) meeting the Armijo condition along `direction`;
/// 0 when `direction` is not a descent direction or no step qualifies.
pub fn line_search(
    p: &SolverProblem,
    w: &DVector<f64>,
    direction: &DVector<f64>,
    opts: &SolverOptions,
) -> f64 {
    let e = objective::evaluate(p, w);
    let g = objective::gradient_at(p, &e);
    search(p, w, e.value, &g, direction, opts).map_or(0.0, |(eta, _)| eta)
}

fn search(
    p: &SolverProblem,
    w: &DVector<f64>,
    value: f64,
    g: &DVector<f64>,
    direction: &DVector<f64>,
    opts: &SolverOptions,
) -> Option<(f64, DVector<f64>)> {
    let slope = g.dot(direction);
    if !(slope < 0.0) {
        return None;
    }
    let mut eta = 1.0;
    for _ in 0..=20 {
        let trial = w + direction * eta;
        let f = objective::objective_value(p, &trial);
        if f <= value + opts.armijo_constant * eta * slope {
            return Some((eta, trial));
        }
        eta *= opts.line_search_shrink;
    }
    None
}

/// Plain Newton iterations from `initial` (default: uniform).
pub fn newton_solve(
    p: &SolverProblem,
    opts: &SolverOptions,
    initial: Option<&DVector<f64>>,
) -> Result<Solution> {
    opts.validate()?;
    let dim = p.dim();
    let mut w = match initial {
        Some(w0) if w0.len() != dim => {
            return Err(Error::Dimension(format!(
                "initial point has length {}, expected {dim}",
                w0.len()
            )))
        }
        Some(w0) => w0.clone(),
        None => default_initial(dim),
    };
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let e = objective::evaluate(p, &w);
        let g = objective::gradient_at(p, &e);
        let grad_norm = max_abs(&g);
        let mut record = IterationRecord {
            iteration: iterations,
            objective: e.value,
            grad_norm,
            step: 0.0,
            active_size: e.active_set().len(),
        };
        if !e.value.is_finite() || !grad_norm.is_finite() {
            trace.push(record);
            return Err(Error::Numerical {
                message: "objective or gradient is not finite".into(),
                trace,
            });
        }
        let converged = grad_norm <= opts.gradient_tolerance;
        if converged || iterations >= opts.max_iterations {
            trace.push(record);
            return Ok(Solution {
                w_tilde: w,
                objective: e.value,
                grad_norm,
                iterations,
                converged,
                trace,
            });
        }

        let target = newton_target(p, &e)?;
        let newton_dir = &target - &w;
        let step = search(p, &w, e.value, &g, &newton_dir, opts)
            .or_else(|| search(p, &w, e.value, &g, &-&g, opts));
        match step {
            Some((eta, next)) => {
                record.step = eta;
                trace.push(record);
                w = next;
                iterations += 1;
            }
            None => {
                trace.push(record);
                return Ok(Solution {
                    w_tilde: w,
                    objective: e.value,
                    grad_norm,
                    iterations,
                    converged: false,
                    trace,
                });
            }
        }
    }
}

/// A problem restricted to a subset of nodes.
#[derive(Debug, Clone)]
pub enum Shrunk {
    Unchanged,
    /// Every node pair fell below the threshold.
    Empty,
    Reduced {
        problem: SolverProblem,
        /// Kept node indices of the parent problem, ascending.
        kept: Vec<usize>,
    },
}

/// Drops node pairs `(i, n+i)` whose combined magnitude is below the
/// sparsification threshold and rebuilds `S` and `Q` on the survivors.
///
/// The kept Laplacian is the principal submatrix of the parent one, so the
/// network penalty of any vector vanishing on the dropped nodes is unchanged.
pub fn shrink_support(p: &SolverProblem, w_tilde: &DVector<f64>, opts: &SolverOptions) -> Result<Shrunk> {
    let n = p.n_nodes();
    if w_tilde.len() != 2 * n {
        return Err(Error::Dimension(format!(
            "iterate has length {}, expected {}",
            w_tilde.len(),
            2 * n
        )));
    }
    let kept: Vec<usize> = (0..n)
        .filter(|&i| w_tilde[i].abs() + w_tilde[n + i].abs() >= opts.sparsify_threshold)
        .collect();
    if kept.len() == n {
        return Ok(Shrunk::Unchanged);
    }
    if kept.is_empty() {
        return Ok(Shrunk::Empty);
    }
    let mut position = vec![None; n];
    for (new, &old) in kept.iter().enumerate() {
        position[old] = Some(new);
    }
    let x = p.design_x().select_columns(&kept);
    let factor = match p.factor() {
        Some(f) => {
            let keep = |i: usize| position[i];
            let blocks = f.blocks.iter().filter_map(|b| b.restrict(&keep)).collect();
            Some(Arc::new(NetworkFactor::new(blocks, kept.len())?))
        }
        None => None,
    };
    let problem = assemble(&x, p.z(), factor, p.lambda1, p.lambda2)?;
    Ok(Shrunk::Reduced { problem, kept })
}

fn restrict(w: &DVector<f64>, n: usize, kept: &[usize]) -> DVector<f64> {
    let d = kept.len();
    DVector::from_fn(2 * d, |i, _| {
        if i < d {
            w[kept[i]]
        } else {
            w[n + kept[i - d]]
        }
    })
}

fn expand(w: &DVector<f64>, n: usize, kept: &[usize]) -> DVector<f64> {
    let d = kept.len();
    let mut out = DVector::zeros(2 * n);
    for (i, &k) in kept.iter().enumerate() {
        out[k] = w[i];
        out[n + k] = w[d + i];
    }
    out
}

/// Newton solve with support shrinking between restarts (see [`solve_shrinking`]).
pub fn solve(p: &SolverProblem, opts: &SolverOptions) -> Result<Solution> {
    if opts.shrinking {
        solve_shrinking(p, opts, opts.max_iterations)
    } else {
        newton_solve(p, opts, None)
    }
}

/// Runs at most `first_pass` Newton steps on the full problem. If that pass
/// does not converge, near-zero node pairs are dropped and Newton restarts on
/// the reduced problem with a fresh budget. The reduced optimum is mapped back
/// and checked against the full gradient; when a dropped coordinate turns out
/// to matter, a final pass runs on the full problem.
pub fn solve_shrinking(p: &SolverProblem, opts: &SolverOptions, first_pass: usize) -> Result<Solution> {
    let capped = SolverOptions {
        max_iterations: first_pass.max(1),
        ..*opts
    };
    let first = newton_solve(p, &capped, None)?;
    if first.converged {
        return Ok(first);
    }
    let n = p.n_nodes();
    let (reduced, kept) = match shrink_support(p, &first.w_tilde, opts)? {
        Shrunk::Reduced { problem, kept } => (problem, kept),
        Shrunk::Unchanged | Shrunk::Empty => {
            let rest = newton_solve(p, opts, Some(&first.w_tilde))?;
            return Ok(merge(first.trace, first.iterations, rest));
        }
    };
    let start = restrict(&first.w_tilde, n, &kept);
    let second = newton_solve(&reduced, opts, Some(&start))?;
    let w = expand(&second.w_tilde, n, &kept);
    let e = objective::evaluate(p, &w);
    let grad_norm = max_abs(&objective::gradient_at(p, &e));

    let mut trace = first.trace;
    trace.pop();
    let offset = first.iterations;
    trace.extend(second.trace.iter().map(|r| IterationRecord {
        iteration: r.iteration + offset,
        ..*r
    }));
    let iterations = offset + second.iterations;

    if grad_norm <= opts.gradient_tolerance {
        if let Some(last) = trace.last_mut() {
            last.objective = e.value;
            last.grad_norm = grad_norm;
        }
        return Ok(Solution {
            w_tilde: w,
            objective: e.value,
            grad_norm,
            iterations,
            converged: true,
            trace,
        });
    }
    // a dropped pair re-entered the active set: finish on the full problem
    let start = if e.value <= first.objective { w } else { first.w_tilde };
    let third = newton_solve(p, opts, Some(&start))?;
    Ok(merge(trace, iterations, third))
}

fn merge(mut trace: Vec<IterationRecord>, offset: usize, tail: Solution) -> Solution {
    trace.pop();
    trace.extend(tail.trace.iter().map(|r| IterationRecord {
        iteration: r.iteration + offset,
        ..*r
    }));
    Solution {
        iterations: offset + tail.iterations,
        trace,
        ..tail
    }
}

/// Collapses the split coefficients to `w_i = w~_i + w~_{n+i}`, zeroes entries
/// below the threshold, and rescales to unit L1 norm.
pub fn recover_coefficients(solution: &Solution, opts: &SolverOptions) -> Result<ModelCoefficients> {
    let w_tilde = &solution.w_tilde;
    if w_tilde.len() % 2 != 0 {
        return Err(Error::Dimension("split coefficient vector must have even length".into()));
    }
    let n = w_tilde.len() / 2;
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let v = w_tilde[i] + w_tilde[n + i];
            if v.abs() < opts.sparsify_threshold {
                0.0
            } else {
                v
            }
        })
        .collect();
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return Err(Error::EmptySupport);
    }
    w.iter_mut().for_each(|v| *v /= l1);
    let support = (0..n).filter(|&i| w[i] != 0.0).collect();
    Ok(ModelCoefficients {
        w,
        support,
        iterations_used: solution.iterations,
        final_objective: solution.objective,
    })
}
