//! Dense strictly convex QP:
//!
//! ```text
//! min ½ xᵀPx + rᵀx   s.t.   Aeq x + beq = 0,   Aineq x + bineq ≥ 0
//! ```
//!
//! solved with a dual active-set method (Goldfarb–Idnani family).

mod active_set;
mod dump;

pub use active_set::ActiveSetSolver;
pub use dump::{read_problem, write_problem};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Diagonal regularization added by [`weighted_least_squares_to_qp`].
pub const EPS_REG: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("cost matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("malformed problem dump at line {line}: {message}")]
    Dump { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub r: DVector<f64>,
    pub aeq: DMatrix<f64>,
    pub beq: DVector<f64>,
    pub aineq: DMatrix<f64>,
    pub bineq: DVector<f64>,
    /// Constant term of the objective; does not affect the minimizer.
    pub constant: f64,
}

impl QpProblem {
    /// Cost only, no constraints.
    pub fn unconstrained(p: DMatrix<f64>, r: DVector<f64>) -> Self {
        let d = r.len();
        Self {
            p,
            r,
            aeq: DMatrix::zeros(0, d),
            beq: DVector::zeros(0),
            aineq: DMatrix::zeros(0, d),
            bineq: DVector::zeros(0),
            constant: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn n_eq(&self) -> usize {
        self.beq.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.bineq.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.r.dot(x) + self.constant
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let d = self.dim();
        let check = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(QpError::Dimension { what, expected, got })
            }
        };
        check("P rows", d, self.p.nrows())?;
        check("P columns", d, self.p.ncols())?;
        check("Aeq columns", d, self.aeq.ncols())?;
        check("beq length", self.aeq.nrows(), self.beq.len())?;
        check("Aineq columns", d, self.aineq.ncols())?;
        check("bineq length", self.aineq.nrows(), self.bineq.len())?;
        let scale = self.p.amax().max(1.0);
        if (&self.p - self.p.transpose()).amax() > 1e-9 * scale {
            return Err(QpError::NotPositiveDefinite);
        }
        Ok(())
    }

    /// Append equality rows.
    pub fn push_equalities(&mut self, a: &DMatrix<f64>, b: &DVector<f64>) {
        self.aeq = stack(&self.aeq, a);
        self.beq = stack_vec(&self.beq, b);
    }

    /// Append inequality rows.
    pub fn push_inequalities(&mut self, a: &DMatrix<f64>, b: &DVector<f64>) {
        self.aineq = stack(&self.aineq, a);
        self.bineq = stack_vec(&self.bineq, b);
    }
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols(), "row blocks must share the column count");
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn stack_vec(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    /// Active inequality indices, ascending.
    pub active: Vec<usize>,
    /// Multipliers of the equality rows (zero for rows dropped as redundant).
    pub eq_multipliers: DVector<f64>,
    /// Multipliers of the inequality rows, zero when inactive.
    pub ineq_multipliers: DVector<f64>,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Default iteration cap `10·(d + m_ineq)`.
pub fn default_max_iterations(problem: &QpProblem) -> usize {
    10 * (problem.dim() + problem.n_ineq()).max(1)
}

pub fn solve_qp(problem: &QpProblem, max_iterations: usize) -> Result<QpSolution, QpError> {
    ActiveSetSolver::new().solve(problem, max_iterations)
}

/// One least-squares term `½ Σ_k w_k (C x − c)_k²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBlock {
    pub c: DMatrix<f64>,
    pub target: DVector<f64>,
    pub weights: DVector<f64>,
}

impl CostBlock {
    pub fn uniform(c: DMatrix<f64>, target: DVector<f64>, weight: f64) -> Self {
        let weights = DVector::from_element(target.len(), weight);
        Self { c, target, weights }
    }
}

/// `P = Σ CᵀWC + εreg I`, `r = −Σ CᵀWc`, constant `½ Σ cᵀWc`.
pub fn weighted_least_squares_to_qp(blocks: &[CostBlock], dim: usize) -> Result<QpProblem, QpError> {
    let mut p = DMatrix::identity(dim, dim) * EPS_REG;
    let mut r = DVector::zeros(dim);
    let mut constant = 0.0;
    for block in blocks {
        let rows = block.target.len();
        if block.c.ncols() != dim {
            return Err(QpError::Dimension { what: "cost block columns", expected: dim, got: block.c.ncols() });
        }
        if block.c.nrows() != rows {
            return Err(QpError::Dimension { what: "cost block rows", expected: rows, got: block.c.nrows() });
        }
        if block.weights.len() != rows {
            return Err(QpError::Dimension { what: "cost block weights", expected: rows, got: block.weights.len() });
        }
        let mut wc = block.c.clone();
        for (i, w) in block.weights.iter().enumerate() {
            wc.row_mut(i).scale_mut(*w);
        }
        p.gemm_tr(1.0, &block.c, &wc, 1.0);
        r.gemv_tr(-1.0, &wc, &block.target, 1.0);
        constant += 0.5 * block.target.iter().zip(block.weights.iter()).map(|(c, w)| w * c * c).sum::<f64>();
    }
    // Symmetrize against rounding in the accumulation.
    let p = (&p + p.transpose()) * 0.5;
    let mut problem = QpProblem::unconstrained(p, r);
    problem.constant = constant;
    Ok(problem)
}

/// Post-hoc optimality certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖Px + r − Aeqᵀν − Aineqᵀμ‖∞`.
    pub stationarity: f64,
    /// `‖Aeq x + beq‖∞`.
    pub equality: f64,
    /// Most negative inequality slack (0 when none is violated).
    pub primal_violation: f64,
    /// Most negative inequality multiplier (0 when none).
    pub dual_violation: f64,
    /// `max |μ_i · s_i|`.
    pub complementarity: f64,
}

impl KktResiduals {
    /// Tolerances: stationarity `1e-7·(1+‖r‖)`, equality `1e-9·(1+‖beq‖)`,
    /// slack and multipliers `−1e-9`.
    pub fn certifies(&self, problem: &QpProblem) -> bool {
        self.stationarity <= 1e-7 * (1.0 + problem.r.norm())
            && self.equality <= 1e-9 * (1.0 + problem.beq.norm())
            && self.primal_violation >= -1e-9
            && self.dual_violation >= -1e-9
    }
}

pub fn kkt_residuals(problem: &QpProblem, solution: &QpSolution) -> KktResiduals {
    let x = &solution.x;
    let grad = &problem.p * x + &problem.r
        - problem.aeq.transpose() * &solution.eq_multipliers
        - problem.aineq.transpose() * &solution.ineq_multipliers;
    let eq = &problem.aeq * x + &problem.beq;
    let slack = &problem.aineq * x + &problem.bineq;
    KktResiduals {
        stationarity: grad.amax(),
        equality: eq.amax(),
        primal_violation: slack.iter().copied().fold(0.0, f64::min),
        dual_violation: solution.ineq_multipliers.iter().copied().fold(0.0, f64::min),
        complementarity: slack
            .iter()
            .zip(solution.ineq_multipliers.iter())
            .map(|(s, m)| (s * m).abs())
            .fold(0.0, f64::max),
    }
}

/// Solve many independent problems, in parallel when the `parallel` feature is on.
pub fn solve_batch(problems: &[QpProblem], exec: crate::par::Execution) -> Vec<Result<QpSolution, QpError>> {
    crate::par::map(exec, problems, |p| solve_qp(p, default_max_iterations(p)))
}
