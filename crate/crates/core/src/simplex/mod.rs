//! Continuous linear programs with individual variable bounds.
//!
//! Problems are always minimizations:
//!
//! ```text
//! minimize    c^T x
//! subject to  a_i^T x  {<=, >=, =}  b_i
//!             l_j <= x_j <= u_j      (l_j may be -inf, u_j may be +inf)
//! ```
//!
//! The solver is a bounded-variable revised simplex with an explicit basis
//! inverse. Phase one drives artificial variables out with the primal
//! method; phase two runs the dual method (to repair any residual primal
//! infeasibility) followed by the primal method. The same engine is reused
//! by branch-and-bound, which only changes variable bounds between solves.

mod engine;

use std::time::Duration;

use thiserror::Error;

pub(crate) use engine::{Engine, EngineStatus};

/// Relation between the left-hand side of a constraint and its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

/// A single linear constraint. Coefficients are stored sparsely as
/// `(variable, coefficient)` pairs with distinct variable indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self {
            terms,
            relation,
            rhs,
        }
    }

    /// Builds a constraint from a dense coefficient vector, dropping zeros.
    pub fn dense(coeffs: &[f64], relation: Relation, rhs: f64) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        Self {
            terms,
            relation,
            rhs,
        }
    }

    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violate this constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// An unconstrained problem with zero objective and bounds `[0, +inf)`.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn with_objective(mut self, objective: Vec<f64>) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn add_constraint(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars;
        if self.objective.len() != n {
            return Err(SolverError::Dimension {
                what: "objective",
                expected: n,
                found: self.objective.len(),
            });
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::Dimension {
                what: "bounds",
                expected: n,
                found: self.lower.len().min(self.upper.len()),
            });
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(SolverError::InvalidBounds { var: j, lower: l, upper: u });
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::NonFinite("objective"));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::NonFinite("right-hand side"));
            }
            let mut seen = std::collections::HashSet::with_capacity(row.terms.len());
            for &(j, a) in &row.terms {
                if j >= n {
                    return Err(SolverError::UnknownVariable { row: i, var: j });
                }
                if !a.is_finite() {
                    return Err(SolverError::NonFinite("constraint coefficient"));
                }
                if !seen.insert(j) {
                    return Err(SolverError::DuplicateTerm { row: i, var: j });
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any constraint or bound.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = values
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&l, &u))| (l - x).max(x - u).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot budget ran out before a terminal status was reached.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub values: Option<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Tolerances and limits shared by the LP and MILP solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub integrality_tol: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    /// Pivot budget for a single LP solve.
    pub iteration_limit: usize,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            integrality_tol: 1e-6,
            abs_gap: 1e-6,
            rel_gap: 0.0,
            iteration_limit: 200_000,
            node_limit: None,
            time_limit: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{what} has length {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("variable {var} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("constraint {row} references unknown variable {var}")]
    UnknownVariable { row: usize, var: usize },
    #[error("constraint {row} lists variable {var} twice")]
    DuplicateTerm { row: usize, var: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("binary variable {0} is out of range or not bounded by [0, 1]")]
    InvalidBinary(usize),
    #[error("basis matrix became singular")]
    Singular,
}

/// Solves a linear program.
///
/// Malformed input is an error; everything else (including running out of
/// pivots) is reported through [`LpSolution::status`].
pub fn solve_lp(problem: &LpProblem, config: &SolverConfig) -> Result<LpSolution, SolverError> {
    problem.validate()?;
    let mut engine = Engine::new(problem, config)?;
    let status = engine.solve()?;
    Ok(engine.solution(problem, status))
}
