//! Linear programming backend.
//!
//! The public surface is a plain [`LinearProgram`] description (bounded
//! variables, sparse rows with a relation and right-hand side) and two ways
//! to solve it: [`solve_lp`], backed by the native bounded-variable revised
//! simplex in [`simplex`], and [`vertex_oracle`], a brute-force enumeration
//! of basic points that is only viable for tiny programs and exists as an
//! independent check in tests.

mod lu;
mod oracle;
mod simplex;

pub use oracle::vertex_oracle;
pub use simplex::{Simplex, SimplexOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relation between a constraint row and its right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Relation::Le => write!(f, "<="),
            Relation::Eq => write!(f, "="),
            Relation::Ge => write!(f, ">="),
        }
    }
}

/// A decision variable with (possibly infinite) bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// One constraint row: sparse coefficients, relation, right-hand side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program in minimization form.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Number of inequality rows (the rows that constraint screening drops).
    pub fn n_inequalities(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count()
    }

    /// Adds a variable and returns its index.
    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(cost);
        self.variables.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Structural checks: coefficient references in range, finite right-hand
    /// sides, at least one variable, consistent bounds.
    pub fn validate(&self) -> Result<(), LpError> {
        if self.variables.is_empty() {
            return Err(LpError::Invalid("program has no variables".into()));
        }
        if self.objective.len() != self.variables.len() {
            return Err(LpError::Invalid(format!(
                "objective length {} does not match variable count {}",
                self.objective.len(),
                self.variables.len()
            )));
        }
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower > v.upper {
                return Err(LpError::Invalid(format!(
                    "variable {} ({}) has lower {} > upper {}",
                    j, v.name, v.lower, v.upper
                )));
            }
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(LpError::Invalid(format!("variable {} has NaN bound", j)));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::Invalid(format!("row {} has non-finite rhs", i)));
            }
            for &(j, a) in &c.coeffs {
                if j >= self.variables.len() {
                    return Err(LpError::Invalid(format!(
                        "row {} references undeclared variable {}",
                        i, j
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::Invalid(format!(
                        "row {} has non-finite coefficient on variable {}",
                        i, j
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fixed-format text listing of the program for diffing in tests.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "lp vars={} rows={}",
            self.variables.len(),
            self.constraints.len()
        );
        for (j, v) in self.variables.iter().enumerate() {
            let _ = writeln!(
                out,
                "var {} {} lb={} ub={} obj={}",
                j, v.name, v.lower, v.upper, self.objective[j]
            );
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let mut terms = String::new();
            for (pos, &(j, a)) in c.coeffs.iter().enumerate() {
                if pos > 0 {
                    terms.push_str(" + ");
                }
                let _ = write!(terms, "{}*{}", a, self.variables[j].name);
            }
            let _ = writeln!(out, "row {} {} {} : {}", i, c.relation, c.rhs, terms);
        }
        out
    }
}

/// Termination status of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solve statistics attached to every solution.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub wall_time_seconds: f64,
    pub n_variables: usize,
    pub n_constraints: usize,
    pub iterations: usize,
}

/// Result of a solve. `values` and `objective_value` are only meaningful
/// when `status == Optimal`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub stats: SolverStats,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid linear program: {0}")]
    Invalid(String),
    #[error("numeric failure: {0}")]
    Numerical(String),
    #[error("vertex oracle limited to 12 variables, got {0}")]
    OracleTooLarge(usize),
}

/// Solver backend interface. The native simplex is the required
/// implementation; external adapters can slot in behind the same contract.
pub trait LpBackend {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError>;
}

/// Solves with the native simplex backend under default options.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    Simplex::default().solve(lp)
}
