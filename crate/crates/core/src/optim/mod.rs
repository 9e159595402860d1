//! Desk-scale solvers behind the recourse evaluators, with brute-force
//! reference routes for testing.

pub(crate) mod convex;
mod milp;
mod qp;
mod simplex;
pub mod transport;

pub use convex::{solve_convex_mip, ConvexExpr, ConvexMixedProgram, Curvature};
pub use milp::{enumerate_oracle, solve_milp, IntegerBox, MixedIntegerProgram, OracleProblem};
pub(crate) use qp::check_pd;
pub use qp::{solve_convex_qp, solve_miqp, solve_qp_by_kkt_enumeration, QuadraticMixedProgram};
pub use simplex::{solve_lp, solve_lp_with_duals, LpOutcome};
pub use transport::{solve_transport, transport_by_simplex, TransportPlan};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum number of simplex pivots before giving up.
pub const PIVOT_CAP: usize = 1_000_000;

/// Outcome of an optimization problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Solution<T> {
    Optimal { value: T, point: Vec<T> },
    Infeasible,
    Unbounded,
}

impl<T: Scalar> Solution<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Solution::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[T]> {
        match self {
            Solution::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, Solution::Optimal { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSense {
    Eq,
    Le,
    Ge,
}

/// Bounds of one variable; `None` means infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBound<T> {
    pub lower: Option<T>,
    pub upper: Option<T>,
}

impl<T: Scalar> VarBound<T> {
    pub fn nonneg() -> Self {
        VarBound {
            lower: Some(T::zero()),
            upper: None,
        }
    }

    pub fn free() -> Self {
        VarBound {
            lower: None,
            upper: None,
        }
    }

    pub fn range(lower: T, upper: T) -> Self {
        VarBound {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn fixed(v: T) -> Self {
        Self::range(v, v)
    }
}

/// `min c^T y  s.t.  rows_i . y (=,<=,>=) rhs_i,  bounds on y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub senses: Vec<RowSense>,
    pub bounds: Vec<VarBound<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    /// All variables nonnegative.
    pub fn new(
        objective: Vec<T>,
        rows: Vec<Vec<T>>,
        rhs: Vec<T>,
        senses: Vec<RowSense>,
    ) -> Result<Self> {
        let n = objective.len();
        let lp = LinearProgram {
            bounds: vec![VarBound::nonneg(); n],
            objective,
            rows,
            rhs,
            senses,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn with_bound(mut self, var: usize, bound: VarBound<T>) -> Self {
        self.bounds[var] = bound;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.rows.len() != self.rhs.len() || self.rows.len() != self.senses.len() {
            return Err(Error::Malformed(format!(
                "{} rows, {} rhs entries, {} senses",
                self.rows.len(),
                self.rhs.len(),
                self.senses.len()
            )));
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimMismatch {
                expected: n,
                found: r.len(),
            });
        }
        if self.bounds.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                found: self.bounds.len(),
            });
        }
        let finite = self
            .objective
            .iter()
            .chain(&self.rhs)
            .all(|v| v.is_finite())
            && self.rows.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("linear program data"));
        }
        Ok(())
    }
}
