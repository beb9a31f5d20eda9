//! Cone-program intermediate representation and an embedded primal-dual
//! interior-point solver.
//!
//! Programs are in the variables-in-cones standard form
//!
//! ```text
//!   minimize    objᵀ x
//!   subject to  A_eq x = b_eq,    x ∈ K₁ × K₂ × …
//! ```
//!
//! where each block is a free block (`Zero`: no restriction on x, dual
//! block pinned to zero), the nonnegative orthant, or a second-order cone
//! whose first coordinate bounds the Euclidean norm of the rest.
//!
//! The solver is an infeasible-start primal-dual method with Nesterov–Todd
//! scaling and a Mehrotra-style predictor-corrector; the Newton system is
//! solved through a sparse quasi-definite LDLᵀ with a minimum-degree
//! ordering (dense fallback for small systems). Infeasibility is reported
//! through Farkas-type certificates.

mod builder;
mod cones;
mod kkt;
mod ldl;
mod order;
mod solver;
mod sparse;

pub use builder::{rationalize_beta, ProgramBuilder, VarBlock};
pub use sparse::CscMatrix;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("malformed cone program: {0}")]
    Malformed(String),
    #[error("belief weights admit no rational representation with denominator ≤ {max_den} (error > {tol:e})")]
    IrrationalBeta { max_den: u64, tol: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// One cone block of the variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Free variables; the conic dual block is identically zero.
    Zero(usize),
    /// Nonnegative orthant of the given dimension.
    NonNeg(usize),
    /// Second-order cone; the first coordinate is the cone's radius.
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(k) | Cone::NonNeg(k) | Cone::SecondOrder(k) => k,
        }
    }
}

/// A conic program in standard form.
#[derive(Debug, Clone)]
pub struct ConeProgram {
    /// Minimization objective over all N variables.
    pub objective: Vec<f64>,
    /// Equality constraint matrix, M_eq × N.
    pub eq_matrix: CscMatrix,
    pub eq_rhs: Vec<f64>,
    /// Ordered cone blocks; sizes sum to N.
    pub cones: Vec<Cone>,
    /// Optional labels used by recovery maps and the debug dump.
    pub variable_names: Option<Vec<String>>,
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_eqs(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let total: usize = self.cones.iter().map(|c| c.dim()).sum();
        if total != self.num_vars() {
            return Err(ConicError::Malformed(format!(
                "cone sizes sum to {total}, expected {}",
                self.num_vars()
            )));
        }
        for cone in &self.cones {
            if let Cone::SecondOrder(k) = cone {
                if *k < 1 {
                    return Err(ConicError::Malformed("second-order cone of size 0".into()));
                }
            }
        }
        if self.eq_matrix.ncols != self.num_vars() || self.eq_matrix.nrows != self.num_eqs() {
            return Err(ConicError::Malformed(format!(
                "equality matrix is {}×{}, expected {}×{}",
                self.eq_matrix.nrows,
                self.eq_matrix.ncols,
                self.num_eqs(),
                self.num_vars()
            )));
        }
        if let Some(names) = &self.variable_names {
            if names.len() != self.num_vars() {
                return Err(ConicError::Malformed(
                    "variable name list length mismatch".into(),
                ));
            }
        }
        Ok(())
    }

    /// Plain-text dump of the program in standard form, for cross-checking
    /// against external solvers. One line per objective nonzero, equality
    /// row and cone block:
    ///
    /// ```text
    /// standard-form minimize
    /// vars <N> eqs <M>
    /// obj <var>:<coef> ...
    /// eq <row>: <var>:<coef> ... = <rhs>
    /// cone zero|nonneg|soc <dim>
    /// ```
    pub fn dump_standard_form(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "standard-form minimize");
        let _ = writeln!(out, "vars {} eqs {}", self.num_vars(), self.num_eqs());
        let mut obj_line = String::from("obj");
        for (i, v) in self.objective.iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(obj_line, " {}:{:.17e}", i, v);
            }
        }
        let _ = writeln!(out, "{obj_line}");
        // Rows of A from the CSC columns.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_eqs()];
        for col in 0..self.eq_matrix.ncols {
            for p in self.eq_matrix.colptr[col]..self.eq_matrix.colptr[col + 1] {
                rows[self.eq_matrix.rowind[p]].push((col, self.eq_matrix.values[p]));
            }
        }
        for (r, entries) in rows.iter().enumerate() {
            let mut line = format!("eq {r}:");
            for (c, v) in entries {
                let _ = write!(line, " {}:{:.17e}", c, v);
            }
            let _ = write!(line, " = {:.17e}", self.eq_rhs[r]);
            let _ = writeln!(out, "{line}");
        }
        for cone in &self.cones {
            let _ = match cone {
                Cone::Zero(k) => writeln!(out, "cone zero {k}"),
                Cone::NonNeg(k) => writeln!(out, "cone nonneg {k}"),
                Cone::SecondOrder(k) => writeln!(out, "cone soc {k}"),
            };
        }
        if let Some(names) = &self.variable_names {
            for (i, name) in names.iter().enumerate() {
                let _ = writeln!(out, "name {i} {name}");
            }
        }
        out
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    /// Dual infeasible, i.e. the primal objective is unbounded below.
    DualInfeasible,
    MaxIter,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::PrimalInfeasible => "PrimalInfeasible",
            SolveStatus::DualInfeasible => "DualInfeasible",
            SolveStatus::MaxIter => "MaxIter",
            SolveStatus::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

/// Primal/dual iterates and convergence data returned by [`solve`].
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal variables x.
    pub primal: Vec<f64>,
    /// Equality multipliers y.
    pub eq_dual: Vec<f64>,
    /// Cone multipliers z (same layout as the variables).
    pub cone_dual: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Relative duality gap.
    pub duality_gap: f64,
    pub iterations: usize,
    /// Farkas certificate: scaled (y, z) for primal infeasibility, scaled x
    /// for dual infeasibility.
    pub certificate: Option<Vec<f64>>,
}

/// Solver settings; the defaults match the termination contract
/// (relative residuals and gap at 1e-8, 200 iterations, static
/// regularization 1e-9, dense KKT fallback below dimension 500).
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub static_reg: f64,
    pub infeas_tol: f64,
    pub dense_threshold: usize,
    pub equilibrate: bool,
    pub refine_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            max_iter: 200,
            static_reg: 1e-9,
            infeas_tol: 1e-8,
            dense_threshold: 500,
            equilibrate: true,
            refine_steps: 2,
        }
    }
}

/// Solve a cone program.
pub fn solve(program: &ConeProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    program.validate()?;
    Ok(solver::solve_ipm(program, settings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_bad_cone_sum() {
        let program = ConeProgram {
            objective: vec![1.0, 2.0],
            eq_matrix: CscMatrix::zeros(0, 2),
            eq_rhs: vec![],
            cones: vec![Cone::NonNeg(1)],
            variable_names: None,
        };
        assert!(program.validate().is_err());
    }

    #[test]
    fn dump_round_trips_visually() {
        let program = ConeProgram {
            objective: vec![1.0, 0.0],
            eq_matrix: CscMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]),
            eq_rhs: vec![1.0],
            cones: vec![Cone::NonNeg(2)],
            variable_names: None,
        };
        let dump = program.dump_standard_form();
        assert!(dump.contains("vars 2 eqs 1"));
        assert!(dump.contains("cone nonneg 2"));
    }
}
