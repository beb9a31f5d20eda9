//! Optimal experimental design for multiresponse linear models.
//!
//! The library computes c-, A-, T-, D- and S-optimal designs over a finite
//! set of experiments by translating each criterion into a second-order cone
//! program, solving it with an embedded primal-dual interior-point solver,
//! and certifying the result through geometric optimality conditions
//! (Elfving-type decompositions, rank-one feasibility of the packing SDP,
//! and KKT conditions of the geometric-mean program).
//!
//! Module map:
//!
//! - [`model`]: problem data, information matrices, criterion values and
//!   Gauss–Markov estimators.
//! - [`conic`]: cone-program IR and the interior-point solver.
//! - [`formulations`]: criterion → cone program builders and design recovery.
//! - [`baselines`]: multiplicative-weight and vertex-exchange algorithms with
//!   equivalence-theorem stopping.
//! - [`verify`]: solver-independent optimality certificates.
//! - [`instances`]: deterministic instance generators and file serialization.

pub mod baselines;
pub mod conic;
pub mod formulations;
pub mod instances;
pub mod model;
pub mod verify;

pub use model::{Criterion, Design, DesignProblem, InformationMatrix, Target};
