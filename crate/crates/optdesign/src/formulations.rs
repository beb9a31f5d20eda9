//! Criterion-to-cone-program builders and design recovery.
//!
//! Each builder translates a design problem into the standard-form cone
//! program of its criterion and records where the recovery variables live;
//! the matching `recover_*` function turns an optimal conic solution back
//! into a design, its estimator coefficients, and the criterion value.
//!
//! c-optimality solves `max cᵀu` over `‖A_i u‖ ≤ 1`; the design and the
//! estimator blocks are read from the cone duals (`w = μ*/Σμ*`, variance
//! `(Σμ*)²`). A-optimality is the Frobenius-norm matrix variant, also
//! realizable by augmenting the problem to a single stacked vector target.
//! The constrained variant keeps the weights as explicit variables tied to
//! the estimator through hyperbolic constraints, and its optimal variance
//! is `Σμ*` (not squared). T-optimality minimizes the shared epigraph of
//! the squared Frobenius norms under `KᵀU = I`; the design appears in the
//! duals of those epigraph cones. The model-robust S-criterion maximizes a
//! weighted geometric mean of the per-model scale factors `t_k`, and
//! D-optimality instantiates it on the nested sub-models with β = 1/m.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::conic::{
    solve, ConeProgram, ConicError, ConicSolution, ProgramBuilder, SolveStatus, SolverSettings,
    VarBlock,
};
use crate::model::{
    Design, DesignProblem, LinearConstraints, ModelEnsemble, ModelError, SubModel, Target,
};

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("target not estimable by any feasible design (solver status {status})")]
    Inestimable { status: SolveStatus },
    #[error("no feasible design renders the information matrix nonsingular")]
    SingularM,
    #[error("solver did not reach optimality: status {status}")]
    NotOptimal { status: SolveStatus },
    #[error("unsupported formulation: {0}")]
    Unsupported(String),
}

/// Criterion the program was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionTag {
    COpt,
    AOpt,
    ConstrainedC,
    TOpt,
    DOpt,
    SBeta,
}

/// Where a named variable group lives in the solution vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarSpace {
    Primal,
    EqDual,
    ConeDual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSlice {
    pub space: VarSpace,
    pub start: usize,
    pub len: usize,
}

impl VarSlice {
    fn primal(block: VarBlock) -> Self {
        VarSlice {
            space: VarSpace::Primal,
            start: block.start,
            len: block.len,
        }
    }

    fn cone_dual(block: VarBlock) -> Self {
        VarSlice {
            space: VarSpace::ConeDual,
            start: block.start,
            len: block.len,
        }
    }

    fn eq_dual(start: usize, len: usize) -> Self {
        VarSlice {
            space: VarSpace::EqDual,
            start,
            len,
        }
    }

    /// Extract the slice from a solution.
    pub fn read<'a>(&self, solution: &'a ConicSolution) -> &'a [f64] {
        let v = match self.space {
            VarSpace::Primal => &solution.primal,
            VarSpace::EqDual => &solution.eq_dual,
            VarSpace::ConeDual => &solution.cone_dual,
        };
        &v[self.start..self.start + self.len]
    }
}

/// A built cone program plus the map locating every recovery quantity.
#[derive(Debug)]
pub struct FormulationResult {
    pub program: ConeProgram,
    pub recovery: BTreeMap<String, VarSlice>,
    pub criterion: CriterionTag,
}

impl FormulationResult {
    pub fn slice(&self, name: &str) -> Option<VarSlice> {
        self.recovery.get(name).copied()
    }

    /// Solve the program with the given settings.
    pub fn solve(&self, settings: &SolverSettings) -> Result<ConicSolution, FormulationError> {
        Ok(solve(&self.program, settings)?)
    }

    /// Validate that every recovery slice is in bounds.
    pub fn validate_recovery(&self) -> bool {
        self.recovery.values().all(|s| match s.space {
            VarSpace::Primal | VarSpace::ConeDual => s.start + s.len <= self.program.num_vars(),
            VarSpace::EqDual => s.start + s.len <= self.program.num_eqs(),
        })
    }
}

fn prune_and_renormalize(weights: DVector<f64>) -> Result<Design, FormulationError> {
    let raw = Design::new(weights.map(|w| w.max(0.0)))?;
    Ok(raw.pruned_simplex())
}

// ---------------------------------------------------------------------------
// c-optimality
// ---------------------------------------------------------------------------

/// Build `max cᵀu  s.t. ‖A_i u‖ ≤ 1` (as a minimization of −cᵀu).
///
/// Each norm constraint is one SOC block `(t_i, y_i)` with `t_i = 1` and
/// `y_i = A_i u` pinned by equality rows. The cone duals carry `(μ_i, −h_i)`.
pub fn build_c_optimal(
    problem: &DesignProblem,
    c: &DVector<f64>,
) -> Result<FormulationResult, FormulationError> {
    if problem.constraints.is_some() {
        return Err(FormulationError::Unsupported(
            "problem has linear constraints; use the constrained builder".into(),
        ));
    }
    if c.len() != problem.num_params {
        return Err(FormulationError::Model(ModelError::DimensionMismatch(
            format!("c has length {}, expected {}", c.len(), problem.num_params),
        )));
    }
    let m = problem.num_params;
    let mut builder = ProgramBuilder::new();
    let u = builder.free_block(m, "u");
    let mut recovery = BTreeMap::new();
    recovery.insert("u".to_string(), VarSlice::primal(u));
    for (i, a) in problem.observation_matrices.iter().enumerate() {
        let l = a.nrows();
        let soc = builder.soc_block(1 + l, &format!("norm[{i}]"));
        let radius_row = builder.new_row(1.0);
        builder.set(radius_row, soc.index(0), 1.0);
        for j in 0..l {
            let row = builder.new_row(0.0);
            builder.set(row, soc.index(1 + j), 1.0);
            for d in 0..m {
                builder.set(row, u.index(d), -a[(j, d)]);
            }
        }
        recovery.insert(format!("mu_h[{i}]"), VarSlice::cone_dual(soc));
    }
    for d in 0..m {
        builder.add_objective(u.index(d), -c[d]);
    }
    Ok(FormulationResult {
        program: builder.build(),
        recovery,
        criterion: CriterionTag::COpt,
    })
}

/// Design, estimator and variance recovered from a c-optimal solve.
#[derive(Debug, Clone)]
pub struct COptimalRecovery {
    pub design: Design,
    /// Per-experiment estimator blocks h_i.
    pub estimator: Vec<DVector<f64>>,
    /// Optimal variance (Σμ*)².
    pub variance: f64,
    /// Objective value cᵀu* (= Σμ* by strong duality).
    pub value: f64,
    /// Primal certificate u*.
    pub u: DVector<f64>,
}

pub fn recover_c_optimal(
    result: &FormulationResult,
    solution: &ConicSolution,
) -> Result<COptimalRecovery, FormulationError> {
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::DualInfeasible => {
            return Err(FormulationError::Inestimable {
                status: solution.status,
            })
        }
        status => return Err(FormulationError::NotOptimal { status }),
    }
    let u_slice = result.slice("u").expect("c-optimal result has u");
    let u = DVector::from_column_slice(u_slice.read(solution));
    let mut mus = Vec::new();
    let mut estimator = Vec::new();
    let mut i = 0;
    while let Some(slice) = result.slice(&format!("mu_h[{i}]")) {
        let dual = slice.read(solution);
        mus.push(dual[0].max(0.0));
        estimator.push(DVector::from_iterator(
            dual.len() - 1,
            dual[1..].iter().map(|v| -v),
        ));
        i += 1;
    }
    let total: f64 = mus.iter().sum();
    let design = prune_and_renormalize(DVector::from_vec(mus.clone()) / total)?;
    let value = -solution.primal_objective;
    Ok(COptimalRecovery {
        design,
        estimator,
        variance: total * total,
        value,
        u,
    })
}

// ---------------------------------------------------------------------------
// A-optimality
// ---------------------------------------------------------------------------

/// Build `max trace(KᵀU)  s.t. ‖A_i U‖_F ≤ 1` over the m × r matrix U.
pub fn build_a_optimal(
    problem: &DesignProblem,
    k: &DMatrix<f64>,
) -> Result<FormulationResult, FormulationError> {
    if problem.constraints.is_some() {
        return Err(FormulationError::Unsupported(
            "problem has linear constraints; use the constrained builder".into(),
        ));
    }
    let m = problem.num_params;
    let r = k.ncols();
    if k.nrows() != m {
        return Err(FormulationError::Model(ModelError::DimensionMismatch(
            format!("K has {} rows, expected {m}", k.nrows()),
        )));
    }
    let mut builder = ProgramBuilder::new();
    // U stored row-major: U[d, q] ↦ index d·r + q.
    let u = builder.free_block(m * r, "U");
    let mut recovery = BTreeMap::new();
    recovery.insert("U".to_string(), VarSlice::primal(u));
    for (i, a) in problem.observation_matrices.iter().enumerate() {
        let l = a.nrows();
        let soc = builder.soc_block(1 + l * r, &format!("fro[{i}]"));
        let radius_row = builder.new_row(1.0);
        builder.set(radius_row, soc.index(0), 1.0);
        for j in 0..l {
            for q in 0..r {
                let row = builder.new_row(0.0);
                builder.set(row, soc.index(1 + j * r + q), 1.0);
                for d in 0..m {
                    builder.set(row, u.index(d * r + q), -a[(j, d)]);
                }
            }
        }
        recovery.insert(format!("mu_h[{i}]"), VarSlice::cone_dual(soc));
    }
    for d in 0..m {
        for q in 0..r {
            builder.add_objective(u.index(d * r + q), -k[(d, q)]);
        }
    }
    Ok(FormulationResult {
        program: builder.build(),
        recovery,
        criterion: CriterionTag::AOpt,
    })
}

#[derive(Debug, Clone)]
pub struct AOptimalRecovery {
    pub design: Design,
    /// Per-experiment estimator blocks H_i (l_i × r).
    pub estimator: Vec<DMatrix<f64>>,
    /// Optimal A-criterion (Σμ*)².
    pub a_value: f64,
    /// trace(KᵀU*).
    pub trace_value: f64,
    pub u: DMatrix<f64>,
}

pub fn recover_a_optimal(
    result: &FormulationResult,
    solution: &ConicSolution,
    num_cols: usize,
) -> Result<AOptimalRecovery, FormulationError> {
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::DualInfeasible => {
            return Err(FormulationError::Inestimable {
                status: solution.status,
            })
        }
        status => return Err(FormulationError::NotOptimal { status }),
    }
    let r = num_cols;
    let u_slice = result.slice("U").expect("A-optimal result has U");
    let u_flat = u_slice.read(solution);
    let m = u_flat.len() / r;
    let u = DMatrix::from_fn(m, r, |d, q| u_flat[d * r + q]);
    let mut mus = Vec::new();
    let mut estimator = Vec::new();
    let mut i = 0;
    while let Some(slice) = result.slice(&format!("mu_h[{i}]")) {
        let dual = slice.read(solution);
        mus.push(dual[0].max(0.0));
        let l = (dual.len() - 1) / r;
        estimator.push(DMatrix::from_fn(l, r, |j, q| -dual[1 + j * r + q]));
        i += 1;
    }
    let total: f64 = mus.iter().sum();
    let design = prune_and_renormalize(DVector::from_vec(mus) / total)?;
    Ok(AOptimalRecovery {
        design,
        estimator,
        a_value: total * total,
        trace_value: -solution.primal_objective,
        u,
    })
}

/// The block-diagonal augmentation that renders A-optimality for `Kᵀθ` as a
/// plain c-optimal problem: observation matrices `I_r ⊗ A_i` and the stacked
/// target `[c₁; …; c_r]`.
pub fn augmented_c_problem(
    problem: &DesignProblem,
    k: &DMatrix<f64>,
) -> Result<(DesignProblem, DVector<f64>), FormulationError> {
    let m = problem.num_params;
    let r = k.ncols();
    let mut mats = Vec::with_capacity(problem.num_experiments());
    for a in &problem.observation_matrices {
        let l = a.nrows();
        let mut big = DMatrix::zeros(l * r, m * r);
        for q in 0..r {
            big.view_mut((q * l, q * m), (l, m)).copy_from(a);
        }
        mats.push(big);
    }
    let mut c = DVector::zeros(m * r);
    for q in 0..r {
        for d in 0..m {
            c[q * m + d] = k[(d, q)];
        }
    }
    let augmented = DesignProblem::new(mats, m * r)?.with_target(Target::Vector(c.clone()))?;
    Ok((augmented, c))
}

// ---------------------------------------------------------------------------
// Constrained c-optimality
// ---------------------------------------------------------------------------

/// Build the constrained program in variables (w, μ, h):
///
/// ```text
/// min Σμ_i   s.t.  Σ A_iᵀ h_i = c,  R w ≤ b,  w ≥ 0,  ‖h_i‖² ≤ w_i μ_i
/// ```
///
/// The optimal variance is Σμ* (not squared).
pub fn build_constrained_c_optimal(
    problem: &DesignProblem,
    c: &DVector<f64>,
    constraints: &LinearConstraints,
) -> Result<FormulationResult, FormulationError> {
    let m = problem.num_params;
    let s = problem.num_experiments();
    if c.len() != m {
        return Err(FormulationError::Model(ModelError::DimensionMismatch(
            format!("c has length {}, expected {m}", c.len()),
        )));
    }
    if constraints.matrix.ncols() != s {
        return Err(FormulationError::Model(ModelError::DimensionMismatch(
            "constraint matrix column count".into(),
        )));
    }
    let n_cons = constraints.matrix.nrows();
    let mut builder = ProgramBuilder::new();
    let w = builder.nonneg_block(s, "w");
    let mu = builder.nonneg_block(s, "mu");
    let l_dims: Vec<usize> = problem
        .observation_matrices
        .iter()
        .map(|a| a.nrows())
        .collect();
    let h_total: usize = l_dims.iter().sum();
    let h = builder.free_block(h_total, "h");
    let slack = builder.nonneg_block(n_cons, "slack");
    let mut recovery = BTreeMap::new();
    recovery.insert("w".to_string(), VarSlice::primal(w));
    recovery.insert("mu".to_string(), VarSlice::primal(mu));
    recovery.insert("h".to_string(), VarSlice::primal(h));

    // Hyperbolic constraints ‖h_i‖² ≤ w_i·μ_i.
    let mut h_offset = 0;
    for (i, &l) in l_dims.iter().enumerate() {
        let z: Vec<usize> = (0..l).map(|j| h.index(h_offset + j)).collect();
        builder.hyperbolic_constraint(&z, w.index(i), mu.index(i));
        h_offset += l;
    }
    // Σ A_iᵀ h_i = c.
    let base_row = builder.new_row(c[0]);
    let mut est_rows = vec![base_row];
    for d in 1..m {
        est_rows.push(builder.new_row(c[d]));
    }
    let mut h_offset = 0;
    for (a, &l) in problem.observation_matrices.iter().zip(&l_dims) {
        for j in 0..l {
            for d in 0..m {
                builder.set(est_rows[d], h.index(h_offset + j), a[(j, d)]);
            }
        }
        h_offset += l;
    }
    recovery.insert(
        "estimator_rows".to_string(),
        VarSlice::eq_dual(est_rows[0], m),
    );
    // R w + slack = b.
    for row_idx in 0..n_cons {
        let row = builder.new_row(constraints.rhs[row_idx]);
        for i in 0..s {
            builder.set(row, w.index(i), constraints.matrix[(row_idx, i)]);
        }
        builder.set(row, slack.index(row_idx), 1.0);
    }
    for i in 0..s {
        builder.add_objective(mu.index(i), 1.0);
    }
    Ok(FormulationResult {
        program: builder.build(),
        recovery,
        criterion: CriterionTag::ConstrainedC,
    })
}

#[derive(Debug, Clone)]
pub struct ConstrainedRecovery {
    /// Optimal weights (not renormalized; they satisfy R·w ≤ b).
    pub design: Design,
    pub estimator: Vec<DVector<f64>>,
    /// Optimal variance Σμ*.
    pub variance: f64,
}

pub fn recover_constrained_c_optimal(
    result: &FormulationResult,
    solution: &ConicSolution,
    l_dims: &[usize],
) -> Result<ConstrainedRecovery, FormulationError> {
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible => {
            return Err(FormulationError::Inestimable {
                status: solution.status,
            })
        }
        status => return Err(FormulationError::NotOptimal { status }),
    }
    let w = DVector::from_column_slice(result.slice("w").unwrap().read(solution));
    let mu = result.slice("mu").unwrap().read(solution);
    let h_flat = result.slice("h").unwrap().read(solution);
    let mut estimator = Vec::with_capacity(l_dims.len());
    let mut off = 0;
    for &l in l_dims {
        estimator.push(DVector::from_column_slice(&h_flat[off..off + l]));
        off += l;
    }
    let variance: f64 = mu.iter().sum();
    Ok(ConstrainedRecovery {
        design: Design::new(w.map(|v| v.max(0.0)))?,
        estimator,
        variance,
    })
}

// ---------------------------------------------------------------------------
// T-optimality
// ---------------------------------------------------------------------------

/// Build `min t  s.t. KᵀU = I,  ‖A_i U‖_F² ≤ t` (hyperbolic epigraphs with
/// the constant side pinned to 1). The formally T-optimal design lives in
/// the duals of the epigraph cones.
pub fn build_t_optimal(
    problem: &DesignProblem,
    k: &DMatrix<f64>,
) -> Result<FormulationResult, FormulationError> {
    let m = problem.num_params;
    let r = k.ncols();
    if k.nrows() != m {
        return Err(FormulationError::Model(ModelError::DimensionMismatch(
            format!("K has {} rows, expected {m}", k.nrows()),
        )));
    }
    let mut builder = ProgramBuilder::new();
    let t = builder.free_block(1, "t");
    let u = builder.free_block(m * r, "U");
    let mut recovery = BTreeMap::new();
    recovery.insert("t".to_string(), VarSlice::primal(t));
    recovery.insert("U".to_string(), VarSlice::primal(u));
    for (i, a) in problem.observation_matrices.iter().enumerate() {
        let l = a.nrows();
        // SOC (p, q, d) with p = t+1, q = 2·vec(A_i U), d = t−1 encodes
        // ‖A_i U‖_F² ≤ t·1.
        let soc = builder.soc_block(1 + l * r + 1, &format!("epi[{i}]"));
        let p_row = builder.new_row(1.0);
        builder.set(p_row, soc.index(0), 1.0);
        builder.set(p_row, t.index(0), -1.0);
        for j in 0..l {
            for q in 0..r {
                let row = builder.new_row(0.0);
                builder.set(row, soc.index(1 + j * r + q), 1.0);
                for d in 0..m {
                    builder.set(row, u.index(d * r + q), -2.0 * a[(j, d)]);
                }
            }
        }
        let d_row = builder.new_row(-1.0);
        builder.set(d_row, soc.index(1 + l * r), 1.0);
        builder.set(d_row, t.index(0), -1.0);
        recovery.insert(format!("epi_dual[{i}]"), VarSlice::cone_dual(soc));
    }
    // KᵀU = I_r.
    for a_idx in 0..r {
        for b_idx in 0..r {
            let row = builder.new_row(if a_idx == b_idx { 1.0 } else { 0.0 });
            for d in 0..m {
                builder.set(row, u.index(d * r + b_idx), k[(d, a_idx)]);
            }
        }
    }
    builder.add_objective(t.index(0), 1.0);
    Ok(FormulationResult {
        program: builder.build(),
        recovery,
        criterion: CriterionTag::TOpt,
    })
}

#[derive(Debug, Clone)]
pub struct TOptimalRecovery {
    pub design: Design,
    /// Optimal value t* = sup Φ_T.
    pub t_value: f64,
    pub u: DMatrix<f64>,
    /// Whether Range K ⊆ Range M(w*) holds, i.e. the formally T-optimal
    /// design is genuinely feasible for Kᵀθ.
    pub feasible: bool,
}

pub fn recover_t_optimal(
    problem: &DesignProblem,
    k: &DMatrix<f64>,
    result: &FormulationResult,
    solution: &ConicSolution,
) -> Result<TOptimalRecovery, FormulationError> {
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible => {
            return Err(FormulationError::Inestimable {
                status: solution.status,
            })
        }
        status => return Err(FormulationError::NotOptimal { status }),
    }
    let r = k.ncols();
    let t_value = result.slice("t").unwrap().read(solution)[0];
    let u_flat = result.slice("U").unwrap().read(solution);
    let m = problem.num_params;
    let u = DMatrix::from_fn(m, r, |d, q| u_flat[d * r + q]);
    // w_i = ζ_{i,0} + ζ_{i,last}: the dual of ‖A_iU‖²_F ≤ t·1 read on the
    // rotated cone; Σ w_i = 1 holds at optimality.
    let mut weights = Vec::new();
    let mut i = 0;
    while let Some(slice) = result.slice(&format!("epi_dual[{i}]")) {
        let dual = slice.read(solution);
        weights.push((dual[0] + dual[dual.len() - 1]).max(0.0));
        i += 1;
    }
    let design = prune_and_renormalize(DVector::from_vec(weights))?;
    // Feasibility of the formal optimum: Range K ⊆ Range M(w*).
    let info = problem.information_matrix(&design)?;
    let pinv = info.pseudo_inverse(crate::model::RANK_CUTOFF_REL);
    let residual = (k - info.matrix() * &pinv * k).norm();
    let feasible = residual <= 1e-6 * k.norm();
    Ok(TOptimalRecovery {
        design,
        t_value,
        u,
        feasible,
    })
}

// ---------------------------------------------------------------------------
// S-optimality and D-optimality
// ---------------------------------------------------------------------------

/// Build the geometric-mean program of the model-robust S-criterion:
/// maximize Π t_k^{β_k} subject to `t_k c_k = Σ_i A_(k),iᵀ v_ik`, the
/// per-experiment stacked-norm constraints `‖(√β_k v_ik)_k‖ ≤ w_i`, and
/// `Σ w_i ≤ 1`. Models with β_k = 0 are dropped.
pub fn build_s_optimal(ensemble: &ModelEnsemble) -> Result<FormulationResult, FormulationError> {
    let active: Vec<(&SubModel, f64)> = ensemble
        .models
        .iter()
        .zip(&ensemble.beliefs)
        .filter(|(_, &b)| b > 0.0)
        .map(|(m, &b)| (m, b))
        .collect();
    if active.is_empty() {
        return Err(FormulationError::Unsupported(
            "S-criterion needs at least one model with positive belief".into(),
        ));
    }
    let r = active.len();
    let s = active[0].0.observation_matrices.len();
    let beta: Vec<f64> = active.iter().map(|(_, b)| *b).collect();
    let sqrt_beta: Vec<f64> = beta.iter().map(|b| b.sqrt()).collect();

    let mut builder = ProgramBuilder::new();
    let t = builder.free_block(r, "t");
    let mut recovery = BTreeMap::new();
    recovery.insert("t".to_string(), VarSlice::primal(t));

    // Per-experiment SOC: (w_i, σ_i1, …, σ_ir) with σ_ik = √β_k·v_ik.
    let mut soc_blocks = Vec::with_capacity(s);
    for i in 0..s {
        let dims: usize = active
            .iter()
            .map(|(sub, _)| sub.observation_matrices[i].nrows())
            .sum();
        let soc = builder.soc_block(1 + dims, &format!("wv[{i}]"));
        soc_blocks.push(soc);
        recovery.insert(format!("wv[{i}]"), VarSlice::primal(soc));
    }
    // Coupling rows: t_k·c_k − Σ_i A_(k),iᵀ σ_ik/√β_k = 0.
    for (k_idx, (sub, _)) in active.iter().enumerate() {
        let mk = sub.target.len();
        let rows: Vec<usize> = (0..mk).map(|_| builder.new_row(0.0)).collect();
        recovery.insert(format!("hrow[{k_idx}]"), VarSlice::eq_dual(rows[0], mk));
        for d in 0..mk {
            builder.set(rows[d], t.index(k_idx), sub.target[d]);
        }
        for (i, soc) in soc_blocks.iter().enumerate() {
            // σ_ik offset within the block: 1 + Σ_{k'<k} l_{(k'),i}.
            let mut offset = 1;
            for (sub2, _) in active.iter().take(k_idx) {
                offset += sub2.observation_matrices[i].nrows();
            }
            let a = &sub.observation_matrices[i];
            for j in 0..a.nrows() {
                for d in 0..mk {
                    let coef = -a[(j, d)] / sqrt_beta[k_idx];
                    builder.set(rows[d], soc.index(offset + j), coef);
                }
            }
        }
    }
    // Σ w_i + slack = 1.
    let slack = builder.nonneg_block(1, "budget");
    let budget_row = builder.new_row(1.0);
    for soc in &soc_blocks {
        builder.set(budget_row, soc.index(0), 1.0);
    }
    builder.set(budget_row, slack.index(0), 1.0);
    recovery.insert("budget_row".to_string(), VarSlice::eq_dual(budget_row, 1));

    // Geometric-mean epigraph over the t_k; maximize its root.
    let t_indices: Vec<usize> = (0..r).map(|k| t.index(k)).collect();
    let s_var = builder.geometric_mean_epigraph(&t_indices, &beta)?;
    builder.add_objective(s_var, -1.0);
    recovery.insert(
        "geomean_root".to_string(),
        VarSlice {
            space: VarSpace::Primal,
            start: s_var,
            len: 1,
        },
    );
    Ok(FormulationResult {
        program: builder.build(),
        recovery,
        criterion: CriterionTag::SBeta,
    })
}

#[derive(Debug, Clone)]
pub struct SOptimalRecovery {
    pub design: Design,
    /// Per-model scale factors t_k.
    pub t: Vec<f64>,
    /// ε_ik = v_ik / w_i on the support (zero off support).
    pub epsilons: Vec<Vec<DVector<f64>>>,
    /// Dual vectors h_k of the geometric dual program.
    pub h: Vec<DVector<f64>>,
    /// Optimal S_β value −2·Σ β_k log t_k.
    pub value: f64,
    /// Value of the geometric-mean root Π t_k^{β_k}.
    pub root: f64,
}

pub fn recover_s_optimal(
    ensemble: &ModelEnsemble,
    result: &FormulationResult,
    solution: &ConicSolution,
) -> Result<SOptimalRecovery, FormulationError> {
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible => {
            return Err(FormulationError::Inestimable {
                status: solution.status,
            })
        }
        status => return Err(FormulationError::NotOptimal { status }),
    }
    let active: Vec<(&SubModel, f64)> = ensemble
        .models
        .iter()
        .zip(&ensemble.beliefs)
        .filter(|(_, &b)| b > 0.0)
        .map(|(m, &b)| (m, b))
        .collect();
    let r = active.len();
    let s = active[0].0.observation_matrices.len();
    let beta: Vec<f64> = active.iter().map(|(_, b)| *b).collect();
    let sqrt_beta: Vec<f64> = beta.iter().map(|b| b.sqrt()).collect();

    let t: Vec<f64> = result.slice("t").unwrap().read(solution).to_vec();
    let root = result.slice("geomean_root").unwrap().read(solution)[0];
    // Weights are the SOC radii.
    let mut weights = DVector::zeros(s);
    let mut sigma: Vec<Vec<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let block = result.slice(&format!("wv[{i}]")).unwrap().read(solution);
        weights[i] = block[0].max(0.0);
        sigma.push(block[1..].to_vec());
    }
    let design = prune_and_renormalize(weights.clone())?;
    // ε_ik = σ_ik / (√β_k · w_i).
    let mut epsilons = Vec::with_capacity(s);
    for i in 0..s {
        let mut per_model = Vec::with_capacity(r);
        let mut offset = 0;
        for (k_idx, (sub, _)) in active.iter().enumerate() {
            let l = sub.observation_matrices[i].nrows();
            let w = weights[i];
            let eps = if w > 1e-12 {
                DVector::from_iterator(
                    l,
                    sigma[i][offset..offset + l]
                        .iter()
                        .map(|v| v / (sqrt_beta[k_idx] * w)),
                )
            } else {
                DVector::zeros(l)
            };
            per_model.push(eps);
            offset += l;
        }
        epsilons.push(per_model);
    }
    // h_k from the coupling-row duals, normalized by the budget-row dual
    // (λ ≤ 0 at optimality; the sign makes t_k·h_kᵀc_k = +β_k).
    let lambda = result.slice("budget_row").unwrap().read(solution)[0];
    let denom = lambda;
    let mut h = Vec::with_capacity(r);
    for k_idx in 0..r {
        let slice = result.slice(&format!("hrow[{k_idx}]")).unwrap();
        let eta = slice.read(solution);
        h.push(DVector::from_iterator(
            eta.len(),
            eta.iter().map(|v| v / denom),
        ));
    }
    let value = -2.0
        * beta
            .iter()
            .zip(&t)
            .map(|(b, tk)| b * tk.max(1e-300).ln())
            .sum::<f64>();
    Ok(SOptimalRecovery {
        design,
        t,
        epsilons,
        h,
        value,
        root,
    })
}

/// Nested sub-models realizing D-optimality as an S-criterion instance:
/// model k observes the first k columns of each A_i and targets the k-th
/// coordinate, with uniform beliefs 1/m.
pub fn nested_d_ensemble(problem: &DesignProblem) -> Result<ModelEnsemble, FormulationError> {
    let m = problem.num_params;
    let mut models = Vec::with_capacity(m);
    for k in 1..=m {
        let mats: Vec<DMatrix<f64>> = problem
            .observation_matrices
            .iter()
            .map(|a| a.columns(0, k).into_owned())
            .collect();
        let mut ck = DVector::zeros(k);
        ck[k - 1] = 1.0;
        models.push(SubModel {
            observation_matrices: mats,
            target: ck,
        });
    }
    Ok(ModelEnsemble {
        models,
        beliefs: vec![1.0 / m as f64; m],
    })
}

/// Build the D-optimal program via the nested S-criterion construction.
pub fn build_d_optimal(
    problem: &DesignProblem,
) -> Result<(FormulationResult, ModelEnsemble), FormulationError> {
    let ensemble = nested_d_ensemble(problem)?;
    let mut result = build_s_optimal(&ensemble)?;
    result.criterion = CriterionTag::DOpt;
    Ok((result, ensemble))
}

#[derive(Debug, Clone)]
pub struct DOptimalRecovery {
    pub design: Design,
    /// Criterion value −(1/m)·log det M(w*).
    pub value: f64,
    pub s_recovery: SOptimalRecovery,
}

pub fn recover_d_optimal(
    ensemble: &ModelEnsemble,
    result: &FormulationResult,
    solution: &ConicSolution,
) -> Result<DOptimalRecovery, FormulationError> {
    let s_recovery = match recover_s_optimal(ensemble, result, solution) {
        Ok(rec) => rec,
        Err(FormulationError::Inestimable { .. }) => return Err(FormulationError::SingularM),
        Err(e) => return Err(e),
    };
    // S_{1/m} = −(1/m)·log det M, so the D value is the S value.
    Ok(DOptimalRecovery {
        design: s_recovery.design.clone(),
        value: s_recovery.value,
        s_recovery,
    })
}
