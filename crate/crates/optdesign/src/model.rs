//! Experimental-design problem data and criterion evaluation.
//!
//! A problem is a finite collection of experiments, each described by an
//! observation matrix `A_i` (`l_i × m`). A design is a nonnegative weight
//! vector over the experiments; its information matrix is
//! `M(w) = Σ_i w_i A_iᵀ A_i`. Criterion values and Gauss–Markov estimators
//! are evaluated through a spectral pseudo-inverse of `M(w)` so that
//! rank-deficient information matrices are handled exactly as generalized
//! inverses: the value of `cᵀ M(w)⁻ c` does not depend on the choice of
//! generalized inverse when `c` is estimable.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative eigenvalue cutoff for the spectral pseudo-inverse.
pub const RANK_CUTOFF_REL: f64 = 1e-10;
/// Relative projection-residual threshold of the estimability test.
pub const ESTIMABLE_TOL: f64 = 1e-8;
/// Weights below this fraction of the maximum weight are outside the support.
pub const PRUNE_RATIO: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("target not estimable under this design (residual {residual:.3e} > {tol:.3e})")]
    Inestimable { residual: f64, tol: f64 },
    #[error("information matrix is singular within tolerance")]
    SingularM,
    #[error("invalid problem data: {0}")]
    Invalid(String),
}

/// Quantity of interest: a single linear combination `cᵀθ` or a subsystem
/// `Kᵀθ` given by the columns of an `m × r` matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Target {
    /// The target as an `m × r` matrix (`r = 1` for vector targets).
    pub fn as_matrix(&self) -> DMatrix<f64> {
        match self {
            Target::Vector(c) => DMatrix::from_column_slice(c.len(), 1, c.as_slice()),
            Target::Matrix(k) => k.clone(),
        }
    }

    pub fn num_columns(&self) -> usize {
        match self {
            Target::Vector(_) => 1,
            Target::Matrix(k) => k.ncols(),
        }
    }
}

/// Linear resource constraints `R w ≤ b` on the design weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// One sub-model of a model-robust (S-criterion) problem: its own
/// per-experiment observation matrices and scalar quantity of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct SubModel {
    pub observation_matrices: Vec<DMatrix<f64>>,
    pub target: DVector<f64>,
}

/// A collection of plausible sub-models with belief weights β (β ≥ 0, Σβ = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEnsemble {
    pub models: Vec<SubModel>,
    pub beliefs: Vec<f64>,
}

/// Design criterion selector for [`DesignProblem::criterion_value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    C,
    A,
    T,
    D,
    SBeta,
}

/// A finite experimental-design problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub observation_matrices: Vec<DMatrix<f64>>,
    pub num_params: usize,
    pub target: Option<Target>,
    pub constraints: Option<LinearConstraints>,
    pub models: Option<ModelEnsemble>,
}

impl DesignProblem {
    pub fn new(
        observation_matrices: Vec<DMatrix<f64>>,
        num_params: usize,
    ) -> Result<Self, ModelError> {
        let problem = DesignProblem {
            observation_matrices,
            num_params,
            target: None,
            constraints: None,
            models: None,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_target(mut self, target: Target) -> Result<Self, ModelError> {
        self.target = Some(target);
        self.validate()?;
        Ok(self)
    }

    pub fn with_constraints(mut self, constraints: LinearConstraints) -> Result<Self, ModelError> {
        self.constraints = Some(constraints);
        self.validate()?;
        Ok(self)
    }

    pub fn with_models(mut self, models: ModelEnsemble) -> Result<Self, ModelError> {
        self.models = Some(models);
        self.validate()?;
        Ok(self)
    }

    /// Number of available experiments.
    pub fn num_experiments(&self) -> usize {
        self.observation_matrices.len()
    }

    /// Check every structural invariant of the problem data.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.observation_matrices.is_empty() {
            return Err(ModelError::Invalid("no experiments".into()));
        }
        for (i, a) in self.observation_matrices.iter().enumerate() {
            if a.ncols() != self.num_params {
                return Err(ModelError::DimensionMismatch(format!(
                    "observation matrix {} has {} columns, expected {}",
                    i,
                    a.ncols(),
                    self.num_params
                )));
            }
        }
        if let Some(target) = &self.target {
            let rows = match target {
                Target::Vector(c) => c.len(),
                Target::Matrix(k) => k.nrows(),
            };
            if rows != self.num_params {
                return Err(ModelError::DimensionMismatch(format!(
                    "target has {} rows, expected {}",
                    rows, self.num_params
                )));
            }
        }
        if let Some(cons) = &self.constraints {
            if cons.matrix.ncols() != self.num_experiments() {
                return Err(ModelError::DimensionMismatch(format!(
                    "constraint matrix has {} columns, expected {}",
                    cons.matrix.ncols(),
                    self.num_experiments()
                )));
            }
            if cons.matrix.nrows() != cons.rhs.len() {
                return Err(ModelError::DimensionMismatch(
                    "constraint matrix rows do not match rhs length".into(),
                ));
            }
            if cons.rhs.iter().any(|b| !b.is_finite()) {
                return Err(ModelError::Invalid("constraint rhs must be finite".into()));
            }
        }
        if let Some(ensemble) = &self.models {
            if ensemble.models.len() != ensemble.beliefs.len() {
                return Err(ModelError::DimensionMismatch(
                    "belief vector length does not match number of models".into(),
                ));
            }
            if ensemble.beliefs.iter().any(|b| *b < 0.0) {
                return Err(ModelError::Invalid("beliefs must be nonnegative".into()));
            }
            let total: f64 = ensemble.beliefs.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(ModelError::Invalid(format!(
                    "beliefs sum to {total}, expected 1 within 1e-12"
                )));
            }
            for (k, sub) in ensemble.models.iter().enumerate() {
                if sub.observation_matrices.len() != self.num_experiments() {
                    return Err(ModelError::DimensionMismatch(format!(
                        "model {k} has {} experiments, expected {}",
                        sub.observation_matrices.len(),
                        self.num_experiments()
                    )));
                }
                let mk = sub.target.len();
                for a in &sub.observation_matrices {
                    if a.ncols() != mk {
                        return Err(ModelError::DimensionMismatch(format!(
                            "model {k} observation matrices must have {mk} columns"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `M(w) = Σ_i w_i A_iᵀ A_i`, symmetrized after accumulation.
    pub fn information_matrix(&self, design: &Design) -> Result<InformationMatrix, ModelError> {
        if design.len() != self.num_experiments() {
            return Err(ModelError::DimensionMismatch(format!(
                "design has {} weights, expected {}",
                design.len(),
                self.num_experiments()
            )));
        }
        let matrix = accumulate_information(&self.observation_matrices, design.weights());
        Ok(InformationMatrix { matrix })
    }

    /// Variance `cᵀ M(w)⁻ c` of the best linear unbiased estimator of `cᵀθ`.
    pub fn c_variance(
        &self,
        design: &Design,
        c: &DVector<f64>,
    ) -> Result<f64, ModelError> {
        if c.len() != self.num_params {
            return Err(ModelError::DimensionMismatch(format!(
                "target vector has length {}, expected {}",
                c.len(),
                self.num_params
            )));
        }
        let info = self.information_matrix(design)?;
        info.quadratic_pinv(c, RANK_CUTOFF_REL)
    }

    /// Evaluate the requested design criterion at `design`.
    ///
    /// A sums the variances over the target columns; T is
    /// `trace((Kᵀ M⁻ K)⁻¹)` with the continuity extension to 0 when the
    /// inner matrix is singular; D is `−(1/m)·log det M`; S is the
    /// belief-weighted sum of log variances over the sub-models.
    pub fn criterion_value(
        &self,
        design: &Design,
        criterion: Criterion,
    ) -> Result<f64, ModelError> {
        match criterion {
            Criterion::C => {
                let c = match self.target.as_ref() {
                    Some(Target::Vector(c)) => c.clone(),
                    Some(Target::Matrix(k)) if k.ncols() == 1 => k.column(0).into_owned(),
                    _ => {
                        return Err(ModelError::Invalid(
                            "c-criterion requires a vector target".into(),
                        ))
                    }
                };
                self.c_variance(design, &c)
            }
            Criterion::A => {
                let k = self.require_target()?.as_matrix();
                let info = self.information_matrix(design)?;
                let mut total = 0.0;
                for col in k.column_iter() {
                    total += info.quadratic_pinv(&col.into_owned(), RANK_CUTOFF_REL)?;
                }
                Ok(total)
            }
            Criterion::T => {
                let k = self.require_target()?.as_matrix();
                let info = self.information_matrix(design)?;
                let pinv = info.pseudo_inverse(RANK_CUTOFF_REL);
                let inner = k.transpose() * pinv * &k;
                let eig = nalgebra::SymmetricEigen::new(symmetrize(&inner));
                let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
                let cutoff = RANK_CUTOFF_REL * max_ev.max(1e-300);
                if eig.eigenvalues.iter().any(|&ev| ev <= cutoff) {
                    // Continuity extension of the T-criterion off the feasibility cone.
                    return Ok(0.0);
                }
                Ok(eig.eigenvalues.iter().map(|ev| 1.0 / ev).sum())
            }
            Criterion::D => {
                let info = self.information_matrix(design)?;
                let logdet = info.log_det()?;
                Ok(-logdet / self.num_params as f64)
            }
            Criterion::SBeta => {
                let ensemble = self.models.as_ref().ok_or_else(|| {
                    ModelError::Invalid("S-criterion requires sub-models".into())
                })?;
                let mut total = 0.0;
                for (sub, beta) in ensemble.models.iter().zip(&ensemble.beliefs) {
                    let mk =
                        accumulate_information(&sub.observation_matrices, design.weights());
                    let info = InformationMatrix { matrix: mk };
                    let var = info.quadratic_pinv(&sub.target, RANK_CUTOFF_REL)?;
                    total += beta * var.ln();
                }
                Ok(total)
            }
        }
    }

    /// Gauss–Markov estimator coefficients, split into per-experiment blocks.
    ///
    /// Returns `H_i = w_i A_i M(w)† K` (one `l_i × r` block per experiment);
    /// blocks of zero-weight experiments are exactly zero. For a vector
    /// target the blocks have a single column.
    pub fn blue_coefficients(
        &self,
        design: &Design,
        target: &Target,
    ) -> Result<Vec<DMatrix<f64>>, ModelError> {
        let k = target.as_matrix();
        if k.nrows() != self.num_params {
            return Err(ModelError::DimensionMismatch(format!(
                "target has {} rows, expected {}",
                k.nrows(),
                self.num_params
            )));
        }
        let info = self.information_matrix(design)?;
        // Estimability of every target column.
        for col in k.column_iter() {
            info.quadratic_pinv(&col.into_owned(), RANK_CUTOFF_REL)?;
        }
        let pinv_k = info.pseudo_inverse(RANK_CUTOFF_REL) * &k;
        let blocks = self
            .observation_matrices
            .iter()
            .zip(design.weights().iter())
            .map(|(a, &w)| if w == 0.0 {
                DMatrix::zeros(a.nrows(), k.ncols())
            } else {
                w * a * &pinv_k
            })
            .collect();
        Ok(blocks)
    }

    fn require_target(&self) -> Result<&Target, ModelError> {
        self.target
            .as_ref()
            .ok_or_else(|| ModelError::Invalid("problem has no target".into()))
    }
}

/// A nonnegative weight vector over the experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    weights: DVector<f64>,
}

impl Design {
    /// Build a design from raw weights. Weights more negative than
    /// `-1e-12·max` are rejected; round-off negatives are clamped to zero.
    pub fn new(weights: DVector<f64>) -> Result<Self, ModelError> {
        let max = weights.iter().cloned().fold(0.0f64, f64::max);
        let floor = -1e-12 * max.max(1.0);
        if weights.iter().any(|&w| w < floor || !w.is_finite()) {
            return Err(ModelError::Invalid(
                "design weights must be nonnegative and finite".into(),
            ));
        }
        let weights = weights.map(|w| w.max(0.0));
        Ok(Design { weights })
    }

    /// Uniform design `w = 1/s`.
    pub fn uniform(s: usize) -> Self {
        Design {
            weights: DVector::from_element(s, 1.0 / s as f64),
        }
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.len() == 0
    }

    pub fn sum(&self) -> f64 {
        self.weights.sum()
    }

    /// Indices with `w_i` above the prune threshold `PRUNE_RATIO · max w`.
    pub fn support(&self) -> Vec<usize> {
        let max = self.weights.iter().cloned().fold(0.0f64, f64::max);
        let thr = PRUNE_RATIO * max;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > thr)
            .map(|(i, _)| i)
            .collect()
    }

    /// Zero the weights below the prune threshold and renormalize to sum 1.
    pub fn pruned_simplex(&self) -> Design {
        let max = self.weights.iter().cloned().fold(0.0f64, f64::max);
        let thr = PRUNE_RATIO * max;
        let mut w = self.weights.map(|x| if x > thr { x } else { 0.0 });
        let total = w.sum();
        if total > 0.0 {
            w /= total;
        }
        Design { weights: w }
    }
}

/// The `m × m` information matrix of a design (symmetric PSD).
#[derive(Debug, Clone, PartialEq)]
pub struct InformationMatrix {
    matrix: DMatrix<f64>,
}

impl InformationMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        InformationMatrix {
            matrix: symmetrize(&matrix),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Spectral pseudo-inverse with relative eigenvalue cutoff.
    pub fn pseudo_inverse(&self, cutoff_rel: f64) -> DMatrix<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = cutoff_rel * max_ev.max(1e-300);
        let inv_vals =
            DVector::from_iterator(
                eig.eigenvalues.len(),
                eig.eigenvalues.iter().map(|&ev| if ev > cutoff { 1.0 / ev } else { 0.0 }),
            );
        &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
    }

    /// `cᵀ M⁻ c` with the estimability test: the projection of `c` on the
    /// numerical null space must be below `ESTIMABLE_TOL · ‖c‖`.
    pub fn quadratic_pinv(&self, c: &DVector<f64>, cutoff_rel: f64) -> Result<f64, ModelError> {
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = cutoff_rel * max_ev.max(1e-300);
        let coeffs = eig.eigenvectors.transpose() * c;
        let mut value = 0.0;
        let mut null_sq = 0.0;
        for (j, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev > cutoff {
                value += coeffs[j] * coeffs[j] / ev;
            } else {
                null_sq += coeffs[j] * coeffs[j];
            }
        }
        let residual = null_sq.sqrt();
        let tol = ESTIMABLE_TOL * c.norm();
        if residual > tol {
            return Err(ModelError::Inestimable { residual, tol });
        }
        Ok(value)
    }

    /// `log det M`, or `SingularM` if the matrix is singular within tolerance.
    pub fn log_det(&self) -> Result<f64, ModelError> {
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = RANK_CUTOFF_REL * max_ev.max(1e-300);
        let mut logdet = 0.0;
        for &ev in eig.eigenvalues.iter() {
            if ev <= cutoff {
                return Err(ModelError::SingularM);
            }
            logdet += ev.ln();
        }
        Ok(logdet)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn accumulate_information(matrices: &[DMatrix<f64>], weights: &DVector<f64>) -> DMatrix<f64> {
    let m = matrices[0].ncols();
    let mut acc = DMatrix::zeros(m, m);
    for (a, &w) in matrices.iter().zip(weights.iter()) {
        if w != 0.0 {
            acc += w * a.transpose() * a;
        }
    }
    symmetrize(&acc)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn unit_row(m: usize, j: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(1, m);
        a[(0, j)] = 1.0;
        a
    }

    /// Two single-row experiments e₁ᵀ and e₂ᵀ in dimension 2.
    fn axis_problem() -> DesignProblem {
        DesignProblem::new(vec![unit_row(2, 0), unit_row(2, 1)], 2).unwrap()
    }

    fn random_problem(s: usize, m: usize, l: usize, seed: u64) -> DesignProblem {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mats = (0..s)
            .map(|_| DMatrix::from_fn(l, m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal)))
            .collect();
        DesignProblem::new(mats, m).unwrap()
    }

    #[test]
    fn information_matrix_identity_experiment() {
        let problem = DesignProblem::new(vec![DMatrix::identity(2, 2)], 2).unwrap();
        let design = Design::new(DVector::from_vec(vec![1.0])).unwrap();
        let info = problem.information_matrix(&design).unwrap();
        assert_relative_eq!(info.matrix(), &DMatrix::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn information_matrix_orthonormal_rows() {
        let problem = axis_problem();
        let design = Design::new(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let info = problem.information_matrix(&design).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5]));
        assert_relative_eq!(info.matrix(), &expected, epsilon = 1e-15);
    }

    #[test]
    fn information_matrix_matches_triple_loop_oracle() {
        let problem = random_problem(3, 3, 2, 42);
        let w = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let design = Design::new(w.clone()).unwrap();
        let info = problem.information_matrix(&design).unwrap();
        // Naive per-entry accumulation.
        let m = 3;
        let mut oracle = DMatrix::zeros(m, m);
        for (idx, a) in problem.observation_matrices.iter().enumerate() {
            for p in 0..m {
                for q in 0..m {
                    let mut sum = 0.0;
                    for row in 0..a.nrows() {
                        sum += a[(row, p)] * a[(row, q)];
                    }
                    oracle[(p, q)] += w[idx] * sum;
                }
            }
        }
        assert_relative_eq!(info.matrix(), &oracle, epsilon = 1e-12);
    }

    #[test]
    fn c_variance_axis_instance() {
        let problem = axis_problem();
        let design = Design::new(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let var = problem.c_variance(&design, &c).unwrap();
        assert_relative_eq!(var, 4.0, epsilon = 1e-12);
        // Grid oracle over the simplex: 4 is also the minimum, at w = (1/2, 1/2).
        let mut best = f64::INFINITY;
        let mut best_w = 0.0;
        for k in 1..1000 {
            let w1 = k as f64 / 1000.0;
            let v = 1.0 / w1 + 1.0 / (1.0 - w1);
            if v < best {
                best = v;
                best_w = w1;
            }
        }
        assert_relative_eq!(best, 4.0, epsilon = 1e-4);
        assert_relative_eq!(best_w, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn c_variance_single_observation() {
        let problem = DesignProblem::new(vec![unit_row(2, 0)], 2).unwrap();
        let design = Design::new(DVector::from_vec(vec![1.0])).unwrap();
        let var = problem
            .c_variance(&design, &DVector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert_relative_eq!(var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn c_variance_inestimable() {
        let problem = DesignProblem::new(vec![unit_row(2, 0)], 2).unwrap();
        let design = Design::new(DVector::from_vec(vec![1.0])).unwrap();
        let err = problem
            .c_variance(&design, &DVector::from_vec(vec![0.0, 1.0]))
            .unwrap_err();
        assert!(matches!(err, ModelError::Inestimable { .. }));
    }

    #[test]
    fn criterion_values_on_axis_instance() {
        let problem = axis_problem()
            .with_target(Target::Matrix(DMatrix::identity(2, 2)))
            .unwrap();
        let design = Design::new(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let a = problem.criterion_value(&design, Criterion::A).unwrap();
        assert_relative_eq!(a, 4.0, epsilon = 1e-12);
        let d = problem.criterion_value(&design, Criterion::D).unwrap();
        assert_relative_eq!(d, (2.0f64).ln(), epsilon = 1e-12);
        // Grid oracle: (1/2, 1/2) maximizes det M = w(1-w).
        let mut best = f64::NEG_INFINITY;
        let mut best_w = 0.0;
        for k in 1..1000 {
            let w1 = k as f64 / 1000.0;
            let det = w1 * (1.0 - w1);
            if det > best {
                best = det;
                best_w = w1;
            }
        }
        assert_relative_eq!(best_w, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn t_criterion_single_experiment() {
        let problem = DesignProblem::new(vec![2.0 * DMatrix::identity(2, 2)], 2)
            .unwrap()
            .with_target(Target::Matrix(DMatrix::identity(2, 2)))
            .unwrap();
        let design = Design::new(DVector::from_vec(vec![1.0])).unwrap();
        let t = problem.criterion_value(&design, Criterion::T).unwrap();
        assert_relative_eq!(t, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn blue_identity_model() {
        let problem = DesignProblem::new(vec![DMatrix::identity(2, 2)], 2).unwrap();
        let design = Design::new(DVector::from_vec(vec![1.0])).unwrap();
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let blocks = problem
            .blue_coefficients(&design, &Target::Vector(c))
            .unwrap();
        assert_relative_eq!(blocks[0][(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(blocks[0][(1, 0)], 1.0, epsilon = 1e-12);
        let var: f64 = blocks[0].iter().map(|h| h * h).sum();
        assert_relative_eq!(var, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn blue_axis_instance_matches_normal_equations() {
        let problem = axis_problem();
        let design = Design::new(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let blocks = problem
            .blue_coefficients(&design, &Target::Vector(c.clone()))
            .unwrap();
        // Hand oracle: M = diag(1/2, 1/2), h_i = w_i A_i M⁻¹ c = (1/2)·(2) = 1.
        assert_relative_eq!(blocks[0][(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(blocks[1][(0, 0)], 1.0, epsilon = 1e-12);
        let var: f64 = blocks
            .iter()
            .zip(design.weights().iter())
            .map(|(h, &w)| h.iter().map(|x| x * x).sum::<f64>() / w)
            .sum();
        assert_relative_eq!(var, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn blue_zero_weight_block_is_zero() {
        let mut mats = vec![unit_row(2, 0), unit_row(2, 1)];
        mats.push(DMatrix::from_row_slice(1, 2, &[3.0, -1.0]));
        let problem = DesignProblem::new(mats, 2).unwrap();
        let design = Design::new(DVector::from_vec(vec![0.5, 0.5, 0.0])).unwrap();
        let blocks = problem
            .blue_coefficients(&design, &Target::Vector(DVector::from_vec(vec![1.0, 1.0])))
            .unwrap();
        assert_eq!(blocks[2][(0, 0)], 0.0);
    }

    #[test]
    fn blue_unbiasedness_and_variance_on_random_instances() {
        for seed in 0..10u64 {
            let problem = random_problem(8, 4, 2, seed);
            let design = Design::uniform(8);
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + seed);
            let c = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let blocks = problem
                .blue_coefficients(&design, &Target::Vector(c.clone()))
                .unwrap();
            let mut recovered = DVector::zeros(4);
            for (a, h) in problem.observation_matrices.iter().zip(&blocks) {
                recovered += a.transpose() * h.column(0);
            }
            assert!((recovered - &c).norm() <= 1e-8 * c.norm());
            let var_blocks: f64 = blocks
                .iter()
                .zip(design.weights().iter())
                .map(|(h, &w)| h.column(0).norm_squared() / w)
                .sum();
            let var = problem.c_variance(&design, &c).unwrap();
            assert_relative_eq!(var_blocks, var, max_relative = 1e-8);
        }
    }

    #[test]
    fn information_matrix_is_psd_on_random_instances() {
        for seed in 0..20u64 {
            let problem = random_problem(6, 4, 2, seed);
            let mut rng = ChaCha12Rng::seed_from_u64(500 + seed);
            let w = DVector::from_fn(6, |_, _| rng.random::<f64>());
            let design = Design::new(w).unwrap();
            let info = problem.information_matrix(&design).unwrap();
            let norm = info.matrix().norm();
            assert!(info.min_eigenvalue() >= -1e-10 * norm);
            let asym = (info.matrix() - info.matrix().transpose()).norm();
            assert!(asym <= 1e-12 * norm.max(1.0));
        }
    }

    #[test]
    fn c_variance_scaling_invariant() {
        let problem = random_problem(6, 3, 2, 7);
        let base = DVector::from_fn(6, |i, _| 0.1 + 0.05 * i as f64);
        let c = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let v1 = problem
            .c_variance(&Design::new(base.clone()).unwrap(), &c)
            .unwrap();
        for alpha in [2.0, 10.0] {
            let v2 = problem
                .c_variance(&Design::new(alpha * base.clone()).unwrap(), &c)
                .unwrap();
            assert_relative_eq!(v2, v1 / alpha, max_relative = 1e-9);
        }
    }

    #[test]
    fn pinv_cutoff_stability_on_estimable_instances() {
        // Rank-deficient M with estimable c: third coordinate never observed.
        let mats = vec![unit_row(3, 0), unit_row(3, 1)];
        let problem = DesignProblem::new(mats, 3).unwrap();
        let design = Design::new(DVector::from_vec(vec![0.3, 0.7])).unwrap();
        let c = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let info = problem.information_matrix(&design).unwrap();
        let v_lo = info.quadratic_pinv(&c, 1e-10).unwrap();
        let v_hi = info.quadratic_pinv(&c, 1e-8).unwrap();
        assert_relative_eq!(v_lo, v_hi, max_relative = 1e-6);
    }

    #[test]
    fn d_gradient_matches_finite_differences() {
        let problem = random_problem(5, 3, 2, 11);
        let w = DVector::from_fn(5, |i, _| 0.1 + 0.04 * i as f64);
        let design = Design::new(w.clone()).unwrap();
        let info = problem.information_matrix(&design).unwrap();
        let minv = info.matrix().clone().try_inverse().unwrap();
        for i in 0..5 {
            let a = &problem.observation_matrices[i];
            let analytic = (&minv * a.transpose() * a).trace();
            let h = 1e-5;
            let mut wp = w.clone();
            wp[i] += h;
            let mut wm = w.clone();
            wm[i] -= h;
            let lp = problem
                .information_matrix(&Design::new(wp).unwrap())
                .unwrap()
                .log_det()
                .unwrap();
            let lm = problem
                .information_matrix(&Design::new(wm).unwrap())
                .unwrap()
                .log_det()
                .unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert_relative_eq!(analytic, fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn beliefs_must_sum_to_one() {
        let sub = SubModel {
            observation_matrices: vec![unit_row(2, 0), unit_row(2, 1)],
            target: DVector::from_vec(vec![1.0, 0.0]),
        };
        let err = axis_problem()
            .with_models(ModelEnsemble {
                models: vec![sub],
                beliefs: vec![0.9],
            })
            .unwrap_err();
        assert!(matches!(err, ModelError::Invalid(_)));
    }

    #[test]
    fn design_support_prunes_small_weights() {
        // Threshold is 1e-7 of the max weight (5e-8 here).
        let design =
            Design::new(DVector::from_vec(vec![0.5, 0.5 - 1e-9, 1e-7, 1e-9, 0.0])).unwrap();
        assert_eq!(design.support(), vec![0, 1, 2]);
        let tiny = Design::new(DVector::from_vec(vec![1.0, 1e-8])).unwrap();
        assert_eq!(tiny.support(), vec![0]);
    }
}
