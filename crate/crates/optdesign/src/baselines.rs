//! Classic iterative design algorithms with equivalence-theorem stopping.
//!
//! These serve as correctness cross-checks and benchmark opponents for the
//! cone-programming path: multiplicative weight updates with a power
//! parameter λ, the accelerated variant with shift parameter γ, and the
//! vertex-direction exchange step. All of them monitor the Kiefer ratio
//! `max_i φ_i(w) / φ̄(w)`, which equals 1 exactly at an optimal design.
//!
//! Directional derivatives: for D-optimality `φ_i = trace(M⁻¹A_iᵀA_i)` with
//! bound `φ̄ = m`; for A-optimality `φ_i = trace(M⁻KKᵀM⁻A_iᵀA_i)` with bound
//! `φ̄ = trace(KᵀM⁻K)` (the criterion value itself). c-optimality runs as
//! A-optimality with a single target column.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{Criterion, Design, DesignProblem, ModelError, RANK_CUTOFF_REL};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("accelerated update denominator vanished (φ̄ = γ·φ_min)")]
    DegenerateDenominator,
    #[error("problem has no target matrix for the A-criterion")]
    MissingTarget,
}

/// Criterion handled by the iterative algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineCriterion {
    /// A-optimality for the problem's target (c-optimality when r = 1).
    A,
    /// D-optimality for the full parameter.
    D,
}

/// Step rule of [`run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Multiplicative { lambda: f64 },
    Accelerated { gamma: f64 },
    Exchange,
}

/// State carried across iterations.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub design: Design,
    pub iterations: usize,
    /// Criterion value after each step (the minimized quantity).
    pub history: Vec<f64>,
    pub last_ratio: f64,
}

impl IterationState {
    pub fn start(s: usize) -> Self {
        IterationState {
            design: Design::uniform(s),
            iterations: 0,
            history: Vec::new(),
            last_ratio: f64::INFINITY,
        }
    }

    pub fn at(design: Design) -> Self {
        IterationState {
            design,
            iterations: 0,
            history: Vec::new(),
            last_ratio: f64::INFINITY,
        }
    }
}

/// Outcome of [`run`]: the final design plus a convergence flag (false when
/// the iteration budget ran out before the stopping ratio was met).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub design: Design,
    pub state: IterationState,
    pub converged: bool,
}

/// Gradient data at one design.
struct PhiData {
    phi: Vec<f64>,
    phi_bar: f64,
    criterion_value: f64,
}

fn target_matrix(problem: &DesignProblem) -> Result<DMatrix<f64>, BaselineError> {
    problem
        .target
        .as_ref()
        .map(|t| t.as_matrix())
        .ok_or(BaselineError::MissingTarget)
}

fn compute_phi(
    problem: &DesignProblem,
    design: &Design,
    criterion: BaselineCriterion,
) -> Result<PhiData, BaselineError> {
    let info = problem.information_matrix(design)?;
    match criterion {
        BaselineCriterion::D => {
            let m = problem.num_params as f64;
            let logdet = info.log_det()?;
            let minv = info
                .matrix()
                .clone()
                .try_inverse()
                .ok_or(ModelError::SingularM)?;
            let phi: Vec<f64> = problem
                .observation_matrices
                .iter()
                .map(|a| (a * &minv * a.transpose()).trace())
                .collect();
            Ok(PhiData {
                phi,
                phi_bar: m,
                criterion_value: -logdet / m,
            })
        }
        BaselineCriterion::A => {
            let k = target_matrix(problem)?;
            for col in k.column_iter() {
                info.quadratic_pinv(&col.into_owned(), RANK_CUTOFF_REL)?;
            }
            let pinv = info.pseudo_inverse(RANK_CUTOFF_REL);
            let g = &pinv * &k;
            let phi_bar = (k.transpose() * &g).trace();
            let phi: Vec<f64> = problem
                .observation_matrices
                .iter()
                .map(|a| {
                    let ag = a * &g;
                    ag.iter().map(|v| v * v).sum()
                })
                .collect();
            Ok(PhiData {
                phi,
                phi_bar,
                criterion_value: phi_bar,
            })
        }
    }
}

/// Kiefer equivalence-theorem ratio `max_i φ_i(w) / φ̄(w)` (≥ 1; equals 1
/// exactly at an optimal design).
pub fn kiefer_ratio(
    problem: &DesignProblem,
    design: &Design,
    criterion: BaselineCriterion,
) -> Result<f64, BaselineError> {
    let data = compute_phi(problem, design, criterion)?;
    let max_phi = data.phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(max_phi / data.phi_bar)
}

fn advance(state: &IterationState, design: Design, data: &PhiData) -> IterationState {
    let max_phi = data.phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut history = state.history.clone();
    history.push(data.criterion_value);
    IterationState {
        design,
        iterations: state.iterations + 1,
        history,
        last_ratio: max_phi / data.phi_bar,
    }
}

/// Multiplicative update `w_i ← w_i·φ_i^λ / Σ_j w_j·φ_j^λ`.
pub fn multiplicative_step(
    problem: &DesignProblem,
    state: &IterationState,
    criterion: BaselineCriterion,
    lambda: f64,
) -> Result<IterationState, BaselineError> {
    let data = compute_phi(problem, &state.design, criterion)?;
    let w = state.design.weights();
    let mut next = DVector::zeros(w.len());
    for i in 0..w.len() {
        next[i] = w[i] * data.phi[i].max(0.0).powf(lambda);
    }
    let total = next.sum();
    if total > 0.0 {
        next /= total;
    }
    let design = Design::new(next)?;
    Ok(advance(state, design, &data))
}

/// Accelerated update `w_i ∝ w_i·(φ_i − γ·φ_min)/(φ̄ − γ·φ_min)`; γ = 0
/// reduces to the λ = 1 multiplicative step.
pub fn accelerated_multiplicative_step(
    problem: &DesignProblem,
    state: &IterationState,
    criterion: BaselineCriterion,
    gamma: f64,
) -> Result<IterationState, BaselineError> {
    let data = compute_phi(problem, &state.design, criterion)?;
    let phi_min = data.phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let denom = data.phi_bar - gamma * phi_min;
    if denom.abs() < 1e-300 {
        return Err(BaselineError::DegenerateDenominator);
    }
    let w = state.design.weights();
    let mut next = DVector::zeros(w.len());
    for i in 0..w.len() {
        next[i] = w[i] * (data.phi[i] - gamma * phi_min) / denom;
    }
    let total = next.sum();
    if total > 0.0 {
        next /= total;
    }
    let design = Design::new(next)?;
    Ok(advance(state, design, &data))
}

/// Vertex-direction exchange step toward the experiment with the largest
/// directional derivative (ties broken toward the lowest index). D uses the
/// closed-form step length; A backtracks from the same guess until the
/// criterion does not worsen.
pub fn exchange_step(
    problem: &DesignProblem,
    state: &IterationState,
    criterion: BaselineCriterion,
) -> Result<IterationState, BaselineError> {
    let data = compute_phi(problem, &state.design, criterion)?;
    let s = state.design.len();
    let mut best = 0usize;
    for i in 1..s {
        if data.phi[i] > data.phi[best] {
            best = i;
        }
    }
    let ratio = data.phi[best] / data.phi_bar;
    let m = problem.num_params as f64;
    let alpha0 = ((ratio - 1.0) / (ratio * m - 1.0)).clamp(0.0, 1.0);
    let w = state.design.weights();
    let blended = |alpha: f64| -> DVector<f64> {
        let mut next = (1.0 - alpha) * w;
        next[best] += alpha;
        next
    };
    let alpha = match criterion {
        BaselineCriterion::D => alpha0,
        BaselineCriterion::A => {
            let mut alpha = alpha0;
            let mut accepted = false;
            for _ in 0..60 {
                if alpha <= 1e-14 {
                    break;
                }
                let cand = Design::new(blended(alpha))?;
                if let Ok(next_data) = compute_phi(problem, &cand, criterion) {
                    if next_data.criterion_value <= data.criterion_value {
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted {
                alpha
            } else {
                0.0
            }
        }
    };
    let design = Design::new(blended(alpha))?;
    Ok(advance(state, design, &data))
}

/// Iterate `method` from the uniform design until the Kiefer ratio drops to
/// `stop_ratio` or the iteration budget is exhausted (best-so-far returned
/// with `converged = false`).
pub fn run(
    problem: &DesignProblem,
    criterion: BaselineCriterion,
    method: Method,
    stop_ratio: f64,
    max_iter: usize,
) -> Result<RunOutcome, BaselineError> {
    let s = problem.num_experiments();
    let mut state = IterationState::start(s);
    for _ in 0..max_iter {
        let ratio = kiefer_ratio(problem, &state.design, criterion)?;
        state.last_ratio = ratio;
        if ratio <= stop_ratio {
            return Ok(RunOutcome {
                design: state.design.clone(),
                state,
                converged: true,
            });
        }
        state = match method {
            Method::Multiplicative { lambda } => {
                multiplicative_step(problem, &state, criterion, lambda)?
            }
            Method::Accelerated { gamma } => {
                accelerated_multiplicative_step(problem, &state, criterion, gamma)?
            }
            Method::Exchange => exchange_step(problem, &state, criterion)?,
        };
    }
    let converged = if max_iter == 0 {
        false
    } else {
        let ratio = kiefer_ratio(problem, &state.design, criterion)?;
        state.last_ratio = ratio;
        ratio <= stop_ratio
    };
    Ok(RunOutcome {
        design: state.design.clone(),
        state,
        converged,
    })
}

/// Parameters reported to work best: λ = 0.9 and γ = 0.9 for the
/// A-criterion, γ = 0.5 for D.
pub fn default_method(method: &str, criterion: BaselineCriterion) -> Option<Method> {
    match method {
        "mult" => Some(Method::Multiplicative { lambda: 0.9 }),
        "accel" => Some(Method::Accelerated {
            gamma: match criterion {
                BaselineCriterion::A => 0.9,
                BaselineCriterion::D => 0.5,
            },
        }),
        "exchange" => Some(Method::Exchange),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Target;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn unit_row(m: usize, j: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(1, m);
        a[(0, j)] = 1.0;
        a
    }

    fn axis_problem() -> DesignProblem {
        DesignProblem::new(vec![unit_row(2, 0), unit_row(2, 1)], 2)
            .unwrap()
            .with_target(Target::Matrix(DMatrix::identity(2, 2)))
            .unwrap()
    }

    fn design(w: &[f64]) -> Design {
        Design::new(DVector::from_column_slice(w)).unwrap()
    }

    #[test]
    fn kiefer_ratio_at_d_optimum_is_one() {
        let problem = axis_problem();
        let ratio = kiefer_ratio(&problem, &design(&[0.5, 0.5]), BaselineCriterion::D).unwrap();
        assert_relative_eq!(ratio, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kiefer_ratio_off_optimum() {
        // φ_i = 1/w_i for the axis instance, so the ratio is max(1/w_i)/2.
        let problem = axis_problem();
        let ratio = kiefer_ratio(&problem, &design(&[0.9, 0.1]), BaselineCriterion::D).unwrap();
        assert_relative_eq!(ratio, 5.0, max_relative = 1e-10);
    }

    #[test]
    fn kiefer_ratio_a_at_optimum() {
        let problem = axis_problem();
        let ratio = kiefer_ratio(&problem, &design(&[0.5, 0.5]), BaselineCriterion::A).unwrap();
        assert_relative_eq!(ratio, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn multiplicative_fixed_point_at_optimum() {
        let problem = axis_problem();
        let state = IterationState::at(design(&[0.5, 0.5]));
        let next = multiplicative_step(&problem, &state, BaselineCriterion::D, 1.0).unwrap();
        assert_relative_eq!(next.design.weights()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn multiplicative_one_step_convergence_on_axis() {
        // φ_i = 1/w_i, so λ = 1 jumps straight to the uniform optimum.
        let problem = axis_problem();
        let state = IterationState::at(design(&[0.9, 0.1]));
        let next = multiplicative_step(&problem, &state, BaselineCriterion::D, 1.0).unwrap();
        assert_relative_eq!(next.design.weights()[0], 0.5, max_relative = 1e-12);
        // λ = 0 is the identity map.
        let frozen = multiplicative_step(&problem, &state, BaselineCriterion::D, 0.0).unwrap();
        assert_relative_eq!(frozen.design.weights()[0], 0.9, max_relative = 1e-12);
    }

    #[test]
    fn accelerated_gamma_zero_matches_multiplicative() {
        let problem = axis_problem();
        let state = IterationState::at(design(&[0.9, 0.1]));
        let mult = multiplicative_step(&problem, &state, BaselineCriterion::D, 1.0).unwrap();
        let accel =
            accelerated_multiplicative_step(&problem, &state, BaselineCriterion::D, 0.0).unwrap();
        assert_relative_eq!(
            mult.design.weights()[0],
            accel.design.weights()[0],
            epsilon = 1e-14
        );
        // Positive γ takes a strictly larger step toward the optimum.
        let fast =
            accelerated_multiplicative_step(&problem, &state, BaselineCriterion::D, 0.5).unwrap();
        let d_mult = (mult.design.weights()[0] - 0.5).abs();
        let d_fast = (fast.design.weights()[0] - 0.5).abs();
        assert!(d_fast <= d_mult + 1e-14);
        let before = problem
            .criterion_value(&state.design, Criterion::D)
            .unwrap();
        let after = problem.criterion_value(&fast.design, Criterion::D).unwrap();
        assert!(after < before);
        // Fixed point for any γ < 1.
        let opt_state = IterationState::at(design(&[0.5, 0.5]));
        for gamma in [0.0, 0.5, 0.9] {
            let next =
                accelerated_multiplicative_step(&problem, &opt_state, BaselineCriterion::D, gamma)
                    .unwrap();
            assert_relative_eq!(next.design.weights()[0], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn exchange_step_improves_logdet() {
        let problem = axis_problem();
        let state = IterationState::at(design(&[0.9, 0.1]));
        let before = problem
            .criterion_value(&state.design, Criterion::D)
            .unwrap();
        let next = exchange_step(&problem, &state, BaselineCriterion::D).unwrap();
        let after = problem.criterion_value(&next.design, Criterion::D).unwrap();
        // Criterion is −(1/m)·log det, so improvement means decrease.
        assert!(after < before);
        assert!(next.design.weights()[1] > 0.1);
        // At the optimum the step length vanishes.
        let opt_state = IterationState::at(design(&[0.5, 0.5]));
        let frozen = exchange_step(&problem, &opt_state, BaselineCriterion::D).unwrap();
        assert_relative_eq!(frozen.design.weights()[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn exchange_single_experiment_is_fixed_point() {
        let problem = DesignProblem::new(vec![DMatrix::identity(2, 2)], 2)
            .unwrap()
            .with_target(Target::Matrix(DMatrix::identity(2, 2)))
            .unwrap();
        let state = IterationState::start(1);
        let next = exchange_step(&problem, &state, BaselineCriterion::D).unwrap();
        assert_relative_eq!(next.design.weights()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn run_reaches_kiefer_threshold_on_axis() {
        let problem = axis_problem();
        let outcome = run(
            &problem,
            BaselineCriterion::D,
            Method::Multiplicative { lambda: 0.9 },
            1.001,
            10_000,
        )
        .unwrap();
        assert!(outcome.converged);
        assert_relative_eq!(outcome.design.weights()[0], 0.5, max_relative = 1e-2);
        assert!(outcome.state.last_ratio <= 1.001);
    }

    #[test]
    fn run_zero_budget_returns_uniform_flagged() {
        let problem = axis_problem();
        let outcome = run(&problem, BaselineCriterion::D, Method::Exchange, 1.001, 0).unwrap();
        assert!(!outcome.converged);
        assert_relative_eq!(outcome.design.weights()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn singular_information_matrix_is_reported() {
        let problem = axis_problem();
        let err =
            kiefer_ratio(&problem, &design(&[1.0, 0.0]), BaselineCriterion::D).unwrap_err();
        assert!(matches!(err, BaselineError::Model(ModelError::SingularM)));
    }

    #[test]
    fn multiplicative_d_step_is_monotone_on_random_instances() {
        for seed in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mats: Vec<DMatrix<f64>> = (0..8)
                .map(|_| {
                    DMatrix::from_fn(2, 3, |_, _| {
                        rng.sample::<f64, _>(rand_distr::StandardNormal)
                    })
                })
                .collect();
            let problem = DesignProblem::new(mats, 3).unwrap();
            let mut state = IterationState::start(8);
            let mut prev = f64::INFINITY;
            for _ in 0..50 {
                state =
                    multiplicative_step(&problem, &state, BaselineCriterion::D, 1.0).unwrap();
                let value = *state.history.last().unwrap();
                assert!(value <= prev + 1e-12, "seed {seed}: {value} > {prev}");
                prev = value;
                assert!((state.design.sum() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn phi_matches_directional_derivative() {
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let mats: Vec<DMatrix<f64>> = (0..6)
            .map(|_| {
                DMatrix::from_fn(2, 3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
            })
            .collect();
        let k = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let problem = DesignProblem::new(mats, 3)
            .unwrap()
            .with_target(Target::Matrix(k))
            .unwrap();
        let w = DVector::from_fn(6, |i, _| 0.1 + 0.02 * i as f64);
        let w = &w / w.sum();
        let base = Design::new(w.clone()).unwrap();
        let h = 1e-5;
        // D: d/dε log det M((1−ε)w + ε·e_i) = φ_i − m.
        let d_data = compute_phi(&problem, &base, BaselineCriterion::D).unwrap();
        let blend = |eps: f64, i: usize| {
            let mut v = (1.0 - eps) * &w;
            v[i] += eps;
            Design::new(v).unwrap()
        };
        for i in 0..6 {
            let lp = problem
                .information_matrix(&blend(h, i))
                .unwrap()
                .log_det()
                .unwrap();
            let lm = problem
                .information_matrix(&blend(-h, i))
                .unwrap()
                .log_det()
                .unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert_relative_eq!(d_data.phi[i] - 3.0, fd, max_relative = 1e-4, epsilon = 1e-6);
        }
        // A: d/dε Φ_A((1−ε)w + ε·e_i) = −(φ_i − φ̄).
        let a_data = compute_phi(&problem, &base, BaselineCriterion::A).unwrap();
        for i in 0..6 {
            let fp = problem.criterion_value(&blend(h, i), Criterion::A).unwrap();
            let fm = problem
                .criterion_value(&blend(-h, i), Criterion::A)
                .unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert_relative_eq!(
                -(a_data.phi[i] - a_data.phi_bar),
                fd,
                max_relative = 1e-4,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn kiefer_ratio_never_below_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(321);
        for seed in 0..10u64 {
            let mats: Vec<DMatrix<f64>> = (0..7)
                .map(|_| {
                    DMatrix::from_fn(1, 3, |_, _| {
                        rng.sample::<f64, _>(rand_distr::StandardNormal)
                    })
                })
                .collect();
            let problem = DesignProblem::new(mats, 3).unwrap();
            let mut w = DVector::from_fn(7, |_, _| rng.random::<f64>() + 0.05);
            w /= w.sum();
            let ratio =
                kiefer_ratio(&problem, &Design::new(w).unwrap(), BaselineCriterion::D).unwrap();
            assert!(ratio >= 1.0 - 1e-10, "seed {seed}: ratio {ratio}");
        }
    }
}
