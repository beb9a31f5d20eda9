//! Infeasible-start primal-dual interior-point loop.

use super::cones::{
    barrier_degree, jordan_div, jordan_prod, layout, nt_scaling, nudge_interior, shift_interior,
    step_to_boundary, unit, BlockKind, BlockLayout, Scaling,
};
use super::kkt::KktSolver;
use super::sparse::CscMatrix;
use super::{ConeProgram, ConicSolution, SolveStatus, SolverSettings};

const RUIZ_ITERS: usize = 10;
const STEP_DAMP: f64 = 0.99;
const MIN_STEP: f64 = 1e-10;

struct Workspace {
    nvars: usize,
    neq: usize,
    blocks: Vec<BlockLayout>,
    degree: usize,
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    // Equilibration scalings (identity when disabled).
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost_scale: f64,
    // Unscaled copies for reporting.
    b_unscaled: Vec<f64>,
    c_unscaled: Vec<f64>,
    a_unscaled: CscMatrix,
    a_norm: f64,
}

impl Workspace {
    fn new(program: &ConeProgram, equilibrate: bool) -> Self {
        let blocks = layout(&program.cones);
        let nvars = program.num_vars();
        let neq = program.num_eqs();
        let mut a = program.eq_matrix.clone();
        let mut b = program.eq_rhs.clone();
        let mut c = program.objective.clone();
        let mut row_scale = vec![1.0; neq];
        let mut col_scale = vec![1.0; nvars];
        if equilibrate && a.nnz() > 0 {
            ruiz_equilibrate(&mut a, &blocks, &mut row_scale, &mut col_scale);
            for (bi, r) in b.iter_mut().zip(&row_scale) {
                *bi *= r;
            }
            for (ci, s) in c.iter_mut().zip(&col_scale) {
                *ci *= s;
            }
        }
        let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cost_scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
        for ci in c.iter_mut() {
            *ci *= cost_scale;
        }
        let a_norm = program.eq_matrix.max_abs().max(1.0);
        Workspace {
            nvars,
            neq,
            degree: barrier_degree(&blocks),
            blocks,
            a,
            b,
            c,
            row_scale,
            col_scale,
            cost_scale,
            b_unscaled: program.eq_rhs.clone(),
            c_unscaled: program.objective.clone(),
            a_unscaled: program.eq_matrix.clone(),
            a_norm,
        }
    }

    fn unscale_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.col_scale).map(|(v, s)| v * s).collect()
    }

    fn unscale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.row_scale)
            .map(|(v, s)| v * s / self.cost_scale)
            .collect()
    }

    fn unscale_z(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.col_scale)
            .map(|(v, s)| v / s / self.cost_scale)
            .collect()
    }
}

/// Ruiz equilibration with block-uniform column scaling on SOC blocks so
/// cone membership is preserved.
fn ruiz_equilibrate(
    a: &mut CscMatrix,
    blocks: &[BlockLayout],
    row_scale: &mut [f64],
    col_scale: &mut [f64],
) {
    let neq = a.nrows;
    let nvars = a.ncols;
    for _ in 0..RUIZ_ITERS {
        let mut row_max = vec![0.0f64; neq];
        let mut col_max = vec![0.0f64; nvars];
        for col in 0..nvars {
            for p in a.colptr[col]..a.colptr[col + 1] {
                let v = a.values[p].abs();
                let r = a.rowind[p];
                row_max[r] = row_max[r].max(v);
                col_max[col] = col_max[col].max(v);
            }
        }
        // Uniform factor per SOC block.
        for blk in blocks {
            if blk.kind == BlockKind::Soc {
                let m = (blk.offset..blk.offset + blk.dim)
                    .map(|i| col_max[i])
                    .fold(0.0f64, f64::max);
                for i in blk.offset..blk.offset + blk.dim {
                    col_max[i] = m;
                }
            }
        }
        let dr: Vec<f64> = row_max
            .iter()
            .map(|&m| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 })
            .collect();
        let dc: Vec<f64> = col_max
            .iter()
            .map(|&m| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 })
            .collect();
        a.scale(&dr, &dc);
        for (r, d) in row_scale.iter_mut().zip(&dr) {
            *r *= d;
        }
        for (c, d) in col_scale.iter_mut().zip(&dc) {
            *c *= d;
        }
    }
}

struct BlockVecs<'a> {
    blocks: &'a [BlockLayout],
}

impl<'a> BlockVecs<'a> {
    fn scalings(&self, x: &[f64], z: &[f64]) -> Vec<Scaling> {
        self.blocks
            .iter()
            .map(|b| nt_scaling(b.kind, &x[b.offset..b.offset + b.dim], &z[b.offset..b.offset + b.dim]))
            .collect()
    }

    fn cone_dot(&self, x: &[f64], z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for b in self.blocks {
            if b.kind != BlockKind::Free {
                for i in b.offset..b.offset + b.dim {
                    acc += x[i] * z[i];
                }
            }
        }
        acc
    }

    fn min_step(&self, v: &[f64], dv: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for b in self.blocks {
            if b.kind != BlockKind::Free {
                alpha = alpha.min(step_to_boundary(
                    b.kind,
                    &v[b.offset..b.offset + b.dim],
                    &dv[b.offset..b.offset + b.dim],
                ));
            }
        }
        alpha
    }
}

pub(super) fn solve_ipm(program: &ConeProgram, settings: &SolverSettings) -> ConicSolution {
    let ws = Workspace::new(program, settings.equilibrate);
    let nvars = ws.nvars;
    let neq = ws.neq;
    let bv = BlockVecs { blocks: &ws.blocks };

    let mut kkt = match KktSolver::new(
        &ws.a,
        &ws.blocks,
        settings.static_reg,
        settings.dense_threshold,
        settings.refine_steps,
    ) {
        Ok(k) => k,
        Err(e) => return failure_solution(&ws, program, &e.to_string()),
    };

    // Initial point from two least-squares solves with identity scaling.
    let identity_scalings: Vec<Scaling> = ws
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Free => Scaling::Free { dim: b.dim },
            BlockKind::NonNeg => Scaling::NonNeg { d: vec![1.0; b.dim] },
            BlockKind::Soc => Scaling::Soc {
                eta: 1.0,
                wbar: unit(BlockKind::Soc, b.dim),
            },
        })
        .collect();
    if kkt.factor(&identity_scalings).is_err() {
        return failure_solution(&ws, program, "initial factorization failed");
    }
    let zeros_top = vec![0.0; nvars];
    let (mut x, _) = kkt.solve(&zeros_top, &ws.b, &identity_scalings);
    let (_, y0) = kkt.solve(&ws.c, &vec![0.0; neq], &identity_scalings);
    let mut y = y0;
    let mut z = vec![0.0; nvars];
    {
        let mut aty = vec![0.0; nvars];
        ws.a.tr_matvec_acc(&y, &mut aty);
        for b in &ws.blocks {
            if b.kind != BlockKind::Free {
                for i in b.offset..b.offset + b.dim {
                    z[i] = ws.c[i] - aty[i];
                }
            }
        }
    }
    for b in &ws.blocks {
        shift_interior(b.kind, &mut x[b.offset..b.offset + b.dim]);
        if b.kind != BlockKind::Free {
            shift_interior(b.kind, &mut z[b.offset..b.offset + b.dim]);
        }
    }

    let degree = ws.degree.max(1);
    let mut iterations = 0usize;
    let mut status = SolveStatus::MaxIter;
    let mut certificate: Option<Vec<f64>> = None;
    // Best Farkas certificate qualities seen, for exit classification when
    // the iterates diverge without meeting the strict in-loop test.
    let mut best_pinf = f64::INFINITY;
    let mut best_pinf_cert: Option<Vec<f64>> = None;
    let mut best_dinf = f64::INFINITY;
    let mut best_dinf_cert: Option<Vec<f64>> = None;

    for iter in 0..settings.max_iter {
        iterations = iter;
        // Residuals in the scaled space.
        let mut rx = ws.c.clone();
        {
            let mut aty = vec![0.0; nvars];
            ws.a.tr_matvec_acc(&y, &mut aty);
            for i in 0..nvars {
                rx[i] -= aty[i] + z[i];
            }
        }
        let mut ry = ws.b.clone();
        {
            let mut ax = vec![0.0; neq];
            ws.a.matvec_acc(&x, &mut ax);
            for j in 0..neq {
                ry[j] -= ax[j];
            }
        }

        // Unscaled convergence metrics.
        let xu = ws.unscale_x(&x);
        let yu = ws.unscale_y(&y);
        let zu = ws.unscale_z(&z);
        let pobj: f64 = ws.c_unscaled.iter().zip(&xu).map(|(c, v)| c * v).sum();
        let dobj: f64 = ws.b_unscaled.iter().zip(&yu).map(|(b, v)| b * v).sum();
        let pres = {
            let mut ax = vec![0.0; neq];
            ws.a_unscaled.matvec_acc(&xu, &mut ax);
            let num: f64 = ws
                .b_unscaled
                .iter()
                .zip(&ax)
                .map(|(b, v)| (b - v) * (b - v))
                .sum::<f64>()
                .sqrt();
            num / (1.0 + norm2(&ws.b_unscaled))
        };
        let dres = {
            let mut aty = vec![0.0; nvars];
            ws.a_unscaled.tr_matvec_acc(&yu, &mut aty);
            let num: f64 = ws
                .c_unscaled
                .iter()
                .zip(aty.iter().zip(&zu))
                .map(|(c, (ay, zi))| {
                    let d = c - ay - zi;
                    d * d
                })
                .sum::<f64>()
                .sqrt();
            num / (1.0 + norm2(&ws.c_unscaled))
        };
        let gap = bv.cone_dot(&x, &z);
        let rel_gap = (pobj - dobj).abs() / f64::max(1.0, f64::max(pobj.abs(), dobj.abs()));

        if pres <= settings.tol && dres <= settings.tol && rel_gap <= settings.tol {
            status = SolveStatus::Optimal;
            break;
        }

        // Farkas certificate tests (unscaled). The certificate (y, z)/bᵀy
        // proves primal infeasibility when Aᵀŷ + ẑ ≈ 0; x/(−cᵀx) proves
        // dual infeasibility (unboundedness) when Ax̂ ≈ 0.
        if dobj > 0.0 {
            let mut v = vec![0.0; nvars];
            ws.a_unscaled.tr_matvec_acc(&yu, &mut v);
            for (vi, zi) in v.iter_mut().zip(&zu) {
                *vi += zi;
            }
            let ynorm = yu.iter().fold(0.0f64, |m, v| m.max(v.abs())) / dobj;
            let quality = norm2(&v) / dobj / (ws.a_norm * ynorm.max(1.0));
            if quality < best_pinf {
                best_pinf = quality;
                let mut cert = yu.iter().map(|v| v / dobj).collect::<Vec<f64>>();
                cert.extend(zu.iter().map(|v| v / dobj));
                best_pinf_cert = Some(cert);
            }
            if quality <= settings.infeas_tol {
                status = SolveStatus::PrimalInfeasible;
                certificate = best_pinf_cert.clone();
                break;
            }
        }
        if pobj < 0.0 {
            let mut ax = vec![0.0; neq];
            ws.a_unscaled.matvec_acc(&xu, &mut ax);
            let xnorm = xu.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (-pobj);
            let quality = norm2(&ax) / (-pobj) / (ws.a_norm * xnorm.max(1.0));
            if quality < best_dinf {
                best_dinf = quality;
                best_dinf_cert = Some(xu.iter().map(|v| v / (-pobj)).collect());
            }
            if quality <= settings.infeas_tol {
                status = SolveStatus::DualInfeasible;
                certificate = best_dinf_cert.clone();
                break;
            }
        }

        if ws.degree == 0 {
            // No cone coordinates: the first Newton solve already gives the
            // exact solution of the linear system; residual tests above decide.
            status = if pres <= settings.tol && dres <= settings.tol {
                SolveStatus::Optimal
            } else {
                SolveStatus::NumericalFailure
            };
            break;
        }

        let mu = gap / degree as f64;

        // NT scalings and scaled point λ.
        let scalings = bv.scalings(&x, &z);
        let lambdas: Vec<Vec<f64>> = ws
            .blocks
            .iter()
            .zip(&scalings)
            .map(|(b, s)| s.lambda(&z[b.offset..b.offset + b.dim]))
            .collect();

        let mut factored = kkt.factor(&scalings);
        if factored.is_err() {
            // One retry with a heavier shift.
            let mut retry = KktSolver::new(
                &ws.a,
                &ws.blocks,
                settings.static_reg * 1e3,
                settings.dense_threshold,
                settings.refine_steps,
            );
            if let Ok(k2) = &mut retry {
                if k2.factor(&scalings).is_ok() {
                    kkt = retry.unwrap();
                    factored = Ok(());
                }
            }
        }
        if factored.is_err() {
            status = SolveStatus::NumericalFailure;
            break;
        }

        // Affine direction: ds = -λ∘λ, so the top rhs is rx + z on cones.
        let mut rhs_top = rx.clone();
        for b in &ws.blocks {
            if b.kind != BlockKind::Free {
                for i in b.offset..b.offset + b.dim {
                    rhs_top[i] += z[i];
                }
            }
        }
        let (dxa, dya) = kkt.solve(&rhs_top, &ry, &scalings);
        let dza = cone_dz(&ws, &rx, &dya);

        let alpha_aff = {
            let ax = bv.min_step(&x, &dxa);
            let az = bv.min_step(&z, &dza);
            ax.min(az).min(1.0)
        };
        let mu_aff = {
            let mut acc = 0.0;
            for b in &ws.blocks {
                if b.kind != BlockKind::Free {
                    for i in b.offset..b.offset + b.dim {
                        acc += (x[i] + alpha_aff * dxa[i]) * (z[i] + alpha_aff * dza[i]);
                    }
                }
            }
            acc / degree as f64
        };
        let sigma = ((mu_aff / mu).clamp(0.0, 1.0)).powi(3);

        // Combined direction with Mehrotra correction.
        let mut rhs_comb = rx.clone();
        for ((b, scal), lam) in ws.blocks.iter().zip(&scalings).zip(&lambdas) {
            if b.kind == BlockKind::Free {
                continue;
            }
            let range = b.offset..b.offset + b.dim;
            let ux = scal.apply_winv(&dxa[range.clone()]);
            let uz = scal.apply_w(&dza[range.clone()]);
            let corr = jordan_prod(b.kind, &ux, &uz);
            let lam_sq = jordan_prod(b.kind, lam, lam);
            let e = unit(b.kind, b.dim);
            let ds: Vec<f64> = (0..b.dim)
                .map(|k| sigma * mu * e[k] - lam_sq[k] - corr[k])
                .collect();
            let t = jordan_div(b.kind, lam, &ds);
            let wt = scal.apply_winv(&t);
            for (k, w) in wt.iter().enumerate() {
                rhs_comb[b.offset + k] -= w;
            }
        }
        let (dx, dy) = kkt.solve(&rhs_comb, &ry, &scalings);
        let dz = cone_dz(&ws, &rx, &dy);

        let alpha = {
            let ax = bv.min_step(&x, &dx);
            let az = bv.min_step(&z, &dz);
            (STEP_DAMP * ax.min(az)).min(1.0)
        };
        if !alpha.is_finite() || alpha < MIN_STEP {
            status = SolveStatus::NumericalFailure;
            break;
        }
        for i in 0..nvars {
            x[i] += alpha * dx[i];
        }
        for j in 0..neq {
            y[j] += alpha * dy[j];
        }
        for b in &ws.blocks {
            if b.kind != BlockKind::Free {
                for i in b.offset..b.offset + b.dim {
                    z[i] += alpha * dz[i];
                }
            }
        }
        // Nudge round-off strays back into the cone interior; diverging
        // iterates (infeasible problems) otherwise hit exact boundaries.
        for b in &ws.blocks {
            if b.kind != BlockKind::Free {
                nudge_interior(b.kind, &mut x[b.offset..b.offset + b.dim]);
                nudge_interior(b.kind, &mut z[b.offset..b.offset + b.dim]);
            }
        }
        iterations = iter + 1;
    }

    // Exit classification: a stalled or exhausted run whose best Farkas
    // certificate is good enough is reported as infeasible.
    if status == SolveStatus::MaxIter || status == SolveStatus::NumericalFailure {
        let loose = (settings.infeas_tol * 100.0).max(1e-6);
        if best_pinf <= loose && best_pinf < best_dinf {
            status = SolveStatus::PrimalInfeasible;
            certificate = best_pinf_cert;
        } else if best_dinf <= loose {
            status = SolveStatus::DualInfeasible;
            certificate = best_dinf_cert;
        }
    }

    finish(&ws, x, y, z, status, iterations, certificate)
}

fn cone_dz(ws: &Workspace, rx: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut aty = vec![0.0; ws.nvars];
    ws.a.tr_matvec_acc(dy, &mut aty);
    let mut dz = vec![0.0; ws.nvars];
    for b in &ws.blocks {
        if b.kind != BlockKind::Free {
            for i in b.offset..b.offset + b.dim {
                dz[i] = rx[i] - aty[i];
            }
        }
    }
    dz
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn finish(
    ws: &Workspace,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    status: SolveStatus,
    iterations: usize,
    certificate: Option<Vec<f64>>,
) -> ConicSolution {
    let xu = ws.unscale_x(&x);
    let yu = ws.unscale_y(&y);
    let zu = ws.unscale_z(&z);
    let pobj: f64 = ws.c_unscaled.iter().zip(&xu).map(|(c, v)| c * v).sum();
    let dobj: f64 = ws.b_unscaled.iter().zip(&yu).map(|(b, v)| b * v).sum();
    let mut ax = vec![0.0; ws.neq];
    ws.a_unscaled.matvec_acc(&xu, &mut ax);
    let pres: f64 = ws
        .b_unscaled
        .iter()
        .zip(&ax)
        .map(|(b, v)| (b - v) * (b - v))
        .sum::<f64>()
        .sqrt()
        / (1.0 + norm2(&ws.b_unscaled));
    let mut aty = vec![0.0; ws.nvars];
    ws.a_unscaled.tr_matvec_acc(&yu, &mut aty);
    let dres: f64 = ws
        .c_unscaled
        .iter()
        .zip(aty.iter().zip(&zu))
        .map(|(c, (ay, zi))| {
            let d = c - ay - zi;
            d * d
        })
        .sum::<f64>()
        .sqrt()
        / (1.0 + norm2(&ws.c_unscaled));
    let rel_gap = (pobj - dobj).abs() / f64::max(1.0, f64::max(pobj.abs(), dobj.abs()));
    ConicSolution {
        status,
        primal: xu,
        eq_dual: yu,
        cone_dual: zu,
        primal_objective: pobj,
        dual_objective: dobj,
        primal_residual: pres,
        dual_residual: dres,
        duality_gap: rel_gap,
        iterations,
        certificate,
    }
}

fn failure_solution(_ws: &Workspace, program: &ConeProgram, _msg: &str) -> ConicSolution {
    ConicSolution {
        status: SolveStatus::NumericalFailure,
        primal: vec![0.0; program.num_vars()],
        eq_dual: vec![0.0; program.num_eqs()],
        cone_dual: vec![0.0; program.num_vars()],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        duality_gap: f64::INFINITY,
        iterations: 0,
        certificate: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve, Cone, ConeProgram, SolverSettings};

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    /// minimize x s.t. x = 1, x ≥ 0  →  x = 1.
    #[test]
    fn trivial_nonneg_equality() {
        let program = ConeProgram {
            objective: vec![1.0],
            eq_matrix: CscMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]),
            eq_rhs: vec![1.0],
            cones: vec![Cone::NonNeg(1)],
            variable_names: None,
        };
        let sol = solve(&program, &settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-7);
        assert!(sol.duality_gap <= 1e-7);
    }

    /// minimize t s.t. (t, 3, 4) ∈ SOC₃  →  t = 5.
    #[test]
    fn soc_norm_epigraph() {
        // Variables: (t, u, v) in one SOC block; u = 3, v = 4 by equalities.
        let program = ConeProgram {
            objective: vec![1.0, 0.0, 0.0],
            eq_matrix: CscMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 1.0)]),
            eq_rhs: vec![3.0, 4.0],
            cones: vec![Cone::SecondOrder(3)],
            variable_names: None,
        };
        let sol = solve(&program, &settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[0] - 5.0).abs() < 1e-6, "t = {}", sol.primal[0]);
    }

    /// Infeasible: x = -1 with x ≥ 0.
    #[test]
    fn primal_infeasible_detected() {
        let program = ConeProgram {
            objective: vec![1.0],
            eq_matrix: CscMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]),
            eq_rhs: vec![-1.0],
            cones: vec![Cone::NonNeg(1)],
            variable_names: None,
        };
        let sol = solve(&program, &settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        assert!(sol.certificate.is_some());
    }

    /// Unbounded: minimize -x with x ≥ 0 free of constraints.
    #[test]
    fn dual_infeasible_detected() {
        let program = ConeProgram {
            objective: vec![-1.0],
            eq_matrix: CscMatrix::zeros(0, 1),
            eq_rhs: vec![],
            cones: vec![Cone::NonNeg(1)],
            variable_names: None,
        };
        let sol = solve(&program, &settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
    }

    /// LP with free variables: minimize x₁+x₂ s.t. x₁ - f = 0, x₂ + f = 3,
    /// f free, x ≥ 0. Optimum: f ∈ [0,3] arbitrary, objective 3... the
    /// objective is x₁+x₂ = 3 - f + f... check value only.
    #[test]
    fn free_variables_supported() {
        // minimize x1 + x2 subject to x1 - f = 0, x2 + f = 3, x1,x2 ≥ 0.
        // x1 = f, x2 = 3 - f, objective = 3 for any feasible f; unique in value.
        let program = ConeProgram {
            objective: vec![0.0, 1.0, 1.0],
            eq_matrix: CscMatrix::from_triplets(
                2,
                3,
                &[(0, 0, -1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)],
            ),
            eq_rhs: vec![0.0, 3.0],
            cones: vec![Cone::Zero(1), Cone::NonNeg(2)],
            variable_names: None,
        };
        let sol = solve(&program, &settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 3.0).abs() < 1e-6);
    }

    /// Weak duality and self-consistency on a batch of random feasible LPs.
    #[test]
    fn weak_duality_and_determinism_on_random_lps() {
        use rand::prelude::*;
        use rand_chacha::ChaCha12Rng;
        for seed in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = 8;
            let m = 4;
            let mut trips = Vec::new();
            for r in 0..m {
                for c in 0..n {
                    trips.push((r, c, rng.random::<f64>() - 0.3));
                }
            }
            let a = CscMatrix::from_triplets(m, n, &trips);
            // Feasible by construction: b = A·x₀ with x₀ > 0.
            let x0: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
            let b = a.matvec(&x0);
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let program = ConeProgram {
                objective: c,
                eq_matrix: a,
                eq_rhs: b,
                cones: vec![Cone::NonNeg(n)],
                variable_names: None,
            };
            let sol1 = solve(&program, &settings()).unwrap();
            let sol2 = solve(&program, &settings()).unwrap();
            assert_eq!(sol1.status, SolveStatus::Optimal, "seed {seed}");
            assert!(sol1.primal_objective >= sol1.dual_objective - 1e-6);
            assert!((sol1.primal_objective - sol2.primal_objective).abs() <= 1e-9);
        }
    }
}
