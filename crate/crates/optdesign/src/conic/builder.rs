//! Incremental construction of cone programs.
//!
//! The builder allocates variable blocks in cone order, accumulates equality
//! rows as triplets, and provides the two SOC gadgets shared by the
//! formulations: the hyperbolic constraint ‖z‖² ≤ u·v and the weighted
//! geometric-mean epigraph built from a binary tree of rotated cones.

use super::sparse::CscMatrix;
use super::{Cone, ConeProgram, ConicError};

/// Contiguous variable indices `start .. start+len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarBlock {
    pub start: usize,
    pub len: usize,
}

impl VarBlock {
    pub fn index(&self, k: usize) -> usize {
        debug_assert!(k < self.len);
        self.start + k
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Default)]
pub struct ProgramBuilder {
    cones: Vec<Cone>,
    names: Vec<String>,
    nvars: usize,
    obj: Vec<(usize, f64)>,
    eq_triplets: Vec<(usize, usize, f64)>,
    eq_rhs: Vec<f64>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    fn push_block(&mut self, cone: Cone, name: &str) -> VarBlock {
        let len = cone.dim();
        let block = VarBlock {
            start: self.nvars,
            len,
        };
        for k in 0..len {
            self.names.push(format!("{name}[{k}]"));
        }
        self.cones.push(cone);
        self.nvars += len;
        block
    }

    pub fn free_block(&mut self, len: usize, name: &str) -> VarBlock {
        self.push_block(Cone::Zero(len), name)
    }

    pub fn nonneg_block(&mut self, len: usize, name: &str) -> VarBlock {
        self.push_block(Cone::NonNeg(len), name)
    }

    /// Second-order cone block; index 0 is the radius coordinate.
    pub fn soc_block(&mut self, dim: usize, name: &str) -> VarBlock {
        self.push_block(Cone::SecondOrder(dim), name)
    }

    /// Open a new equality row `Σ coef·var = rhs`; fill with [`Self::set`].
    pub fn new_row(&mut self, rhs: f64) -> usize {
        self.eq_rhs.push(rhs);
        self.eq_rhs.len() - 1
    }

    pub fn set(&mut self, row: usize, var: usize, coef: f64) {
        if coef != 0.0 {
            self.eq_triplets.push((row, var, coef));
        }
    }

    pub fn add_objective(&mut self, var: usize, coef: f64) {
        if coef != 0.0 {
            self.obj.push((var, coef));
        }
    }

    /// Emit the second-order cone encoding of the hyperbolic constraint
    /// ‖z‖² ≤ u·v (with u, v ≥ 0 implied):
    ///
    /// ```text
    /// ‖[2z; u − v]‖ ≤ u + v
    /// ```
    ///
    /// `z`, `u`, `v` are variable indices. Returns the slack SOC block
    /// `(u+v, 2z, u−v)` created for the constraint.
    pub fn hyperbolic_constraint(&mut self, z: &[usize], u: usize, v: usize) -> VarBlock {
        let dim = z.len() + 2;
        let slack = self.soc_block(dim, "hyp");
        let u_eq_row = self.new_row(0.0);
        self.set(u_eq_row, slack.index(0), 1.0);
        self.set(u_eq_row, u, -1.0);
        self.set(u_eq_row, v, -1.0);
        for (k, &zv) in z.iter().enumerate() {
            let row = self.new_row(0.0);
            self.set(row, slack.index(1 + k), 1.0);
            self.set(row, zv, -2.0);
        }
        let last = self.new_row(0.0);
        self.set(last, slack.index(dim - 1), 1.0);
        self.set(last, u, -1.0);
        self.set(last, v, 1.0);
        slack
    }

    /// Emit a variable `s` with `s ≤ Π t_k^{β_k}` for rational β (β ≥ 0,
    /// Σβ = 1), via a binary tree of at most `2^p` rotated-cone constraints
    /// where `2^p` is the smallest power of two at least the common
    /// denominator of β. Maximizing `s` maximizes the weighted geometric
    /// mean. Returns the index of `s`.
    pub fn geometric_mean_epigraph(
        &mut self,
        terms: &[usize],
        beta: &[f64],
    ) -> Result<usize, ConicError> {
        assert_eq!(terms.len(), beta.len());
        let (numerators, den) = rationalize_beta(beta, 1024, 1e-9)?;
        let s = self.free_block(1, "geomean").start;
        if terms.len() == 1 {
            // Degenerate tree: a single linear row s + slack = t.
            let slack = self.nonneg_block(1, "geomean_slack").start;
            let row = self.new_row(0.0);
            self.set(row, terms[0], 1.0);
            self.set(row, s, -1.0);
            self.set(row, slack, -1.0);
            return Ok(s);
        }
        // Leaf multiset: t_k repeated p_k times, padded with s itself up to
        // the next power of two. The padding cancels: s^(2^p) ≤ Π t^p_k · s^pad.
        let total: u64 = numerators.iter().sum();
        debug_assert!(total <= den);
        let pow2 = (den as usize).next_power_of_two();
        let mut level: Vec<usize> = Vec::with_capacity(pow2);
        for (t, &p) in terms.iter().zip(&numerators) {
            for _ in 0..p {
                level.push(*t);
            }
        }
        while level.len() < pow2 {
            level.push(s);
        }
        while level.len() > 2 {
            let mut next = Vec::with_capacity(level.len() / 2);
            for pair in level.chunks(2) {
                if pair[0] == pair[1] {
                    // g² ≤ a·a collapses to g = a.
                    next.push(pair[0]);
                } else {
                    let g = self.free_block(1, "geonode").start;
                    self.hyperbolic_constraint(&[g], pair[0], pair[1]);
                    next.push(g);
                }
            }
            level = next;
        }
        // Root: s² ≤ left·right.
        if level[0] == s && level[1] == s {
            // All-padding case cannot occur for Σβ = 1 with at least one term.
            return Err(ConicError::Malformed("empty geometric mean".into()));
        }
        self.hyperbolic_constraint(&[s], level[0], level[1]);
        Ok(s)
    }

    pub fn build(self) -> ConeProgram {
        let neq = self.eq_rhs.len();
        let mut objective = vec![0.0; self.nvars];
        for (var, coef) in self.obj {
            objective[var] += coef;
        }
        ConeProgram {
            objective,
            eq_matrix: CscMatrix::from_triplets(neq, self.nvars, &self.eq_triplets),
            eq_rhs: self.eq_rhs,
            cones: self.cones,
            variable_names: Some(self.names),
        }
    }
}

/// Round β to rationals p_k/q over a common denominator q ≤ `max_den`,
/// rejecting entries farther than `tol` from every admissible rational.
pub fn rationalize_beta(
    beta: &[f64],
    max_den: u64,
    tol: f64,
) -> Result<(Vec<u64>, u64), ConicError> {
    let mut dens = Vec::with_capacity(beta.len());
    for &b in beta {
        if !(0.0..=1.0 + 1e-12).contains(&b) {
            return Err(ConicError::Malformed(format!(
                "belief weight {b} outside [0, 1]"
            )));
        }
        let (_, den) = best_rational(b, max_den, tol)
            .ok_or(ConicError::IrrationalBeta { max_den, tol })?;
        dens.push(den);
    }
    let mut q: u64 = 1;
    for d in dens {
        q = lcm(q, d);
        if q > max_den {
            return Err(ConicError::IrrationalBeta { max_den, tol });
        }
    }
    let mut numerators = Vec::with_capacity(beta.len());
    for &b in beta {
        let p = (b * q as f64).round();
        if (b - p / q as f64).abs() > tol {
            return Err(ConicError::IrrationalBeta { max_den, tol });
        }
        numerators.push(p as u64);
    }
    Ok((numerators, q))
}

/// Best rational approximation p/q with q ≤ max_den (continued fractions).
fn best_rational(x: f64, max_den: u64, tol: f64) -> Option<(u64, u64)> {
    let mut a = x.floor();
    let mut frac = x - a;
    let (mut p0, mut q0) = (1u64, 0u64);
    let (mut p1, mut q1) = (a as u64, 1u64);
    for _ in 0..64 {
        if (x - p1 as f64 / q1 as f64).abs() <= tol {
            return Some((p1, q1));
        }
        if frac.abs() < 1e-15 {
            break;
        }
        let inv = 1.0 / frac;
        a = inv.floor();
        frac = inv - a;
        let p2 = (a as u64).checked_mul(p1)?.checked_add(p0)?;
        let q2 = (a as u64).checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    if q1 <= max_den && (x - p1 as f64 / q1 as f64).abs() <= tol {
        Some((p1, q1))
    } else {
        None
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve, SolveStatus, SolverSettings};

    /// Direct membership check of the hyperbolic ⟷ SOC identity.
    fn soc_encoding_holds(z: &[f64], u: f64, v: f64) -> bool {
        let norm_sq: f64 = z.iter().map(|x| 4.0 * x * x).sum::<f64>() + (u - v) * (u - v);
        norm_sq.sqrt() <= u + v
    }

    fn hyperbolic_holds(z: &[f64], u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && z.iter().map(|x| x * x).sum::<f64>() <= u * v
    }

    #[test]
    fn hyperbolic_encoding_examples() {
        // Boundary and infeasible examples.
        assert!(soc_encoding_holds(&[0.0], 1.0, 0.0));
        assert!(soc_encoding_holds(&[1.0], 1.0, 1.0));
        assert!(!soc_encoding_holds(&[1.1], 1.0, 1.0));
    }

    #[test]
    fn hyperbolic_encoding_is_exact_on_random_points() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let mut both = 0;
        for _ in 0..1000 {
            let z: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let u = 2.0 * rng.random::<f64>();
            let v = 2.0 * rng.random::<f64>();
            let lhs = hyperbolic_holds(&z, u, v);
            let rhs = soc_encoding_holds(&z, u, v);
            assert_eq!(lhs, rhs, "z={z:?} u={u} v={v}");
            if lhs {
                both += 1;
            }
        }
        assert!(both > 0);
    }

    #[test]
    fn rationalize_handles_common_cases() {
        let (p, q) = rationalize_beta(&[0.5, 0.5], 1024, 1e-9).unwrap();
        assert_eq!((p, q), (vec![1, 1], 2));
        let (p, q) = rationalize_beta(&[0.25, 0.75], 1024, 1e-9).unwrap();
        assert_eq!((p, q), (vec![1, 3], 4));
        let third = 1.0 / 3.0;
        let (p, q) = rationalize_beta(&[third, third, third], 1024, 1e-9).unwrap();
        assert_eq!((p, q), (vec![1, 1, 1], 3));
        assert!(rationalize_beta(&[std::f64::consts::FRAC_1_SQRT_2, 1.0 - std::f64::consts::FRAC_1_SQRT_2], 1024, 1e-9).is_err());
    }

    /// max s with s ≤ t₁^½ t₂^½, t = (4, 1) → s = 2 via one cone.
    #[test]
    fn geometric_mean_two_terms() {
        let mut builder = ProgramBuilder::new();
        let t = builder.free_block(2, "t");
        let r0 = builder.new_row(4.0);
        builder.set(r0, t.index(0), 1.0);
        let r1 = builder.new_row(1.0);
        builder.set(r1, t.index(1), 1.0);
        let s = builder
            .geometric_mean_epigraph(&[t.index(0), t.index(1)], &[0.5, 0.5])
            .unwrap();
        builder.add_objective(s, -1.0);
        let program = builder.build();
        let sol = solve(&program, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[s] - 2.0).abs() < 1e-6, "s = {}", sol.primal[s]);
    }

    /// Single term: s = t, no cones.
    #[test]
    fn geometric_mean_degenerate() {
        let mut builder = ProgramBuilder::new();
        let t = builder.free_block(1, "t");
        let r0 = builder.new_row(7.0);
        builder.set(r0, t.index(0), 1.0);
        let s = builder.geometric_mean_epigraph(&[t.index(0)], &[1.0]).unwrap();
        builder.add_objective(s, -1.0);
        let program = builder.build();
        assert!(!program
            .cones
            .iter()
            .any(|c| matches!(c, crate::conic::Cone::SecondOrder(_))));
        let sol = solve(&program, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[s] - 7.0).abs() < 1e-6);
    }

    /// β = (1/4, 3/4) on t = (16, 1) → s = 16^{1/4} = 2.
    #[test]
    fn geometric_mean_quarter_weights() {
        let mut builder = ProgramBuilder::new();
        let t = builder.free_block(2, "t");
        let r0 = builder.new_row(16.0);
        builder.set(r0, t.index(0), 1.0);
        let r1 = builder.new_row(1.0);
        builder.set(r1, t.index(1), 1.0);
        let s = builder
            .geometric_mean_epigraph(&[t.index(0), t.index(1)], &[0.25, 0.75])
            .unwrap();
        builder.add_objective(s, -1.0);
        let program = builder.build();
        let sol = solve(&program, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        // Oracle: 16^0.25 · 1^0.75 = 2.
        assert!((sol.primal[s] - 2.0).abs() < 1e-6, "s = {}", sol.primal[s]);
    }

    /// Random positive t: max s equals Π t^β within 1e-6 relative.
    #[test]
    fn geometric_mean_matches_closed_form() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        for r in [2usize, 3, 5] {
            let beta = vec![1.0 / r as f64; r];
            let tvals: Vec<f64> = (0..r).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect();
            let mut builder = ProgramBuilder::new();
            let t = builder.free_block(r, "t");
            for (k, &tv) in tvals.iter().enumerate() {
                let row = builder.new_row(tv);
                builder.set(row, t.index(k), 1.0);
            }
            let idx: Vec<usize> = (0..r).map(|k| t.index(k)).collect();
            let s = builder.geometric_mean_epigraph(&idx, &beta).unwrap();
            builder.add_objective(s, -1.0);
            let program = builder.build();
            let sol = solve(&program, &SolverSettings::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            let expected: f64 = tvals
                .iter()
                .zip(&beta)
                .map(|(t, b)| t.powf(*b))
                .product();
            assert!(
                ((sol.primal[s] - expected) / expected).abs() < 1e-6,
                "r={r}: s={} expected={expected}",
                sol.primal[s]
            );
        }
    }
}
