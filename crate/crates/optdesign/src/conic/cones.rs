//! Per-block cone operations: interior tests, boundary steps, Jordan algebra
//! and Nesterov–Todd scalings for the nonnegative orthant and second-order
//! cones. Free blocks carry no scaling; their dual coordinates are pinned to
//! zero by the solver.

use super::Cone;

/// Resolved block layout: kind plus offset into the variable vector.
#[derive(Debug, Clone, Copy)]
pub struct BlockLayout {
    pub kind: BlockKind,
    pub offset: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Free,
    NonNeg,
    Soc,
}

pub fn layout(cones: &[Cone]) -> Vec<BlockLayout> {
    let mut blocks = Vec::with_capacity(cones.len());
    let mut offset = 0;
    for cone in cones {
        let (kind, dim) = match *cone {
            Cone::Zero(k) => (BlockKind::Free, k),
            Cone::NonNeg(k) => (BlockKind::NonNeg, k),
            Cone::SecondOrder(k) => (BlockKind::Soc, k),
        };
        blocks.push(BlockLayout { kind, offset, dim });
        offset += dim;
    }
    blocks
}

/// Total barrier degree: one per nonnegative coordinate, one per SOC block.
pub fn barrier_degree(blocks: &[BlockLayout]) -> usize {
    blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Free => 0,
            BlockKind::NonNeg => b.dim,
            BlockKind::Soc => 1,
        })
        .sum()
}

/// Nesterov–Todd scaling data for one block.
#[derive(Debug, Clone)]
pub enum Scaling {
    Free {
        dim: usize,
    },
    /// W = diag(d) with d_i = sqrt(x_i / z_i).
    NonNeg {
        d: Vec<f64>,
    },
    /// W = η·[[w̄₀, w̄ᵀ], [w̄, I + w̄w̄ᵀ/(1+w̄₀)]] with w̄ the scaling point
    /// normalized to w̄ᵀJw̄ = 1 and η = (xᵀJx / zᵀJz)^{1/4}.
    Soc {
        eta: f64,
        wbar: Vec<f64>,
    },
}

fn jdot(u: &[f64], v: &[f64]) -> f64 {
    let mut acc = u[0] * v[0];
    for i in 1..u.len() {
        acc -= u[i] * v[i];
    }
    acc
}

/// Margin to the cone boundary: min x_i for the orthant, x₀ − ‖x̄‖ for SOC.
pub fn interior_margin(kind: BlockKind, x: &[f64]) -> f64 {
    match kind {
        BlockKind::Free => f64::INFINITY,
        BlockKind::NonNeg => x.iter().cloned().fold(f64::INFINITY, f64::min),
        BlockKind::Soc => {
            let tail = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            x[0] - tail
        }
    }
}

/// Shift a point into the cone interior: x ← x + (1 − margin)·e when the
/// margin is nonpositive.
pub fn shift_interior(kind: BlockKind, x: &mut [f64]) {
    let margin = interior_margin(kind, x);
    if margin <= 0.0 {
        let shift = 1.0 - margin;
        match kind {
            BlockKind::Free => {}
            BlockKind::NonNeg => {
                for v in x.iter_mut() {
                    *v += shift;
                }
            }
            BlockKind::Soc => x[0] += shift,
        }
    }
}

/// Push a point that drifted onto (or just past) the boundary back inside,
/// relative to the block's own magnitude.
pub fn nudge_interior(kind: BlockKind, x: &mut [f64]) {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let eps = 1e-13 * scale;
    match kind {
        BlockKind::Free => {}
        BlockKind::NonNeg => {
            for v in x.iter_mut() {
                if *v < eps {
                    *v = eps;
                }
            }
        }
        BlockKind::Soc => {
            let tail = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if x[0] - tail < eps {
                x[0] = tail + eps;
            }
        }
    }
}

/// Largest α ≥ 0 with x + α·dx in the cone (∞ when unconstrained).
pub fn step_to_boundary(kind: BlockKind, x: &[f64], dx: &[f64]) -> f64 {
    match kind {
        BlockKind::Free => f64::INFINITY,
        BlockKind::NonNeg => {
            let mut alpha = f64::INFINITY;
            for (xi, di) in x.iter().zip(dx) {
                if *di < 0.0 {
                    alpha = alpha.min(-xi / di);
                }
            }
            alpha
        }
        BlockKind::Soc => {
            // First positive root of jdot(x+αdx, x+αdx) = 0, intersected
            // with the half-space x₀ + α·dx₀ ≥ 0.
            let a = jdot(dx, dx);
            let b = jdot(x, dx);
            let c = jdot(x, x).max(0.0);
            let mut alpha = smallest_positive_root(a, b, c);
            if dx[0] < 0.0 {
                alpha = alpha.min(-x[0] / dx[0]);
            }
            alpha
        }
    }
}

/// Smallest positive root of aα² + 2bα + c = 0 with c ≥ 0 (∞ if none).
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let disc = b * b - a * c;
    if a.abs() < 1e-300 {
        // Linear: 2bα + c = 0.
        if b < 0.0 {
            return -c / (2.0 * b);
        }
        return f64::INFINITY;
    }
    if disc < 0.0 {
        return if a > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let sq = disc.sqrt();
    // Numerically stable root pair.
    let q = if b >= 0.0 { -(b + sq) } else { -(b - sq) };
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { f64::INFINITY };
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

/// Compute the NT scaling for one block from interior points x, z.
pub fn nt_scaling(kind: BlockKind, x: &[f64], z: &[f64]) -> Scaling {
    match kind {
        BlockKind::Free => Scaling::Free { dim: x.len() },
        BlockKind::NonNeg => Scaling::NonNeg {
            d: x.iter()
                .zip(z)
                .map(|(xi, zi)| (xi / zi).max(1e-300).sqrt())
                .collect(),
        },
        BlockKind::Soc => {
            let jx = jdot(x, x).max(1e-300);
            let jz = jdot(z, z).max(1e-300);
            let a = jx.sqrt();
            let b = jz.sqrt();
            let xn: Vec<f64> = x.iter().map(|v| v / a).collect();
            let zn: Vec<f64> = z.iter().map(|v| v / b).collect();
            let dot: f64 = xn.iter().zip(&zn).map(|(u, v)| u * v).sum();
            let gamma = ((1.0 + dot) / 2.0).max(1e-300).sqrt();
            let mut wbar = vec![0.0; x.len()];
            wbar[0] = (xn[0] + zn[0]) / (2.0 * gamma);
            for i in 1..x.len() {
                wbar[i] = (xn[i] - zn[i]) / (2.0 * gamma);
            }
            Scaling::Soc {
                eta: (a / b).sqrt(),
                wbar,
            }
        }
    }
}

impl Scaling {
    /// λ = W z (equals W⁻ᵀ x at the NT point).
    pub fn lambda(&self, z: &[f64]) -> Vec<f64> {
        self.apply_w(z)
    }

    /// W v (W is symmetric for both cone families).
    pub fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Free { dim } => vec![0.0; *dim],
            Scaling::NonNeg { d } => d.iter().zip(v).map(|(di, vi)| di * vi).collect(),
            Scaling::Soc { eta, wbar } => {
                let mut out = vec![0.0; v.len()];
                let tail_dot: f64 = wbar[1..].iter().zip(&v[1..]).map(|(w, x)| w * x).sum();
                out[0] = wbar[0] * v[0] + tail_dot;
                let coef = v[0] + tail_dot / (1.0 + wbar[0]);
                for i in 1..v.len() {
                    out[i] = v[i] + coef * wbar[i];
                }
                for o in out.iter_mut() {
                    *o *= eta;
                }
                out
            }
        }
    }

    /// W⁻¹ v.
    pub fn apply_winv(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Free { dim } => vec![0.0; *dim],
            Scaling::NonNeg { d } => d.iter().zip(v).map(|(di, vi)| vi / di).collect(),
            Scaling::Soc { eta, wbar } => {
                let mut out = vec![0.0; v.len()];
                let tail_dot: f64 = wbar[1..].iter().zip(&v[1..]).map(|(w, x)| w * x).sum();
                out[0] = wbar[0] * v[0] - tail_dot;
                let coef = -v[0] + tail_dot / (1.0 + wbar[0]);
                for i in 1..v.len() {
                    out[i] = v[i] + coef * wbar[i];
                }
                for o in out.iter_mut() {
                    *o /= eta;
                }
                out
            }
        }
    }

    /// H⁻¹ v = W⁻² v, the (1,1)-block action in the KKT system.
    pub fn apply_hinv(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Free { dim } => vec![0.0; *dim],
            Scaling::NonNeg { d } => d.iter().zip(v).map(|(di, vi)| vi / (di * di)).collect(),
            Scaling::Soc { eta, wbar } => {
                // W⁻² = η⁻²(2(Jw̄)(Jw̄)ᵀ − J).
                let n = v.len();
                let mut jw = wbar.clone();
                for w in jw.iter_mut().skip(1) {
                    *w = -*w;
                }
                let dot: f64 = jw.iter().zip(v).map(|(a, b)| a * b).sum();
                let mut out = vec![0.0; n];
                out[0] = 2.0 * dot * jw[0] - v[0];
                for i in 1..n {
                    out[i] = 2.0 * dot * jw[i] + v[i];
                }
                let s = 1.0 / (eta * eta);
                for o in out.iter_mut() {
                    *o *= s;
                }
                out
            }
        }
    }

    /// Dense H⁻¹ block (row-major), used for KKT assembly.
    pub fn hinv_dense(&self) -> Vec<f64> {
        match self {
            Scaling::Free { dim } => vec![0.0; dim * dim],
            Scaling::NonNeg { d } => {
                let n = d.len();
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    out[i * n + i] = 1.0 / (d[i] * d[i]);
                }
                out
            }
            Scaling::Soc { eta, wbar } => {
                let n = wbar.len();
                let mut jw = wbar.clone();
                for w in jw.iter_mut().skip(1) {
                    *w = -*w;
                }
                let s = 1.0 / (eta * eta);
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut v = 2.0 * jw[i] * jw[j];
                        if i == j {
                            v -= if i == 0 { 1.0 } else { -1.0 };
                        }
                        out[i * n + j] = s * v;
                    }
                }
                out
            }
        }
    }
}

/// Jordan product u ∘ v of the block's algebra.
pub fn jordan_prod(kind: BlockKind, u: &[f64], v: &[f64]) -> Vec<f64> {
    match kind {
        BlockKind::Free => vec![0.0; u.len()],
        BlockKind::NonNeg => u.iter().zip(v).map(|(a, b)| a * b).collect(),
        BlockKind::Soc => {
            let mut out = vec![0.0; u.len()];
            out[0] = u.iter().zip(v).map(|(a, b)| a * b).sum();
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
            out
        }
    }
}

/// Jordan division: solve λ ∘ u = d for u.
pub fn jordan_div(kind: BlockKind, lam: &[f64], d: &[f64]) -> Vec<f64> {
    match kind {
        BlockKind::Free => vec![0.0; lam.len()],
        BlockKind::NonNeg => lam
            .iter()
            .zip(d)
            .map(|(l, di)| di / l.max(1e-300))
            .collect(),
        BlockKind::Soc => {
            // Inverse of the arrow matrix Arw(λ).
            let det = jdot(lam, lam);
            let det = if det.abs() < 1e-300 { 1e-300 } else { det };
            let tail_dot: f64 = lam[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
            let mut out = vec![0.0; lam.len()];
            out[0] = (lam[0] * d[0] - tail_dot) / det;
            let coef = (tail_dot / lam[0] - d[0]) / det;
            for i in 1..lam.len() {
                out[i] = d[i] / lam[0] + coef * lam[i];
            }
            out
        }
    }
}

/// Identity element of the block's algebra.
pub fn unit(kind: BlockKind, dim: usize) -> Vec<f64> {
    match kind {
        BlockKind::Free => vec![0.0; dim],
        BlockKind::NonNeg => vec![1.0; dim],
        BlockKind::Soc => {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_interior_soc(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let tail: f64 = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        x[0] = tail + rng.random::<f64>() + 0.1;
        x
    }

    #[test]
    fn nt_scaling_maps_both_points_to_lambda() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_interior_soc(&mut rng, 4);
            let z = random_interior_soc(&mut rng, 4);
            let scal = nt_scaling(BlockKind::Soc, &x, &z);
            let wz = scal.apply_w(&z);
            // W⁻ᵀ x = W⁻¹ x for symmetric W.
            let winv_x = scal.apply_winv(&x);
            for (a, b) in wz.iter().zip(&winv_x) {
                assert!((a - b).abs() < 1e-10, "lambda mismatch {a} vs {b}");
            }
            // W·W⁻¹ = identity.
            let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let back = scal.apply_w(&scal.apply_winv(&v));
            for (a, b) in back.iter().zip(&v) {
                assert!((a - b).abs() < 1e-10);
            }
            // H⁻¹ = W⁻¹ W⁻¹.
            let h1 = scal.apply_hinv(&v);
            let h2 = scal.apply_winv(&scal.apply_winv(&v));
            for (a, b) in h1.iter().zip(&h2) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jordan_div_inverts_prod() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..50 {
            let lam = random_interior_soc(&mut rng, 5);
            let u: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let d = jordan_prod(BlockKind::Soc, &lam, &u);
            let u2 = jordan_div(BlockKind::Soc, &lam, &d);
            for (a, b) in u.iter().zip(&u2) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn soc_step_to_boundary_is_exact() {
        let x = vec![1.0, 0.0, 0.0];
        let dx = vec![0.0, 1.0, 0.0];
        let alpha = step_to_boundary(BlockKind::Soc, &x, &dx);
        assert!((alpha - 1.0).abs() < 1e-12);
        // Moving along the axis never leaves the cone.
        let alpha2 = step_to_boundary(BlockKind::Soc, &x, &[1.0, 0.0, 0.0]);
        assert!(alpha2.is_infinite());
        // Straight down hits at x0.
        let alpha3 = step_to_boundary(BlockKind::Soc, &x, &[-0.5, 0.0, 0.0]);
        assert!((alpha3 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nonneg_step_to_boundary() {
        let alpha = step_to_boundary(BlockKind::NonNeg, &[1.0, 2.0], &[-2.0, 1.0]);
        assert!((alpha - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hinv_dense_matches_operator() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x = random_interior_soc(&mut rng, 4);
        let z = random_interior_soc(&mut rng, 4);
        let scal = nt_scaling(BlockKind::Soc, &x, &z);
        let dense = scal.hinv_dense();
        let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let hv = scal.apply_hinv(&v);
        for i in 0..4 {
            let mut acc = 0.0;
            for j in 0..4 {
                acc += dense[i * 4 + j] * v[j];
            }
            assert!((acc - hv[i]).abs() < 1e-9);
        }
    }
}
