//! Assembly and factorization of the quasi-definite Newton system
//!
//! ```text
//!   [ -(H⁻¹ + δI)   Aᵀ ] [dx]   [r1]
//!   [  A            δI ] [dy] = [r2]
//! ```
//!
//! with H the block-diagonal Nesterov–Todd scaling (absent on free blocks).
//! The pattern is assembled once; each iteration rewrites the scaling
//! entries and refactors. Solves run iterative refinement against the
//! unregularized operator to undo the static shift δ.

use super::cones::{BlockLayout, Scaling};
use super::ldl::{symbolic, DenseFactor, LdlError, SparseFactor, SparseSymbolic};
use super::order::min_degree;
use super::sparse::CscMatrix;

pub struct KktSolver {
    nvars: usize,
    neq: usize,
    dim: usize,
    blocks: Vec<BlockLayout>,
    a: CscMatrix,
    static_reg: f64,
    refine_steps: usize,
    backend: Backend,
}

enum Backend {
    Dense {
        base: Vec<f64>,
        signs: Vec<i8>,
        factor: Option<DenseFactor>,
    },
    Sparse {
        iperm: Vec<usize>,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        base_values: Vec<f64>,
        values: Vec<f64>,
        /// Per block: (local row, local col, value slot) for the upper entries.
        hslots: Vec<Vec<(usize, usize, usize)>>,
        /// Diagonal slot per variable (for the −δ shift).
        var_diag_slots: Vec<usize>,
        signs: Vec<i8>,
        symbolic: SparseSymbolic,
        factor: Option<SparseFactor>,
        scratch: Vec<f64>,
    },
}

impl KktSolver {
    pub fn new(
        a: &CscMatrix,
        blocks: &[BlockLayout],
        static_reg: f64,
        dense_threshold: usize,
        refine_steps: usize,
    ) -> Result<Self, LdlError> {
        let nvars = a.ncols;
        let neq = a.nrows;
        let dim = nvars + neq;
        let backend = if dim < dense_threshold {
            let mut signs = vec![1i8; dim];
            for s in signs.iter_mut().take(nvars) {
                *s = -1;
            }
            Backend::Dense {
                base: vec![0.0; dim * dim],
                signs,
                factor: None,
            }
        } else {
            Self::build_sparse(a, blocks, static_reg)?
        };
        Ok(KktSolver {
            nvars,
            neq,
            dim,
            blocks: blocks.to_vec(),
            a: a.clone(),
            static_reg,
            refine_steps,
            backend,
        })
    }

    fn build_sparse(
        a: &CscMatrix,
        blocks: &[BlockLayout],
        static_reg: f64,
    ) -> Result<Backend, LdlError> {
        let nvars = a.ncols;
        let neq = a.nrows;
        let dim = nvars + neq;
        // Upper-triangular pattern in original ordering.
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..nvars {
            trips.push((i, i, 0.0));
        }
        for b in blocks {
            if matches!(b.kind, super::cones::BlockKind::Soc) {
                for r in 0..b.dim {
                    for c in r + 1..b.dim {
                        trips.push((b.offset + r, b.offset + c, 0.0));
                    }
                }
            }
        }
        for col in 0..a.ncols {
            for p in a.colptr[col]..a.colptr[col + 1] {
                let row = a.rowind[p];
                trips.push((col, nvars + row, a.values[p]));
            }
        }
        for j in 0..neq {
            trips.push((nvars + j, nvars + j, static_reg));
        }
        let pattern = CscMatrix::from_triplets(dim, dim, &trips.iter().map(|&(r, c, _)| (r, c, 0.0)).collect::<Vec<_>>());
        let perm = min_degree(dim, &pattern.colptr, &pattern.rowind);
        let mut iperm = vec![0usize; dim];
        for (k, &orig) in perm.iter().enumerate() {
            iperm[orig] = k;
        }
        // Permuted upper-triangular assembly.
        let permuted: Vec<(usize, usize, f64)> = trips
            .iter()
            .map(|&(r, c, v)| {
                let (pr, pc) = (iperm[r], iperm[c]);
                if pr <= pc {
                    (pr, pc, v)
                } else {
                    (pc, pr, v)
                }
            })
            .collect();
        let kkt = CscMatrix::from_triplets(dim, dim, &permuted);
        let find_slot = |r: usize, c: usize| -> usize {
            let (pr, pc) = (iperm[r], iperm[c]);
            let (pr, pc) = if pr <= pc { (pr, pc) } else { (pc, pr) };
            let lo = kkt.colptr[pc];
            let hi = kkt.colptr[pc + 1];
            let rows = &kkt.rowind[lo..hi];
            lo + rows.binary_search(&pr).expect("assembled slot must exist")
        };
        let mut hslots = Vec::with_capacity(blocks.len());
        for b in blocks {
            let mut slots = Vec::new();
            match b.kind {
                super::cones::BlockKind::Free => {}
                super::cones::BlockKind::NonNeg => {
                    for r in 0..b.dim {
                        slots.push((r, r, find_slot(b.offset + r, b.offset + r)));
                    }
                }
                super::cones::BlockKind::Soc => {
                    for r in 0..b.dim {
                        for c in r..b.dim {
                            slots.push((r, c, find_slot(b.offset + r, b.offset + c)));
                        }
                    }
                }
            }
            hslots.push(slots);
        }
        let var_diag_slots: Vec<usize> = (0..nvars).map(|i| find_slot(i, i)).collect();
        let mut signs = vec![1i8; dim];
        for orig in 0..nvars {
            signs[iperm[orig]] = -1;
        }
        let sym = symbolic(dim, &kkt.colptr, &kkt.rowind)?;
        Ok(Backend::Sparse {
            iperm,
            colptr: kkt.colptr.clone(),
            rowind: kkt.rowind.clone(),
            base_values: kkt.values.clone(),
            values: vec![0.0; kkt.nnz()],
            hslots,
            var_diag_slots,
            signs,
            symbolic: sym,
            factor: None,
            scratch: vec![0.0; dim],
        })
    }

    /// Refactor with the current per-block scalings.
    pub fn factor(&mut self, scalings: &[Scaling]) -> Result<(), LdlError> {
        let nvars = self.nvars;
        let delta = self.static_reg;
        match &mut self.backend {
            Backend::Dense { base, signs, factor } => {
                let dim = self.dim;
                base.iter_mut().for_each(|v| *v = 0.0);
                for (b, scal) in self.blocks.iter().zip(scalings) {
                    match scal {
                        Scaling::Free { .. } => {}
                        Scaling::NonNeg { d } => {
                            for (r, dr) in d.iter().enumerate() {
                                base[(b.offset + r) * dim + (b.offset + r)] = -1.0 / (dr * dr);
                            }
                        }
                        Scaling::Soc { .. } => {
                            let hinv = scal.hinv_dense();
                            for r in 0..b.dim {
                                for c in 0..b.dim {
                                    base[(b.offset + r) * dim + (b.offset + c)] =
                                        -hinv[r * b.dim + c];
                                }
                            }
                        }
                    }
                }
                for i in 0..nvars {
                    base[i * dim + i] -= delta;
                }
                for j in 0..self.neq {
                    base[(nvars + j) * dim + (nvars + j)] = delta;
                }
                for col in 0..self.a.ncols {
                    for p in self.a.colptr[col]..self.a.colptr[col + 1] {
                        let row = nvars + self.a.rowind[p];
                        base[row * dim + col] = self.a.values[p];
                        base[col * dim + row] = self.a.values[p];
                    }
                }
                *factor = Some(DenseFactor::factor(dim, base, signs)?);
                Ok(())
            }
            Backend::Sparse {
                base_values,
                values,
                hslots,
                var_diag_slots,
                signs,
                symbolic,
                factor,
                colptr,
                rowind,
                ..
            } => {
                values.copy_from_slice(base_values);
                for (b, (scal, slots)) in self.blocks.iter().zip(scalings.iter().zip(hslots.iter()))
                {
                    match scal {
                        Scaling::Free { .. } => {}
                        Scaling::NonNeg { d } => {
                            for &(r, _, slot) in slots {
                                values[slot] += -1.0 / (d[r] * d[r]);
                            }
                        }
                        Scaling::Soc { .. } => {
                            let hinv = scal.hinv_dense();
                            for &(r, c, slot) in slots {
                                values[slot] += -hinv[r * b.dim + c];
                            }
                        }
                    }
                }
                for &slot in var_diag_slots.iter() {
                    values[slot] -= delta;
                }
                *factor = Some(symbolic.factor(colptr, rowind, values, signs)?);
                Ok(())
            }
        }
    }

    /// Solve the Newton system for (dx, dy) with iterative refinement
    /// against the unregularized operator.
    pub fn solve(
        &mut self,
        rhs_top: &[f64],
        rhs_bottom: &[f64],
        scalings: &[Scaling],
    ) -> (Vec<f64>, Vec<f64>) {
        let dim = self.dim;
        let nvars = self.nvars;
        let mut sol = vec![0.0; dim];
        sol[..nvars].copy_from_slice(rhs_top);
        sol[nvars..].copy_from_slice(rhs_bottom);
        self.raw_solve(&mut sol);
        let mut residual = vec![0.0; dim];
        for _ in 0..self.refine_steps {
            self.unregularized_apply(&sol, scalings, &mut residual);
            for i in 0..nvars {
                residual[i] = rhs_top[i] - residual[i];
            }
            for j in 0..self.neq {
                residual[nvars + j] = rhs_bottom[j] - residual[nvars + j];
            }
            let mut corr = residual.clone();
            self.raw_solve(&mut corr);
            for (s, c) in sol.iter_mut().zip(&corr) {
                *s += c;
            }
        }
        let dy = sol.split_off(nvars);
        (sol, dy)
    }

    fn raw_solve(&mut self, b: &mut [f64]) {
        match &mut self.backend {
            Backend::Dense { factor, .. } => {
                factor.as_ref().expect("factor before solve").solve_in_place(b);
            }
            Backend::Sparse {
                iperm,
                factor,
                scratch,
                ..
            } => {
                let fac = factor.as_ref().expect("factor before solve");
                for (orig, &p) in iperm.iter().enumerate() {
                    scratch[p] = b[orig];
                }
                fac.solve_in_place(scratch);
                for (orig, &p) in iperm.iter().enumerate() {
                    b[orig] = scratch[p];
                }
            }
        }
    }

    /// out = K₀·v with K₀ the exact (unregularized) KKT operator.
    fn unregularized_apply(&self, v: &[f64], scalings: &[Scaling], out: &mut [f64]) {
        let nvars = self.nvars;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (b, scal) in self.blocks.iter().zip(scalings) {
            let hv = scal.apply_hinv(&v[b.offset..b.offset + b.dim]);
            for (k, hvk) in hv.iter().enumerate() {
                out[b.offset + k] = -hvk;
            }
        }
        // top += Aᵀ·y
        self.a.tr_matvec_acc(&v[nvars..], &mut out[..nvars]);
        // bottom = A·x
        let mut bottom = vec![0.0; self.neq];
        self.a.matvec_acc(&v[..nvars], &mut bottom);
        out[nvars..].copy_from_slice(&bottom);
    }
}
