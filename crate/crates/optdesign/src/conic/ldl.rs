//! LDLᵀ factorization of symmetric quasi-definite matrices.
//!
//! Sparse path: up-looking simplicial LDLᵀ driven by the elimination tree,
//! no pivoting; static regularization on assembly plus a dynamic sign guard
//! on the pivots keeps the factorization stable for quasi-definite KKT
//! systems. Dense path below the fallback threshold uses the same pivot
//! guard on a plain symmetric factorization.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdlError {
    #[error("matrix is not upper triangular with explicit diagonal")]
    BadStructure,
    #[error("zero pivot beyond regularization at column {0}")]
    ZeroPivot(usize),
}

const UNKNOWN: usize = usize::MAX;
/// Pivots with `sign·D[k]` below this are replaced by `sign·DYN_REG_DELTA`.
const DYN_REG_EPS: f64 = 1e-13;
const DYN_REG_DELTA: f64 = 1e-9;

/// Symbolic data shared across numeric refactorizations of one pattern.
pub struct SparseSymbolic {
    n: usize,
    etree: Vec<usize>,
    l_colptr: Vec<usize>,
}

/// Compute the elimination tree and column counts of the upper-triangular
/// pattern (diagonal entries must be present and stored last per column).
pub fn symbolic(n: usize, colptr: &[usize], rowind: &[usize]) -> Result<SparseSymbolic, LdlError> {
    let mut etree = vec![UNKNOWN; n];
    let mut lnz = vec![0usize; n];
    let mut work = vec![UNKNOWN; n];
    for j in 0..n {
        work[j] = j;
        let lo = colptr[j];
        let hi = colptr[j + 1];
        if lo == hi || rowind[hi - 1] != j {
            return Err(LdlError::BadStructure);
        }
        for p in lo..hi - 1 {
            let mut i = rowind[p];
            if i >= j {
                return Err(LdlError::BadStructure);
            }
            while work[i] != j {
                if etree[i] == UNKNOWN {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    let mut l_colptr = vec![0usize; n + 1];
    for i in 0..n {
        l_colptr[i + 1] = l_colptr[i] + lnz[i];
    }
    Ok(SparseSymbolic {
        n,
        etree,
        l_colptr,
    })
}

/// Numeric LDLᵀ factors over a fixed symbolic pattern.
pub struct SparseFactor {
    pub l_colptr: Vec<usize>,
    pub l_rowind: Vec<usize>,
    pub l_values: Vec<f64>,
    pub d: Vec<f64>,
    pub dinv: Vec<f64>,
}

impl SparseSymbolic {
    /// Factor the numeric values of the same pattern used for [`symbolic`].
    /// `signs[k]` is the expected sign of pivot `k` (+1 or −1).
    pub fn factor(
        &self,
        colptr: &[usize],
        rowind: &[usize],
        values: &[f64],
        signs: &[i8],
    ) -> Result<SparseFactor, LdlError> {
        let n = self.n;
        let lnz_total = self.l_colptr[n];
        let mut l_rowind = vec![0usize; lnz_total];
        let mut l_values = vec![0.0f64; lnz_total];
        let mut d = vec![0.0f64; n];
        let mut dinv = vec![0.0f64; n];
        let mut y_vals = vec![0.0f64; n];
        let mut y_marker = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut cursor: Vec<usize> = self.l_colptr[..n].to_vec();

        for k in 0..n {
            let lo = colptr[k];
            let hi = colptr[k + 1];
            // Diagonal is the last entry of the column.
            d[k] = values[hi - 1];
            let mut nnz_y = 0usize;
            for p in lo..hi - 1 {
                let i = rowind[p];
                y_vals[i] = values[p];
                if !y_marker[i] {
                    y_marker[i] = true;
                    elim[0] = i;
                    let mut nnz_e = 1usize;
                    let mut next = self.etree[i];
                    while next != UNKNOWN && next < k && !y_marker[next] {
                        y_marker[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = self.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for q in (0..nnz_y).rev() {
                let cidx = y_idx[q];
                let y_c = y_vals[cidx];
                let stop = cursor[cidx];
                for p in self.l_colptr[cidx]..stop {
                    y_vals[l_rowind[p]] -= l_values[p] * y_c;
                }
                let lkj = y_c * dinv[cidx];
                d[k] -= y_c * lkj;
                l_rowind[stop] = k;
                l_values[stop] = lkj;
                cursor[cidx] += 1;
                y_vals[cidx] = 0.0;
                y_marker[cidx] = false;
            }
            let sign = f64::from(signs[k]);
            if d[k] * sign < DYN_REG_EPS {
                d[k] = sign * DYN_REG_DELTA;
            }
            if d[k] == 0.0 {
                return Err(LdlError::ZeroPivot(k));
            }
            dinv[k] = 1.0 / d[k];
        }
        Ok(SparseFactor {
            l_colptr: self.l_colptr.clone(),
            l_rowind,
            l_values,
            d,
            dinv,
        })
    }
}

impl SparseFactor {
    /// Solve (LDLᵀ) x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for j in 0..n {
            let xj = b[j];
            if xj != 0.0 {
                for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                    b[self.l_rowind[p]] -= self.l_values[p] * xj;
                }
            }
        }
        for j in 0..n {
            b[j] *= self.dinv[j];
        }
        for j in (0..n).rev() {
            let mut acc = b[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                acc -= self.l_values[p] * b[self.l_rowind[p]];
            }
            b[j] = acc;
        }
    }
}

/// Dense LDLᵀ without pivoting, same dynamic pivot guard as the sparse path.
pub struct DenseFactor {
    n: usize,
    /// Strictly lower factor packed row-major over the full square.
    l: Vec<f64>,
    d: Vec<f64>,
}

impl DenseFactor {
    /// Factor a dense symmetric matrix given in row-major storage.
    pub fn factor(n: usize, a: &[f64], signs: &[i8]) -> Result<DenseFactor, LdlError> {
        let mut l = a.to_vec();
        let mut d = vec![0.0f64; n];
        for k in 0..n {
            let mut dk = l[k * n + k];
            for j in 0..k {
                dk -= l[k * n + j] * l[k * n + j] * d[j];
            }
            let sign = f64::from(signs[k]);
            if dk * sign < DYN_REG_EPS {
                dk = sign * DYN_REG_DELTA;
            }
            if dk == 0.0 {
                return Err(LdlError::ZeroPivot(k));
            }
            d[k] = dk;
            for i in k + 1..n {
                let mut acc = l[i * n + k];
                for j in 0..k {
                    acc -= l[i * n + j] * l[k * n + j] * d[j];
                }
                l[i * n + k] = acc / dk;
            }
        }
        Ok(DenseFactor { n, l, d })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.l[i * n + j] * b[j];
            }
            b[i] = acc;
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= self.l[j * n + i] * b[j];
            }
            b[i] = acc;
        }
    }
}
