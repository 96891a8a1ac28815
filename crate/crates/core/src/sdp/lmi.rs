use super::{solve_with, SdpOptions, SdpProblem, SdpSolution, SdpStatus, SparseEntry};
use crate::linalg::{CMatrix, C64};
use crate::{Error, Result};

/// Builder for `maximize b.y  s.t.  C_k + sum_i y_i F_ik >= 0` for every
/// block k. The result is the dual of an [`SdpProblem`] with `A_i = -F_i`.
#[derive(Debug, Clone, Default)]
pub struct LmiBuilder {
    objective: Vec<f64>,
    blocks: Vec<LmiBlock>,
}

#[derive(Debug, Clone)]
struct LmiBlock {
    constant: CMatrix,
    terms: Vec<(usize, usize, usize, C64)>,
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub y: Vec<f64>,
    /// b.y at the returned point.
    pub value: f64,
    /// Objective of the paired primal program (an upper bound).
    pub primal_value: f64,
    pub gap: f64,
    pub status: SdpStatus,
    pub sdp: SdpSolution,
}

impl LmiBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `n` free scalar variables, returning their index range.
    pub fn add_vars(&mut self, n: usize) -> std::ops::Range<usize> {
        let start = self.objective.len();
        self.objective.resize(start + n, 0.0);
        start..start + n
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    /// New LMI block with constant term `constant` (Hermitian).
    pub fn add_block(&mut self, constant: CMatrix) -> usize {
        self.blocks.push(LmiBlock { constant, terms: Vec::new() });
        self.blocks.len() - 1
    }

    pub fn block_dim(&self, block: usize) -> usize {
        self.blocks[block].constant.nrows()
    }

    /// Adds `value` at (row, col) of the coefficient of `var` in `block`.
    /// The caller keeps every coefficient Hermitian.
    pub fn add_term(&mut self, block: usize, var: usize, row: usize, col: usize, value: C64) {
        self.blocks[block].terms.push((var, row, col, value));
    }

    /// Adds `value` at (row, col) and its conjugate at (col, row).
    pub fn add_sym_term(&mut self, block: usize, var: usize, row: usize, col: usize, value: C64) {
        self.add_term(block, var, row, col, value);
        if row != col {
            self.add_term(block, var, col, row, value.conj());
        } else {
            debug_assert!(value.im == 0.0);
        }
    }

    /// Adds a dense coefficient matrix for `var`, placed at offset
    /// (`offset`, `offset`) of the block.
    pub fn add_matrix_term(&mut self, block: usize, var: usize, offset: usize, m: &CMatrix) {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > 1e-15 {
                    self.add_term(block, var, offset + r, offset + c, v);
                }
            }
        }
    }

    pub fn build(&self) -> Result<SdpProblem> {
        let dims: Vec<usize> = self.blocks.iter().map(|b| b.constant.nrows()).collect();
        let mut p = SdpProblem::new(dims)?;
        for (k, b) in self.blocks.iter().enumerate() {
            p.set_objective_block(k, b.constant.clone())?;
        }
        let mut per_var: Vec<Vec<SparseEntry>> = vec![Vec::new(); self.num_vars()];
        for (k, b) in self.blocks.iter().enumerate() {
            for &(var, row, col, value) in &b.terms {
                per_var[var].push(SparseEntry { block: k, row, col, value: -value });
            }
        }
        for (i, entries) in per_var.into_iter().enumerate() {
            if entries.is_empty() {
                return Err(Error::Sdp(format!("variable {i} appears in no block")));
            }
            p.add_constraint(entries, self.objective[i])?;
        }
        Ok(p)
    }

    pub fn solve(&self, opts: &SdpOptions) -> Result<LmiSolution> {
        let p = self.build()?;
        let sdp = solve_with(&p, opts)?;
        Ok(LmiSolution {
            y: sdp.y.clone(),
            value: sdp.dual_obj,
            primal_value: sdp.primal_obj,
            gap: sdp.gap,
            status: sdp.status,
            sdp,
        })
    }
}

/// Real coordinates of a d x d Hermitian matrix: the d diagonal units, then
/// for k < l the pairs (E_kl + E_lk, i E_kl - i E_lk). Each coordinate is
/// returned as its list of nonzero entries.
pub fn hermitian_coords(d: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(vec![(k, k, C64::new(1.0, 0.0))]);
    }
    for k in 0..d {
        for l in k + 1..d {
            out.push(vec![(k, l, C64::new(1.0, 0.0)), (l, k, C64::new(1.0, 0.0))]);
            out.push(vec![(k, l, C64::new(0.0, 1.0)), (l, k, C64::new(0.0, -1.0))]);
        }
    }
    out
}

/// Inverse of [`hermitian_coords`].
pub fn hermitian_from_coords(d: usize, y: &[f64]) -> CMatrix {
    assert_eq!(y.len(), d * d);
    let mut m = CMatrix::zeros(d, d);
    for (j, basis) in hermitian_coords(d).into_iter().enumerate() {
        for (r, c, v) in basis {
            m[(r, c)] += v * y[j];
        }
    }
    m
}

/// Real coordinates of a general rows x cols complex matrix: coordinate
/// 2(k*cols + l) is the real part of entry (k, l), the next one the
/// imaginary part. Each coordinate is its single unit entry.
pub fn complex_coords(rows: usize, cols: usize) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::with_capacity(2 * rows * cols);
    for k in 0..rows {
        for l in 0..cols {
            out.push((k, l, C64::new(1.0, 0.0)));
            out.push((k, l, C64::new(0.0, 1.0)));
        }
    }
    out
}

/// Inverse of [`complex_coords`].
pub fn complex_from_coords(rows: usize, cols: usize, y: &[f64]) -> CMatrix {
    assert_eq!(y.len(), 2 * rows * cols);
    CMatrix::from_fn(rows, cols, |k, l| C64::new(y[2 * (k * cols + l)], y[2 * (k * cols + l) + 1]))
}
