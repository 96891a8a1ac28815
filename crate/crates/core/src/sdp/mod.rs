//! Dense semidefinite programming over complex Hermitian block matrices.
//!
//! Standard primal form
//!
//! ```text
//! minimize   <C, X>
//! subject to <A_i, X> = b_i,  i = 1..m
//!            X = diag(X_1, ..., X_k) >= 0
//! ```
//!
//! with dual `maximize b.y  s.t.  Z = C - sum_i y_i A_i >= 0`. The solver is
//! an infeasible-start primal-dual interior-point method using the
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
//!
//! [`LmiBuilder`] offers the dual (linear matrix inequality) view, which is
//! how the entropy programs are written.

mod lmi;
mod solver;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_residual, random_density_matrix, random_hermitian, CMatrix, C64};
use crate::{Error, Result};

pub use lmi::{
    complex_coords, complex_from_coords, hermitian_coords, hermitian_from_coords, LmiBuilder,
    LmiSolution,
};
pub use solver::solve_with;

/// One nonzero of a sparse block matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

/// Equality constraint `<A, X> = rhs` with `A` stored sparsely (both
/// triangles present).
#[derive(Debug, Clone)]
pub struct Constraint {
    pub entries: Vec<SparseEntry>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    objective: Vec<CMatrix>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<CMatrix>,
    pub y: Vec<f64>,
    pub z: Vec<CMatrix>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// primal_obj - dual_obj
    pub gap: f64,
    /// ||b - A(X)||_2
    pub primal_residual: f64,
    /// ||C - A*(y) - Z||_F
    pub dual_residual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub history: Vec<IterRecord>,
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    pub max_iter: usize,
    /// Relative stopping tolerance for gap and infeasibilities.
    pub tol: f64,
    /// Regularization added (relative to the largest diagonal) to the Schur
    /// complement system.
    pub eps_reg: f64,
    /// Fraction of the step to the boundary.
    pub step_fraction: f64,
    /// Absolute primal residual accepted for `Optimal`.
    pub feas_tol: f64,
    /// Gap tolerance factor: |gap| <= gap_tol * (1 + |primal_obj|).
    pub gap_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
            eps_reg: 1e-12,
            step_fraction: 0.98,
            feas_tol: 1e-8,
            gap_tol: 1e-7,
        }
    }
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        for &d in &block_dims {
            if d == 0 {
                return Err(Error::InvalidDim(0));
            }
        }
        crate::linalg::check_cap(block_dims.iter().sum())?;
        let objective = block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        Ok(Self { block_dims, objective, constraints: Vec::new() })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn objective(&self) -> &[CMatrix] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Real dimension of the space of Hermitian block matrices.
    pub fn variable_dimension(&self) -> usize {
        self.block_dims.iter().map(|d| d * d).sum()
    }

    pub fn set_objective_block(&mut self, block: usize, c: CMatrix) -> Result<()> {
        let d = *self
            .block_dims
            .get(block)
            .ok_or_else(|| Error::InvalidParameter(format!("no block {block}")))?;
        if c.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!("objective block {block}")));
        }
        let scale = c.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        let res = hermitian_residual(&c);
        if res > 1e-12 * scale {
            return Err(Error::NotHermitian(res));
        }
        self.objective[block] = c;
        Ok(())
    }

    /// Adds `<A, X> = rhs`; duplicate positions are summed and the result
    /// must be Hermitian per block.
    pub fn add_constraint(&mut self, entries: Vec<SparseEntry>, rhs: f64) -> Result<()> {
        if self.constraints.len() + 1 > self.variable_dimension() {
            return Err(Error::InvalidParameter(
                "more constraints than the variable dimension".into(),
            ));
        }
        if !rhs.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut merged: BTreeMap<(usize, usize, usize), C64> = BTreeMap::new();
        for e in entries {
            let d = *self
                .block_dims
                .get(e.block)
                .ok_or_else(|| Error::InvalidParameter(format!("no block {}", e.block)))?;
            if e.row >= d || e.col >= d {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({}, {}) outside block {} of size {d}",
                    e.row, e.col, e.block
                )));
            }
            if !(e.value.re.is_finite() && e.value.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            *merged.entry((e.block, e.row, e.col)).or_insert(C64::new(0.0, 0.0)) += e.value;
        }
        let scale = merged.values().fold(1.0f64, |a, z| a.max(z.norm()));
        for (&(b, r, c), v) in &merged {
            let mirror = merged.get(&(b, c, r)).copied().unwrap_or(C64::new(0.0, 0.0));
            let dev = (v - mirror.conj()).norm();
            if dev > 1e-12 * scale {
                return Err(Error::NotHermitian(dev));
            }
        }
        let entries = merged
            .into_iter()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|((block, row, col), value)| SparseEntry { block, row, col, value })
            .collect();
        self.constraints.push(Constraint { entries, rhs });
        Ok(())
    }

    /// Adds a constraint given as dense Hermitian blocks (`None` = zero).
    pub fn add_dense_constraint(&mut self, blocks: &[Option<CMatrix>], rhs: f64) -> Result<()> {
        let mut entries = Vec::new();
        for (k, blk) in blocks.iter().enumerate() {
            if let Some(a) = blk {
                for r in 0..a.nrows() {
                    for c in 0..a.ncols() {
                        let v = a[(r, c)];
                        if v.norm() > 0.0 {
                            entries.push(SparseEntry { block: k, row: r, col: c, value: v });
                        }
                    }
                }
            }
        }
        self.add_constraint(entries, rhs)
    }

    /// <A_i, X> for every constraint.
    pub fn apply_constraints(&self, x: &[CMatrix]) -> Vec<f64> {
        self.constraints.iter().map(|c| sparse_inner(&c.entries, x)).collect()
    }

    /// sum_i y_i A_i as dense blocks.
    pub fn adjoint_map(&self, y: &[f64]) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for (c, &yi) in self.constraints.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for e in &c.entries {
                out[e.block][(e.row, e.col)] += e.value * yi;
            }
        }
        out
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    pub fn solve(&self) -> Result<SdpSolution> {
        solve_with(self, &SdpOptions::default())
    }
}

/// Re tr(A X) for sparse A.
pub(crate) fn sparse_inner(entries: &[SparseEntry], x: &[CMatrix]) -> f64 {
    entries
        .iter()
        .map(|e| (e.value * x[e.block][(e.col, e.row)]).re)
        .sum()
}

/// Re tr(A B) summed over blocks.
pub(crate) fn block_inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let mut s = 0.0;
            for i in 0..p.nrows() {
                for j in 0..p.ncols() {
                    s += (p[(i, j)] * q[(j, i)]).re;
                }
            }
            s
        })
        .sum()
}

impl SdpSolution {
    /// Iterate history as CSV: iteration, primal_obj, dual_obj, gap.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,primal_obj,dual_obj,gap\n");
        for r in &self.history {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", r.iter, r.primal_obj, r.dual_obj, r.gap);
        }
        out
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Random problem with a known strictly feasible primal point X0 > 0 and dual
/// point (y0, Z0 > 0), hence a finite optimum attained on both sides. `m`
/// may not exceed the real dimension of the variable (sum of d^2).
pub fn random_feasible_problem<R: Rng + ?Sized>(
    block_dims: &[usize],
    m: usize,
    rng: &mut R,
) -> Result<SdpProblem> {
    let mut p = SdpProblem::new(block_dims.to_vec())?;
    let x0: Vec<CMatrix> = block_dims
        .iter()
        .map(|&d| random_density_matrix(d, d, rng) + CMatrix::identity(d, d) * C64::new(0.1, 0.0))
        .collect();
    let z0: Vec<CMatrix> = block_dims
        .iter()
        .map(|&d| random_density_matrix(d, d, rng) + CMatrix::identity(d, d) * C64::new(0.1, 0.0))
        .collect();
    let y0: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut c = z0;
    for _ in 0..m {
        let a: Vec<CMatrix> = block_dims.iter().map(|&d| random_hermitian(d, rng)).collect();
        let bi = block_inner(&a, &x0);
        p.add_dense_constraint(&a.iter().cloned().map(Some).collect::<Vec<_>>(), bi)?;
    }
    let aty = p.adjoint_map(&y0);
    for (k, blk) in c.iter_mut().enumerate() {
        *blk += &aty[k];
        let h = (blk.clone() + blk.adjoint()) * C64::new(0.5, 0.0);
        p.set_objective_block(k, h)?;
    }
    Ok(p)
}
