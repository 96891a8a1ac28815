use super::ops::{
    default_psd_check, hermitian_part, hermitian_residual, kron, partial_trace_matrix,
    permute_subsystems, permute_vector,
};
use super::{check_cap, cr, CMatrix, CVector, DimsLabel, TOL_HERM, TOL_TRACE};
use crate::{Error, Result};

/// A subnormalized positive operator on a labeled tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateOperator {
    dims: DimsLabel,
    matrix: CMatrix,
}

impl StateOperator {
    /// Validates shape, finiteness, Hermiticity, positivity and trace <= 1.
    /// The stored matrix is the Hermitian part of the input.
    pub fn new(dims: DimsLabel, matrix: CMatrix) -> Result<Self> {
        let op = Self::new_unnormalized(dims, matrix)?;
        let t = op.trace();
        if !(-TOL_TRACE..=1.0 + TOL_TRACE).contains(&t) {
            return Err(Error::BadTrace(t));
        }
        Ok(op)
    }

    /// As [`StateOperator::new`] but without the trace bound; used for
    /// positive operators such as unnormalized Choi matrices of CPMs.
    pub fn new_unnormalized(dims: DimsLabel, matrix: CMatrix) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix side {} but dims total {}",
                matrix.nrows(),
                n
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = matrix.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1e-300);
        let herm = hermitian_residual(&matrix);
        if herm > TOL_HERM * scale.max(1.0) {
            return Err(Error::NotHermitian(herm));
        }
        let matrix = hermitian_part(&matrix);
        let (ok, min) = default_psd_check(&matrix);
        if !ok {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { dims, matrix })
    }

    /// Construct without validation. Callers guarantee the invariants.
    pub(crate) fn from_parts(dims: DimsLabel, matrix: CMatrix) -> Self {
        debug_assert_eq!(dims.total(), matrix.nrows());
        Self { dims, matrix: hermitian_part(&matrix) }
    }

    /// Maximally mixed state on the given dims.
    pub fn maximally_mixed(dims: DimsLabel) -> Self {
        let n = dims.total();
        Self { dims, matrix: CMatrix::identity(n, n) * cr(1.0 / n as f64) }
    }

    /// Computational-basis projector |index><index|.
    pub fn basis_projector(dims: DimsLabel, index: usize) -> Result<Self> {
        let n = dims.total();
        if index >= n {
            return Err(Error::InvalidParameter(format!("basis index {index} >= {n}")));
        }
        let mut m = CMatrix::zeros(n, n);
        m[(index, index)] = cr(1.0);
        Ok(Self { dims, matrix: m })
    }

    pub fn dims(&self) -> &DimsLabel {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.trace() - 1.0).abs() <= tol
    }

    pub(crate) fn require_normalized(&self, tol: f64) -> Result<()> {
        if self.is_normalized(tol) {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.trace()))
        }
    }

    /// Tensor product with concatenated labels.
    pub fn tensor(&self, other: &StateOperator) -> Result<StateOperator> {
        let dims = self.dims.concat(&other.dims)?;
        Ok(Self { dims, matrix: kron(&self.matrix, &other.matrix) })
    }

    /// Reduced operator on the kept labels (in the order they appear in the
    /// operator's dims).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<StateOperator> {
        for l in keep {
            self.dims.index_of(l)?;
        }
        let positions: Vec<usize> = (0..self.dims.len())
            .filter(|&i| keep.contains(&self.dims.subsystems()[i].label.as_str()))
            .collect();
        let m = partial_trace_matrix(&self.matrix, &self.dims.dims(), &positions);
        Ok(Self { dims: self.dims.select(&positions), matrix: m })
    }

    /// Trace out the listed labels.
    pub fn trace_out(&self, labels: &[&str]) -> Result<StateOperator> {
        for l in labels {
            self.dims.index_of(l)?;
        }
        let keep: Vec<&str> =
            self.dims.labels().into_iter().filter(|l| !labels.contains(l)).collect();
        self.partial_trace(&keep)
    }

    /// Reorder subsystems to the given label order (must be a permutation).
    pub fn reorder(&self, order: &[&str]) -> Result<StateOperator> {
        if order.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "reorder needs {} labels, got {}",
                self.dims.len(),
                order.len()
            )));
        }
        let pos = self.dims.indices_of(order)?;
        let m = permute_subsystems(&self.matrix, &self.dims.dims(), &pos);
        Ok(Self { dims: self.dims.select(&pos), matrix: m })
    }

    /// Reorder so that `first` labels come first (in the given order), the
    /// rest after in their current order.
    pub fn bring_to_front(&self, first: &[&str]) -> Result<StateOperator> {
        let mut order: Vec<&str> = first.to_vec();
        for l in self.dims.labels() {
            if !first.contains(&l) {
                order.push(l);
            }
        }
        self.reorder(&order)
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<StateOperator> {
        Ok(Self { dims: self.dims.relabel(from, to)?, matrix: self.matrix.clone() })
    }

    /// Scale by a non-negative factor.
    pub fn scaled(&self, s: f64) -> StateOperator {
        Self { dims: self.dims.clone(), matrix: &self.matrix * cr(s) }
    }

    /// Normalize to unit trace.
    pub fn normalized(&self) -> Result<StateOperator> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::BadTrace(t));
        }
        Ok(self.scaled(1.0 / t))
    }

    /// Conjugate by an operator acting on the listed labels (identity
    /// elsewhere): (M (x) I) rho (M (x) I)^dagger. M must be square.
    pub fn conjugate_on(&self, labels: &[&str], m: &CMatrix) -> Result<StateOperator> {
        let front = self.bring_to_front(labels)?;
        let d = front.dims.dim_of_set(labels)?;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator {}x{} on subsystem of dim {d}",
                m.nrows(),
                m.ncols()
            )));
        }
        let rest = front.dims.total() / d;
        let full = kron(m, &CMatrix::identity(rest, rest));
        let out = &full * &front.matrix * full.adjoint();
        let conj = Self { dims: front.dims.clone(), matrix: hermitian_part(&out) };
        conj.reorder(&self.dims.labels())
    }
}

/// A (sub)normalized pure state vector on labeled subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: DimsLabel,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(dims: DimsLabel, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for total dimension {}",
                amplitudes.len(),
                dims.total()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n2 = amplitudes.norm_squared();
        if !(n2 > 0.0 && n2 <= 1.0 + TOL_TRACE) {
            return Err(Error::BadTrace(n2));
        }
        Ok(Self { dims, amplitudes })
    }

    pub(crate) fn from_parts(dims: DimsLabel, amplitudes: CVector) -> Self {
        Self { dims, amplitudes }
    }

    /// Computational basis vector.
    pub fn basis(dims: DimsLabel, index: usize) -> Result<Self> {
        let n = dims.total();
        if index >= n {
            return Err(Error::InvalidParameter(format!("basis index {index} >= {n}")));
        }
        let mut v = CVector::zeros(n);
        v[index] = cr(1.0);
        Ok(Self { dims, amplitudes: v })
    }

    pub fn dims(&self) -> &DimsLabel {
        &self.dims
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// |psi><psi| (checks the cap).
    pub fn to_operator(&self) -> Result<StateOperator> {
        check_cap(self.dims.total())?;
        let m = &self.amplitudes * self.amplitudes.adjoint();
        Ok(StateOperator::from_parts(self.dims.clone(), m))
    }

    /// Tensor product of pure states.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let dims = self.dims.concat(&other.dims)?;
        Ok(Self { dims, amplitudes: self.amplitudes.kronecker(&other.amplitudes) })
    }

    pub fn reorder(&self, order: &[&str]) -> Result<PureState> {
        if order.len() != self.dims.len() {
            return Err(Error::DimensionMismatch("reorder label count".into()));
        }
        let pos = self.dims.indices_of(order)?;
        let v = permute_vector(&self.amplitudes, &self.dims.dims(), &pos);
        Ok(Self { dims: self.dims.select(&pos), amplitudes: v })
    }

    pub fn bring_to_front(&self, first: &[&str]) -> Result<PureState> {
        let mut order: Vec<&str> = first.to_vec();
        for l in self.dims.labels() {
            if !first.contains(&l) {
                order.push(l);
            }
        }
        self.reorder(&order)
    }

    /// Amplitudes reshaped as a (dim(first) x dim(rest)) matrix after
    /// bringing `first` to the front.
    pub fn as_bipartite_matrix(&self, first: &[&str]) -> Result<(CMatrix, DimsLabel, DimsLabel)> {
        let front = self.bring_to_front(first)?;
        let k = first.len();
        let all: Vec<usize> = (0..front.dims.len()).collect();
        let dims_first = front.dims.select(&all[..k]);
        let dims_rest = front.dims.select(&all[k..]);
        let r = dims_first.total();
        let cdim = dims_rest.total();
        let m = CMatrix::from_fn(r, cdim, |i, j| front.amplitudes[i * cdim + j]);
        Ok((m, dims_first, dims_rest))
    }

    /// Reduced operator on the kept labels, computed without forming the
    /// full projector.
    pub fn reduced(&self, keep: &[&str]) -> Result<StateOperator> {
        let kept: Vec<&str> =
            self.dims.labels().into_iter().filter(|l| keep.contains(l)).collect();
        for l in keep {
            self.dims.index_of(l)?;
        }
        let (m, dk, _) = self.as_bipartite_matrix(&kept)?;
        check_cap(dk.total())?;
        Ok(StateOperator::from_parts(dk, &m * m.adjoint()))
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<PureState> {
        Ok(Self { dims: self.dims.relabel(from, to)?, amplitudes: self.amplitudes.clone() })
    }
}
