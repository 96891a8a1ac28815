use crate::linalg::{eigh, CMatrix, CVector, DimsLabel, PureState, PINV_THRESHOLD};
use crate::{Error, Result};

/// Decoder produced by [`uhlmann_isometry`].
#[derive(Debug, Clone)]
pub struct UhlmannDecoder {
    /// Map from the source Bob space to the target Bob space, both in the
    /// label order of `source_dims` / `target_dims`.
    pub v: CMatrix,
    pub source_dims: DimsLabel,
    pub target_dims: DimsLabel,
    /// Labels shared by both states, left untouched.
    pub complement: DimsLabel,
    /// |<target| (1 (x) V) |sigma>|, the fidelity after decoding.
    pub fidelity: f64,
    /// Fidelity of the two complement marginals.
    pub marginal_fidelity: f64,
    /// V^dagger V = 1; false only when the target Bob space is smaller than
    /// the source one (then V is isometric on the source support only).
    pub isometric: bool,
}

impl UhlmannDecoder {
    /// Applies `1 (x) V` to a state on the complement plus source labels.
    pub fn apply(&self, sigma: &PureState) -> Result<PureState> {
        let comp = self.complement.labels();
        let (s, _, rest) = sigma.as_bipartite_matrix(&comp)?;
        if rest != self.source_dims {
            return Err(Error::DimensionMismatch("decoder source labels".into()));
        }
        let out = s * self.v.transpose();
        let dims = self.complement.concat(&self.target_dims)?;
        let w = out.ncols();
        PureState::new(dims, CVector::from_fn(out.len(), |i, _| out[(i / w, i % w)]))
    }
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `basis` (orthonormal columns) inside C^n.
fn complement_basis(basis: &CMatrix, n: usize) -> CMatrix {
    if basis.ncols() >= n {
        return CMatrix::zeros(n, 0);
    }
    let proj = CMatrix::identity(n, n) - basis * basis.adjoint();
    let e = eigh(&proj);
    let cols: Vec<_> = (0..n).filter(|&i| e.values[i] > 0.5).map(|i| e.vectors.column(i).into_owned()).collect();
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Unitary (or partial isometry) factor X Y^dagger of the SVD X S Y^dagger.
fn polar_factor(m: &CMatrix) -> CMatrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMatrix::zeros(m.nrows(), m.ncols());
    }
    let svd = m.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// Bob-side map V taking `sigma` as close as possible to `target`:
/// `|<target| 1 (x) V |sigma>| = F(sigma_C, target_C)` where C are the labels
/// of `sigma` outside `bob_labels`, which `target` must carry with the same
/// dimensions. The remaining labels of `target` form the output space.
///
/// V is the conjugated polar factor of `T^dagger S` (S, T the amplitude
/// matrices with C as rows) on the supports, completed on the orthogonal
/// complements by the polar factor of their overlap (equal Bob dimensions)
/// or by pairing basis vectors in order, so identical inputs give V = 1. Errors when the complement marginals are further apart than
/// `max_distance` in purified distance.
pub fn uhlmann_isometry(
    sigma: &PureState,
    target: &PureState,
    bob_labels: &[&str],
    max_distance: f64,
) -> Result<UhlmannDecoder> {
    for l in bob_labels {
        sigma.dims().index_of(l)?;
    }
    for st in [sigma, target] {
        if (st.norm_squared() - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(st.norm_squared()));
        }
    }
    let comp: Vec<&str> = sigma.dims().labels().into_iter().filter(|l| !bob_labels.contains(l)).collect();
    for l in &comp {
        if target.dims().dim_of(l)? != sigma.dims().dim_of(l)? {
            return Err(Error::DimensionMismatch(format!("label `{l}` differs between the two states")));
        }
    }
    let (s, comp_dims, src) = sigma.as_bipartite_matrix(&comp)?;
    let (t, _, tgt) = target.as_bipartite_matrix(&comp)?;
    let (b_s, b_t) = (src.total(), tgt.total());

    let m = t.adjoint() * &s;
    let svd = m.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let sv = &svd.singular_values;
    let marginal_fidelity: f64 = sv.iter().sum();
    let distance = (1.0 - marginal_fidelity.min(1.0).powi(2)).max(0.0).sqrt();
    if distance > max_distance {
        return Err(Error::Precondition(format!(
            "complement marginals are {distance:.3e} apart in purified distance (allowed {max_distance:.3e})"
        )));
    }

    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > PINV_THRESHOLD * smax).collect();
    let pick = |cols: Vec<CVector>, n: usize| {
        if cols.is_empty() {
            CMatrix::zeros(n, 0)
        } else {
            CMatrix::from_columns(&cols)
        }
    };
    let x_r = pick(kept.iter().map(|&i| u.column(i).into_owned()).collect(), b_t);
    let y_r = pick(kept.iter().map(|&i| v_t.row(i).adjoint()).collect(), b_s);

    // The overlap is tr(M V^T), maximized by V^T = Y X^dagger.
    let x_c = x_r.map(|z| z.conj());
    let y_c = y_r.map(|z| z.conj());
    let mut v = &x_c * y_r.transpose();
    let q_s = complement_basis(&y_c, b_s);
    let q_t = complement_basis(&x_c, b_t);
    if q_s.ncols() > 0 && q_t.ncols() > 0 {
        if b_s == b_t {
            v += &q_t * polar_factor(&(q_t.adjoint() * &q_s)) * q_s.adjoint();
        } else {
            // No common space to compare against: pair basis vectors in order.
            let m = q_s.ncols().min(q_t.ncols());
            v += q_t.columns(0, m) * q_s.columns(0, m).adjoint();
        }
    }

    let overlap = (t.adjoint() * &s * v.transpose()).trace();
    let isometric = b_t >= b_s && {
        let g = v.adjoint() * &v - CMatrix::identity(b_s, b_s);
        g.iter().all(|z| z.norm() < 1e-9)
    };
    Ok(UhlmannDecoder {
        v,
        source_dims: src,
        target_dims: tgt,
        complement: comp_dims,
        fidelity: overlap.norm(),
        marginal_fidelity,
        isometric,
    })
}
