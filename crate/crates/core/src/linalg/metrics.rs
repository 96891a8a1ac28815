use super::ops::{eigh, hermitian_residual, psd_power, psd_sqrt};
use super::{cr, CMatrix, CVector, DimsLabel, PureState, StateOperator, PINV_THRESHOLD};
use crate::{Error, Result};

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if hermitian_residual(m) <= 1e-13 * scale.max(1e-300) {
        return Ok(eigh(m).values.iter().map(|v| v.abs()).sum());
    }
    Ok(m.clone().svd(false, false).singular_values.iter().sum())
}

/// ||rho - sigma||_1 (no factor 1/2).
pub fn trace_distance(rho: &StateOperator, sigma: &StateOperator) -> Result<f64> {
    same_dim(rho, sigma)?;
    trace_norm(&(rho.matrix() - sigma.matrix()))
}

fn same_dim(a: &StateOperator, b: &StateOperator) -> Result<()> {
    if a.dims().total() != b.dims().total() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            a.dims().total(),
            b.dims().total()
        )));
    }
    Ok(())
}

/// F(rho, sigma) = || sqrt(rho) sqrt(sigma) ||_1
pub fn fidelity(rho: &StateOperator, sigma: &StateOperator) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(fidelity_matrices(rho.matrix(), sigma.matrix()))
}

pub(crate) fn fidelity_matrices(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let prod = psd_sqrt(rho) * psd_sqrt(sigma);
    prod.svd(false, false).singular_values.iter().sum()
}

/// F + sqrt((1 - tr rho)(1 - tr sigma)), deficits clipped at zero.
pub fn generalized_fidelity(rho: &StateOperator, sigma: &StateOperator) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    let da = (1.0 - rho.trace()).max(0.0);
    let db = (1.0 - sigma.trace()).max(0.0);
    Ok(f + (da * db).sqrt())
}

/// sqrt(1 - Fbar^2), clamped into [0, 1].
pub fn purified_distance(rho: &StateOperator, sigma: &StateOperator) -> Result<f64> {
    let fb = generalized_fidelity(rho, sigma)?.min(1.0);
    Ok((1.0 - fb * fb).max(0.0).sqrt())
}

/// Eigendecomposition-based purification with ancilla dimension equal to
/// the rank. Requires a normalized input.
pub fn purify(rho: &StateOperator, new_label: &str) -> Result<PureState> {
    rho.require_normalized(1e-9)?;
    purify_unchecked(rho, new_label)
}

/// Purification of a possibly subnormalized operator; the vector norm
/// squared equals the trace.
pub(crate) fn purify_unchecked(rho: &StateOperator, new_label: &str) -> Result<PureState> {
    let e = eigh(rho.matrix());
    let cut = 1e-12 * e.max().max(0.0);
    let mut kept: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > cut).collect();
    kept.reverse(); // descending eigenvalue order
    if kept.is_empty() {
        return Err(Error::BadTrace(rho.trace()));
    }
    let rank = kept.len();
    let n = rho.dims().total();
    let dims = rho.dims().concat(&DimsLabel::single(new_label, rank)?)?;
    let mut amps = CVector::zeros(n * rank);
    for (k, &idx) in kept.iter().enumerate() {
        let w = e.values[idx].sqrt();
        for i in 0..n {
            amps[i * rank + k] = e.vectors[(i, idx)] * cr(w);
        }
    }
    Ok(PureState::from_parts(dims, amps))
}

/// Result of the extension construction.
#[derive(Debug, Clone)]
pub struct Extension {
    /// Operator acting on the subsystems of `sigma_A`.
    pub t_a: CMatrix,
    /// Extension of `sigma_A` on the full space of `rho_AB`.
    pub sigma_ab: StateOperator,
}

/// Orthonormal columns of `big` (an orthonormal basis) orthogonal to the
/// span of the orthonormal columns of `small`.
fn complement_within(big: &CMatrix, small: &CMatrix) -> CMatrix {
    let d = big.nrows();
    if big.ncols() == 0 {
        return CMatrix::zeros(d, 0);
    }
    let proj = if small.ncols() == 0 {
        big.clone()
    } else {
        big - small * small.ad_mul(big)
    };
    let gram = proj.ad_mul(&proj);
    let e = eigh(&gram);
    let mut cols = Vec::new();
    for (j, &lam) in e.values.iter().enumerate().rev() {
        if lam > 1e-8 {
            let v = &proj * e.vectors.column(j) * cr(1.0 / lam.sqrt());
            cols.push(v);
        }
    }
    if cols.is_empty() {
        return CMatrix::zeros(d, 0);
    }
    CMatrix::from_columns(&cols)
}

fn support_basis(m: &CMatrix) -> CMatrix {
    let e = eigh(m);
    let cut = PINV_THRESHOLD * e.max().max(0.0);
    let cols: Vec<CVector> = (0..e.values.len())
        .rev()
        .filter(|&i| e.values[i] > cut && e.values[i] > 0.0)
        .map(|i| e.vectors.column(i).into_owned())
        .collect();
    let d = m.nrows();
    if cols.is_empty() {
        return CMatrix::zeros(d, 0);
    }
    CMatrix::from_columns(&cols)
}

/// Extension of `sigma_a` to the space of `rho_ab` with the same purified
/// distance: T_A = sigma^{1/2} V rho_A^{-1/2}, V the polar part of
/// sigma^{1/2} rho_A^{1/2} completed so that it maps supp(rho_A) onto a space
/// containing supp(sigma_A).
pub fn extension_map(rho_ab: &StateOperator, sigma_a: &StateOperator) -> Result<Extension> {
    let a_labels = sigma_a.dims().labels();
    for l in &a_labels {
        let d_rho = rho_ab.dims().dim_of(l)?;
        let d_sig = sigma_a.dims().dim_of(l)?;
        if d_rho != d_sig {
            return Err(Error::DimensionMismatch(format!("label {l}: {d_rho} vs {d_sig}")));
        }
    }
    let front = rho_ab.bring_to_front(&a_labels)?;
    let rho_a = front.partial_trace(&a_labels)?.reorder(&a_labels)?;
    let rho_a_m = rho_a.matrix();
    let sig = sigma_a.matrix();

    let sig_half = psd_sqrt(sig);
    let rho_half = psd_sqrt(rho_a_m);
    let rho_inv_half = psd_power(rho_a_m, -0.5);
    let x = &sig_half * &rho_half;
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let smax = svd.singular_values.max();
    let d = sig.nrows();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-9 * smax.max(1e-300) {
            left.push(u.column(k).into_owned());
            right.push(v_t.row(k).adjoint());
        }
    }
    let p_r = if left.is_empty() { CMatrix::zeros(d, 0) } else { CMatrix::from_columns(&left) };
    let q_r = if right.is_empty() { CMatrix::zeros(d, 0) } else { CMatrix::from_columns(&right) };

    let supp_rho = support_basis(rho_a_m);
    let supp_sig = support_basis(sig);
    let c_rho = complement_within(&supp_rho, &q_r);
    let c_sig = complement_within(&supp_sig, &p_r);
    if c_sig.ncols() > c_rho.ncols() {
        return Err(Error::Precondition(format!(
            "sigma_A has rank {} exceeding rank(rho_A) = {}",
            supp_sig.ncols(),
            supp_rho.ncols()
        )));
    }
    let mut v = &p_r * q_r.adjoint();
    for k in 0..c_sig.ncols() {
        v += c_sig.column(k) * c_rho.column(k).adjoint();
    }
    let t_a = &sig_half * v * rho_inv_half;

    let conj = front.conjugate_on(&a_labels, &t_a)?;
    let sigma_ab = conj.reorder(&rho_ab.dims().labels())?;
    Ok(Extension { t_a, sigma_ab })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_density_matrix, random_pure_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn op(dims: &[(&str, usize)], m: CMatrix) -> StateOperator {
        StateOperator::new(DimsLabel::new(dims.iter().map(|&(l, d)| (l, d))).unwrap(), m).unwrap()
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&CMatrix::identity(3, 3)).unwrap() - 3.0).abs() < 1e-14);
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(-1.0)]));
        assert!((trace_norm(&m).unwrap() - 2.0).abs() < 1e-14);
        assert!(trace_norm(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn trace_norm_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let h = crate::linalg::random_hermitian(5, &mut rng);
            // independent route: SVD of the matrix
            let svd_sum: f64 = h.clone().svd(false, false).singular_values.iter().sum();
            assert!((trace_norm(&h).unwrap() - svd_sum).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = op(&[("A", 3)], random_density_matrix(3, 3, &mut rng));
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-10);
        let half = rho.scaled(0.5);
        assert!((fidelity(&half, &half).unwrap() - 0.5).abs() < 1e-10);
        let p0 = StateOperator::basis_projector(DimsLabel::single("A", 2).unwrap(), 0).unwrap();
        let p1 = StateOperator::basis_projector(DimsLabel::single("A", 2).unwrap(), 1).unwrap();
        assert!(fidelity(&p0, &p1).unwrap().abs() < 1e-12);
        assert!((purified_distance(&p0, &p1).unwrap() - 1.0).abs() < 1e-12);
        assert!(purified_distance(&rho, &rho).unwrap() < 1e-5);
    }

    #[test]
    fn fidelity_pure_overlap_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let phi = random_pure_vector(4, &mut rng);
            let sigma_m = random_density_matrix(4, 3, &mut rng);
            let overlap = (phi.adjoint() * &sigma_m * &phi)[(0, 0)].re;
            let phi_op = op(&[("A", 4)], &phi * phi.adjoint());
            let sigma = op(&[("A", 4)], sigma_m);
            assert!((fidelity(&phi_op, &sigma).unwrap() - overlap.sqrt()).abs() < 1e-9);
            let sym = fidelity(&sigma, &phi_op).unwrap();
            assert!((sym - overlap.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn generalized_fidelity_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = op(&[("A", 2)], random_density_matrix(2, 2, &mut rng) * cr(0.6));
        let b = op(&[("A", 2)], random_density_matrix(2, 2, &mut rng) * cr(0.9));
        let f = fidelity(&a, &b).unwrap();
        let expected = f + (0.4f64 * 0.1).sqrt();
        assert!((generalized_fidelity(&a, &b).unwrap() - expected).abs() < 1e-12);
        let p = purified_distance(&a, &b).unwrap();
        assert!((p - (1.0 - expected * expected).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn purify_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = op(&[("A", 2), ("B", 2)], random_density_matrix(4, 3, &mut rng));
        let psi = purify(&rho, "R").unwrap();
        assert_eq!(psi.dims().dim_of("R").unwrap(), 3);
        let back = psi.reduced(&["A", "B"]).unwrap();
        assert!(trace_distance(&back, &rho).unwrap() < 1e-9);

        let mixed = StateOperator::maximally_mixed(DimsLabel::single("A", 2).unwrap());
        let psi = purify(&mixed, "R").unwrap();
        let red = psi.reduced(&["R"]).unwrap();
        assert!(max_abs_diff(red.matrix(), &(CMatrix::identity(2, 2) * cr(0.5))) < 1e-12);

        assert!(matches!(purify(&rho.scaled(0.5), "R"), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn purify_pure_input_uses_trivial_ancilla() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi = random_pure_vector(3, &mut rng);
        let rho = op(&[("A", 3)], &phi * phi.adjoint());
        let psi = purify(&rho, "R").unwrap();
        assert_eq!(psi.dims().dim_of("R").unwrap(), 1);
        let overlap = (phi.adjoint() * psi.amplitudes())[(0, 0)].norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn extension_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rho = op(&[("A", 2), ("B", 2)], random_density_matrix(4, 4, &mut rng));
        let rho_a = rho.partial_trace(&["A"]).unwrap();
        let ext = extension_map(&rho, &rho_a).unwrap();
        assert!(max_abs_diff(&ext.t_a, &CMatrix::identity(2, 2)) < 1e-8);
        assert!(max_abs_diff(ext.sigma_ab.matrix(), rho.matrix()) < 1e-8);
    }

    #[test]
    fn extension_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ra = op(&[("A", 2)], random_density_matrix(2, 2, &mut rng));
        let rb = op(&[("B", 3)], random_density_matrix(3, 2, &mut rng));
        let sa = op(&[("A", 2)], random_density_matrix(2, 2, &mut rng));
        let ext = extension_map(&ra.tensor(&rb).unwrap(), &sa).unwrap();
        let expect = sa.tensor(&rb).unwrap();
        assert!(max_abs_diff(ext.sigma_ab.matrix(), expect.matrix()) < 1e-9);
    }
}
