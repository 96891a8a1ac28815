use super::{clip_psd, fresh_label, log_gap, solve_lmi, Bipartite, EntropyResult};
use crate::linalg::{eigh, psd_sqrt, purify_unchecked, CMatrix, StateOperator, C64, PINV_THRESHOLD};
use crate::sdp::{hermitian_coords, hermitian_from_coords, LmiBuilder};
use crate::{Error, Result};

/// Conditioning operator as a normalized state on the condition labels.
pub(super) fn sigma_state(bp: &Bipartite, m: &CMatrix) -> Option<StateOperator> {
    let c = clip_psd(m);
    let t = c.trace().re;
    if t <= 0.0 {
        return None;
    }
    StateOperator::new(bp.cond_dims.clone(), c * C64::new(1.0 / t, 0.0)).ok()
}

/// Adds the coefficient of `1_A (x) E_j` for every Hermitian coordinate of
/// a `d_b x d_b` variable starting at variable index `first`.
pub(super) fn add_identity_kron_terms(
    b: &mut LmiBuilder,
    block: usize,
    first: usize,
    d_a: usize,
    d_b: usize,
    sign: f64,
) {
    for (j, basis) in hermitian_coords(d_b).into_iter().enumerate() {
        for a in 0..d_a {
            for &(r, c, v) in &basis {
                b.add_term(block, first + j, a * d_b + r, a * d_b + c, v * sign);
            }
        }
    }
}

/// H_min(A|B) = -log min { tr s : 1_A (x) s >= rho_AB }.
pub fn h_min(state: &StateOperator, target: &[&str], condition: &[&str]) -> Result<EntropyResult> {
    let bp = Bipartite::new(state, target, condition)?;
    h_min_bipartite(&bp)
}

pub(super) fn h_min_bipartite(bp: &Bipartite) -> Result<EntropyResult> {
    let tr = bp.rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::BadTrace(tr));
    }
    if bp.d_b == 1 {
        let lmax = eigh(&bp.rho).max();
        return Ok(EntropyResult::exact(-lmax.log2()));
    }
    let (d_a, d_b) = (bp.d_a, bp.d_b);
    let mut b = LmiBuilder::new();
    let vars = b.add_vars(d_b * d_b);
    for k in 0..d_b {
        b.add_objective(vars.start + k, -1.0);
    }
    let blk = b.add_block(-bp.rho.clone());
    add_identity_kron_terms(&mut b, blk, vars.start, d_a, d_b, 1.0);
    let sol = solve_lmi(&b, "min-entropy SDP")?;
    let t_dual = -sol.value;
    let t_primal = -sol.primal_value;
    let sigma = hermitian_from_coords(d_b, &sol.y[vars]);
    Ok(EntropyResult {
        value: -t_dual.log2(),
        optimizer_sigma: sigma_state(bp, &sigma),
        smoothed_state: None,
        certificate_gap: log_gap(t_dual, t_primal),
        lower_bound: false,
        cross_check: None,
    })
}

/// Orthonormal basis of the support (eigenvalues above the generalized
/// inverse threshold) with the matching eigenvalues, in descending order.
pub(super) fn support(rho: &CMatrix) -> (CMatrix, Vec<f64>) {
    let e = eigh(rho);
    let cut = PINV_THRESHOLD * e.max().max(0.0);
    let idx: Vec<usize> = (0..e.values.len()).rev().filter(|&i| e.values[i] > cut).collect();
    let cols: Vec<_> = idx.iter().map(|&i| e.vectors.column(i).into_owned()).collect();
    let vals = idx.iter().map(|&i| e.values[i]).collect();
    (CMatrix::from_columns(&cols), vals)
}

/// H_max(A|B) = max_s 2 log F(rho_AB, 1_A (x) s), computed by the fidelity
/// SDP on the support of rho and cross-checked against -H_min(A|C) on a
/// purification.
pub fn h_max(state: &StateOperator, target: &[&str], condition: &[&str]) -> Result<EntropyResult> {
    let bp = Bipartite::new(state, target, condition)?;
    let tr = bp.rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::BadTrace(tr));
    }
    if bp.d_b == 1 {
        let s = psd_sqrt(&bp.rho).trace().re;
        return Ok(EntropyResult::exact(2.0 * s.log2()));
    }
    let mut direct = h_max_direct(&bp)?;
    // The purification can exceed the cap when the direct problem does not;
    // the value then goes out without the cross-check (`cross_check: None`).
    let dual = match h_max_via_duality(state, target, condition) {
        Err(Error::DimensionCap { .. }) => return Ok(direct),
        other => other?,
    };
    let delta = (direct.value - dual.value).abs();
    if delta > 1e-4 {
        return Err(Error::CrossCheck(format!(
            "max-entropy: fidelity SDP {} vs duality {}",
            direct.value, dual.value
        )));
    }
    direct.cross_check = Some(delta);
    Ok(direct)
}

fn h_max_direct(bp: &Bipartite) -> Result<EntropyResult> {
    let (d_a, d_b) = (bp.d_a, bp.d_b);
    let (v, lam) = support(&bp.rho);
    let r = lam.len();
    let mut b = LmiBuilder::new();
    let s_vars = b.add_vars(d_b * d_b);
    let z_vars = b.add_vars(2 * r * r);

    let mut c1 = CMatrix::zeros(2 * r, 2 * r);
    for (k, &l) in lam.iter().enumerate() {
        c1[(k, k)] = C64::new(l, 0.0);
    }
    let blk = b.add_block(c1);
    for (j, basis) in hermitian_coords(d_b).into_iter().enumerate() {
        let mut e = CMatrix::zeros(d_b, d_b);
        for (rr, cc, val) in basis {
            e[(rr, cc)] += val;
        }
        let full = crate::linalg::kron(&CMatrix::identity(d_a, d_a), &e);
        let proj = v.adjoint() * full * &v;
        b.add_matrix_term(blk, s_vars.start + j, r, &proj);
    }
    for k in 0..r {
        for l in 0..r {
            let idx = z_vars.start + 2 * (k * r + l);
            b.add_sym_term(blk, idx, k, r + l, C64::new(1.0, 0.0));
            b.add_sym_term(blk, idx + 1, k, r + l, C64::new(0.0, 1.0));
        }
        b.add_objective(z_vars.start + 2 * (k * r + k), 1.0);
    }
    let sig_blk = b.add_block(CMatrix::zeros(d_b, d_b));
    for (j, basis) in hermitian_coords(d_b).into_iter().enumerate() {
        for (rr, cc, val) in basis {
            b.add_term(sig_blk, s_vars.start + j, rr, cc, val);
        }
    }
    let tr_blk = b.add_block(CMatrix::identity(1, 1));
    for k in 0..d_b {
        b.add_term(tr_blk, s_vars.start + k, 0, 0, C64::new(-1.0, 0.0));
    }
    let sol = solve_lmi(&b, "max-entropy fidelity SDP")?;
    let sigma = hermitian_from_coords(d_b, &sol.y[s_vars]);
    Ok(EntropyResult {
        value: 2.0 * sol.value.log2(),
        optimizer_sigma: sigma_state(bp, &sigma),
        smoothed_state: None,
        certificate_gap: 2.0 * log_gap(sol.value, sol.primal_value),
        lower_bound: false,
        cross_check: None,
    })
}

/// -H_min(A|C) evaluated on a purification of rho_AB.
pub fn h_max_via_duality(
    state: &StateOperator,
    target: &[&str],
    condition: &[&str],
) -> Result<EntropyResult> {
    let bp = Bipartite::new(state, target, condition)?;
    let op = StateOperator::new_unnormalized(bp.dims.clone(), bp.rho.clone())?;
    let c = fresh_label(&bp.dims, "C");
    let psi = purify_unchecked(&op, &c)?;
    let mut keep: Vec<&str> = target.to_vec();
    keep.push(&c);
    let rho_ac = psi.reduced(&keep)?;
    let inner = h_min(&rho_ac, target, &[c.as_str()])?;
    Ok(EntropyResult {
        value: -inner.value,
        optimizer_sigma: None,
        smoothed_state: None,
        certificate_gap: inner.certificate_gap,
        lower_bound: false,
        cross_check: None,
    })
}
