use super::minmax::{h_max, h_min, sigma_state};
use super::{check_epsilon, clip_psd, fresh_label, log_gap, solve_lmi, Bipartite, EntropyResult};
use crate::linalg::{eigh, kron, purify, CMatrix, StateOperator, C64, PINV_THRESHOLD};
use crate::sdp::{hermitian_coords, hermitian_from_coords, LmiBuilder};
use crate::{Error, Result};

/// Smooth min-entropy over the purified-distance ball of a normalized state.
/// `epsilon = 0` falls back to [`h_min`].
pub fn h_min_smooth(
    state: &StateOperator,
    target: &[&str],
    condition: &[&str],
    epsilon: f64,
) -> Result<EntropyResult> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return h_min(state, target, condition);
    }
    state.require_normalized(1e-9)?;
    let bp = Bipartite::new(state, target, condition)?;
    smooth_min(&bp, epsilon)
}

/// Same as [`h_min_smooth`] for subnormalized inputs; the generalized
/// fidelity term sqrt((1 - tr rho)(1 - tr rho_hat)) is kept in the ball.
pub(crate) fn h_min_smooth_subnormalized(
    state: &StateOperator,
    target: &[&str],
    condition: &[&str],
    epsilon: f64,
) -> Result<EntropyResult> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return h_min(state, target, condition);
    }
    let bp = Bipartite::new(state, target, condition)?;
    smooth_min(&bp, epsilon)
}

/// H_max^eps(A|B) = -H_min^eps(A|C) on a purification.
pub fn h_max_smooth(
    state: &StateOperator,
    target: &[&str],
    condition: &[&str],
    epsilon: f64,
) -> Result<EntropyResult> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return h_max(state, target, condition);
    }
    state.require_normalized(1e-9)?;
    let bp = Bipartite::new(state, target, condition)?;
    let op = StateOperator::new(bp.dims.clone(), bp.rho.clone())?;
    let c = fresh_label(&bp.dims, "C");
    let psi = purify(&op, &c)?;
    let mut keep: Vec<&str> = target.to_vec();
    keep.push(&c);
    let rho_ac = psi.reduced(&keep)?;
    let bp_ac = Bipartite::new(&rho_ac, target, &[c.as_str()])?;
    let inner = smooth_min(&bp_ac, epsilon)?;
    Ok(EntropyResult {
        value: -inner.value,
        optimizer_sigma: None,
        smoothed_state: None,
        certificate_gap: inner.certificate_gap,
        lower_bound: false,
        cross_check: None,
    })
}

fn is_diagonal(m: &CMatrix) -> bool {
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)].norm() > 1e-14 * scale {
                return false;
            }
        }
    }
    true
}

fn smooth_min(bp: &Bipartite, eps: f64) -> Result<EntropyResult> {
    let tr = bp.rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::BadTrace(tr));
    }
    if is_diagonal(&bp.rho) {
        smooth_min_diagonal(bp, eps)
    } else {
        smooth_min_general(bp, eps)
    }
}

/// Trace constraint on the smoothed operator plus the generalized-fidelity
/// slack t <= sqrt((1 - tr rho)(1 - tr rho_hat)) when rho is subnormalized.
/// Returns the slack variable, if any. `diag_vars` are the variables whose
/// sum is tr rho_hat.
fn add_trace_and_slack(b: &mut LmiBuilder, deficit: f64, diag_vars: &[usize]) -> Option<usize> {
    if deficit > 1e-9 {
        let t = b.add_vars(1).start;
        let mut c = CMatrix::zeros(2, 2);
        c[(0, 0)] = C64::new(deficit, 0.0);
        c[(1, 1)] = C64::new(1.0, 0.0);
        let blk = b.add_block(c);
        b.add_sym_term(blk, t, 0, 1, C64::new(1.0, 0.0));
        for &v in diag_vars {
            b.add_term(blk, v, 1, 1, C64::new(-1.0, 0.0));
        }
        Some(t)
    } else {
        let blk = b.add_block(CMatrix::identity(1, 1));
        for &v in diag_vars {
            b.add_term(blk, v, 0, 0, C64::new(-1.0, 0.0));
        }
        None
    }
}

fn finish(
    bp: &Bipartite,
    sol_value: f64,
    primal_value: f64,
    sigma: CMatrix,
    rho_hat: CMatrix,
) -> Result<EntropyResult> {
    let t_dual = -sol_value;
    let mut hat = clip_psd(&rho_hat);
    let th = hat.trace().re;
    if th > 1.0 {
        hat *= C64::new(1.0 / th, 0.0);
    }
    let smoothed = StateOperator::new(bp.dims.clone(), hat)?;
    Ok(EntropyResult {
        value: -t_dual.log2(),
        optimizer_sigma: sigma_state(bp, &sigma),
        smoothed_state: Some(smoothed),
        certificate_gap: log_gap(t_dual, -primal_value),
        lower_bound: false,
        cross_check: None,
    })
}

/// Joint SDP in the eigenbasis of rho (rho = U diag(lam) U^dagger) so that
/// the support block of rho_hat' = U^dagger rho_hat U is its top-left corner:
///
/// maximize -tr s  subject to
///   U^dagger (1 (x) s) U - rho_hat' >= 0,  rho_hat' >= 0,
///   [[diag(lam_r), Z], [Z^dagger, rho_hat'_rr]] >= 0,
///   Re tr Z (+ t) >= sqrt(1 - eps^2),  trace / slack constraint.
fn smooth_min_general(bp: &Bipartite, eps: f64) -> Result<EntropyResult> {
    let (d_a, d_b) = (bp.d_a, bp.d_b);
    let d = d_a * d_b;
    let e = eigh(&bp.rho);
    let order: Vec<usize> = (0..d).rev().collect();
    let lam: Vec<f64> = order.iter().map(|&i| e.values[i]).collect();
    let u = CMatrix::from_columns(
        &order.iter().map(|&i| e.vectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    let cut = PINV_THRESHOLD * lam[0].max(0.0);
    let r = lam.iter().filter(|&&l| l > cut).count();

    let mut b = LmiBuilder::new();
    let s_vars = b.add_vars(d_b * d_b);
    let p_vars = b.add_vars(d * d);
    let z_vars = b.add_vars(2 * r * r);
    for k in 0..d_b {
        b.add_objective(s_vars.start + k, -1.0);
    }

    let herm_b = hermitian_coords(d_b);
    let herm_d = hermitian_coords(d);

    let dom = b.add_block(CMatrix::zeros(d, d));
    for (j, basis) in herm_b.iter().enumerate() {
        let mut m = CMatrix::zeros(d_b, d_b);
        for &(rr, cc, v) in basis {
            m[(rr, cc)] += v;
        }
        let rotated = u.adjoint() * kron(&CMatrix::identity(d_a, d_a), &m) * &u;
        b.add_matrix_term(dom, s_vars.start + j, 0, &rotated);
    }
    for (j, basis) in herm_d.iter().enumerate() {
        for &(rr, cc, v) in basis {
            b.add_term(dom, p_vars.start + j, rr, cc, -v);
        }
    }

    let mut c_fid = CMatrix::zeros(2 * r, 2 * r);
    for k in 0..r {
        c_fid[(k, k)] = C64::new(lam[k], 0.0);
    }
    let fid = b.add_block(c_fid);
    for k in 0..r {
        for l in 0..r {
            let idx = z_vars.start + 2 * (k * r + l);
            b.add_sym_term(fid, idx, k, r + l, C64::new(1.0, 0.0));
            b.add_sym_term(fid, idx + 1, k, r + l, C64::new(0.0, 1.0));
        }
    }
    for (j, basis) in herm_d.iter().enumerate() {
        for &(rr, cc, v) in basis {
            if rr < r && cc < r {
                b.add_term(fid, p_vars.start + j, r + rr, r + cc, v);
            }
        }
    }

    let pos = b.add_block(CMatrix::zeros(d, d));
    for (j, basis) in herm_d.iter().enumerate() {
        for &(rr, cc, v) in basis {
            b.add_term(pos, p_vars.start + j, rr, cc, v);
        }
    }

    let diag_p: Vec<usize> = (0..d).map(|k| p_vars.start + k).collect();
    let slack = add_trace_and_slack(&mut b, 1.0 - bp.rho.trace().re, &diag_p);

    let floor = b.add_block(CMatrix::from_element(1, 1, C64::new(-(1.0 - eps * eps).sqrt(), 0.0)));
    for k in 0..r {
        b.add_term(floor, z_vars.start + 2 * (k * r + k), 0, 0, C64::new(1.0, 0.0));
    }
    if let Some(t) = slack {
        b.add_term(floor, t, 0, 0, C64::new(1.0, 0.0));
    }

    let sol = solve_lmi(&b, "smooth min-entropy SDP")?;
    let sigma = hermitian_from_coords(d_b, &sol.y[s_vars]);
    let rho_hat_rot = hermitian_from_coords(d, &sol.y[p_vars]);
    let rho_hat = &u * rho_hat_rot * u.adjoint();
    finish(bp, sol.value, sol.primal_value, sigma, rho_hat)
}

/// Diagonal input: dephasing in the product basis maps any feasible pair to
/// a diagonal feasible pair with the same objective (it commutes with
/// 1 (x) . and does not decrease fidelity to rho), so the program reduces to
/// scalar constraints plus 2x2 fidelity blocks.
fn smooth_min_diagonal(bp: &Bipartite, eps: f64) -> Result<EntropyResult> {
    let (d_a, d_b) = (bp.d_a, bp.d_b);
    let d = d_a * d_b;
    let p: Vec<f64> = (0..d).map(|i| bp.rho[(i, i)].re.max(0.0)).collect();
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    let supp: Vec<usize> = (0..d).filter(|&i| p[i] > PINV_THRESHOLD * pmax).collect();

    let mut b = LmiBuilder::new();
    let q_vars = b.add_vars(d_b);
    let h_vars = b.add_vars(d);
    let z_vars = b.add_vars(supp.len());
    for k in 0..d_b {
        b.add_objective(q_vars.start + k, -1.0);
    }
    for i in 0..d {
        let blk = b.add_block(CMatrix::zeros(1, 1));
        b.add_term(blk, q_vars.start + i % d_b, 0, 0, C64::new(1.0, 0.0));
        b.add_term(blk, h_vars.start + i, 0, 0, C64::new(-1.0, 0.0));
        let nonneg = b.add_block(CMatrix::zeros(1, 1));
        b.add_term(nonneg, h_vars.start + i, 0, 0, C64::new(1.0, 0.0));
    }
    for (k, &i) in supp.iter().enumerate() {
        let mut c = CMatrix::zeros(2, 2);
        c[(0, 0)] = C64::new(p[i], 0.0);
        let blk = b.add_block(c);
        b.add_sym_term(blk, z_vars.start + k, 0, 1, C64::new(1.0, 0.0));
        b.add_term(blk, h_vars.start + i, 1, 1, C64::new(1.0, 0.0));
    }
    let diag_h: Vec<usize> = h_vars.clone().collect();
    let slack = add_trace_and_slack(&mut b, 1.0 - p.iter().sum::<f64>(), &diag_h);
    let floor = b.add_block(CMatrix::from_element(1, 1, C64::new(-(1.0 - eps * eps).sqrt(), 0.0)));
    for k in 0..supp.len() {
        b.add_term(floor, z_vars.start + k, 0, 0, C64::new(1.0, 0.0));
    }
    if let Some(t) = slack {
        b.add_term(floor, t, 0, 0, C64::new(1.0, 0.0));
    }

    let sol = solve_lmi(&b, "smooth min-entropy SDP (diagonal)")?;
    let sigma = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d_b,
        sol.y[q_vars].iter().map(|&v| C64::new(v, 0.0)),
    ));
    let rho_hat = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        sol.y[h_vars].iter().map(|&v| C64::new(v, 0.0)),
    ));
    finish(bp, sol.value, sol.primal_value, sigma, rho_hat)
}
