use super::{Bipartite, EntropyResult};
use crate::linalg::{eigh, kron, psd_power, CMatrix, StateOperator, C64, PINV_THRESHOLD};
use crate::{Error, Result};

/// -log tr[((1 (x) s^-1/4) rho (1 (x) s^-1/4))^2] for a fixed normalized
/// conditioning operator `sigma` (generalized inverse on its support).
pub fn h2_at(
    state: &StateOperator,
    target: &[&str],
    condition: &[&str],
    sigma: &CMatrix,
) -> Result<f64> {
    let bp = Bipartite::new(state, target, condition)?;
    if sigma.shape() != (bp.d_b, bp.d_b) {
        return Err(Error::DimensionMismatch("conditioning operator".into()));
    }
    objective(&bp, sigma).map(|v| -v.log2())
}

/// Requires supp(rho_B) inside supp(sigma).
fn objective(bp: &Bipartite, sigma: &CMatrix) -> Result<f64> {
    let e = eigh(sigma);
    let cut = PINV_THRESHOLD * e.max().max(0.0);
    let kernel = e.map(|l| if l > cut { 0.0 } else { 1.0 });
    let rb = bp.rho_b();
    let outside = (&kernel * &rb * &kernel).trace().re;
    if outside > 1e-9 * rb.trace().re.max(1e-300) {
        return Err(Error::Precondition(
            "rho_B has weight outside the support of sigma_B".into(),
        ));
    }
    let g = kron(&CMatrix::identity(bp.d_a, bp.d_a), &psd_power(sigma, -0.25));
    let x = &g * &bp.rho * &g;
    Ok((&x * &x).trace().re)
}

/// Collision entropy. The value at sigma_B = rho_B / tr rho_B is always
/// computed; with `optimize_sigma` a projected ascent over normalized sigma
/// (parameterized as exp(H) / tr exp(H)) starts from there and only accepts
/// improvements. The result is flagged as a lower bound of the supremum.
pub fn h2(
    state: &StateOperator,
    target: &[&str],
    condition: &[&str],
    optimize_sigma: bool,
) -> Result<EntropyResult> {
    let bp = Bipartite::new(state, target, condition)?;
    let tr = bp.rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::BadTrace(tr));
    }
    let rb = bp.rho_b();
    let sigma0 = &rb * C64::new(1.0 / rb.trace().re, 0.0);
    let mut best_sigma = sigma0.clone();
    let mut best = objective(&bp, &sigma0)?;
    let exact = bp.d_b == 1;
    if optimize_sigma && !exact {
        let (s, v) = ascend(&bp, &sigma0, best);
        best_sigma = s;
        best = v;
    }
    let cond = StateOperator::new(bp.cond_dims.clone(), best_sigma).ok();
    Ok(EntropyResult {
        value: -best.log2(),
        optimizer_sigma: cond,
        smoothed_state: None,
        certificate_gap: 0.0,
        lower_bound: !exact,
        cross_check: None,
    })
}

fn sigma_of(h: &CMatrix) -> CMatrix {
    let e = eigh(h);
    let m = e.max();
    let s = e.map(|l| (l - m).exp());
    let t = s.trace().re;
    s * C64::new(1.0 / t, 0.0)
}

/// Finite-difference gradient descent on f(H) = tr[...]^2 over Hermitian H,
/// with backtracking. Returns the best (sigma, f) seen.
fn ascend(bp: &Bipartite, sigma0: &CMatrix, f0: f64) -> (CMatrix, f64) {
    let d = bp.d_b;
    // log of the start point, floored so that the parameterization is finite
    let e = eigh(sigma0);
    let floor = 1e-9 * e.max();
    let mut h = e.map(|l| l.max(floor).ln());
    let basis = crate::sdp::hermitian_coords(d);
    let eval = |h: &CMatrix| -> f64 {
        objective(bp, &sigma_of(h)).unwrap_or(f64::INFINITY)
    };
    let mut fh = eval(&h);
    let (mut best_s, mut best_f) = (sigma0.clone(), f0);
    if fh < best_f {
        best_s = sigma_of(&h);
        best_f = fh;
    }
    let mut step = 1.0;
    for _ in 0..200 {
        let fd = 1e-6;
        let mut grad = vec![0.0; basis.len()];
        for (j, b) in basis.iter().enumerate() {
            let mut hp = h.clone();
            let mut hm = h.clone();
            for &(r, c, v) in b {
                hp[(r, c)] += v * fd;
                hm[(r, c)] -= v * fd;
            }
            grad[j] = (eval(&hp) - eval(&hm)) / (2.0 * fd);
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !gnorm.is_finite() || gnorm < 1e-12 * fh.abs().max(1e-300) {
            break;
        }
        let mut improved = false;
        while step > 1e-10 {
            let mut cand = h.clone();
            for (j, b) in basis.iter().enumerate() {
                for &(r, c, v) in b {
                    cand[(r, c)] -= v * (step * grad[j] / gnorm);
                }
            }
            let fc = eval(&cand);
            if fc < fh {
                h = cand;
                fh = fc;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        if fh < best_f {
            best_f = fh;
            best_s = sigma_of(&h);
        }
    }
    (best_s, best_f)
}
