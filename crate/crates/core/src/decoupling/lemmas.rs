//! Randomized checks of the inequalities the decoupling proofs rest on.
//!
//! Every trial returns a slack that is non-negative when the statement holds
//! within its tolerance; the tolerance is already folded in. SDP-based
//! suites run at most [`SDP_TRIALS_MAX`] trials.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{h2, h2_at, h_min, h_min_smooth};
use crate::haar::{haar_unitary, twirl_exact, RngSeed};
use crate::linalg::{
    cr, extension_map, fidelity, ginibre, hermitian_part, kron, max_abs_diff, psd_power,
    purified_distance, random_density_matrix, random_pure_vector, swap_operator_unchecked,
    trace_distance, trace_norm, CMatrix, DimsLabel, PureState, StateOperator, C64,
};
use crate::stats::par_indexed;
use crate::Result;

pub const SDP_TRIALS_MAX: usize = 30;
const MAX_ERROR_NOTES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Smallest slack seen (negative means violated).
    pub worst_slack: f64,
    /// Messages of trials that failed to evaluate; they count as violations.
    pub errors: Vec<String>,
}

impl LemmaCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<LemmaCheck>,
    pub all_passed: bool,
}

type Trial = fn(&mut ChaCha8Rng, usize) -> Result<f64>;

/// Runs every suite with `trials` randomized instances (SDP-heavy suites
/// capped at [`SDP_TRIALS_MAX`]). `trials = 0` gives an empty report.
pub fn verify_proof_lemmas(seed: u64, trials: usize) -> LemmaReport {
    let suites: [(&str, Trial, bool); 12] = [
        ("swap_trick", swap_trick, false),
        ("haar_twirl", haar_twirl, false),
        ("purity_ratio", purity_ratio, false),
        ("trace_norm_bound", trace_norm_bound, false),
        ("collision_dominates_min", collision_dominates_min, true),
        ("min_entropy_superadditivity", superadditivity, true),
        ("min_entropy_dimension_bound", dimension_bound, true),
        ("min_entropy_extra_target", extra_target, true),
        ("classical_conditioning", classical_conditioning, true),
        ("min_entropy_chain_rule", chain_rule, true),
        ("fuchs_van_de_graaf", fuchs_van_de_graaf, false),
        ("extension_same_distance", extension, false),
    ];
    let root = RngSeed::new(seed, "lemmas");
    let checks: Vec<LemmaCheck> = if trials == 0 {
        Vec::new()
    } else {
        suites
            .iter()
            .map(|&(name, f, heavy)| {
                let n = if heavy { trials.min(SDP_TRIALS_MAX) } else { trials };
                run_suite(&root.substream(name), name, n, f)
            })
            .collect()
    };
    let all_passed = checks.iter().all(LemmaCheck::passed);
    LemmaReport { seed, trials, checks, all_passed }
}

fn run_suite(seed: &RngSeed, name: &str, n: usize, f: Trial) -> LemmaCheck {
    let results = par_indexed(0, n, |i| f(&mut seed.rng(i as u64), i)).unwrap_or_else(|e| {
        (0..n).map(|_| Err(crate::Error::InvalidParameter(e.to_string()))).collect()
    });
    let mut check = LemmaCheck {
        name: name.to_string(),
        trials: n,
        violations: 0,
        worst_slack: f64::INFINITY,
        errors: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) if s.is_finite() || s == f64::INFINITY => {
                check.worst_slack = check.worst_slack.min(s);
                if s < 0.0 {
                    check.violations += 1;
                }
            }
            Ok(s) => {
                check.violations += 1;
                if check.errors.len() < MAX_ERROR_NOTES {
                    check.errors.push(format!("trial {i}: slack {s}"));
                }
            }
            Err(e) => {
                check.violations += 1;
                if check.errors.len() < MAX_ERROR_NOTES {
                    check.errors.push(format!("trial {i}: {e}"));
                }
            }
        }
    }
    check
}

fn pick(rng: &mut ChaCha8Rng, choices: &[usize]) -> usize {
    choices[rng.random_range(0..choices.len())]
}

fn labeled(parts: &[(&str, usize)]) -> Result<DimsLabel> {
    DimsLabel::new(parts.iter().copied().filter(|&(_, d)| d > 1))
}

fn random_state(parts: &[(&str, usize)], rng: &mut ChaCha8Rng) -> Result<StateOperator> {
    let dims = labeled(parts)?;
    let n = dims.total();
    let rank = rng.random_range(1..=n);
    StateOperator::new(dims, random_density_matrix(n, rank, rng))
}

fn present<'a>(state: &StateOperator, labels: &[&'a str]) -> Vec<&'a str> {
    labels.iter().copied().filter(|l| state.dims().contains(l)).collect()
}

fn smooth(state: &StateOperator, target: &[&str], cond: &[&str], eps: f64) -> Result<f64> {
    let c = present(state, cond);
    Ok(h_min_smooth(state, target, &c, eps)?.value)
}

fn small_eps(rng: &mut ChaCha8Rng, i: usize) -> f64 {
    if i % 3 == 0 {
        0.0
    } else {
        rng.random_range(0.0..0.1)
    }
}

// tr[(M (x) N) F] = tr[MN]
fn swap_trick(rng: &mut ChaCha8Rng, _: usize) -> Result<f64> {
    let d = pick(rng, &[2, 3, 4]);
    let m = ginibre(d, d, rng);
    let n = ginibre(d, d, rng);
    let lhs = (kron(&m, &n) * swap_operator_unchecked(d)).trace();
    let rhs = (&m * &n).trace();
    let tol = 1e-12 * (1.0 + m.norm() * n.norm());
    Ok(tol - (lhs - rhs).norm())
}

// The twirl is alpha I + beta F with the trace conditions, and is invariant
// under pre-rotating M by V (x) V.
fn haar_twirl(rng: &mut ChaCha8Rng, _: usize) -> Result<f64> {
    let d = pick(rng, &[2, 3, 4]);
    let m = ginibre(d * d, d * d, rng);
    let (coeffs, avg) = twirl_exact(&m)?;
    let v = haar_unitary(d, rng);
    let vv = kron(&v, &v);
    let rotated = &vv * &m * vv.adjoint();
    let (_, avg2) = twirl_exact(&rotated)?;
    let commutes = max_abs_diff(&(&vv * &avg), &(&avg * &vv));
    let err = coeffs.residual(&m)?.max(max_abs_diff(&avg, &avg2)).max(commutes);
    Ok(1e-10 * (1.0 + m.norm()) - err)
}

// 1/|A| <= tr xi_AB^2 / tr xi_B^2 <= |A|, with the two extremal families
// mixed in.
fn purity_ratio(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    let d_a = pick(rng, &[2, 3, 4]);
    let d_b = pick(rng, &[2, 3, 4]);
    let n = d_a * d_b;
    let scale = rng.random_range(0.1..3.0);
    let xi = match i % 10 {
        0 => {
            let psi = random_pure_vector(d_b, rng);
            kron(&CMatrix::identity(d_a, d_a), &(&psi * psi.adjoint()))
        }
        1 if d_b >= d_a => {
            let mut v = crate::linalg::CVector::zeros(n);
            for k in 0..d_a {
                v[k * d_b + k] = cr(1.0);
            }
            &v * v.adjoint()
        }
        _ => random_density_matrix(n, rng.random_range(1..=n), rng),
    } * cr(scale);
    let xi_b = crate::linalg::partial_trace_matrix(&xi, &[d_a, d_b], &[1]);
    let ratio = (&xi * &xi).trace().re / (&xi_b * &xi_b).trace().re;
    let a = d_a as f64;
    Ok((ratio - 1.0 / a).min(a - ratio) + 1e-12 * a)
}

// ||M||_1 <= sqrt(tr sigma tr[s^{-1/4} M s^{-1/2} M^dag s^{-1/4}]); sigma is
// taken near-singular or exactly singular (M restricted to its support) in
// two thirds of the trials.
fn trace_norm_bound(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    let d = pick(rng, &[2, 3, 4]);
    let u = haar_unitary(d, rng);
    let spectrum: Vec<f64> = match i % 3 {
        0 => (0..d).map(|_| rng.random_range(0.05..1.0)).collect(),
        1 => (0..d).map(|k| 10f64.powf(-8.0 * k as f64 / (d - 1) as f64)).collect(),
        _ => (0..d).map(|k| if k + 1 == d { 0.0 } else { rng.random_range(0.05..1.0) }).collect(),
    };
    let diag = CMatrix::from_fn(d, d, |r, c| if r == c { cr(spectrum[r]) } else { cr(0.0) });
    let sigma = &u * diag * u.adjoint();
    let mut m = ginibre(d, d, rng);
    if i % 2 == 0 {
        m = hermitian_part(&m);
    }
    if i % 3 == 2 {
        let proj = psd_power(&sigma, 0.0);
        m = &proj * m * &proj;
    }
    let q = psd_power(&sigma, -0.25);
    let h = psd_power(&sigma, -0.5);
    let inner = (&q * &m * &h * m.adjoint() * &q).trace().re;
    let rhs = (sigma.trace().re * inner).sqrt();
    let lhs = trace_norm(&m)?;
    Ok(rhs - lhs + 1e-9 * lhs.max(1.0))
}

// H_2(A|B) >= H_min(A|B) on subnormalized states. H_2 is estimated from
// below by its value at the normalized marginal and at the min-entropy
// optimizer, so the check is one-sided in the safe direction.
fn collision_dominates_min(rng: &mut ChaCha8Rng, _: usize) -> Result<f64> {
    let d_a = pick(rng, &[2, 3]);
    let d_b = pick(rng, &[2, 3, 4]);
    let scale = rng.random_range(0.2..1.0);
    let rho = random_state(&[("A", d_a), ("B", d_b)], rng)?.scaled(scale);
    let hmin = h_min(&rho, &["A"], &["B"])?;
    let mut best = h2(&rho, &["A"], &["B"], false)?.value;
    if let Some(sig) = hmin.optimizer_sigma {
        if let Ok(v) = h2_at(&rho, &["A"], &["B"], sig.matrix()) {
            best = best.max(v);
        }
    }
    Ok(best - hmin.value + 1e-6)
}

// H^{e+e'}(AA'|BB')_{rho x rho'} >= H^e(A|B)_rho + H^e'(A'|B')_rho'
fn superadditivity(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    // total dimension of the product kept at 8 or less
    let shapes = [(2, 1), (2, 2)];
    let (a1, b1) = shapes[rng.random_range(0..2)];
    let (a2, b2) = if b1 == 2 { shapes[0] } else { shapes[rng.random_range(0..2)] };
    let r1 = random_state(&[("A", a1), ("B", b1)], rng)?;
    let r2 = random_state(&[("A2", a2), ("B2", b2)], rng)?;
    let e1 = small_eps(rng, i);
    let e2 = small_eps(rng, i + 1);
    let joint = r1.tensor(&r2)?;
    let lhs = smooth(&joint, &["A", "A2"], &["B", "B2"], e1 + e2)?;
    let h1 = smooth(&r1, &["A"], &["B"], e1)?;
    let h2v = smooth(&r2, &["A2"], &["B2"], e2)?;
    Ok(lhs - h1 - h2v + 1e-5)
}

// H_min(A|B) >= -log|B|, including maximally entangled inputs
fn dimension_bound(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    let d_a = pick(rng, &[2, 3, 4]);
    let d_b = pick(rng, &[2, 3, 4]);
    let dims = DimsLabel::new([("A", d_a), ("B", d_b)])?;
    let rho = if i % 5 == 0 {
        let k = d_a.min(d_b);
        let mut v = crate::linalg::CVector::zeros(d_a * d_b);
        for j in 0..k {
            v[j * d_b + j] = cr(1.0 / (k as f64).sqrt());
        }
        PureState::new(dims, v)?.to_operator()?
    } else {
        let n = d_a * d_b;
        StateOperator::new(dims, random_density_matrix(n, rng.random_range(1..=n), rng))?
    };
    let h = h_min(&rho, &["A"], &["B"])?.value;
    Ok(h + (d_b as f64).log2() + 1e-6)
}

// H^e(AB|C) <= H^e(A|C) + log|B|
fn extra_target(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    let d_c = pick(rng, &[1, 2]);
    let rho = random_state(&[("A", 2), ("B", 2), ("C", d_c)], rng)?;
    let eps = small_eps(rng, i);
    let big = smooth(&rho, &["A", "B"], &["C"], eps)?;
    let rho_ac = rho.trace_out(&["B"])?;
    let small = smooth(&rho_ac, &["A"], &["C"], eps)?;
    Ok(small + 1.0 - big + 1e-5)
}

// H_min(A|BX) = -log sum_x p_x 2^{-H_min(A|B)_x} for X classical
fn classical_conditioning(rng: &mut ChaCha8Rng, _: usize) -> Result<f64> {
    let d_x = pick(rng, &[2, 3]);
    let weights: Vec<f64> = (0..d_x).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut joint = CMatrix::zeros(4 * d_x, 4 * d_x);
    let mut rhs = 0.0;
    for (x, w) in weights.iter().enumerate() {
        let p = w / total;
        let part = random_state(&[("A", 2), ("B", 2)], rng)?;
        rhs += p * (-h_min(&part, &["A"], &["B"])?.value).exp2();
        let mut proj = CMatrix::zeros(d_x, d_x);
        proj[(x, x)] = C64::new(1.0, 0.0);
        joint += kron(part.matrix(), &proj) * cr(p);
    }
    let state = StateOperator::new(DimsLabel::new([("A", 2), ("B", 2), ("X", d_x)])?, joint)?;
    let lhs = h_min(&state, &["A"], &["B", "X"])?.value;
    Ok(1e-6 - (lhs + rhs.log2()).abs())
}

// H^{e+2e'+e''}(AB|C) >= H^{e'}(A|BC) + H^{e''}(B|C) - log(2/e^2)
fn chain_rule(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    let d_c = pick(rng, &[1, 2]);
    let rho = random_state(&[("A", 2), ("B", 2), ("C", d_c)], rng)?;
    let e = rng.random_range(0.05..0.5);
    let e1 = small_eps(rng, i);
    let e2 = small_eps(rng, i + 2);
    let lhs = smooth(&rho, &["A", "B"], &["C"], e + 2.0 * e1 + e2)?;
    let h_a = smooth(&rho, &["A"], &["B", "C"], e1)?;
    let rho_bc = rho.trace_out(&["A"])?;
    let h_b = smooth(&rho_bc, &["B"], &["C"], e2)?;
    Ok(lhs - h_a - h_b + (2.0 / (e * e)).log2() + 1e-5)
}

// 1 - F <= ||rho - sigma||_1 / 2 <= sqrt(1 - F^2); pure pairs make the
// upper bound tight.
fn fuchs_van_de_graaf(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    let d = pick(rng, &[2, 3, 4]);
    let dims = DimsLabel::single("A", d)?;
    let (rho, sigma) = if i % 4 == 0 {
        let a = PureState::new(dims.clone(), random_pure_vector(d, rng))?.to_operator()?;
        let b = PureState::new(dims, random_pure_vector(d, rng))?.to_operator()?;
        (a, b)
    } else {
        let a = random_state(&[("A", d)], rng)?;
        let b = random_state(&[("A", d)], rng)?;
        (a, b)
    };
    let f = fidelity(&rho, &sigma)?;
    let half = 0.5 * trace_distance(&rho, &sigma)?;
    let upper = (1.0 - f * f).max(0.0).sqrt();
    Ok((half - (1.0 - f)).min(upper - half) + 1e-9)
}

// sigma_AB = (T (x) 1) rho_AB (T (x) 1)^dag extends sigma_A and keeps
// P(rho_AB, sigma_AB) = P(rho_A, sigma_A). Needs rank sigma_A <= rank rho_A.
fn extension(rng: &mut ChaCha8Rng, i: usize) -> Result<f64> {
    let d_a = pick(rng, &[2, 3, 4]);
    let d_b = pick(rng, &[2, 3, 4]);
    let dims = DimsLabel::new([("A", d_a), ("B", d_b)])?;
    let n = d_a * d_b;
    let mut rho = random_density_matrix(n, rng.random_range(1..=n), rng) * cr(rng.random_range(0.3..1.0));
    if i % 4 == 0 {
        // rank-deficient marginal on A
        let v = haar_unitary(d_a, rng);
        let mut p = CMatrix::zeros(d_a, d_a);
        for k in 0..d_a - 1 {
            p[(k, k)] = cr(1.0);
        }
        let proj = kron(&(&v * p * v.adjoint()), &CMatrix::identity(d_b, d_b));
        rho = hermitian_part(&(&proj * rho * &proj));
    }
    let rho_ab = StateOperator::new_unnormalized(dims, rho)?;
    let rho_a = rho_ab.partial_trace(&["A"])?;
    let rank_a = crate::linalg::eigh(rho_a.matrix())
        .values
        .iter()
        .filter(|&&l| l > 1e-10 * rho_a.trace())
        .count();
    // sigma_A supported inside supp(rho_A) up to a random rotation there
    let g = ginibre(d_a, rng.random_range(1..=rank_a), rng);
    let supp = psd_power(rho_a.matrix(), 0.0);
    let s = &supp * &g;
    let mut sig = &s * s.adjoint();
    let t = sig.trace().re;
    sig *= cr(rng.random_range(0.3..1.0) / t);
    let sigma_a = StateOperator::new_unnormalized(rho_a.dims().clone(), hermitian_part(&sig))?;
    let ext = extension_map(&rho_ab, &sigma_a)?;
    let marg = ext.sigma_ab.partial_trace(&["A"])?;
    let err_marg = max_abs_diff(marg.matrix(), sigma_a.matrix());
    let p_big = purified_distance(&rho_ab, &ext.sigma_ab)?;
    let p_small = purified_distance(&rho_a, &sigma_a)?;
    Ok(1e-7 - err_marg.max((p_big - p_small).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_is_empty() {
        let r = verify_proof_lemmas(1, 0);
        assert!(r.checks.is_empty());
        assert!(r.all_passed);
    }

    #[test]
    fn cheap_suites_pass() {
        let root = RngSeed::new(3, "t");
        for (name, f) in [
            ("swap", swap_trick as Trial),
            ("twirl", haar_twirl),
            ("purity", purity_ratio),
            ("tn", trace_norm_bound),
            ("fvdg", fuchs_van_de_graaf),
            ("ext", extension),
        ] {
            let c = run_suite(&root.substream(name), name, 40, f);
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn sdp_suites_pass_small() {
        let root = RngSeed::new(4, "t");
        for (name, f) in [
            ("h2", collision_dominates_min as Trial),
            ("dim", dimension_bound),
            ("cq", classical_conditioning),
            ("super", superadditivity),
            ("extra", extra_target),
            ("chain", chain_rule),
        ] {
            let c = run_suite(&root.substream(name), name, 4, f);
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn violations_are_counted() {
        fn bad(_: &mut ChaCha8Rng, i: usize) -> Result<f64> {
            Ok(if i == 2 { -1.0 } else { 1.0 })
        }
        let c = run_suite(&RngSeed::new(0, "x"), "bad", 5, bad);
        assert_eq!(c.violations, 1);
        assert_eq!(c.worst_slack, -1.0);
    }
}
