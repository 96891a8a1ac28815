//! Decoupling: Monte Carlo estimate of the Haar-averaged distance
//! `E_U ||T(U rho_AE U^dagger) - tau_B (x) rho_E||_1`, the entropic upper
//! bounds it must respect, and the converse inequality.
//!
//! The state is split into a system part A (the labels the unitary and the
//! channel act on) and an environment E (everything else).

mod lemmas;

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, TraceClass, CHOI_IN, CHOI_OUT};
use crate::entropy::{h2, h_max, h_max_smooth, h_min, h_min_smooth, h_min_smooth_subnormalized};
use crate::haar::{haar_unitary, RngSeed};
use crate::linalg::{
    cr, eigh, kron, max_abs_diff, psd_sqrt, trace_norm, CMatrix, StateOperator,
    TOL_TRACE,
};
use crate::stats::{par_indexed, Summary};
use crate::{Error, Result};

pub use lemmas::{verify_proof_lemmas, LemmaCheck, LemmaReport};

/// Per-sample distances are kept in reports up to this many samples.
pub const KEEP_SAMPLES_MAX: usize = 10_000;
/// Reports accept a Monte Carlo mean up to this many standard errors above
/// a bound.
pub const SIGMA_MARGIN: f64 = 3.0;

/// One decoupling experiment.
#[derive(Debug, Clone)]
pub struct DecouplingExperiment {
    pub state: StateOperator,
    /// Labels of the system A the channel acts on; the rest is E.
    pub system: Vec<String>,
    pub channel: Channel,
    pub num_samples: usize,
    /// Smoothing parameter of the smooth bound.
    pub epsilon: f64,
    /// Whether to evaluate the smooth bound (skipped automatically when
    /// tr J(T) > 1).
    pub smooth_bound: bool,
    /// Run the ascent over the conditioning operator of H_2.
    pub optimize_h2: bool,
    pub seed: RngSeed,
}

impl DecouplingExperiment {
    pub fn new(state: StateOperator, system: &[&str], channel: Channel, num_samples: usize, seed: RngSeed) -> Self {
        Self {
            state,
            system: system.iter().map(|s| s.to_string()).collect(),
            channel,
            num_samples,
            epsilon: 0.0,
            smooth_bound: false,
            optimize_h2: false,
            seed,
        }
    }

    fn system_refs(&self) -> Vec<&str> {
        self.system.iter().map(String::as_str).collect()
    }
}

/// Sample statistics, kept on their own when a later stage fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub summary: Summary,
    pub per_sample_distances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentDims {
    pub a: usize,
    pub e: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub empirical_mean: f64,
    pub std_error: f64,
    /// `SIGMA_MARGIN * std_error`
    pub margin: f64,
    pub num_samples: usize,
    pub bound_nonsmooth: f64,
    pub h2_a_e: f64,
    pub h2_a_b_tau: f64,
    pub nonsmooth_holds: bool,
    pub epsilon: f64,
    pub bound_smooth: Option<f64>,
    pub hmin_smooth_a_e: Option<f64>,
    pub hmin_smooth_a_b_tau: Option<f64>,
    pub smooth_holds: Option<bool>,
    pub dims: ExperimentDims,
    pub per_sample_distances: Option<Vec<f64>>,
    pub seed: RngSeed,
}

impl DecouplingReport {
    /// `index,distance` rows; empty body when distances were not kept.
    pub fn per_sample_csv(&self) -> String {
        let mut s = String::from("index,distance\n");
        for (i, d) in self.per_sample_distances.iter().flatten().enumerate() {
            s.push_str(&format!("{i},{d}\n"));
        }
        s
    }
}

/// Precomputed pieces of the sampled distance: rho_AE = W W^dagger with W
/// reshaped to `d_a x (d_e r)`, the Kraus operators and tau_B (x) rho_E.
pub(crate) struct Sampler {
    d_a: usize,
    d_e: usize,
    d_b: usize,
    rank: usize,
    w: CMatrix,
    kraus: Vec<CMatrix>,
    reference: CMatrix,
}

impl Sampler {
    pub(crate) fn new(state: &StateOperator, system: &[&str], channel: &Channel) -> Result<Self> {
        if system.is_empty() {
            return Err(Error::InvalidParameter("system A needs at least one label".into()));
        }
        let front = state.bring_to_front(system)?;
        let d_a = front.dims().dim_of_set(system)?;
        if d_a != channel.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} but system dim {d_a}",
                channel.dim_in()
            )));
        }
        let d_e = front.dims().total() / d_a;
        let d_b = channel.dim_out();
        let rho = front.matrix();

        let e = eigh(rho);
        let cut = 1e-15 * e.max().max(0.0);
        let cols: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > cut).collect();
        let rank = cols.len().max(1);
        let mut w = CMatrix::zeros(d_a, d_e * rank);
        for (k, &i) in cols.iter().enumerate() {
            let s = e.values[i].sqrt();
            for a in 0..d_a {
                for x in 0..d_e {
                    w[(a, x * rank + k)] = e.vectors[(a * d_e + x, i)] * s;
                }
            }
        }

        let rho_e = crate::linalg::partial_trace_matrix(rho, &[d_a, d_e], &[1]);
        let reference = kron(&channel.tau_b(), &rho_e);
        Ok(Self { d_a, d_e, d_b, rank, w, kraus: channel.kraus().operators, reference })
    }

    /// T(U rho_AE U^dagger) on (B, E).
    pub(crate) fn output(&self, u: &CMatrix) -> CMatrix {
        let (d_e, d_b, r) = (self.d_e, self.d_b, self.rank);
        let nk = self.kraus.len();
        let mut g = CMatrix::zeros(d_b * d_e, r * nk);
        for (j, k) in self.kraus.iter().enumerate() {
            let gj = (k * u) * &self.w;
            for b in 0..d_b {
                for x in 0..d_e {
                    for c in 0..r {
                        g[(b * d_e + x, j * r + c)] = gj[(b, x * r + c)];
                    }
                }
            }
        }
        &g * g.adjoint()
    }

    pub(crate) fn distance(&self, u: &CMatrix) -> Result<f64> {
        let diff = self.output(u) - &self.reference;
        trace_norm(&crate::linalg::hermitian_part(&diff))
    }
}

fn check_unitary(u: &CMatrix, d: usize) -> Result<()> {
    if u.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!("unitary {:?} on system of dim {d}", u.shape())));
    }
    let dev = max_abs_diff(&u.ad_mul(u), &CMatrix::identity(d, d));
    if dev > 1e-10 {
        return Err(Error::InvalidParameter(format!("U is not unitary (deviation {dev:.2e})")));
    }
    Ok(())
}

/// ||T(U rho_AE U^dagger) - tau_B (x) rho_E||_1 with tau_B = tr_A J(T).
pub fn sample_distance(state: &StateOperator, system: &[&str], channel: &Channel, u: &CMatrix) -> Result<f64> {
    let s = Sampler::new(state, system, channel)?;
    check_unitary(u, s.d_a)?;
    s.distance(u)
}

fn environment<'a>(state: &'a StateOperator, system: &[&str]) -> Result<Vec<&'a str>> {
    for l in system {
        state.dims().index_of(l)?;
    }
    Ok(state.dims().labels().into_iter().filter(|l| !system.contains(l)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonsmoothBound {
    pub value: f64,
    pub h2_a_e: f64,
    pub h2_a_b_tau: f64,
}

/// 2^{-H_2(A|E)_rho / 2 - H_2(A|B)_tau / 2} with tau = J(T). Valid for any
/// CPM and subnormalized states.
pub fn bound_nonsmooth(
    state: &StateOperator,
    system: &[&str],
    channel: &Channel,
    optimize_sigma: bool,
) -> Result<NonsmoothBound> {
    let env = environment(state, system)?;
    let h_ae = h2(state, system, &env, optimize_sigma)?.value;
    let h_ab = h2(channel.choi(), &[CHOI_IN], &[CHOI_OUT], optimize_sigma)?.value;
    Ok(NonsmoothBound { value: (-0.5 * h_ae - 0.5 * h_ab).exp2(), h2_a_e: h_ae, h2_a_b_tau: h_ab })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothBound {
    pub value: f64,
    pub hmin_a_e: f64,
    pub hmin_a_b_tau: f64,
}

/// 2^{-H_min^eps(A|E)_rho / 2 - H_min^eps(A|B)_tau / 2} + 12 eps for a
/// normalized state and tr J(T) <= 1.
pub fn bound_smooth(
    state: &StateOperator,
    system: &[&str],
    channel: &Channel,
    epsilon: f64,
) -> Result<SmoothBound> {
    let tr = channel.choi().trace();
    if tr > 1.0 + TOL_TRACE {
        return Err(Error::BadTrace(tr));
    }
    state.require_normalized(1e-9)?;
    let env = environment(state, system)?;
    let h_ae = h_min_smooth(state, system, &env, epsilon)?.value;
    let h_ab = h_min_smooth_subnormalized(channel.choi(), &[CHOI_IN], &[CHOI_OUT], epsilon)?.value;
    Ok(SmoothBound {
        value: (-0.5 * h_ae - 0.5 * h_ab).exp2() + 12.0 * epsilon,
        hmin_a_e: h_ae,
        hmin_a_b_tau: h_ab,
    })
}

/// Draws the samples of `exp` on `workers` threads. Sample `i` uses the
/// unitary drawn from `exp.seed.rng(i)`.
pub fn sample_distances(exp: &DecouplingExperiment, workers: usize) -> Result<Vec<f64>> {
    if exp.num_samples == 0 {
        return Err(Error::InvalidParameter("num_samples must be positive".into()));
    }
    let sampler = Sampler::new(&exp.state, &exp.system_refs(), &exp.channel)?;
    let d_a = sampler.d_a;
    let out = par_indexed(workers, exp.num_samples, |i| {
        let u = haar_unitary(d_a, &mut exp.seed.rng(i as u64));
        sampler.distance(&u)
    })?;
    out.into_iter().collect()
}

/// Runs the Monte Carlo stage and evaluates the bounds.
pub fn run(exp: &DecouplingExperiment, workers: usize) -> Result<DecouplingReport> {
    let distances = sample_distances(exp, workers)?;
    let summary = Summary::of(&distances);
    let kept = (distances.len() <= KEEP_SAMPLES_MAX).then_some(distances);
    let system = exp.system_refs();
    let with_partial = |e: Error| Error::Experiment {
        source: Box::new(e),
        partial: Box::new(SampleStats { summary, per_sample_distances: kept.clone() }),
    };

    let ns = bound_nonsmooth(&exp.state, &system, &exp.channel, exp.optimize_h2).map_err(with_partial)?;
    let margin = SIGMA_MARGIN * summary.std_error;
    let smooth = if exp.smooth_bound && exp.channel.trace_class() != TraceClass::General {
        Some(bound_smooth(&exp.state, &system, &exp.channel, exp.epsilon).map_err(with_partial)?)
    } else {
        None
    };
    let d_a = exp.channel.dim_in();
    Ok(DecouplingReport {
        empirical_mean: summary.mean,
        std_error: summary.std_error,
        margin,
        num_samples: exp.num_samples,
        bound_nonsmooth: ns.value,
        h2_a_e: ns.h2_a_e,
        h2_a_b_tau: ns.h2_a_b_tau,
        nonsmooth_holds: summary.mean <= ns.value + margin,
        epsilon: exp.epsilon,
        bound_smooth: smooth.map(|s| s.value),
        hmin_smooth_a_e: smooth.map(|s| s.hmin_a_e),
        hmin_smooth_a_b_tau: smooth.map(|s| s.hmin_a_b_tau),
        smooth_holds: smooth.map(|s| summary.mean <= s.value + margin),
        dims: ExperimentDims { a: d_a, e: exp.state.dims().total() / d_a, b: exp.channel.dim_out() },
        per_sample_distances: kept,
        seed: exp.seed.clone(),
    })
}

/// Smoothing parameters of the converse inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverseParams {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

impl ConverseParams {
    /// eps' = sqrt(eps), eps'' = 0, eps''' = 2 sqrt(eps). `eps` is floored at
    /// 1e-12 so that eps' stays positive.
    pub fn default_for(eps: f64) -> Self {
        let r = eps.max(1e-12).sqrt();
        Self { eps1: r, eps2: 0.0, eps3: 2.0 * r }
    }

    /// eps' + 2 eps'' + eps''' + sqrt(2 eps)
    pub fn total_smoothing(&self, eps: f64) -> f64 {
        self.eps1 + 2.0 * self.eps2 + self.eps3 + (2.0 * eps).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverseReport {
    pub epsilon: f64,
    pub measured_distance: f64,
    pub params: ConverseParams,
    pub total_smoothing: f64,
    /// H_min^{total}(A|E)_rho + H_max^{eps''}(AB)_tau - H_min^{eps'''}(B)_tau;
    /// absent when the inequality is vacuous.
    pub lhs: Option<f64>,
    /// -log(2 / eps'^2)
    pub rhs: f64,
    pub slack: Option<f64>,
    pub holds: bool,
    /// Total smoothing >= 1: the smoothed min-entropy is unbounded.
    pub vacuous: bool,
    pub hmin_smooth_a_e: Option<f64>,
    pub hmax_smooth_ab_tau: Option<f64>,
    pub hmin_smooth_b_tau: Option<f64>,
    /// Non-smooth H_min(A|B)_tau, the achievability-side quantity.
    pub hmin_a_b_tau: f64,
    /// Non-smooth H_max(A|B)_tau, reported next to the entropy difference.
    pub hmax_a_b_tau: f64,
}

/// tau_AB = |A| (sqrt(rho_A)^T (x) 1) J(T) (sqrt(rho_A)^T (x) 1), labeled
/// (A', B). The transpose comes from the Choi matrix being built on the
/// conjugate copy of A.
pub fn converse_tau(state: &StateOperator, system: &[&str], channel: &Channel) -> Result<StateOperator> {
    let front = state.bring_to_front(system)?;
    let rho_a = front.partial_trace(system)?.reorder(system)?;
    if rho_a.dims().total() != channel.dim_in() {
        return Err(Error::DimensionMismatch("channel input vs system".into()));
    }
    let s = psd_sqrt(&rho_a.matrix().transpose());
    let full = kron(&s, &CMatrix::identity(channel.dim_out(), channel.dim_out()));
    let tau = &full * channel.choi().matrix() * &full * cr(channel.dim_in() as f64);
    StateOperator::new_unnormalized(channel.choi().dims().clone(), crate::linalg::hermitian_part(&tau))
}

/// ||T(rho_AE) - T(rho_A) (x) rho_E||_1
pub fn converse_distance(state: &StateOperator, system: &[&str], channel: &Channel) -> Result<f64> {
    let sampler = Sampler::new(state, system, channel)?;
    let front = state.bring_to_front(system)?;
    let rho = front.matrix();
    let (d_a, d_e) = (sampler.d_a, sampler.d_e);
    let rho_a = crate::linalg::partial_trace_matrix(rho, &[d_a, d_e], &[0]);
    let rho_e = crate::linalg::partial_trace_matrix(rho, &[d_a, d_e], &[1]);
    let out = sampler.output(&CMatrix::identity(d_a, d_a));
    let t_a = channel.apply_matrix(&rho_a, 1);
    trace_norm(&crate::linalg::hermitian_part(&(out - kron(&t_a, &rho_e))))
}

/// Checks the converse inequality for a trace-preserving channel, after
/// confirming numerically that the decoupling condition with `eps` holds.
pub fn converse_check(
    state: &StateOperator,
    system: &[&str],
    channel: &Channel,
    eps: f64,
    params: ConverseParams,
) -> Result<ConverseReport> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}")));
    }
    if !(params.eps1 > 0.0) || params.eps2 < 0.0 || params.eps3 < 0.0 {
        return Err(Error::InvalidParameter("need eps' > 0 and eps'', eps''' >= 0".into()));
    }
    let tr = channel.choi().trace();
    if (tr - 1.0).abs() > TOL_TRACE {
        return Err(Error::BadTrace(tr));
    }
    state.require_normalized(1e-9)?;
    let env = environment(state, system)?;
    let measured = converse_distance(state, system, channel)?;
    if measured > eps * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::Precondition(format!(
            "measured ||T(rho_AE) - T(rho_A) x rho_E||_1 = {measured:.6e} exceeds eps = {eps:.6e}"
        )));
    }
    let tau = converse_tau(state, system, channel)?;
    let hmin_a_b_tau = h_min(&tau, &[CHOI_IN], &[CHOI_OUT])?.value;
    let hmax_a_b_tau = h_max(&tau, &[CHOI_IN], &[CHOI_OUT])?.value;
    let total = params.total_smoothing(eps);
    let rhs = -(2.0 / (params.eps1 * params.eps1)).log2();
    let mut report = ConverseReport {
        epsilon: eps,
        measured_distance: measured,
        params,
        total_smoothing: total,
        lhs: None,
        rhs,
        slack: None,
        holds: true,
        vacuous: true,
        hmin_smooth_a_e: None,
        hmax_smooth_ab_tau: None,
        hmin_smooth_b_tau: None,
        hmin_a_b_tau,
        hmax_a_b_tau,
    };
    if total >= 1.0 {
        return Ok(report);
    }
    let a = h_min_smooth(state, system, &env, total)?.value;
    let b = h_max_smooth(&tau, &[CHOI_IN, CHOI_OUT], &[], params.eps2)?.value;
    let c = h_min_smooth(&tau, &[CHOI_OUT], &[], params.eps3)?.value;
    let lhs = a + b - c;
    report.lhs = Some(lhs);
    report.slack = Some(lhs - rhs);
    report.holds = lhs >= rhs - 1e-6;
    report.vacuous = false;
    report.hmin_smooth_a_e = Some(a);
    report.hmax_smooth_ab_tau = Some(b);
    report.hmin_smooth_b_tau = Some(c);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_density_matrix, DimsLabel, random_pure_vector, trace_distance, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims(parts: &[(&str, usize)]) -> DimsLabel {
        DimsLabel::new(parts.iter().copied()).unwrap()
    }

    fn random_state(parts: &[(&str, usize)], rng: &mut ChaCha8Rng) -> StateOperator {
        let d = dims(parts);
        let n = d.total();
        StateOperator::new(d, random_density_matrix(n, n, rng)).unwrap()
    }

    #[test]
    fn fast_path_matches_channel_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let s = random_state(&[("E", 2), ("A", 3)], &mut rng);
        let ch = Channel::random_cpm(3, 2, 0.7, &mut rng).unwrap();
        let u = haar_unitary(3, &mut rng);
        let d = sample_distance(&s, &["A"], &ch, &u).unwrap();
        let rotated = s.conjugate_on(&["A"], &u).unwrap();
        let out = ch.apply(&rotated, &["A"], "B").unwrap().reorder(&["B", "E"]).unwrap();
        let tau_b = StateOperator::new_unnormalized(dims(&[("B", 2)]), ch.tau_b()).unwrap();
        let reference = tau_b.tensor(&s.partial_trace(&["E"]).unwrap()).unwrap();
        let direct = trace_distance(&out, &reference).unwrap();
        assert!((d - direct).abs() < 1e-10, "{d} vs {direct}");
    }

    #[test]
    fn erasure_is_perfectly_decoupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let s = random_state(&[("A", 2), ("E", 3)], &mut rng);
        let ch = Channel::erasure(2, 2).unwrap();
        for _ in 0..5 {
            let u = haar_unitary(2, &mut rng);
            assert!(sample_distance(&s, &["A"], &ch, &u).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identity_channel_at_identity_unitary() {
        // the reference is tau_B = I/|A|, which equals rho_A for a
        // maximally entangled input
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let ch = Channel::identity(2).unwrap();
        let psi = PureState::new(dims(&[("A", 2), ("E", 2)]), random_pure_vector(4, &mut rng)).unwrap();
        let s = psi.to_operator().unwrap();
        let d = sample_distance(&s, &["A"], &ch, &CMatrix::identity(2, 2)).unwrap();
        let mixed = StateOperator::maximally_mixed(dims(&[("A", 2)]));
        let direct = trace_distance(&s, &mixed.tensor(&s.partial_trace(&["E"]).unwrap()).unwrap()).unwrap();
        assert!(d > 0.1);
        assert!((d - direct).abs() < 1e-10);

        let mut v = crate::linalg::CVector::zeros(4);
        v[0] = cr(std::f64::consts::FRAC_1_SQRT_2);
        v[3] = cr(std::f64::consts::FRAC_1_SQRT_2);
        let bell = PureState::new(dims(&[("A", 2), ("E", 2)]), v).unwrap().to_operator().unwrap();
        let d = sample_distance(&bell, &["A"], &ch, &CMatrix::identity(2, 2)).unwrap();
        let prod = bell.partial_trace(&["A"]).unwrap().tensor(&bell.partial_trace(&["E"]).unwrap()).unwrap();
        assert!((d - trace_distance(&bell, &prod).unwrap()).abs() < 1e-12);
        assert!((d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_marginal_is_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let rho_e = random_state(&[("E", 3)], &mut rng);
        let s = StateOperator::maximally_mixed(dims(&[("A", 2)])).tensor(&rho_e).unwrap();
        let ch = Channel::random_tpcpm(2, 3, 2, &mut rng).unwrap();
        let d0 = sample_distance(&s, &["A"], &ch, &CMatrix::identity(2, 2)).unwrap();
        for _ in 0..4 {
            let u = haar_unitary(2, &mut rng);
            assert!((sample_distance(&s, &["A"], &ch, &u).unwrap() - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_unitary() {
        let s = StateOperator::maximally_mixed(dims(&[("A", 2)]));
        let ch = Channel::identity(2).unwrap();
        let u = CMatrix::identity(2, 2) * cr(1.1);
        assert!(sample_distance(&s, &["A"], &ch, &u).is_err());
    }

    #[test]
    fn flat_bound_closed_form() {
        let s = StateOperator::maximally_mixed(dims(&[("A", 2), ("E", 2)]));
        let b = bound_nonsmooth(&s, &["A"], &Channel::identity(2).unwrap(), false).unwrap();
        assert!((b.h2_a_e - 1.0).abs() < 1e-12);
        assert!((b.h2_a_b_tau + 1.0).abs() < 1e-12);
        assert!((b.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_input_with_identity_channel_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let rho_e = random_state(&[("E", 2)], &mut rng);
        let s = StateOperator::maximally_mixed(dims(&[("A", 2)])).tensor(&rho_e).unwrap();
        let mut exp = DecouplingExperiment::new(s, &["A"], Channel::identity(2).unwrap(), 50, RngSeed::new(1, "t"));
        exp.smooth_bound = true;
        let r = run(&exp, 1).unwrap();
        assert!(r.empirical_mean < 1e-12);
        assert!(r.nonsmooth_holds);
        assert_eq!(r.smooth_holds, Some(true));
    }

    #[test]
    fn run_is_worker_count_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let s = random_state(&[("A", 2), ("E", 2)], &mut rng);
        let ch = Channel::random_tpcpm(2, 2, 2, &mut rng).unwrap();
        let exp = DecouplingExperiment::new(s, &["A"], ch, 300, RngSeed::new(9, "w"));
        let a = run(&exp, 1).unwrap();
        let b = run(&exp, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.nonsmooth_holds);
        assert_eq!(a.per_sample_csv().lines().count(), 301);
    }

    #[test]
    fn converse_holds_on_decoupled_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        let s = random_state(&[("A", 2), ("E", 2)], &mut rng);
        let ch = Channel::erasure(2, 2).unwrap();
        let r = converse_check(&s, &["A"], &ch, 1e-6, ConverseParams { eps1: 0.5, eps2: 0.0, eps3: 0.0 }).unwrap();
        assert!(r.measured_distance < 1e-12);
        assert!(!r.vacuous);
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn converse_precondition_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let psi = PureState::new(dims(&[("A", 2), ("E", 2)]), random_pure_vector(4, &mut rng)).unwrap();
        let s = psi.to_operator().unwrap();
        let ch = Channel::identity(2).unwrap();
        let m = converse_distance(&s, &["A"], &ch).unwrap();
        let err = converse_check(&s, &["A"], &ch, 0.5 * m, ConverseParams::default_for(0.5 * m));
        assert!(matches!(err, Err(Error::Precondition(_))));
        let ok = converse_check(&s, &["A"], &ch, m, ConverseParams::default_for(m)).unwrap();
        assert!(ok.holds);
    }

    #[test]
    fn tau_is_choi_for_maximally_mixed_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let rho_e = random_state(&[("E", 2)], &mut rng);
        let s = StateOperator::maximally_mixed(dims(&[("A", 3)])).tensor(&rho_e).unwrap();
        let ch = Channel::random_tpcpm(3, 2, 2, &mut rng).unwrap();
        let tau = converse_tau(&s, &["A"], &ch).unwrap();
        assert!(max_abs_diff(tau.matrix(), ch.choi().matrix()) < 1e-12);
    }
}
