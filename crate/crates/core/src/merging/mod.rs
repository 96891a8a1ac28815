//! One-shot state merging of a pure state on A (Alice), B (Bob) and E
//! (reference).
//!
//! Alice holds A and her half A0 of a maximally entangled pair of Schmidt
//! rank K. She applies a Haar unitary on A0 A, measures which of N = K|A|/L
//! blocks of dimension L the state lies in (keeping the block as A1) and
//! sends the outcome to Bob. For each outcome Bob applies the Uhlmann
//! decoder on B0 B toward `Phi^L_{A1 B1} (x) psi_{B' B E}`, where B' takes
//! the role of A. Nothing else acts across the cut, so the protocol is
//! LOCC by construction.
//!
//! Fidelities are root fidelities. The flag registers are kept coherent
//! (X_A X_B in the state `sum_x |x>|x> / sqrt N` on the target side), so the
//! overall fidelity is `sum_x sqrt(p_x / N) F_x` with `F_x` the decoded
//! fidelity of outcome `x`.
//!
//! With large K the outcome count is too big to enumerate; the sampled
//! mode draws a few blocks (rows of one Haar unitary) and averages
//! `sqrt(N p_x) F_x`, an unbiased estimate of the Haar-averaged fidelity.

mod cost;
mod uhlmann;

use serde::{Deserialize, Serialize};

use crate::haar::{haar_rows, haar_unitary, RngSeed};
use crate::linalg::{
    check_cap, cr, eigh, fidelity_matrices, max_abs_diff, purify, trace_norm, CMatrix, CVector,
    DimsLabel, PureState, StateOperator,
};
use crate::stats::{par_indexed, Summary};
use crate::{Error, Result};

pub use cost::{
    cost_achievable, cost_converse, iid_cost_trend, iid_power, realize_cost, smooth_max_pure,
    CostBound, IidTrend, Realization, MAX_REGISTER_QUBITS,
};
pub use uhlmann::{uhlmann_isometry, UhlmannDecoder};

/// Largest K|A| handled exactly (full unitary and all outcomes) in
/// [`OutcomeMode::Auto`].
pub const EXACT_MAX_DIM: usize = 64;
/// Outcomes drawn per run in sampled mode unless configured otherwise.
pub const DEFAULT_SAMPLED_OUTCOMES: usize = 32;
/// Upper limit on the entries of the sampled row block.
pub const SAMPLED_MAX_ENTRIES: usize = 1 << 23;
/// Tolerance on sum_x p_x = 1 and on W^dagger W = 1.
pub const TOL_PROTOCOL: f64 = 1e-9;
/// Allowed difference between the decoded fidelity and the marginal
/// fidelity it must reach.
pub const TOL_UHLMANN: f64 = 1e-7;

/// How outcomes of the measurement are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeMode {
    /// Exact when K|A| <= [`EXACT_MAX_DIM`], sampled otherwise.
    Auto,
    Exact,
    Sampled { outcomes: usize },
}

/// One merging task.
#[derive(Debug, Clone)]
pub struct MergingInstance {
    /// Pure state on labels A, B, E (any of them may have dimension 1).
    pub psi: PureState,
    /// Schmidt rank of the entanglement consumed.
    pub k: usize,
    /// Schmidt rank of the entanglement produced.
    pub l: usize,
    pub epsilon_target: f64,
    pub seed: RngSeed,
    pub mode: OutcomeMode,
}

impl MergingInstance {
    pub fn new(psi: PureState, k: usize, l: usize, epsilon_target: f64, seed: RngSeed) -> Result<Self> {
        let inst = Self { psi, k, l, epsilon_target, seed, mode: OutcomeMode::Auto };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance at the realized achievability cost for `epsilon`.
    pub fn at_achievable_cost(psi: PureState, epsilon: f64, seed: RngSeed) -> Result<(Self, CostBound)> {
        let bound = cost_achievable(&psi, &["A"], &["B"], epsilon)?;
        let r = bound.realized.expect("achievability bound is realized");
        Ok((Self::new(psi, r.k, r.l, epsilon, seed)?, bound))
    }

    pub fn with_mode(mut self, mode: OutcomeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn dim_a(&self) -> usize {
        self.psi.dims().dim_of("A").unwrap_or(1)
    }

    /// Number N of measurement outcomes.
    pub fn outcomes(&self) -> usize {
        self.k * self.dim_a() / self.l
    }

    pub fn cost_bits(&self) -> f64 {
        (self.k as f64).log2() - (self.l as f64).log2()
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.psi.dims().labels();
        if labels.len() != 3 || !["A", "B", "E"].iter().all(|l| labels.contains(l)) {
            return Err(Error::InvalidParameter(format!(
                "merging needs a pure state on labels A, B, E (got {labels:?})"
            )));
        }
        let n = self.psi.norm_squared();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(n));
        }
        if self.k == 0 || self.l == 0 {
            return Err(Error::InvalidParameter("K and L must be positive".into()));
        }
        let total = self.k.checked_mul(self.dim_a()).ok_or(Error::InvalidParameter("K|A| overflows".into()))?;
        if total % self.l != 0 {
            return Err(Error::Divisibility { l: self.l, n: total });
        }
        if !(self.epsilon_target > 0.0 && self.epsilon_target < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "merging error {} must lie in (0, 1)",
                self.epsilon_target
            )));
        }
        Ok(())
    }

    fn resolved_mode(&self) -> OutcomeMode {
        match self.mode {
            OutcomeMode::Auto if self.k * self.dim_a() <= EXACT_MAX_DIM => OutcomeMode::Exact,
            OutcomeMode::Auto => OutcomeMode::Sampled { outcomes: DEFAULT_SAMPLED_OUTCOMES },
            OutcomeMode::Sampled { outcomes } if outcomes >= self.outcomes() => OutcomeMode::Exact,
            m => m,
        }
    }
}

/// Alice's isometry `W U` from A0 A (A0 first) to A1 X_A X_B: block `x` of
/// rows `xL .. xL + L` of `u` is sent to A1 with flags `|x>|x>`. `u` must be
/// unitary on dimension `dim`.
pub fn measurement_isometry(dim: usize, l: usize, u: &CMatrix) -> Result<CMatrix> {
    if l == 0 || dim % l != 0 {
        return Err(Error::Divisibility { l, n: dim });
    }
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::DimensionMismatch(format!("unitary is {}x{}, expected {dim}", u.nrows(), u.ncols())));
    }
    if max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(dim, dim)) > 1e-10 {
        return Err(Error::InvalidParameter("U is not unitary".into()));
    }
    let n = dim / l;
    let mut w = CMatrix::zeros(l * n * n, dim);
    for x in 0..n {
        for a1 in 0..l {
            let row = (a1 * n + x) * n + x;
            w.row_mut(row).copy_from(&u.row(x * l + a1));
        }
    }
    Ok(w)
}

/// Per-outcome record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub x: usize,
    pub probability: f64,
    /// F(sigma^x_{A1 E}, 1/L (x) rho_E), the best any decoder can reach.
    pub fidelity: f64,
    /// ||sigma^x_{A1 E} - 1/L (x) rho_E||_1.
    pub decoupling_distance: f64,
    /// Fidelity after applying the constructed decoder (exact mode).
    pub decoded_fidelity: Option<f64>,
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergingResult {
    pub k: usize,
    pub l: usize,
    pub outcomes_total: usize,
    /// "exact" or "sampled".
    pub mode: String,
    /// Overall fidelity (exact) or its unbiased estimate (sampled).
    pub fidelity: f64,
    /// Standard error of the estimate across sampled outcomes; 0 if exact.
    pub fidelity_std_error: f64,
    /// sqrt(1 - F^2).
    pub purified_distance: f64,
    pub per_outcome: Vec<OutcomeRecord>,
    /// Sum of p_x over evaluated outcomes (1 in exact mode).
    pub probability_mass: f64,
    /// Probability-weighted share of evaluated outcomes with decoupling
    /// distance at most 4 epsilon.
    pub decoupled_fraction: f64,
    pub cost_bits: f64,
    pub bound_achievable: Option<CostBound>,
    /// `None` when 4 sqrt(eps) >= 1 (the converse says nothing).
    pub bound_converse: Option<CostBound>,
    /// Purified distance at most epsilon.
    pub success: bool,
    /// On a successful run with a converse bound: cost >= bound - 1e-6.
    pub converse_respected: Option<bool>,
    pub epsilon: f64,
    pub seed: RngSeed,
}

/// Merging input from a density operator: a rank-one operator on A, B, E
/// gives its vector; one on A, B alone is purified with E.
pub fn pure_input(rho: &StateOperator) -> Result<PureState> {
    let mut labels = rho.dims().labels();
    labels.sort_unstable();
    match labels.as_slice() {
        ["A", "B"] => purify(rho, "E"),
        ["A", "B", "E"] => {
            rho.require_normalized(1e-9)?;
            let e = eigh(rho.matrix());
            let top = e.values.len() - 1;
            if e.values[top] < 1.0 - 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "merging input on A, B, E must be pure (largest eigenvalue {:.9})",
                    e.values[top]
                )));
            }
            let v = e.vectors.column(top).into_owned();
            PureState::new(rho.dims().clone(), v.unscale(v.norm()))
        }
        _ => Err(Error::InvalidParameter("merging input needs labels A, B and optionally E".into())),
    }
}

/// Both cost bounds of an instance; the converse is `None` when vacuous.
pub fn cost_bounds(psi: &PureState, epsilon: f64) -> Result<(CostBound, Option<CostBound>)> {
    let hi = cost_achievable(psi, &["A"], &["B"], epsilon)?;
    let lo = match cost_converse(psi, &["A"], &["B"], epsilon) {
        Ok(b) => Some(b),
        Err(Error::SmoothingOutOfRange(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((hi, lo))
}

struct Prepared {
    psi_mat: CMatrix,
    d_a: usize,
    d_b: usize,
    d_e: usize,
    target_marginal: CMatrix,
}

fn prepare(inst: &MergingInstance) -> Result<Prepared> {
    inst.validate()?;
    let psi = inst.psi.reorder(&["A", "B", "E"])?;
    let dims = psi.dims().dims();
    let (d_a, d_b, d_e) = (dims[0], dims[1], dims[2]);
    let (psi_mat, _, _) = psi.as_bipartite_matrix(&["A"])?;
    check_cap(d_e * inst.l)?;
    let rho_e = psi.reduced(&["E"])?.into_matrix();
    let target_marginal = crate::linalg::kron(&CMatrix::identity(inst.l, inst.l).map(|z| z / inst.l as f64), &rho_e);
    Ok(Prepared { psi_mat, d_a, d_b, d_e, target_marginal })
}

/// Post-measurement (unnormalized) amplitudes of one outcome, as a matrix
/// with rows (A1, E) and columns (B0, B), from the L rows of `W U` that
/// map into it.
fn outcome_amplitudes(p: &Prepared, k: usize, rows: &CMatrix) -> CMatrix {
    let l = rows.nrows();
    let be = p.d_b * p.d_e;
    let scale = cr(1.0 / (k as f64).sqrt());
    let mut g = CMatrix::zeros(l * p.d_e, k * p.d_b);
    for a1 in 0..l {
        let r = CMatrix::from_fn(k, p.d_a, |kk, a| rows[(a1, kk * p.d_a + a)]);
        let phi = r * &p.psi_mat; // K x (B E)
        for kk in 0..k {
            for b in 0..p.d_b {
                for e in 0..p.d_e {
                    g[(a1 * p.d_e + e, kk * p.d_b + b)] = phi[(kk, b * p.d_e + e)] * scale;
                }
            }
        }
        debug_assert_eq!(phi.ncols(), be);
    }
    g
}

fn evaluate_outcome(p: &Prepared, x: usize, g: &CMatrix) -> Result<OutcomeRecord> {
    let sigma = g * g.adjoint();
    let prob = sigma.trace().re;
    if prob <= 0.0 {
        return Ok(OutcomeRecord { x, probability: 0.0, fidelity: 0.0, decoupling_distance: 0.0, decoded_fidelity: None });
    }
    let sigma = sigma / cr(prob);
    Ok(OutcomeRecord {
        x,
        probability: prob,
        fidelity: fidelity_matrices(&sigma, &p.target_marginal).min(1.0),
        decoupling_distance: trace_norm(&(&sigma - &p.target_marginal))?,
        decoded_fidelity: None,
    })
}

/// Target of Bob's decoder: Phi^L on A1 B1 times psi with A renamed B'.
fn decoder_target(inst: &MergingInstance) -> Result<PureState> {
    let l = inst.l;
    let mut phi = CVector::zeros(l * l);
    for i in 0..l {
        phi[i * l + i] = cr(1.0 / (l as f64).sqrt());
    }
    let phi = PureState::new(DimsLabel::new([("A1", l), ("B1", l)])?, phi)?;
    let psi = inst.psi.reorder(&["A", "B", "E"])?.relabel("A", "Bp")?;
    phi.tensor(&psi)?.reorder(&["A1", "E", "B1", "Bp", "B"])
}

fn as_pure(g: &CMatrix, prob: f64, inst: &MergingInstance, p: &Prepared) -> Result<PureState> {
    // Rows (A1, E), columns (B0, B), flattened in that label order.
    let w = g.ncols();
    let s = cr(1.0 / prob.sqrt());
    let v = CVector::from_fn(g.len(), |i, _| g[(i / w, i % w)] * s);
    PureState::new(DimsLabel::new([("A1", inst.l), ("E", p.d_e), ("B0", inst.k), ("B", p.d_b)])?, v)
}

fn run_exact(inst: &MergingInstance, p: &Prepared) -> Result<(Vec<OutcomeRecord>, f64)> {
    let dim = inst.k * p.d_a;
    check_cap(dim)?;
    let n = inst.outcomes();
    let u = haar_unitary(dim, &mut inst.seed.rng(0));
    let w = measurement_isometry(dim, inst.l, &u)?;
    let dev = max_abs_diff(&(w.adjoint() * &w), &CMatrix::identity(dim, dim));
    if dev > TOL_PROTOCOL {
        return Err(Error::Invariant(format!("W^dagger W deviates from 1 by {dev:.3e}")));
    }
    let target = decoder_target(inst)?;
    let mut records = Vec::with_capacity(n);
    let mut coherent = 0.0;
    for x in 0..n {
        let rows = CMatrix::from_fn(inst.l, dim, |a1, j| w[((a1 * n + x) * n + x, j)]);
        let g = outcome_amplitudes(p, inst.k, &rows);
        let mut rec = evaluate_outcome(p, x, &g)?;
        if rec.probability > 0.0 {
            let sigma = as_pure(&g, rec.probability, inst, p)?;
            let dec = uhlmann_isometry(&sigma, &target, &["B0", "B"], 1.0)?;
            if (dec.fidelity - rec.fidelity).abs() > TOL_UHLMANN {
                return Err(Error::Invariant(format!(
                    "outcome {x}: decoded fidelity {} differs from marginal fidelity {}",
                    dec.fidelity, rec.fidelity
                )));
            }
            coherent += (rec.probability / n as f64).sqrt() * dec.fidelity;
            rec.decoded_fidelity = Some(dec.fidelity);
        }
        records.push(rec);
    }
    let mass: f64 = records.iter().map(|r| r.probability).sum();
    if (mass - 1.0).abs() > TOL_PROTOCOL {
        return Err(Error::Invariant(format!("outcome probabilities sum to {mass}")));
    }
    Ok((records, coherent.min(1.0)))
}

fn run_sampled(inst: &MergingInstance, p: &Prepared, outcomes: usize) -> Result<(Vec<OutcomeRecord>, f64, f64)> {
    let dim = inst.k * p.d_a;
    let n = inst.outcomes();
    let m = outcomes.clamp(1, n);
    if m * inst.l * dim > SAMPLED_MAX_ENTRIES {
        return Err(Error::DimensionCap { dim: m * inst.l * dim, cap: SAMPLED_MAX_ENTRIES });
    }
    let rows = haar_rows(m * inst.l, dim, &mut inst.seed.rng(0))?;
    let mut records = Vec::with_capacity(m);
    let mut terms = Vec::with_capacity(m);
    for x in 0..m {
        let block = rows.rows(x * inst.l, inst.l).into_owned();
        let g = outcome_amplitudes(p, inst.k, &block);
        let rec = evaluate_outcome(p, x, &g)?;
        terms.push((n as f64 * rec.probability).sqrt() * rec.fidelity);
        records.push(rec);
    }
    let s = Summary::of(&terms);
    Ok((records, s.mean, if m > 1 { s.std_error } else { 0.0 }))
}

fn assemble(
    inst: &MergingInstance,
    records: Vec<OutcomeRecord>,
    fidelity: f64,
    std_error: f64,
    mode: &str,
    bounds: Option<&(CostBound, Option<CostBound>)>,
) -> MergingResult {
    let mass: f64 = records.iter().map(|r| r.probability).sum();
    let within: f64 = records
        .iter()
        .filter(|r| r.decoupling_distance <= 4.0 * inst.epsilon_target)
        .map(|r| r.probability)
        .sum();
    let purified_distance = (1.0 - fidelity.clamp(0.0, 1.0).powi(2)).sqrt();
    let success = purified_distance <= inst.epsilon_target;
    let cost_bits = inst.cost_bits();
    let bound_converse = bounds.and_then(|b| b.1.clone());
    let converse_respected = match (&bound_converse, success) {
        (Some(b), true) => Some(cost_bits >= b.value - 1e-6),
        _ => None,
    };
    MergingResult {
        k: inst.k,
        l: inst.l,
        outcomes_total: inst.outcomes(),
        mode: mode.to_string(),
        fidelity,
        fidelity_std_error: std_error,
        purified_distance,
        per_outcome: records,
        probability_mass: mass,
        decoupled_fraction: if mass > 0.0 { within / mass } else { 0.0 },
        cost_bits,
        bound_achievable: bounds.map(|b| b.0.clone()),
        bound_converse,
        success,
        converse_respected,
        epsilon: inst.epsilon_target,
        seed: inst.seed.clone(),
    }
}

/// Runs the protocol once without evaluating the cost bounds.
pub fn run_protocol(inst: &MergingInstance) -> Result<MergingResult> {
    run_with_bounds(inst, None)
}

fn run_with_bounds(inst: &MergingInstance, bounds: Option<&(CostBound, Option<CostBound>)>) -> Result<MergingResult> {
    let p = prepare(inst)?;
    Ok(match inst.resolved_mode() {
        OutcomeMode::Sampled { outcomes } => {
            let (rec, f, se) = run_sampled(inst, &p, outcomes)?;
            assemble(inst, rec, f, se, "sampled", bounds)
        }
        _ => {
            let (rec, f) = run_exact(inst, &p)?;
            assemble(inst, rec, f, 0.0, "exact", bounds)
        }
    })
}

/// Runs the protocol once and reports it against both cost bounds.
pub fn run_merging(inst: &MergingInstance) -> Result<MergingResult> {
    let bounds = cost_bounds(&inst.psi, inst.epsilon_target)?;
    run_with_bounds(inst, Some(&bounds))
}

/// Aggregate over independent seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergingReport {
    pub epsilon: f64,
    pub k: usize,
    pub l: usize,
    pub cost_bits: f64,
    pub bound_achievable: CostBound,
    pub bound_converse: Option<CostBound>,
    pub seeds: Vec<u64>,
    pub fidelity: Summary,
    /// 1 - eps^2 / 2.
    pub fidelity_threshold: f64,
    /// Mean fidelity >= threshold - 3 standard errors.
    pub fidelity_ok: bool,
    /// Realized cost >= converse bound - 1e-6 (true when the converse is
    /// vacuous).
    pub converse_ok: bool,
    pub runs: Vec<MergingResult>,
}

/// Runs `template` once per seed (stream "merging") in parallel.
pub fn run_merging_seeds(template: &MergingInstance, seeds: &[u64], workers: usize) -> Result<MergingReport> {
    template.validate()?;
    let bounds = cost_bounds(&template.psi, template.epsilon_target)?;
    let runs = par_indexed(workers, seeds.len(), |i| {
        let inst = MergingInstance { seed: RngSeed::new(seeds[i], template.seed.stream.clone()), ..template.clone() };
        run_with_bounds(&inst, Some(&bounds))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let fid: Vec<f64> = runs.iter().map(|r| r.fidelity).collect();
    let fidelity = Summary::of(&fid);
    let eps = template.epsilon_target;
    let threshold = 1.0 - 0.5 * eps * eps;
    let se = if fidelity.n > 1 { fidelity.std_error } else { 0.0 };
    let cost_bits = template.cost_bits();
    Ok(MergingReport {
        epsilon: eps,
        k: template.k,
        l: template.l,
        cost_bits,
        converse_ok: bounds.1.as_ref().is_none_or(|b| cost_bits >= b.value - 1e-6),
        bound_achievable: bounds.0,
        bound_converse: bounds.1,
        seeds: seeds.to_vec(),
        fidelity,
        fidelity_threshold: threshold,
        fidelity_ok: fidelity.mean >= threshold - crate::decoupling::SIGMA_MARGIN * se,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{classical_purified, entangled_pure};

    fn seed(s: u64) -> RngSeed {
        RngSeed::new(s, "merging")
    }

    fn bell_ab_trivial_e() -> PureState {
        let bell = entangled_pure(1).unwrap().relabel("E", "B").unwrap();
        let e = PureState::basis(DimsLabel::single("E", 1).unwrap(), 0).unwrap();
        bell.tensor(&e).unwrap()
    }

    #[test]
    fn pure_input_accepts_both_forms() {
        let psi = classical_purified(1).unwrap();
        let back = pure_input(&psi.to_operator().unwrap()).unwrap();
        let ov = (psi.amplitudes().adjoint() * back.amplitudes())[(0, 0)].norm();
        assert!((ov - 1.0).abs() < 1e-12);
        let ab = psi.reduced(&["A", "B"]).unwrap();
        let p = pure_input(&ab).unwrap();
        assert!(max_abs_diff(p.reduced(&["A", "B"]).unwrap().matrix(), ab.matrix()) < 1e-12);
        // Mixed on A, B, E is rejected.
        let mixed = ab.tensor(&StateOperator::maximally_mixed(DimsLabel::single("E", 2).unwrap())).unwrap();
        assert!(pure_input(&mixed).is_err());
    }

    #[test]
    fn isometry_blocks() {
        let mut rng = seed(1).rng(0);
        let u = haar_unitary(4, &mut rng);
        let w = measurement_isometry(4, 2, &u).unwrap();
        assert_eq!(w.nrows(), 2 * 2 * 2);
        assert!(max_abs_diff(&(w.adjoint() * &w), &CMatrix::identity(4, 4)) < 1e-12);
        // Single outcome: W is U with one flag.
        let w1 = measurement_isometry(4, 4, &u).unwrap();
        assert!(max_abs_diff(&w1, &u) < 1e-15);
        // Rank one: every row of U is its own outcome.
        let wl1 = measurement_isometry(4, 1, &u).unwrap();
        assert!(max_abs_diff(&(wl1.adjoint() * &wl1), &CMatrix::identity(4, 4)) < 1e-12);
        assert!(matches!(measurement_isometry(4, 3, &u), Err(Error::Divisibility { .. })));
    }

    #[test]
    fn trivial_alice_merges_for_free() {
        let mut v = CVector::zeros(4);
        v[0] = cr(0.6);
        v[3] = cr(0.8);
        let psi = PureState::new(DimsLabel::new([("A", 1), ("B", 2), ("E", 2)]).unwrap(), v).unwrap();
        let r = run_protocol(&MergingInstance::new(psi, 2, 2, 0.1, seed(0)).unwrap()).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-10 && r.cost_bits == 0.0);
    }

    #[test]
    fn bell_pair_gains_one_ebit() {
        let inst = MergingInstance::new(bell_ab_trivial_e(), 1, 2, 0.1, seed(3)).unwrap();
        let r = run_protocol(&inst).unwrap();
        assert_eq!(r.cost_bits, -1.0);
        assert!((r.fidelity - 1.0).abs() < 1e-10, "{}", r.fidelity);
        assert!(r.success);
    }

    #[test]
    fn exact_run_invariants() {
        let psi = classical_purified(1).unwrap();
        let inst = MergingInstance::new(psi, 4, 2, 0.3, seed(9)).unwrap();
        let r = run_protocol(&inst).unwrap();
        assert_eq!(r.mode, "exact");
        assert_eq!(r.per_outcome.len(), 4);
        assert!((r.probability_mass - 1.0).abs() < 1e-9);
        for o in &r.per_outcome {
            let d = o.decoded_fidelity.unwrap();
            assert!((d - o.fidelity).abs() < 1e-7);
        }
        let again = run_protocol(&inst).unwrap();
        assert_eq!(r, again);
    }

    // The sampled estimator against exact enumeration of the same unitary
    // ensemble: averaged over seeds both estimate the same mean.
    #[test]
    fn sampled_estimate_matches_exact_average() {
        let psi = classical_purified(1).unwrap();
        let mut exact = Vec::new();
        let mut sampled = Vec::new();
        for s in 0..40 {
            let inst = MergingInstance::new(psi.clone(), 8, 1, 0.3, seed(s)).unwrap();
            exact.push(run_protocol(&inst.clone().with_mode(OutcomeMode::Exact)).unwrap().fidelity);
            let smp = inst.with_mode(OutcomeMode::Sampled { outcomes: 4 });
            sampled.push(run_protocol(&smp).unwrap().fidelity);
        }
        let (e, s) = (Summary::of(&exact), Summary::of(&sampled));
        let tol = 4.0 * (e.std_error.powi(2) + s.std_error.powi(2)).sqrt() + 1e-3;
        assert!((e.mean - s.mean).abs() < tol, "{} vs {} (tol {tol})", e.mean, s.mean);
    }

    #[test]
    fn divisibility_and_labels_enforced() {
        let psi = classical_purified(1).unwrap();
        assert!(matches!(MergingInstance::new(psi.clone(), 1, 4, 0.1, seed(0)), Err(Error::Divisibility { .. })));
        let bad = psi.relabel("E", "R").unwrap();
        assert!(MergingInstance::new(bad, 1, 1, 0.1, seed(0)).is_err());
    }

    #[test]
    fn seeds_report_is_worker_invariant() {
        let psi = classical_purified(1).unwrap();
        let inst = MergingInstance::new(psi, 8, 1, 0.3, seed(0)).unwrap();
        let a = run_merging_seeds(&inst, &[1, 2, 3], 1).unwrap();
        let b = run_merging_seeds(&inst, &[1, 2, 3], 3).unwrap();
        assert_eq!(a, b);
        assert!(a.bound_converse.is_none() && a.converse_ok);
    }
}
