use serde::{Deserialize, Serialize};

use crate::entropy::{check_epsilon, h_min, h_min_smooth, von_neumann, EntropyResult};
use crate::linalg::{DimsLabel, PureState};
use crate::{Error, Result};

/// Largest log2 K or log2 L a realization may ask for.
pub const MAX_REGISTER_QUBITS: u32 = 40;

/// Integer register sizes realizing a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub k: usize,
    pub l: usize,
}

impl Realization {
    /// log K - log L.
    pub fn bits(&self) -> f64 {
        (self.k as f64).log2() - (self.l as f64).log2()
    }
}

/// One side of the entanglement-cost sandwich.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBound {
    pub epsilon: f64,
    /// Smoothing parameter of the max-entropy term.
    pub smoothing: f64,
    /// H_max^smoothing(target|condition) in bits.
    pub h_max: f64,
    /// Right-hand side of the bound in bits.
    pub value: f64,
    /// SDP certificate gap of the entropy term, in bits.
    pub certificate_gap: f64,
    /// Smallest realizable power-of-two registers at or above `value`
    /// (achievability side only).
    pub realized: Option<Realization>,
}

/// Powers of two K = 2^kappa, L = 2^l with kappa - l minimal but at least
/// `bits`, and L dividing K * dim_a. Values within 1e-9 above an integer
/// are treated as that integer.
pub fn realize_cost(bits: f64, dim_a: usize) -> Result<Realization> {
    if !bits.is_finite() {
        return Err(Error::InvalidParameter(format!("cost {bits} is not finite")));
    }
    let mut d = (bits - 1e-9).ceil() as i64;
    if d >= 0 {
        if d > MAX_REGISTER_QUBITS as i64 {
            return Err(Error::InvalidParameter(format!("cost of {d} ebits exceeds the register limit")));
        }
        return Ok(Realization { k: 1 << d, l: 1 });
    }
    // Gaining entanglement: L / K = 2^-d must divide |A|.
    while d < 0 && dim_a % (1usize << (-d).min(63)) != 0 {
        d += 1;
    }
    Ok(Realization { k: 1, l: 1 << (-d) })
}

fn require_pure_normalized(state: &PureState) -> Result<()> {
    let n = state.norm_squared();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// H_max^eps(target|condition) of a pure state through the dual
/// min-entropy on target and the remaining labels.
pub fn smooth_max_pure(
    state: &PureState,
    target: &[&str],
    condition: &[&str],
    epsilon: f64,
) -> Result<EntropyResult> {
    check_epsilon(epsilon)?;
    require_pure_normalized(state)?;
    for l in target.iter().chain(condition) {
        state.dims().index_of(l)?;
    }
    let rest: Vec<&str> = state
        .dims()
        .labels()
        .into_iter()
        .filter(|l| !target.contains(l) && !condition.contains(l))
        .collect();
    let mut keep = target.to_vec();
    keep.extend_from_slice(&rest);
    let rho = state.reduced(&keep)?;
    let inner = if epsilon == 0.0 {
        h_min(&rho, target, &rest)?
    } else {
        h_min_smooth(&rho, target, &rest, epsilon)?
    };
    Ok(EntropyResult { value: -inner.value, optimizer_sigma: None, smoothed_state: None, ..inner })
}

/// Achievability: H_max^{eps^2/13}(A|B) - 4 log eps + 2 log 13, with the
/// realizing registers.
pub fn cost_achievable(state: &PureState, target: &[&str], condition: &[&str], epsilon: f64) -> Result<CostBound> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("merging error {epsilon} must lie in (0, 1)")));
    }
    let smoothing = epsilon * epsilon / 13.0;
    let h = smooth_max_pure(state, target, condition, smoothing)?;
    let value = h.value - 4.0 * epsilon.log2() + 2.0 * 13f64.log2();
    let dim_a = state.dims().dim_of_set(target)?;
    Ok(CostBound {
        epsilon,
        smoothing,
        h_max: h.value,
        value,
        certificate_gap: h.certificate_gap,
        realized: Some(realize_cost(value, dim_a)?),
    })
}

/// Converse: H_max^{4 sqrt eps}(A|B) + log eps - 1. Errors with
/// [`Error::SmoothingOutOfRange`] when 4 sqrt(eps) >= 1.
pub fn cost_converse(state: &PureState, target: &[&str], condition: &[&str], epsilon: f64) -> Result<CostBound> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("merging error {epsilon} must lie in (0, 1)")));
    }
    let smoothing = 4.0 * epsilon.sqrt();
    if smoothing >= 1.0 {
        return Err(Error::SmoothingOutOfRange(smoothing));
    }
    let h = smooth_max_pure(state, target, condition, smoothing)?;
    Ok(CostBound {
        epsilon,
        smoothing,
        h_max: h.value,
        value: h.value + epsilon.log2() - 1.0,
        certificate_gap: h.certificate_gap,
        realized: None,
    })
}

/// `n` copies of a state on labels A, B, E, regrouped as A^n, B^n, E^n.
pub fn iid_power(psi: &PureState, n: usize) -> Result<PureState> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one copy".into()));
    }
    let base = psi.reorder(&["A", "B", "E"])?;
    let mut acc: Option<PureState> = None;
    for i in 0..n {
        let copy = base
            .relabel("A", &format!("A{i}"))?
            .relabel("B", &format!("B{i}"))?
            .relabel("E", &format!("E{i}"))?;
        acc = Some(match acc {
            None => copy,
            Some(a) => a.tensor(&copy)?,
        });
    }
    let all = acc.expect("n >= 1");
    let order: Vec<String> = ["A", "B", "E"]
        .iter()
        .flat_map(|p| (0..n).map(move |i| format!("{p}{i}")))
        .collect();
    let refs: Vec<&str> = order.iter().map(String::as_str).collect();
    let grouped = all.reorder(&refs)?;
    let d = |l: &str| base.dims().dim_of(l).map(|x| x.pow(n as u32));
    let dims = DimsLabel::new([("A", d("A")?), ("B", d("B")?), ("E", d("E")?)])?;
    PureState::new(dims, grouped.amplitudes().clone())
}

/// Achievable cost per copy for n = 1..=n_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidTrend {
    pub epsilon: f64,
    pub rates: Vec<f64>,
    pub bounds: Vec<CostBound>,
    /// H(A|B) of a single copy, the asymptotic rate.
    pub conditional_entropy: f64,
    /// Rates are non-increasing in n.
    pub monotone: bool,
}

pub fn iid_cost_trend(beta: &PureState, epsilon: f64, n_max: usize) -> Result<IidTrend> {
    let mut bounds = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        bounds.push(cost_achievable(&iid_power(beta, n)?, &["A"], &["B"], epsilon)?);
    }
    let rates: Vec<f64> = bounds.iter().enumerate().map(|(i, b)| b.value / (i + 1) as f64).collect();
    let monotone = rates.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let ab = beta.reduced(&["A", "B"])?;
    Ok(IidTrend { epsilon, rates, bounds, conditional_entropy: von_neumann(&ab, &["A"], &["B"])?, monotone })
}
