//! Conditional entropies in bits: von Neumann, min, max, collision and the
//! epsilon-smooth min/max entropies.
//!
//! Min and max entropies come from the SDP solver (closed forms when the
//! conditioning system is empty). Smooth entropies optimize jointly over the
//! smoothing ball and the conditioning operator in a single SDP.

mod collision;
mod minmax;
mod smooth;

use serde::{Deserialize, Serialize};

use crate::linalg::{eigh, CMatrix, DimsLabel, StateOperator};
use crate::sdp::{LmiBuilder, LmiSolution, SdpOptions, SdpStatus};
use crate::{Error, Result};

pub use collision::{h2, h2_at};
pub use minmax::{h_max, h_max_via_duality, h_min};
pub use smooth::{h_max_smooth, h_min_smooth};
pub(crate) use smooth::h_min_smooth_subnormalized;

/// Outcome of an entropy evaluation.
#[derive(Debug, Clone)]
pub struct EntropyResult {
    /// Value in bits.
    pub value: f64,
    /// Normalized conditioning operator achieving the value, when computed.
    pub optimizer_sigma: Option<StateOperator>,
    /// Smoothed state (on target then condition labels) for smooth entropies.
    pub smoothed_state: Option<StateOperator>,
    /// Disagreement in bits between the primal and dual bounds of the SDP.
    pub certificate_gap: f64,
    /// Set when the value is only known to be a lower bound of the defining
    /// supremum (collision entropy).
    pub lower_bound: bool,
    /// Difference to an independent evaluation route, when one was run.
    pub cross_check: Option<f64>,
}

impl EntropyResult {
    pub(crate) fn exact(value: f64) -> Self {
        Self {
            value,
            optimizer_sigma: None,
            smoothed_state: None,
            certificate_gap: 0.0,
            lower_bound: false,
            cross_check: None,
        }
    }
}

/// Which entropy to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyKind {
    Vn,
    Hmin,
    Hmax,
    H2,
}

impl std::str::FromStr for EntropyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vn" | "von-neumann" => Ok(Self::Vn),
            "hmin" => Ok(Self::Hmin),
            "hmax" => Ok(Self::Hmax),
            "h2" => Ok(Self::H2),
            other => Err(Error::InvalidParameter(format!("unknown entropy kind `{other}`"))),
        }
    }
}

/// A conditional-entropy query H(target | condition) of a state.
#[derive(Debug, Clone)]
pub struct EntropyRequest {
    pub state: StateOperator,
    pub target: Vec<String>,
    pub condition: Vec<String>,
    pub epsilon: f64,
}

impl EntropyRequest {
    pub fn new(
        state: StateOperator,
        target: &[&str],
        condition: &[&str],
        epsilon: f64,
    ) -> Result<Self> {
        let req = Self {
            state,
            target: target.iter().map(|s| s.to_string()).collect(),
            condition: condition.iter().map(|s| s.to_string()).collect(),
            epsilon,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        Bipartite::new(&self.state, &self.target_refs(), &self.condition_refs()).map(|_| ())
    }

    fn target_refs(&self) -> Vec<&str> {
        self.target.iter().map(String::as_str).collect()
    }

    fn condition_refs(&self) -> Vec<&str> {
        self.condition.iter().map(String::as_str).collect()
    }

    /// Evaluate. Smoothing applies to `Hmin`/`Hmax`; `H2` runs the ascent.
    pub fn evaluate(&self, kind: EntropyKind) -> Result<EntropyResult> {
        let t = self.target_refs();
        let c = self.condition_refs();
        match kind {
            EntropyKind::Vn => Ok(EntropyResult::exact(von_neumann(&self.state, &t, &c)?)),
            EntropyKind::Hmin => h_min_smooth(&self.state, &t, &c, self.epsilon),
            EntropyKind::Hmax => h_max_smooth(&self.state, &t, &c, self.epsilon),
            EntropyKind::H2 => h2(&self.state, &t, &c, true),
        }
    }
}

pub(crate) fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) || !eps.is_finite() {
        return Err(Error::SmoothingOutOfRange(eps));
    }
    Ok(())
}

/// The operator reduced to target and condition labels, ordered target first.
pub(crate) struct Bipartite {
    pub rho: CMatrix,
    pub d_a: usize,
    pub d_b: usize,
    pub dims: DimsLabel,
    pub cond_dims: DimsLabel,
}

impl Bipartite {
    pub fn new(state: &StateOperator, target: &[&str], condition: &[&str]) -> Result<Self> {
        for t in target {
            if condition.contains(t) {
                return Err(Error::InvalidParameter(format!(
                    "label `{t}` is both target and condition"
                )));
            }
        }
        for (i, l) in target.iter().chain(condition).enumerate() {
            state.dims().index_of(l)?;
            if target.iter().chain(condition).take(i).any(|m| m == l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
        }
        let mut keep: Vec<&str> = target.to_vec();
        keep.extend_from_slice(condition);
        let red = state.partial_trace(&keep)?.reorder(&keep)?;
        let d_a = state.dims().dim_of_set(target)?;
        let d_b = state.dims().dim_of_set(condition)?;
        let cond_positions: Vec<usize> = (target.len()..keep.len()).collect();
        let cond_dims = red.dims().select(&cond_positions);
        Ok(Self { d_a, d_b, cond_dims, dims: red.dims().clone(), rho: red.into_matrix() })
    }

    /// Marginal on the condition system.
    pub fn rho_b(&self) -> CMatrix {
        crate::linalg::partial_trace_matrix(&self.rho, &[self.d_a, self.d_b], &[1])
    }
}

fn shannon_bits(values: &[f64]) -> f64 {
    values.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// H(AB) - H(B) in bits for a normalized state.
pub fn von_neumann(state: &StateOperator, target: &[&str], condition: &[&str]) -> Result<f64> {
    state.require_normalized(1e-9)?;
    let bp = Bipartite::new(state, target, condition)?;
    let h_ab = shannon_bits(&eigh(&bp.rho).values);
    let h_b = shannon_bits(&eigh(&bp.rho_b()).values);
    Ok(h_ab - h_b)
}

/// Solve an LMI, retrying once with a more conservative step before giving
/// up. Errors carry `context`.
pub(crate) fn solve_lmi(builder: &LmiBuilder, context: &str) -> Result<LmiSolution> {
    let first = builder.solve(&SdpOptions::default())?;
    if first.status == SdpStatus::Optimal {
        return Ok(first);
    }
    let opts = SdpOptions { step_fraction: 0.9, max_iter: 400, ..SdpOptions::default() };
    let second = builder.solve(&opts)?;
    if second.status == SdpStatus::Optimal {
        return Ok(second);
    }
    // Thin feasible sets (fidelity floors close to one) can stall the
    // interior point method with y feasible but the gap stuck slightly above
    // tolerance. Such a y still certifies its objective value, so accept it
    // when the remaining gap is small; callers report the gap.
    let usable = |s: &LmiSolution| {
        s.status == SdpStatus::MaxIter
            && s.sdp.dual_residual <= SdpOptions::default().feas_tol
            && s.gap.abs() <= STALLED_GAP_TOL * (1.0 + s.value.abs())
    };
    let msg = format!(
        "{context}: status {:?} (gap {:.3e}, primal residual {:.3e}, dual residual {:.3e})",
        second.status, second.gap, second.sdp.primal_residual, second.sdp.dual_residual
    );
    [first, second]
        .into_iter()
        .filter(usable)
        .min_by(|a, b| a.gap.abs().total_cmp(&b.gap.abs()))
        .ok_or(Error::Sdp(msg))
}

/// Relative duality gap accepted from a stalled solve whose LMI variable is
/// feasible.
const STALLED_GAP_TOL: f64 = 1e-4;

/// |log2 a - log2 b| for two positive bounds on the same quantity.
pub(crate) fn log_gap(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        (a.log2() - b.log2()).abs()
    } else {
        f64::INFINITY
    }
}

/// A label not used in `dims`, derived from `base`.
pub(crate) fn fresh_label(dims: &DimsLabel, base: &str) -> String {
    if !dims.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}{i}")).find(|l| !dims.contains(l)).expect("unbounded search")
}

/// Clean a numerically PSD Hermitian matrix: Hermitian part with negative
/// eigenvalues clipped.
pub(crate) fn clip_psd(m: &CMatrix) -> CMatrix {
    eigh(m).map(|l| l.max(0.0))
}
