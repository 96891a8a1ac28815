//! Completely positive maps stored as Choi operators.
//!
//! Normalization: J(T) = (I (x) T)(|Phi><Phi|) with |Phi> = |A|^{-1/2} sum_x
//! |x>|x>, so tr J(I) = 1 and a trace-preserving map has tr_B J = I/|A|.
//! Kraus operators are extracted once at construction and cached.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{
    check_cap, cr, eigh, kron, partial_trace_matrix, CMatrix, DimsLabel, StateJson,
    StateOperator,
};
use crate::{Error, Result};

/// Label of the reference (input copy) factor of a Choi operator.
pub const CHOI_IN: &str = "A'";
/// Label of the output factor of a Choi operator.
pub const CHOI_OUT: &str = "B";

const TRACE_CLASS_TOL: f64 = 1e-9;
const KRAUS_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceClass {
    TracePreserving,
    TraceNonIncreasing,
    General,
}

/// Kraus operators, each `dim_out x dim_in`.
#[derive(Debug, Clone)]
pub struct KrausSet {
    pub operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::InvalidParameter("empty Kraus set".into()));
        };
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidDim(0));
        }
        if operators.iter().any(|k| k.shape() != shape) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        Ok(Self { operators })
    }

    pub fn dim_in(&self) -> usize {
        self.operators[0].ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.operators[0].nrows()
    }

    /// sum_k K_k^dagger K_k
    pub fn completeness(&self) -> CMatrix {
        let d = self.dim_in();
        self.operators.iter().fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k)
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    dim_in: usize,
    dim_out: usize,
    choi: StateOperator,
    trace_class: TraceClass,
    kraus: Vec<CMatrix>,
}

impl PartialEq for Channel {
    fn eq(&self, other: &Self) -> bool {
        self.dim_in == other.dim_in && self.dim_out == other.dim_out && self.choi == other.choi
    }
}

fn choi_dims(dim_in: usize, dim_out: usize) -> Result<DimsLabel> {
    DimsLabel::new([(CHOI_IN, dim_in), (CHOI_OUT, dim_out)])
}

/// J = (1/d_in) sum_k vec(K_k) vec(K_k)^dagger, vec index x*d_out + b.
fn choi_matrix_of(ops: &[CMatrix], dim_in: usize, dim_out: usize) -> CMatrix {
    let n = dim_in * dim_out;
    let mut j = CMatrix::zeros(n, n);
    for k in ops {
        let v = CMatrix::from_fn(n, 1, |r, _| k[(r % dim_out, r / dim_out)]);
        j += &v * v.adjoint();
    }
    j / cr(dim_in as f64)
}

fn classify(choi: &CMatrix, dim_in: usize, dim_out: usize) -> TraceClass {
    let marg = partial_trace_matrix(choi, &[dim_in, dim_out], &[0]);
    let diff = marg - CMatrix::identity(dim_in, dim_in) / cr(dim_in as f64);
    if diff.iter().all(|z| z.norm() <= TRACE_CLASS_TOL) {
        TraceClass::TracePreserving
    } else if eigh(&diff).max() <= TRACE_CLASS_TOL {
        TraceClass::TraceNonIncreasing
    } else {
        TraceClass::General
    }
}

impl Channel {
    /// From a Choi matrix on (input reference) (x) (output). Must be PSD.
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: CMatrix) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::InvalidDim(0));
        }
        check_cap(dim_in * dim_out)?;
        let choi = StateOperator::new_unnormalized(choi_dims(dim_in, dim_out)?, choi)?;
        let trace_class = classify(choi.matrix(), dim_in, dim_out);
        let kraus = kraus_from_choi(choi.matrix(), dim_in, dim_out);
        Ok(Self { dim_in, dim_out, choi, trace_class, kraus })
    }

    /// `choi_of`: the Choi operator of a Kraus representation.
    pub fn from_kraus(set: &KrausSet) -> Result<Self> {
        let (di, dout) = (set.dim_in(), set.dim_out());
        check_cap(di * dout)?;
        let mut ch = Self::from_choi(di, dout, choi_matrix_of(&set.operators, di, dout))?;
        // An orthogonal set of nonzero operators is already minimal; keeping
        // it preserves the caller's environment basis in the dilation.
        if hs_orthogonal(&set.operators) {
            ch.kraus = set.operators.clone();
        }
        Ok(ch)
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::from_kraus(&KrausSet::new(vec![CMatrix::identity(d, d)])?)
    }

    /// Complete measurement in the computational basis.
    pub fn measurement(d: usize) -> Result<Self> {
        let ops = (0..d)
            .map(|i| {
                let mut k = CMatrix::zeros(d, d);
                k[(i, i)] = cr(1.0);
                k
            })
            .collect();
        Self::from_kraus(&KrausSet::new(ops)?)
    }

    /// sigma -> tr(sigma) |0><0| with an output space of dimension `d_out`.
    pub fn erasure(d_in: usize, d_out: usize) -> Result<Self> {
        let ops = (0..d_in)
            .map(|i| {
                let mut k = CMatrix::zeros(d_out, d_in);
                k[(0, i)] = cr(1.0);
                k
            })
            .collect();
        Self::from_kraus(&KrausSet::new(ops)?)
    }

    /// Tensor product of two maps acting on separate factors (self first).
    pub fn tensor(&self, other: &Channel) -> Result<Self> {
        let mut ops = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                ops.push(kron(a, b));
            }
        }
        if ops.is_empty() {
            let (di, dout) = (self.dim_in * other.dim_in, self.dim_out * other.dim_out);
            return Self::from_choi(di, dout, CMatrix::zeros(di * dout, di * dout));
        }
        Self::from_kraus(&KrausSet::new(ops)?)
    }

    /// Random trace-preserving map from a Haar isometry into out (x) env.
    pub fn random_tpcpm<R: rand::Rng + ?Sized>(
        dim_in: usize,
        dim_out: usize,
        dim_env: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let v = crate::haar::haar_isometry(dim_in, dim_out * dim_env, rng)?;
        let ops = (0..dim_env)
            .map(|e| CMatrix::from_fn(dim_out, dim_in, |b, x| v[(b * dim_env + e, x)]))
            .collect();
        Self::from_kraus(&KrausSet::new(ops)?)
    }

    /// Random CPM: a Wishart Choi matrix with trace `trace`.
    pub fn random_cpm<R: rand::Rng + ?Sized>(
        dim_in: usize,
        dim_out: usize,
        trace: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n = dim_in * dim_out;
        let rho = crate::linalg::random_density_matrix(n, n, rng);
        Self::from_choi(dim_in, dim_out, rho * cr(trace))
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// The Choi operator on labels (`A'`, `B`).
    pub fn choi(&self) -> &StateOperator {
        &self.choi
    }

    /// The Choi operator relabeled to (`input`, `output`).
    pub fn choi_labeled(&self, input: &str, output: &str) -> Result<StateOperator> {
        let dims = DimsLabel::new([(input, self.dim_in), (output, self.dim_out)])?;
        Ok(StateOperator::from_parts(dims, self.choi.matrix().clone()))
    }

    pub fn trace_class(&self) -> TraceClass {
        self.trace_class
    }

    /// `kraus_of`: eigenvectors of the Choi matrix above the cutoff.
    pub fn kraus(&self) -> KrausSet {
        KrausSet { operators: self.kraus.clone() }
    }

    pub fn kraus_rank(&self) -> usize {
        self.kraus.len()
    }

    /// tr_{A'} J(T) = T(I/|A|).
    pub fn tau_b(&self) -> CMatrix {
        partial_trace_matrix(self.choi.matrix(), &[self.dim_in, self.dim_out], &[1])
    }

    fn require_tp(&self) -> Result<()> {
        if self.trace_class != TraceClass::TracePreserving {
            return Err(Error::NotTracePreserving);
        }
        Ok(())
    }

    /// Choi contraction on a matrix ordered (input, rest):
    /// T(|a><a'|) = |A| * J block (a, a').
    pub(crate) fn apply_matrix(&self, rho: &CMatrix, rest: usize) -> CMatrix {
        let (da, db) = (self.dim_in, self.dim_out);
        let j = self.choi.matrix();
        let jr = CMatrix::from_fn(db * db, da * da, |bb, aa| {
            let (b, b2) = (bb / db, bb % db);
            let (a, a2) = (aa / da, aa % da);
            j[(a * db + b, a2 * db + b2)]
        });
        let r = CMatrix::from_fn(da * da, rest * rest, |aa, rr| {
            let (a, a2) = (aa / da, aa % da);
            let (x, x2) = (rr / rest, rr % rest);
            rho[(a * rest + x, a2 * rest + x2)]
        });
        let o = jr * r * cr(da as f64);
        CMatrix::from_fn(db * rest, db * rest, |i, k| {
            let (b, x) = (i / rest, i % rest);
            let (b2, x2) = (k / rest, k % rest);
            o[(b * db + b2, x * rest + x2)]
        })
    }

    /// Kraus route on a matrix ordered (input, rest).
    pub(crate) fn apply_matrix_kraus(&self, rho: &CMatrix, rest: usize) -> CMatrix {
        let id = CMatrix::identity(rest, rest);
        let n = self.dim_out * rest;
        self.kraus.iter().fold(CMatrix::zeros(n, n), |acc, k| {
            let full = kron(k, &id);
            acc + &full * rho * full.adjoint()
        })
    }

    fn apply_with(
        &self,
        state: &StateOperator,
        on: &[&str],
        output: &str,
        f: impl Fn(&Self, &CMatrix, usize) -> CMatrix,
    ) -> Result<StateOperator> {
        if on.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one input label".into()));
        }
        let din = state.dims().dim_of_set(on)?;
        if din != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "channel input dim {} but labels {:?} have dim {din}",
                self.dim_in, on
            )));
        }
        let labels = state.dims().labels();
        let first = labels.iter().position(|l| on.contains(l)).expect("labels checked");
        let rest_labels: Vec<&str> = labels.iter().copied().filter(|l| !on.contains(l)).collect();
        if rest_labels.contains(&output) {
            return Err(Error::DuplicateLabel(output.to_string()));
        }
        let rest_dim = state.dims().total() / din;
        check_cap(self.dim_out * rest_dim)?;
        let front = state.bring_to_front(on)?;
        let out = f(self, front.matrix(), rest_dim);
        let rest_positions: Vec<usize> = (on.len()..front.dims().len()).collect();
        let out_dims = DimsLabel::single(output, self.dim_out)?
            .concat(&front.dims().select(&rest_positions))?;
        let result = StateOperator::from_parts(out_dims, out);
        // put the output where the first input label used to be
        let before: Vec<&str> = labels[..first].iter().copied().filter(|l| !on.contains(l)).collect();
        let mut order = before.clone();
        order.push(output);
        order.extend(rest_labels.iter().skip(before.len()));
        result.reorder(&order)
    }

    /// Apply to the subsystems `on` (their combined dimension must be the
    /// input dimension); the output factor is labeled `output` and sits where
    /// the first input label was.
    pub fn apply(&self, state: &StateOperator, on: &[&str], output: &str) -> Result<StateOperator> {
        self.apply_with(state, on, output, Self::apply_matrix)
    }

    /// Same as [`Channel::apply`] through the Kraus operators.
    pub fn apply_kraus(
        &self,
        state: &StateOperator,
        on: &[&str],
        output: &str,
    ) -> Result<StateOperator> {
        self.apply_with(state, on, output, Self::apply_matrix_kraus)
    }

    /// Isometry V: C^{d_in} -> C^{d_out} (x) C^{env} with env = Kraus rank,
    /// V|x> = sum_k K_k|x> (x) |k>.
    pub fn stinespring(&self) -> Result<Stinespring> {
        self.require_tp()?;
        let env = self.kraus.len();
        let v = CMatrix::from_fn(self.dim_out * env, self.dim_in, |r, x| {
            self.kraus[r % env][(r / env, x)]
        });
        Ok(Stinespring { v, dim_out: self.dim_out, dim_env: env })
    }

    /// The map to the environment of the Stinespring dilation.
    pub fn complementary(&self) -> Result<Channel> {
        let s = self.stinespring()?;
        let env = s.dim_env;
        let ops = (0..self.dim_out)
            .map(|b| CMatrix::from_fn(env, self.dim_in, |k, x| s.v[(b * env + k, x)]))
            .collect();
        Self::from_kraus(&KrausSet::new(ops)?)
    }

    pub fn to_json_value(&self) -> ChannelJson {
        ChannelJson {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            choi: StateJson::from_state(&self.choi),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ChannelJson = serde_json::from_str(text)?;
        j.to_channel()
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn hs_orthogonal(ops: &[CMatrix]) -> bool {
    let norms: Vec<f64> = ops.iter().map(|k| k.norm_squared()).collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    if norms.iter().any(|&n| n <= KRAUS_CUTOFF * scale) {
        return false;
    }
    for i in 0..ops.len() {
        for j in 0..i {
            let ip = ops[i].dotc(&ops[j]).norm();
            if ip > 1e-12 * (norms[i] * norms[j]).sqrt() {
                return false;
            }
        }
    }
    true
}

fn kraus_from_choi(j: &CMatrix, dim_in: usize, dim_out: usize) -> Vec<CMatrix> {
    let e = eigh(j);
    let cut = KRAUS_CUTOFF * j.trace().re.max(0.0);
    let scale = dim_in as f64;
    (0..e.values.len())
        .rev()
        .filter(|&i| e.values[i] > cut)
        .map(|i| {
            let s = (scale * e.values[i]).sqrt();
            CMatrix::from_fn(dim_out, dim_in, |b, x| e.vectors[(x * dim_out + b, i)] * s)
        })
        .collect()
}

/// Stinespring isometry with output ordering (channel output, environment).
#[derive(Debug, Clone)]
pub struct Stinespring {
    pub v: CMatrix,
    pub dim_out: usize,
    pub dim_env: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    pub dim_in: usize,
    pub dim_out: usize,
    pub choi: StateJson,
}

impl ChannelJson {
    pub fn to_channel(&self) -> Result<Channel> {
        let m = self.choi.matrix.to_matrix()?;
        let side = self.dim_in * self.dim_out;
        if m.nrows() != side {
            return Err(Error::DimensionMismatch(format!(
                "choi side {} but dim_in * dim_out = {side}",
                m.nrows()
            )));
        }
        Channel::from_choi(self.dim_in, self.dim_out, m)
    }
}

/// The five builders of the mapping table, on `m` input qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelSpec {
    /// identity on m qubits
    Identity { m: u32 },
    /// computational-basis measurement of m qubits
    Measure { m: u32 },
    /// sigma -> tr(sigma)|0><0| on m qubits (output kept m qubits wide)
    Erase { m: u32 },
    /// identity on the first m' qubits, measurement on the other m - m'
    IdMeasure { m: u32, m_prime: u32 },
    /// identity on the first m' qubits, the other m - m' traced out
    IdTrace { m: u32, m_prime: u32 },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<Channel> {
        let q = |k: u32| -> Result<usize> {
            1usize
                .checked_shl(k)
                .filter(|&d| d <= crate::linalg::dim_cap())
                .ok_or(Error::DimensionCap { dim: usize::MAX, cap: crate::linalg::dim_cap() })
        };
        match *self {
            Self::Identity { m } => Channel::identity(q(m)?),
            Self::Measure { m } => Channel::measurement(q(m)?),
            Self::Erase { m } => {
                let d = q(m)?;
                Channel::erasure(d, d)
            }
            Self::IdMeasure { m, m_prime } => {
                check_split(m, m_prime)?;
                Channel::identity(q(m_prime)?)?.tensor(&Channel::measurement(q(m - m_prime)?)?)
            }
            Self::IdTrace { m, m_prime } => {
                check_split(m, m_prime)?;
                Channel::identity(q(m_prime)?)?.tensor(&Channel::erasure(q(m - m_prime)?, 1)?)
            }
        }
    }

    pub fn input_qubits(&self) -> u32 {
        match *self {
            Self::Identity { m }
            | Self::Measure { m }
            | Self::Erase { m }
            | Self::IdMeasure { m, .. }
            | Self::IdTrace { m, .. } => m,
        }
    }
}

fn check_split(m: u32, m_prime: u32) -> Result<()> {
    if m_prime > m {
        return Err(Error::InvalidParameter(format!("m' = {m_prime} exceeds m = {m}")));
    }
    Ok(())
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Identity { m } => write!(f, "id:{m}"),
            Self::Measure { m } => write!(f, "meas:{m}"),
            Self::Erase { m } => write!(f, "erase:{m}"),
            Self::IdMeasure { m, m_prime } => write!(f, "id+meas:{m},{m_prime}"),
            Self::IdTrace { m, m_prime } => write!(f, "id+trace:{m},{m_prime}"),
        }
    }
}

impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad channel spec `{s}`"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<u32> = args
            .split(',')
            .map(|a| a.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let spec = match (kind, nums.as_slice()) {
            ("id", [m]) => Self::Identity { m: *m },
            ("meas", [m]) => Self::Measure { m: *m },
            ("erase", [m]) => Self::Erase { m: *m },
            ("id+meas", [m, mp]) => Self::IdMeasure { m: *m, m_prime: *mp },
            ("id+trace", [m, mp]) => Self::IdTrace { m: *m, m_prime: *mp },
            _ => return Err(bad()),
        };
        if let Self::IdMeasure { m, m_prime } | Self::IdTrace { m, m_prime } = spec {
            check_split(m, m_prime)?;
        }
        Ok(spec)
    }
}
