//! Builders for the standard test states on a system `A` and its
//! environment `E`: independent random bits, classically correlated bits
//! and maximally entangled qubits, plus seeded random states.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    cr, random_density_matrix, random_pure_vector, CMatrix, CVector, DimsLabel, PureState,
    StateOperator,
};
use crate::{Error, Result};

/// Largest `k` accepted by the builders (2^k-dimensional registers).
pub const MAX_QUBITS: u32 = 16;

fn register_dim(k: u32) -> Result<usize> {
    if k > MAX_QUBITS {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds {MAX_QUBITS} qubits")));
    }
    Ok(1usize << k)
}

fn ae_dims(d_a: usize, d_e: usize) -> Result<DimsLabel> {
    DimsLabel::new([("A", d_a), ("E", d_e)])
}

/// State of the environment in [`independent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvState {
    MaximallyMixed,
    Pure,
}

impl FromStr for EnvState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximally-mixed" | "mixed" => Ok(Self::MaximallyMixed),
            "pure" => Ok(Self::Pure),
            other => Err(Error::InvalidParameter(format!("unknown environment state `{other}`"))),
        }
    }
}

/// `k` uniformly random bits on A, independent of E: `1/2^k (x) rho_E`.
pub fn independent(k: u32, d_e: usize, env: EnvState) -> Result<StateOperator> {
    let d_a = register_dim(k)?;
    let dims = ae_dims(d_a, d_e)?;
    let mut rho_e = CMatrix::zeros(d_e, d_e);
    match env {
        EnvState::MaximallyMixed => rho_e.fill_diagonal(cr(1.0 / d_e as f64)),
        EnvState::Pure => rho_e[(0, 0)] = cr(1.0),
    }
    let m = crate::linalg::kron(&CMatrix::identity(d_a, d_a).map(|z| z / d_a as f64), &rho_e);
    StateOperator::new(dims, m)
}

/// `k` random bits on A with a classical copy in E: `sum_x 2^-k |xx><xx|`.
pub fn classical(k: u32) -> Result<StateOperator> {
    let d = register_dim(k)?;
    let mut m = CMatrix::zeros(d * d, d * d);
    for x in 0..d {
        m[(x * d + x, x * d + x)] = cr(1.0 / d as f64);
    }
    StateOperator::new(ae_dims(d, d)?, m)
}

/// `k` qubits on A maximally entangled with E.
pub fn entangled(k: u32) -> Result<StateOperator> {
    entangled_pure(k)?.to_operator()
}

/// The vector of [`entangled`]: `2^{-k/2} sum_x |x>_A |x>_E`.
pub fn entangled_pure(k: u32) -> Result<PureState> {
    let d = register_dim(k)?;
    let mut v = CVector::zeros(d * d);
    for x in 0..d {
        v[x * d + x] = cr(1.0 / (d as f64).sqrt());
    }
    PureState::new(ae_dims(d, d)?, v)
}

/// Purification of [`classical`] with Bob holding the second copy:
/// `2^{-k/2} sum_x |x>_A |x>_B |x>_E`.
pub fn classical_purified(k: u32) -> Result<PureState> {
    let d = register_dim(k)?;
    let mut v = CVector::zeros(d * d * d);
    for x in 0..d {
        v[(x * d + x) * d + x] = cr(1.0 / (d as f64).sqrt());
    }
    PureState::new(DimsLabel::new([("A", d), ("B", d), ("E", d)])?, v)
}

/// Purification `sum_ae sqrt(p[a][e]) |a>_A |a e>_B |e>_E` of a classical
/// joint distribution on A E, with Bob holding a copy of both. `rho_AE` is
/// diagonal and `H(A|B) = -H(A|E)`.
pub fn classical_side_purified(p: &[Vec<f64>]) -> Result<PureState> {
    let d_a = p.len();
    let d_e = p.first().map_or(0, Vec::len);
    if d_a == 0 || d_e == 0 || p.iter().any(|row| row.len() != d_e) {
        return Err(Error::InvalidParameter("joint distribution must be a non-empty rectangle".into()));
    }
    if p.iter().flatten().any(|&x| !(x >= 0.0)) || (p.iter().flatten().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("joint distribution must be non-negative and sum to 1".into()));
    }
    let d_b = d_a * d_e;
    let mut v = CVector::zeros(d_a * d_b * d_e);
    for (a, row) in p.iter().enumerate() {
        for (e, &q) in row.iter().enumerate() {
            v[(a * d_b + a * d_e + e) * d_e + e] = cr(q.sqrt());
        }
    }
    PureState::new(DimsLabel::new([("A", d_a), ("B", d_b), ("E", d_e)])?, v)
}

/// Random mixed state of the given rank on `A (x) E` (Ginibre ensemble).
pub fn random_mixed<R: Rng + ?Sized>(d_a: usize, d_e: usize, rank: usize, rng: &mut R) -> Result<StateOperator> {
    let dims = ae_dims(d_a, d_e)?;
    crate::linalg::check_cap(dims.total())?;
    let m = random_density_matrix(dims.total(), rank.max(1), rng);
    StateOperator::new(dims, m)
}

/// Haar-random pure state on `A (x) E`, as a density operator.
pub fn random_pure<R: Rng + ?Sized>(d_a: usize, d_e: usize, rng: &mut R) -> Result<StateOperator> {
    let dims = ae_dims(d_a, d_e)?;
    crate::linalg::check_cap(dims.total())?;
    PureState::new(dims.clone(), random_pure_vector(dims.total(), rng))?.to_operator()
}

/// Named family for command-line generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Independent,
    Classical,
    Entangled,
    RandomMixed,
    RandomPure,
    /// [`classical_purified`] on A, B, E, the merging input.
    Ghz,
}

impl FromStr for StateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Self::Independent),
            "classical" => Ok(Self::Classical),
            "entangled" => Ok(Self::Entangled),
            "random-mixed" => Ok(Self::RandomMixed),
            "random-pure" => Ok(Self::RandomPure),
            "ghz" => Ok(Self::Ghz),
            other => Err(Error::InvalidParameter(format!("unknown state kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::h_min;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_rows_for_small_k() {
        for k in 1..=2u32 {
            let kk = k as f64;
            let ind = independent(k, 2, EnvState::MaximallyMixed).unwrap();
            assert!((h_min(&ind, &["A"], &["E"]).unwrap().value - kk).abs() < 1e-6);
            let cl = classical(k).unwrap();
            assert!(h_min(&cl, &["A"], &["E"]).unwrap().value.abs() < 1e-6);
            let en = entangled(k).unwrap();
            assert!((h_min(&en, &["A"], &["E"]).unwrap().value + kk).abs() < 1e-6);
        }
    }

    #[test]
    fn entangled_marginal_is_maximally_mixed() {
        let rho_a = entangled(1).unwrap().partial_trace(&["A"]).unwrap();
        let expect = CMatrix::identity(2, 2).map(|z| z * 0.5);
        assert!(max_abs_diff(rho_a.matrix(), &expect) < 1e-14);
    }

    #[test]
    fn k_zero_is_trivial() {
        let s = classical(0).unwrap();
        assert_eq!(s.dims().total(), 1);
        assert!(h_min(&s, &["A"], &["E"]).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn independent_with_mixed_environment() {
        let s = independent(2, 3, EnvState::MaximallyMixed).unwrap();
        let expect = CMatrix::identity(12, 12).map(|z| z / 12.0);
        assert!(max_abs_diff(s.matrix(), &expect) < 1e-15);
    }

    #[test]
    fn purified_classical_reduces_to_classical() {
        let psi = classical_purified(2).unwrap();
        let ae = psi.reduced(&["A", "E"]).unwrap();
        assert!(max_abs_diff(ae.matrix(), classical(2).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn classical_side_has_diagonal_ae_marginal() {
        let p = [vec![0.5, 0.1], vec![0.1, 0.3]];
        let psi = classical_side_purified(&p).unwrap();
        let ae = psi.reduced(&["A", "E"]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { p[i / 2][i % 2] } else { 0.0 };
                assert!((ae.matrix()[(i, j)].re - want).abs() < 1e-15 && ae.matrix()[(i, j)].im == 0.0);
            }
        }
        assert!(classical_side_purified(&[vec![0.5], vec![0.4]]).is_err());
    }

    #[test]
    fn random_builders_are_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_mixed(2, 3, 2, &mut rng).unwrap();
        assert!((m.trace() - 1.0).abs() < 1e-12);
        let p = random_pure(2, 2, &mut rng).unwrap();
        assert!((p.trace() - 1.0).abs() < 1e-12);
    }
}
