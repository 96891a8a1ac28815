//! Haar-random unitaries, the exact two-copy twirl and Weyl operators.
//!
//! Sampling is indexed: sample `i` of an experiment draws from a generator
//! seeded by a deterministic function of `(seed, stream, i)`, so results do
//! not depend on how samples are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{check_cap, cr, ginibre, swap_operator_unchecked, CMatrix, C64};
use crate::{Error, Result};

/// Seed plus a stream name; distinct streams give independent sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: String,
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a; stable across builds, unlike the std hasher.
fn stream_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl RngSeed {
    pub fn new(seed: u64, stream: impl Into<String>) -> Self {
        Self { seed, stream: stream.into() }
    }

    /// Generator for sample `index`.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let k0 = splitmix(self.seed);
        let k1 = splitmix(k0 ^ stream_hash(&self.stream));
        let k2 = splitmix(k1 ^ index);
        let k3 = splitmix(k2 ^ 0x5851_F42D_4C95_7F2D);
        let mut key = [0u8; 32];
        for (i, k) in [k0, k1, k2, k3].iter().enumerate() {
            key[8 * i..8 * i + 8].copy_from_slice(&k.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Same seed, derived stream name.
    pub fn substream(&self, name: &str) -> Self {
        Self { seed: self.seed, stream: format!("{}/{}", self.stream, name) }
    }
}

/// Haar-distributed unitary: Ginibre matrix, QR, then the phases of diag(R)
/// moved into Q.
pub fn haar_unitary<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    assert!(d >= 1, "unitary dimension must be positive");
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let ph = if n > 0.0 { rjj / n } else { cr(1.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Haar-random isometry C^d_in -> C^d_out (first columns of a Haar unitary).
pub fn haar_isometry<R: rand::Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Result<CMatrix> {
    if d_in > d_out || d_in == 0 {
        return Err(Error::InvalidParameter(format!("no isometry from dim {d_in} into {d_out}")));
    }
    Ok(haar_unitary(d_out, rng).columns(0, d_in).into_owned())
}

/// `rows` orthonormal rows distributed like the first rows of a Haar
/// unitary on C^cols, without forming the full unitary.
pub fn haar_rows<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<CMatrix> {
    if rows > cols || rows == 0 {
        return Err(Error::InvalidParameter(format!("cannot draw {rows} orthonormal rows in dim {cols}")));
    }
    // Gram-Schmidt with one re-orthogonalization pass on the Ginibre columns
    // equals thin QR with a positive diagonal in R, and keeps the inner loops
    // on contiguous memory for very tall inputs.
    let mut q = ginibre(cols, rows, rng);
    for j in 0..rows {
        for _ in 0..2 {
            for i in 0..j {
                let (done, rest) = q.as_mut_slice().split_at_mut(j * cols);
                let qi = &done[i * cols..(i + 1) * cols];
                let qj = &mut rest[..cols];
                let c: C64 = qi.iter().zip(qj.iter()).map(|(a, b)| a.conj() * b).sum();
                for (b, a) in qj.iter_mut().zip(qi) {
                    *b -= c * a;
                }
            }
        }
        let mut col = q.column_mut(j);
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::Invariant("degenerate Gaussian sample".into()));
        }
        col.unscale_mut(n);
    }
    Ok(q.transpose())
}

/// Coefficients of the twirl alpha I + beta F. Real for Hermitian input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwirlCoefficients {
    pub alpha: C64,
    pub beta: C64,
}

impl TwirlCoefficients {
    /// Residuals of tr M = a d^2 + b d and tr MF = a d + b d^2.
    pub fn residual(&self, m: &CMatrix) -> Result<f64> {
        let d = side_root(m)?;
        let df = d as f64;
        let f = swap_operator_unchecked(d);
        let r1 = m.trace() - self.alpha * df * df - self.beta * df;
        let r2 = (m * &f).trace() - self.alpha * df - self.beta * df * df;
        Ok(r1.norm().max(r2.norm()))
    }
}

fn side_root(m: &CMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let n = m.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || d == 0 {
        return Err(Error::DimensionMismatch(format!("side {n} is not a square d^2")));
    }
    Ok(d)
}

/// Haar average of U^{(x)2} M U^dagger{(x)2} on C^d (x) C^d, returned as its
/// coefficients and the matrix alpha I + beta F. At d = 1 the identity and
/// the swap coincide; the convention is alpha = tr M, beta = 0.
pub fn twirl_exact(m: &CMatrix) -> Result<(TwirlCoefficients, CMatrix)> {
    let d = side_root(m)?;
    check_cap(d * d)?;
    let f = swap_operator_unchecked(d);
    let tr_m = m.trace();
    if d == 1 {
        let c = TwirlCoefficients { alpha: tr_m, beta: cr(0.0) };
        return Ok((c, CMatrix::from_element(1, 1, tr_m)));
    }
    let tr_mf = (m * &f).trace();
    let df = d as f64;
    let den = df * (df * df - 1.0);
    let alpha = (tr_m * df - tr_mf) / den;
    let beta = (tr_mf * df - tr_m) / den;
    let out = CMatrix::identity(d * d, d * d) * alpha + f * beta;
    Ok((TwirlCoefficients { alpha, beta }, out))
}

/// The d^2 Weyl operators X^a Z^b, indexed a*d + b (so the first is I).
pub fn weyl_operators(d: usize) -> Vec<CMatrix> {
    assert!(d >= 1, "dimension must be positive");
    let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / d as f64);
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            // X^a Z^b |j> = w^{bj} |j + a>
            let mut m = CMatrix::zeros(d, d);
            for j in 0..d {
                m[((j + a) % d, j)] = w.powu((b * j) as u32);
            }
            out.push(m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, max_abs_diff, partial_trace_matrix, random_density_matrix};

    #[test]
    fn unitary_and_reproducible() {
        let s = RngSeed::new(3, "haar");
        for d in 1..6 {
            let u = haar_unitary(d, &mut s.rng(d as u64));
            let e = &u.adjoint() * &u - CMatrix::identity(d, d);
            assert!(e.iter().all(|z| z.norm() < 1e-12));
            let again = haar_unitary(d, &mut s.rng(d as u64));
            assert_eq!(u, again);
        }
        let one = haar_unitary(1, &mut s.rng(9));
        assert!((one[(0, 0)].norm() - 1.0).abs() < 1e-14);
        let first = |seed: &RngSeed| rand::RngCore::next_u64(&mut seed.rng(0));
        assert_ne!(first(&s), first(&s.substream("x")));
    }

    #[test]
    fn rank_one_projector_twirls_to_maximally_mixed() {
        let s = RngSeed::new(11, "mc");
        let n = 10_000;
        let mut sum = CMatrix::zeros(2, 2);
        let mut sq = vec![0.0; 4];
        for i in 0..n {
            let u = haar_unitary(2, &mut s.rng(i));
            let p = u.column(0) * u.column(0).adjoint();
            for k in 0..4 {
                sq[k] += p[(k / 2, k % 2)].norm_sqr();
            }
            sum += p;
        }
        let mean = sum / cr(n as f64);
        for k in 0..4 {
            let (r, c) = (k / 2, k % 2);
            let m = mean[(r, c)];
            let var = (sq[k] / n as f64 - m.norm_sqr()).max(0.0);
            let se = (var / n as f64).sqrt();
            let want = if r == c { 0.5 } else { 0.0 };
            assert!((m - cr(want)).norm() <= 3.0 * se + 1e-12, "entry {k}: {m} se {se}");
        }
    }

    #[test]
    fn left_invariance_of_moments() {
        // E|U_00|^2 = 1/d and E|U_00|^4 = 2/(d(d+1)) for Haar U, and these must
        // not change after multiplying by a fixed unitary.
        let d = 3;
        let s = RngSeed::new(12, "inv");
        let w = haar_unitary(d, &mut s.substream("w").rng(0));
        let n = 20_000u64;
        let (mut m2, mut m4, mut w2, mut w4) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let u = haar_unitary(d, &mut s.rng(i));
            let a = u[(0, 0)].norm_sqr();
            let b = (&w * &u)[(0, 0)].norm_sqr();
            m2 += a;
            m4 += a * a;
            w2 += b;
            w4 += b * b;
        }
        let nf = n as f64;
        let e4 = 2.0 / (d as f64 * (d as f64 + 1.0));
        // standard deviation of |U_00|^2 is below 0.3 at d = 3
        let tol = 3.0 * 0.3 / nf.sqrt();
        for v in [m2 / nf, w2 / nf] {
            assert!((v - 1.0 / d as f64).abs() < tol);
        }
        for v in [m4 / nf, w4 / nf] {
            assert!((v - e4).abs() < tol);
        }
    }

    #[test]
    fn twirl_fixed_points_and_equations() {
        for d in 1..5 {
            let id = CMatrix::identity(d * d, d * d);
            let (c, m) = twirl_exact(&id).unwrap();
            assert!((c.alpha - cr(1.0)).norm() < 1e-12 && c.beta.norm() < 1e-12);
            assert!(max_abs_diff(&m, &id) < 1e-12);
            if d > 1 {
                let f = swap_operator_unchecked(d);
                let (c, _) = twirl_exact(&f).unwrap();
                assert!(c.alpha.norm() < 1e-12 && (c.beta - cr(1.0)).norm() < 1e-12);
            }
        }
        let s = RngSeed::new(13, "eq");
        let mut rng = s.rng(0);
        for d in 2..5 {
            let m = ginibre(d * d, d * d, &mut rng);
            let (c, _) = twirl_exact(&m).unwrap();
            assert!(c.residual(&m).unwrap() <= 1e-10);
        }
        assert!(twirl_exact(&CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn twirl_matches_monte_carlo() {
        let d = 3;
        let s = RngSeed::new(14, "twirl");
        let m = ginibre(d * d, d * d, &mut s.substream("m").rng(0));
        let (_, exact) = twirl_exact(&m).unwrap();
        let n = 10_000u64;
        let mut sum = CMatrix::zeros(d * d, d * d);
        let mut sq = nalgebra::DMatrix::<f64>::zeros(d * d, d * d);
        for i in 0..n {
            let u = haar_unitary(d, &mut s.rng(i));
            let uu = kron(&u, &u);
            let t = &uu * &m * uu.adjoint();
            sq += t.map(|z| z.norm_sqr());
            sum += t;
        }
        let nf = n as f64;
        let mean = sum / cr(nf);
        for i in 0..d * d {
            for j in 0..d * d {
                let var = (sq[(i, j)] / nf - mean[(i, j)].norm_sqr()).max(0.0);
                let se = (var / nf).sqrt();
                assert!((mean[(i, j)] - exact[(i, j)]).norm() <= 5.0 * se + 1e-12);
            }
        }
    }

    #[test]
    fn weyl_operators_depolarize() {
        for d in 1..5 {
            let ops = weyl_operators(d);
            assert_eq!(ops.len(), d * d);
            assert!(max_abs_diff(&ops[0], &CMatrix::identity(d, d)) < 1e-15);
            for u in &ops {
                assert!(max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(d, d)) < 1e-12);
            }
            let mut rng = RngSeed::new(15, "weyl").rng(d as u64);
            let x = ginibre(d, d, &mut rng);
            let sum = ops.iter().fold(CMatrix::zeros(d, d), |acc, u| acc + u * &x * u.adjoint());
            let want = CMatrix::identity(d, d) * (x.trace() * cr(d as f64));
            assert!(max_abs_diff(&sum, &want) < 1e-10);
        }
    }

    #[test]
    fn weyl_twirl_on_one_factor() {
        let mut rng = RngSeed::new(16, "xi").rng(0);
        let xi = random_density_matrix(4, 4, &mut rng);
        let ops = weyl_operators(2);
        let mut sum = CMatrix::zeros(4, 4);
        for u in &ops {
            let full = kron(u, &CMatrix::identity(2, 2));
            sum += &full * &xi * full.adjoint();
        }
        let xi_b = partial_trace_matrix(&xi, &[2, 2], &[1]);
        let want = kron(&CMatrix::identity(2, 2), &xi_b) * cr(2.0);
        assert!(max_abs_diff(&sum, &want) < 1e-10);
    }

    #[test]
    fn qubit_weyl_are_paulis() {
        let ops = weyl_operators(2);
        // Z, X, XZ up to phase
        assert!((ops[1][(1, 1)] + cr(1.0)).norm() < 1e-12);
        assert!((ops[2][(1, 0)] - cr(1.0)).norm() < 1e-12);
        assert!((ops[3][(1, 0)] - cr(1.0)).norm() < 1e-12 && (ops[3][(0, 1)] + cr(1.0)).norm() < 1e-12);
    }

    #[test]
    fn haar_rows_are_orthonormal_and_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = haar_rows(3, 10, &mut rng).unwrap();
        let g = &r * r.adjoint();
        assert!(max_abs_diff(&g, &CMatrix::identity(3, 3)) < 1e-12);
        // E |r_00|^2 = 1/d for the first row of a Haar unitary.
        let n = 4000;
        let mean: f64 = (0..n)
            .map(|_| haar_rows(1, 4, &mut rng).unwrap()[(0, 0)].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 0.02, "{mean}");
        assert!(haar_rows(5, 4, &mut rng).is_err());
    }
}
