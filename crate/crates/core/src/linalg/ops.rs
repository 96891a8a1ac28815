use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{cr, CMatrix, CVector, C64, PINV_THRESHOLD, TOL_PSD};

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// V diag(f(lambda)) V^dagger.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fj = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        dagger_mul_right(&scaled, &self.vectors)
    }
}

/// (m + m^dagger) / 2
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * cr(0.5)
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// a^dagger * b without materializing the adjoint.
pub fn dagger_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.ad_mul(b)
}

/// a * b^dagger
fn dagger_mul_right(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b.adjoint()
}

/// Hermitian eigensolve after explicit symmetrization.
///
/// nalgebra's tridiagonalization can return NaN on some highly structured
/// inputs (for instance the maximally entangled projector at d >= 8). Those
/// are retried in a rotated basis `Q H Q^dagger` with a fixed-seed Haar
/// unitary Q, and the eigenvectors rotated back.
pub fn eigh(m: &CMatrix) -> Eigh {
    assert!(m.is_square(), "eigh of non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return Eigh { values: vec![], vectors: CMatrix::zeros(0, 0) };
    }
    let h = hermitian_part(m);
    let mut eig = SymmetricEigen::new(h.clone());
    let mut back: Option<CMatrix> = None;
    for attempt in 0..3u64 {
        if eig.eigenvalues.iter().all(|x| x.is_finite()) {
            break;
        }
        let q = fixed_rotation(n, attempt);
        eig = SymmetricEigen::new(hermitian_part(&(&q * &h * q.adjoint())));
        back = Some(q);
    }
    if let Some(q) = back {
        eig.eigenvectors = q.adjoint() * &eig.eigenvectors;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Eigh { values, vectors }
}

fn fixed_rotation(n: usize, attempt: u64) -> CMatrix {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED_0000 + attempt);
    ginibre(n, n, &mut rng).qr().q()
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).min()
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if hermitian_residual(m) <= 1e-12 * (1.0 + max_abs(m)) {
        let e = eigh(m);
        return e.max().abs().max(e.min().abs());
    }
    m.clone().svd(false, false).singular_values.max()
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// max |a_ij - b_ij|
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// max |m - m^dagger| entrywise
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Square root of a PSD matrix; eigenvalues within the PSD tolerance below
/// zero are clipped.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    psd_power(m, 0.5)
}

/// Real power of a PSD matrix by functional calculus.
///
/// Negative eigenvalues (and kernel noise below 1e-14 relative) are clipped
/// at zero. For negative exponents the
/// support-restricted inverse is used: eigenvalues at or below
/// `PINV_THRESHOLD * lambda_max` map to zero.
pub fn psd_power(m: &CMatrix, p: f64) -> CMatrix {
    let e = eigh(m);
    let lmax = e.max().max(0.0);
    let cut = PINV_THRESHOLD * lmax;
    e.map(|lam| {
        if p < 0.0 {
            if lam > cut && lam > 0.0 {
                lam.powf(p)
            } else {
                0.0
            }
        } else if lam <= 1e-14 * lmax {
            // eigensolver noise on the kernel
            0.0
        } else {
            lam.powf(p)
        }
    })
}

/// Kronecker product a (x) b.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::from_element(1, 1, cr(1.0)), |acc, f| acc.kronecker(f))
}

/// Flat-index permutation table: new flat index -> old flat index, when the
/// subsystems (with sizes `dims`) are reordered so that position `k` of the
/// result holds old subsystem `order[k]`.
pub(crate) fn permutation_table(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let n = dims.len();
    debug_assert_eq!(order.len(), n);
    let mut old_strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        old_strides[i] = old_strides[i + 1] * dims[i + 1];
    }
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    let total: usize = dims.iter().product();
    let mut table = vec![0usize; total];
    let mut digits = vec![0usize; n];
    for (flat, slot) in table.iter_mut().enumerate() {
        let mut rem = flat;
        for k in (0..n).rev() {
            digits[k] = rem % new_dims[k];
            rem /= new_dims[k];
        }
        *slot = (0..n).map(|k| digits[k] * old_strides[order[k]]).sum();
    }
    table
}

/// Reorder tensor factors of a square operator.
pub fn permute_subsystems(m: &CMatrix, dims: &[usize], order: &[usize]) -> CMatrix {
    let t = permutation_table(dims, order);
    let n = t.len();
    assert_eq!(m.nrows(), n);
    CMatrix::from_fn(n, n, |i, j| m[(t[i], t[j])])
}

/// Reorder tensor factors of a vector.
pub(crate) fn permute_vector(v: &CVector, dims: &[usize], order: &[usize]) -> CVector {
    let t = permutation_table(dims, order);
    CVector::from_fn(t.len(), |i, _| v[t[i]])
}

/// Partial trace keeping the subsystems at positions `keep` (result ordered
/// as in `keep`).
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let mut order = keep.to_vec();
    order.extend_from_slice(&traced);
    let dk: usize = keep.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();
    let t = permutation_table(dims, &order);
    CMatrix::from_fn(dk, dk, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..dt {
            acc += m[(t[i * dt + k], t[j * dt + k])];
        }
        acc
    })
}

/// Swap operator on C^d (x) C^d: F(|i>|k>) = |k>|i>.
pub fn swap_operator_unchecked(d: usize) -> CMatrix {
    let mut f = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for k in 0..d {
            f[(k * d + i, i * d + k)] = cr(1.0);
        }
    }
    f
}

/// Swap operator, subject to the dimension cap.
pub fn swap_operator(d: usize) -> crate::Result<CMatrix> {
    if d == 0 {
        return Err(crate::Error::InvalidDim(0));
    }
    super::check_cap(d * d)?;
    Ok(swap_operator_unchecked(d))
}

/// Ginibre-style random matrix with i.i.d. standard complex Gaussian entries.
pub(crate) fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Random Hermitian matrix (GUE-like scaling).
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    hermitian_part(&ginibre(d, d, rng))
}

/// Random density operator of the given rank (Ginibre construction),
/// normalized to unit trace.
pub fn random_density_matrix<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = m.trace().re;
    hermitian_part(&(m / cr(t)))
}

/// Random unit vector, uniform on the sphere.
pub fn random_pure_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let g = ginibre(d, 1, rng);
    let n = g.norm();
    CVector::from_iterator(d, g.iter().map(|z| z / n))
}

/// Whether the minimum eigenvalue clears the PSD tolerance.
pub(crate) fn is_psd_within(m: &CMatrix, tol: f64) -> (bool, f64) {
    let e = eigh(m);
    let scale = e.max().abs().max(e.min().abs());
    (e.min() >= -tol * scale.max(f64::MIN_POSITIVE) - 1e-300, e.min())
}

pub(crate) fn default_psd_check(m: &CMatrix) -> (bool, f64) {
    is_psd_within(m, TOL_PSD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_of_large_entangled_projector_is_finite() {
        for d in [8usize, 16] {
            let n = d * d;
            let mut v = CVector::zeros(n);
            for i in 0..d {
                v[i * d + i] = cr(1.0 / (d as f64).sqrt());
            }
            let p = &v * v.adjoint();
            let e = eigh(&p);
            assert!(e.values.iter().all(|x| x.is_finite()));
            assert!((e.max() - 1.0).abs() < 1e-12 && e.min().abs() < 1e-12);
            let back = e.map(|x| x);
            assert!(max_abs_diff(&back, &p) < 1e-12);
            let g = e.vectors.adjoint() * &e.vectors - CMatrix::identity(n, n);
            assert!(g.iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn partial_trace_matches_index_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = [2usize, 3, 2];
        let m = random_density_matrix(12, 12, &mut rng);
        // keep subsystems 0 and 2, trace out 1, by explicit double sum
        let reduced = partial_trace_matrix(&m, &dims, &[0, 2]);
        for a in 0..2 {
            for c in 0..2 {
                for a2 in 0..2 {
                    for c2 in 0..2 {
                        let mut acc = C64::new(0.0, 0.0);
                        for b in 0..3 {
                            acc += m[(a * 6 + b * 2 + c, a2 * 6 + b * 2 + c2)];
                        }
                        assert!((reduced[(a * 2 + c, a2 * 2 + c2)] - acc).norm() < 1e-14);
                    }
                }
            }
        }
        assert!((reduced.trace() - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn permute_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = [2usize, 3, 4];
        let m = random_hermitian(24, &mut rng);
        let p = permute_subsystems(&m, &dims, &[2, 0, 1]);
        // new dims [4,2,3]; inverse order puts old 0 (now at 1) first
        let back = permute_subsystems(&p, &[4, 2, 3], &[1, 2, 0]);
        assert!(max_abs_diff(&m, &back) < 1e-15);
    }

    #[test]
    fn kron_matches_entrywise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_density_matrix(2, 2, &mut rng);
        let b = random_density_matrix(2, 2, &mut rng);
        let k = kron(&a, &b);
        for i1 in 0..2 {
            for j1 in 0..2 {
                for i2 in 0..2 {
                    for j2 in 0..2 {
                        let expect = a[(i1, j1)] * b[(i2, j2)];
                        assert!((k[(i1 * 2 + i2, j1 * 2 + j2)] - expect).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn swap_basics() {
        assert_eq!(swap_operator(1).unwrap()[(0, 0)], cr(1.0));
        let f = swap_operator(2).unwrap();
        assert!((f.trace() - cr(2.0)).norm() < 1e-15);
        let f3 = swap_operator(3).unwrap();
        assert!(max_abs_diff(&(&f3 * &f3), &identity(9)) < 1e-15);
        assert!(swap_operator(17).is_err());
    }

    #[test]
    fn generalized_inverse_on_support() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(4.0), cr(0.0), cr(1e-14)]));
        let inv = psd_power(&m, -0.5);
        assert!((inv[(0, 0)].re - 0.5).abs() < 1e-14);
        assert_eq!(inv[(1, 1)].re, 0.0);
        assert!(inv[(2, 2)].re.abs() < 1e-12);
    }
}
