use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{
    block_inner, IterRecord, SdpOptions, SdpProblem, SdpSolution, SdpStatus,
    SparseEntry,
};
use crate::linalg::{eigh, hermitian_part, CMatrix, C64};
use crate::{Error, Result};

/// Per-block Nesterov-Todd scaling: X = G V G^dagger, Z = G^-dagger V G^-1.
struct Scaling {
    g: CMatrix,
    g_inv: CMatrix,
    w: CMatrix,
    v: Vec<f64>,
}

fn scaling(x: &CMatrix, z: &CMatrix) -> Scaling {
    let n = x.nrows();
    let ex = eigh(x);
    let xmax = ex.max().abs().max(1e-300);
    let s: Vec<f64> = ex.values.iter().map(|&l| l.max(1e-18 * xmax).sqrt()).collect();
    // L = Qx diag(s)
    let mut l = ex.vectors.clone();
    for j in 0..n {
        for i in 0..n {
            l[(i, j)] *= s[j];
        }
    }
    let inner = hermitian_part(&(l.ad_mul(z) * &l));
    let ez = eigh(&inner);
    let zmax = ez.max().abs().max(1e-300);
    let v: Vec<f64> = ez.values.iter().map(|&lam| lam.max(1e-18 * zmax).sqrt()).collect();
    let mut g = &l * &ez.vectors;
    for j in 0..n {
        let f = 1.0 / v[j].sqrt();
        for i in 0..n {
            g[(i, j)] *= f;
        }
    }
    // G^-1 = diag(v^1/2) Q^dagger diag(1/s) Qx^dagger
    let mut qx_scaled = ex.vectors.clone();
    for j in 0..n {
        for i in 0..n {
            qx_scaled[(i, j)] /= s[j];
        }
    }
    let mut g_inv = ez.vectors.ad_mul(&qx_scaled.adjoint());
    for i in 0..n {
        let f = v[i].sqrt();
        for j in 0..n {
            g_inv[(i, j)] *= f;
        }
    }
    let w = hermitian_part(&(&g * g.adjoint()));
    Scaling { g, g_inv, w, v }
}

/// Largest alpha with I + alpha * V^-1/2 D V^-1/2 >= 0 (infinity if none).
fn max_step(v: &[f64], d_scaled: &CMatrix) -> f64 {
    let n = v.len();
    let mut m = d_scaled.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] /= (v[i] * v[j]).sqrt();
        }
    }
    let lmin = eigh(&m).min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn frob(blocks: &[CMatrix]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Contiguous per-block ranges of a constraint's (block-sorted) entries.
fn block_ranges(entries: &[SparseEntry]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < entries.len() {
        let b = entries[start].block;
        let mut end = start;
        while end < entries.len() && entries[end].block == b {
            end += 1;
        }
        out.push((b, start, end));
        start = end;
    }
    out
}

/// W A W restricted to one block, A given by sparse entries.
fn w_a_w(w: &CMatrix, entries: &[SparseEntry]) -> CMatrix {
    let n = w.nrows();
    if entries.len() > n {
        let mut a = CMatrix::zeros(n, n);
        for e in entries {
            a[(e.row, e.col)] += e.value;
        }
        return w * a * w;
    }
    let mut out = CMatrix::zeros(n, n);
    for e in entries {
        for b in 0..n {
            let wb = e.value * w[(e.col, b)];
            if wb == C64::new(0.0, 0.0) {
                continue;
            }
            for a in 0..n {
                out[(a, b)] += w[(a, e.row)] * wb;
            }
        }
    }
    out
}

struct Structure {
    ranges: Vec<Vec<(usize, usize, usize)>>,
    /// constraints touching each block
    by_block: Vec<Vec<usize>>,
}

impl Structure {
    fn new(p: &SdpProblem) -> Self {
        let ranges: Vec<_> = p.constraints.iter().map(|c| block_ranges(&c.entries)).collect();
        let mut by_block = vec![Vec::new(); p.block_dims.len()];
        for (i, r) in ranges.iter().enumerate() {
            for &(b, _, _) in r {
                by_block[b].push(i);
            }
        }
        Self { ranges, by_block }
    }
}

fn schur(p: &SdpProblem, st: &Structure, sc: &[Scaling]) -> DMatrix<f64> {
    let m = p.constraints.len();
    let cols: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![0.0; m];
            let cj = &p.constraints[j];
            for &(b, s, e) in &st.ranges[j] {
                let bj = w_a_w(&sc[b].w, &cj.entries[s..e]);
                for &i in &st.by_block[b] {
                    let ci = &p.constraints[i];
                    for &(bi, si, ei) in &st.ranges[i] {
                        if bi != b {
                            continue;
                        }
                        let mut acc = 0.0;
                        for en in &ci.entries[si..ei] {
                            acc += (en.value * bj[(en.col, en.row)]).re;
                        }
                        col[i] += acc;
                    }
                }
            }
            col
        })
        .collect();
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            mat[(i, j)] = v;
        }
    }
    // symmetrize against rounding
    let t = mat.transpose();
    (mat + t) * 0.5
}

fn factor(mut m: DMatrix<f64>, eps_reg: f64) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let dmax = (0..n).map(|i| m[(i, i)].abs()).fold(1e-300f64, f64::max);
    let mut reg = eps_reg;
    let base = m.clone();
    while reg <= 1e-4 {
        for i in 0..n {
            m[(i, i)] = base[(i, i)] + reg * dmax;
        }
        if let Some(ch) = m.clone().cholesky() {
            return Some(ch);
        }
        reg *= 100.0;
    }
    None
}

fn scaled_by(a: &CMatrix, left: &CMatrix, right_adj: &CMatrix) -> CMatrix {
    left * a * right_adj
}

struct Direction {
    dx: Vec<CMatrix>,
    dy: Vec<f64>,
    dz: Vec<CMatrix>,
}

#[allow(clippy::too_many_arguments)]
fn direction(
    p: &SdpProblem,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    sc: &[Scaling],
    rp: &[f64],
    rd: &[CMatrix],
    a_wrdw: &[f64],
    rc: &[CMatrix],
) -> Direction {
    let a_rc = p.apply_constraints(rc);
    let rhs: Vec<f64> = (0..rp.len()).map(|i| rp[i] - a_rc[i] + a_wrdw[i]).collect();
    let m = rhs.len();
    let mut dy: Vec<f64> = if m == 0 {
        Vec::new()
    } else {
        chol.solve(&DVector::from_vec(rhs)).iter().copied().collect()
    };
    let build = |dy: &[f64]| {
        let aty = p.adjoint_map(dy);
        let dz: Vec<CMatrix> =
            rd.iter().zip(&aty).map(|(r, a)| hermitian_part(&(r - a))).collect();
        let dx: Vec<CMatrix> = (0..sc.len())
            .map(|k| hermitian_part(&(&rc[k] - &sc[k].w * &dz[k] * &sc[k].w)))
            .collect();
        (dx, dz)
    };
    let (mut dx, mut dz) = build(&dy);
    // Iterative refinement against the exact operator: A(dX) must equal rp.
    for _ in 0..6 {
        if m == 0 {
            break;
        }
        let adx = p.apply_constraints(&dx);
        let res: Vec<f64> = (0..m).map(|i| rp[i] - adx[i]).collect();
        let rn = norm2(&res);
        if rn <= 1e-15 * (1.0 + norm2(rp)) {
            break;
        }
        // A(dX) = A(Rc) - A(W Rd W) + M dy, so the correction solves M d = res.
        let corr = chol.solve(&DVector::from_vec(res));
        let trial: Vec<f64> = dy.iter().zip(corr.iter()).map(|(a, b)| a + b).collect();
        let (tx, tz) = build(&trial);
        let atx = p.apply_constraints(&tx);
        let tn = norm2(&(0..m).map(|i| rp[i] - atx[i]).collect::<Vec<_>>());
        if tn >= rn {
            break;
        }
        dy = trial;
        dx = tx;
        dz = tz;
    }
    Direction { dx, dy, dz }
}

fn steps(sc: &[Scaling], d: &Direction, tau: f64) -> (f64, f64, Vec<CMatrix>, Vec<CMatrix>) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    let mut dxs = Vec::with_capacity(sc.len());
    let mut dzs = Vec::with_capacity(sc.len());
    for (k, s) in sc.iter().enumerate() {
        let dx_t = hermitian_part(&scaled_by(&d.dx[k], &s.g_inv, &s.g_inv.adjoint()));
        let dz_t = hermitian_part(&(s.g.adjoint() * &d.dz[k] * &s.g));
        ap = ap.min(max_step(&s.v, &dx_t));
        ad = ad.min(max_step(&s.v, &dz_t));
        dxs.push(dx_t);
        dzs.push(dz_t);
    }
    ((tau * ap).min(1.0), (tau * ad).min(1.0), dxs, dzs)
}

fn axpy(x: &[CMatrix], a: f64, d: &[CMatrix]) -> Vec<CMatrix> {
    x.iter().zip(d).map(|(p, q)| hermitian_part(&(p + q * C64::new(a, 0.0)))).collect()
}

/// Solve with explicit options.
pub fn solve_with(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be positive".into()));
    }
    let n_total: usize = p.block_dims.iter().sum();
    let nf = n_total as f64;
    let b = p.rhs();
    let m = b.len();
    let st = Structure::new(p);
    let norm_b = norm2(&b);
    let norm_c = frob(&p.objective);
    let a_norms: Vec<f64> = p
        .constraints
        .iter()
        .map(|c| c.entries.iter().map(|e| e.value.norm_sqr()).sum::<f64>().sqrt())
        .collect();

    let mut xi = 10f64.max(nf.sqrt());
    let mut eta = 10f64.max(nf.sqrt()).max(norm_c);
    for i in 0..m {
        xi = xi.max(nf.sqrt() * (1.0 + b[i].abs()) / (1.0 + a_norms[i]));
        eta = eta.max(a_norms[i]);
    }
    let mut x: Vec<CMatrix> =
        p.block_dims.iter().map(|&d| CMatrix::identity(d, d) * C64::new(xi, 0.0)).collect();
    let mut z: Vec<CMatrix> =
        p.block_dims.iter().map(|&d| CMatrix::identity(d, d) * C64::new(eta, 0.0)).collect();
    let mut y = vec![0.0; m];

    let mut best: Option<(f64, Vec<CMatrix>, Vec<f64>, Vec<CMatrix>)> = None;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut stalls = 0;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let ax = p.apply_constraints(&x);
        let rp: Vec<f64> = (0..m).map(|i| b[i] - ax[i]).collect();
        let aty = p.adjoint_map(&y);
        let rd: Vec<CMatrix> = (0..x.len()).map(|k| &p.objective[k] - &aty[k] - &z[k]).collect();
        let pobj = block_inner(&p.objective, &x);
        let dobj: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
        let mu = block_inner(&x, &z) / nf;
        let pinf = norm2(&rp) / (1.0 + norm_b);
        let dinf = frob(&rd) / (1.0 + norm_c);
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        history.push(IterRecord {
            iter,
            primal_obj: pobj,
            dual_obj: dobj,
            gap: pobj - dobj,
            primal_infeas: pinf,
            dual_infeas: dinf,
        });
        if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
            break;
        }
        if pinf < opts.tol && dinf < opts.tol && relgap < opts.tol {
            best = None;
            break;
        }
        let merit = pinf.max(dinf).max(relgap);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            let best_merit = best.as_ref().map_or(0.0, |b| b.0);
            if since_best >= 20 || (since_best >= 8 && merit > 10.0 * best_merit) {
                break;
            }
        }
        if detect_infeasible(p, &x, &y, dobj, pobj, norm_b, norm_c) {
            status = SdpStatus::Infeasible;
            break;
        }

        let sc: Vec<Scaling> = (0..x.len()).map(|k| scaling(&x[k], &z[k])).collect();
        let mmat = schur(p, &st, &sc);
        let chol = if m == 0 {
            DMatrix::<f64>::identity(1, 1).cholesky()
        } else {
            factor(mmat, opts.eps_reg)
        };
        let Some(chol) = chol else { break };
        let wrdw: Vec<CMatrix> = (0..x.len()).map(|k| &sc[k].w * &rd[k] * &sc[k].w).collect();
        let a_wrdw = p.apply_constraints(&wrdw);

        // predictor
        let rc_aff: Vec<CMatrix> = x.iter().map(|xk| -xk).collect();
        let d_aff = direction(p, &chol, &sc, &rp, &rd, &a_wrdw, &rc_aff);
        let (ap_a, ad_a, dxt, dzt) = steps(&sc, &d_aff, 1.0);
        let x_a = axpy(&x, ap_a, &d_aff.dx);
        let z_a = axpy(&z, ad_a, &d_aff.dz);
        let mu_aff = block_inner(&x_a, &z_a) / nf;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector in the scaled space
        let rc: Vec<CMatrix> = sc
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let nk = s.v.len();
                let cross = &dxt[k] * &dzt[k] + &dzt[k] * &dxt[k];
                let mut d = CMatrix::zeros(nk, nk);
                for i in 0..nk {
                    for j in 0..nk {
                        let mut r = -cross[(i, j)];
                        if i == j {
                            r += C64::new(2.0 * sigma * mu - 2.0 * s.v[i] * s.v[i], 0.0);
                        }
                        d[(i, j)] = r / (s.v[i] + s.v[j]);
                    }
                }
                hermitian_part(&(&s.g * d * s.g.adjoint()))
            })
            .collect();
        let dir = direction(p, &chol, &sc, &rp, &rd, &a_wrdw, &rc);
        let (ap, ad, _, _) = steps(&sc, &dir, opts.step_fraction);
        if !(ap.is_finite() && ad.is_finite()) {
            break;
        }
        x = axpy(&x, ap, &dir.dx);
        z = axpy(&z, ad, &dir.dz);
        for (yi, dyi) in y.iter_mut().zip(&dir.dy) {
            *yi += ad * dyi;
        }
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
        iterations = iter + 1;
    }

    if status != SdpStatus::Infeasible {
        if let Some((merit, bx, by, bz)) = best {
            let cur = merit_of(p, &x, &y, &z, &b, norm_b, norm_c);
            if merit < cur {
                x = bx;
                y = by;
                z = bz;
            }
        }
    }
    let ax = p.apply_constraints(&x);
    let rp: Vec<f64> = (0..m).map(|i| b[i] - ax[i]).collect();
    let aty = p.adjoint_map(&y);
    let rd: Vec<CMatrix> = (0..x.len()).map(|k| &p.objective[k] - &aty[k] - &z[k]).collect();
    let primal_obj = block_inner(&p.objective, &x);
    let dual_obj: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
    let primal_residual = norm2(&rp);
    let dual_residual = frob(&rd);
    let gap = primal_obj - dual_obj;
    if status != SdpStatus::Infeasible
        && primal_residual <= opts.feas_tol * (1.0 + norm_b).max(1.0)
        && dual_residual <= opts.feas_tol * (1.0 + norm_c)
        && gap.abs() <= opts.gap_tol * (1.0 + primal_obj.abs())
    {
        status = SdpStatus::Optimal;
    }
    Ok(SdpSolution {
        x,
        y,
        z,
        primal_obj,
        dual_obj,
        gap,
        primal_residual,
        dual_residual,
        status,
        iterations,
        history,
    })
}

fn merit_of(
    p: &SdpProblem,
    x: &[CMatrix],
    y: &[f64],
    z: &[CMatrix],
    b: &[f64],
    norm_b: f64,
    norm_c: f64,
) -> f64 {
    let ax = p.apply_constraints(x);
    let rp: Vec<f64> = (0..b.len()).map(|i| b[i] - ax[i]).collect();
    let aty = p.adjoint_map(y);
    let rd: Vec<CMatrix> = (0..x.len()).map(|k| &p.objective[k] - &aty[k] - &z[k]).collect();
    let pobj = block_inner(&p.objective, x);
    let dobj: f64 = b.iter().zip(y).map(|(bi, yi)| bi * yi).sum();
    let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    (norm2(&rp) / (1.0 + norm_b)).max(frob(&rd) / (1.0 + norm_c)).max(relgap)
}

fn detect_infeasible(
    p: &SdpProblem,
    x: &[CMatrix],
    y: &[f64],
    dobj: f64,
    pobj: f64,
    norm_b: f64,
    norm_c: f64,
) -> bool {
    // primal infeasible: improving dual ray y/(b.y) with -A*(y) >= 0
    if dobj > 1e8 * (1.0 + norm_c) {
        let ray: Vec<f64> = y.iter().map(|v| v / dobj).collect();
        let s = p.adjoint_map(&ray);
        let scale = frob(&s).max(1e-300);
        if s.iter().all(|blk| -eigh(&(-blk)).min() <= 1e-6 * scale) {
            return true;
        }
    }
    // dual infeasible: X/|<C,X>| with A(X) ~ 0
    if pobj < -1e8 * (1.0 + norm_b) {
        let ax = p.apply_constraints(x);
        if norm2(&ax) / pobj.abs() <= 1e-6 {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_density_matrix, random_hermitian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn entry(block: usize, row: usize, col: usize, v: f64) -> SparseEntry {
        SparseEntry { block, row, col, value: C64::new(v, 0.0) }
    }

    #[test]
    fn trace_minimization_example() {
        let mut p = SdpProblem::new(vec![2]).unwrap();
        p.set_objective_block(0, CMatrix::identity(2, 2)).unwrap();
        p.add_constraint(vec![entry(0, 0, 0, 1.0)], 1.0).unwrap();
        let s = p.solve().unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_obj - 1.0).abs() < 1e-7);
        assert!((s.x[0][(0, 0)].re - 1.0).abs() < 1e-6);
        assert!(s.x[0][(1, 1)].norm() < 1e-6);
    }

    #[test]
    fn detects_infeasible_trace() {
        let mut p = SdpProblem::new(vec![2]).unwrap();
        p.add_constraint(vec![entry(0, 0, 0, 1.0), entry(0, 1, 1, 1.0)], -1.0).unwrap();
        let s = p.solve().unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
    }

    #[test]
    fn rejects_non_hermitian_constraint() {
        let mut p = SdpProblem::new(vec![2]).unwrap();
        let r = p.add_constraint(vec![entry(0, 0, 1, 1.0)], 0.0);
        assert!(matches!(r, Err(Error::NotHermitian(_))));
    }

    /// One constraint, one block: the dual is a 1-D problem
    /// max b*y s.t. C - y*A >= 0, solved by bisection on the feasible interval.
    fn bisection_oracle(c: &CMatrix, a: &CMatrix, b: f64) -> f64 {
        let feasible = |y: f64| eigh(&(c - a * C64::new(y, 0.0))).min() >= 0.0;
        let dir = b.signum();
        let (mut lo, mut hi) = (0.0, dir);
        while feasible(hi) {
            hi *= 2.0;
            assert!(hi.abs() < 1e9);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        b * lo
    }

    #[test]
    fn small_instances_match_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            // C > 0 so y = 0 is strictly feasible; A with mixed spectrum keeps
            // the feasible interval bounded in both directions.
            let c = random_density_matrix(2, 2, &mut rng) + CMatrix::identity(2, 2) * C64::new(0.1, 0.0);
            let mut a = random_hermitian(2, &mut rng);
            let shift = eigh(&a);
            if shift.min() * shift.max() > 0.0 {
                a[(0, 0)] -= C64::new(shift.max() + 1.0, 0.0);
                a[(1, 1)] += C64::new(-shift.min() + 1.0, 0.0);
            }
            let b: f64 = rng.random_range(-1.0..1.0);
            let mut p = SdpProblem::new(vec![2]).unwrap();
            p.set_objective_block(0, c.clone()).unwrap();
            p.add_dense_constraint(&[Some(a.clone())], b).unwrap();
            let s = p.solve().unwrap();
            assert_eq!(s.status, SdpStatus::Optimal);
            let oracle = bisection_oracle(&c, &a, b);
            assert!((s.dual_obj - oracle).abs() < 1e-6, "{} vs {}", s.dual_obj, oracle);
        }
    }

    #[test]
    fn deterministic_objectives() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = crate::sdp::random_feasible_problem(&[3, 2], 5, &mut rng).unwrap();
        let a = p.solve().unwrap();
        let b = p.solve().unwrap();
        assert_eq!(a.primal_obj, b.primal_obj);
        assert_eq!(a.dual_obj, b.dual_obj);
    }

    #[test]
    fn history_csv_has_header() {
        let mut p = SdpProblem::new(vec![1]).unwrap();
        p.set_objective_block(0, CMatrix::identity(1, 1)).unwrap();
        p.add_constraint(vec![entry(0, 0, 0, 1.0)], 2.0).unwrap();
        let s = p.solve().unwrap();
        assert!((s.primal_obj - 2.0).abs() < 1e-7);
        assert!(s.history_csv().starts_with("iteration,primal_obj,dual_obj,gap\n"));
        assert!(s.history.len() >= 2);
    }
}
