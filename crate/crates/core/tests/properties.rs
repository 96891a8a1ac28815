//! Property tests over random instances. Inputs are drawn from a seeded
//! ChaCha stream so that shrinking acts on the seed and the dimensions.

use proptest::prelude::*;
use qdecouple::channel::Channel;
use qdecouple::config::{parse_seeds, CommandConfig, ExperimentConfig, GlobalConfig};
use qdecouple::haar::{haar_rows, haar_unitary};
use qdecouple::linalg::{
    fidelity, max_abs_diff, purify, random_density_matrix, trace_distance, CMatrix, DimsLabel, StateOperator,
};
use qdecouple::merging::{measurement_isometry, OutcomeMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(dims: &[(&str, usize)], rank: usize, seed: u64) -> StateOperator {
    let d = DimsLabel::new(dims.iter().copied()).unwrap();
    let n = d.total();
    let m = random_density_matrix(n, rank.clamp(1, n), &mut ChaCha8Rng::seed_from_u64(seed));
    StateOperator::new(d, m).unwrap()
}

fn eye(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_is_consistent(da in 1usize..4, db in 1usize..4, dc in 1usize..4, seed: u64) {
        let rho = state(&[("A", da), ("B", db), ("C", dc)], 3, seed);
        let a_direct = rho.partial_trace(&["A"]).unwrap();
        let a_staged = rho.partial_trace(&["A", "B"]).unwrap().partial_trace(&["A"]).unwrap();
        prop_assert!(max_abs_diff(a_direct.matrix(), a_staged.matrix()) < 1e-12);
        prop_assert!((a_direct.trace() - 1.0).abs() < 1e-12);
        let traced = rho.trace_out(&["B", "C"]).unwrap();
        prop_assert!(max_abs_diff(a_direct.matrix(), traced.matrix()) < 1e-12);
    }

    #[test]
    fn fidelity_and_trace_distance_bounds(d in 1usize..6, r1 in 1usize..6, r2 in 1usize..6, seed: u64) {
        let rho = state(&[("A", d)], r1, seed);
        let sigma = state(&[("A", d)], r2, seed ^ 0x9E37_79B9);
        let f = fidelity(&rho, &sigma).unwrap();
        let t = trace_distance(&rho, &sigma).unwrap();
        prop_assert!(f >= -1e-12 && f <= 1.0 + 1e-9);
        prop_assert!(t >= -1e-12 && t <= 2.0 + 1e-9);
        // 1 - F <= ||rho - sigma||_1 / 2 <= sqrt(1 - F^2)
        prop_assert!(1.0 - f <= 0.5 * t + 1e-8);
        prop_assert!(0.5 * t <= (1.0 - f * f).max(0.0).sqrt() + 1e-8);
        prop_assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tpcpm_outputs_are_states(da in 1usize..4, db in 1usize..4, de in 1usize..4, extra in 1usize..3, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = da.div_ceil(db) + extra - 1;
        let ch = Channel::random_tpcpm(da, db, env, &mut rng).unwrap();
        let rho = state(&[("A", da), ("E", de)], 2, seed.wrapping_add(1));
        let out = ch.apply(&rho, &["A"], "B").unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-10);
        prop_assert!(qdecouple::linalg::min_eigenvalue(out.matrix()) > -1e-10);
        let via_kraus = ch.apply_kraus(&rho, &["A"], "B").unwrap();
        prop_assert!(max_abs_diff(out.matrix(), via_kraus.matrix()) < 1e-10);
        let e_before = rho.partial_trace(&["E"]).unwrap();
        let e_after = out.partial_trace(&["E"]).unwrap();
        prop_assert!(max_abs_diff(e_before.matrix(), e_after.matrix()) < 1e-10);
    }

    #[test]
    fn haar_samples_are_unitary(d in 1usize..9, rows in 1usize..9, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = haar_unitary(d, &mut rng);
        prop_assert!(max_abs_diff(&(u.adjoint() * &u), &eye(d)) < 1e-12);
        let cols = d.max(rows);
        let v = haar_rows(rows, cols, &mut rng).unwrap();
        prop_assert_eq!((v.nrows(), v.ncols()), (rows, cols));
        prop_assert!(max_abs_diff(&(&v * v.adjoint()), &eye(rows)) < 1e-12);
    }

    #[test]
    fn purification_reproduces_state(da in 1usize..4, db in 1usize..4, rank in 1usize..9, seed: u64) {
        let rho = state(&[("A", da), ("B", db)], rank, seed);
        let psi = purify(&rho, "R").unwrap();
        prop_assert!((psi.norm_squared() - 1.0).abs() < 1e-12);
        let back = psi.reduced(&["A", "B"]).unwrap();
        prop_assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-10);
        // The complement has the same spectrum.
        let r = psi.reduced(&["R"]).unwrap();
        let mut s1: Vec<f64> = qdecouple::linalg::eigh(rho.matrix()).values.iter().copied().filter(|v| *v > 1e-9).collect();
        let mut s2: Vec<f64> = qdecouple::linalg::eigh(r.matrix()).values.iter().copied().filter(|v| *v > 1e-9).collect();
        s1.sort_by(f64::total_cmp);
        s2.sort_by(f64::total_cmp);
        prop_assert_eq!(s1.len(), s2.len());
        for (a, b) in s1.iter().zip(&s2) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn measurement_isometry_is_isometric(l_exp in 0u32..3, n in 1usize..5, seed: u64) {
        let l = 1usize << l_exp;
        let dim = l * n;
        let u = haar_unitary(dim, &mut ChaCha8Rng::seed_from_u64(seed));
        let w = measurement_isometry(dim, l, &u).unwrap();
        prop_assert!(max_abs_diff(&(w.adjoint() * &w), &eye(dim)) < 1e-12);
    }

    #[test]
    fn seed_lists_parse(a in 0u64..1000, len in 0u64..50) {
        let b = a + len;
        let want: Vec<u64> = (a..=b).collect();
        prop_assert_eq!(parse_seeds(&format!("{a}..{b}")).unwrap(), want.clone());
        prop_assert_eq!(parse_seeds(&format!("{a}..={b}")).unwrap(), want);
        prop_assert_eq!(parse_seeds(&format!("{a},{b}")).unwrap(), vec![a, b]);
    }

    #[test]
    fn configs_round_trip(seed: u64, workers in 1usize..9, eps in 0.0f64..1.0, outcomes in 1usize..100, k in 0usize..6) {
        let cfg = ExperimentConfig {
            global: GlobalConfig { seed, workers, ..Default::default() },
            command: CommandConfig::Merge {
                state: "psi.json".into(),
                epsilon: eps,
                seeds: vec![seed, seed / 2],
                registers: (k > 0).then_some((1 << k, 1)),
                mode: OutcomeMode::Sampled { outcomes },
            },
        };
        prop_assert_eq!(ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
    }
}
