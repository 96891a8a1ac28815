//! One-shot state merging: the GHZ-like classical instance at its achievable
//! cost, the Bell pair that earns an ebit, and the i.i.d. cost trend.
//!
//! Usage: cargo run --example state_merging -- [seeds] [workers]

use qdecouple::haar::RngSeed;
use qdecouple::merging::{iid_cost_trend, run_merging, run_merging_seeds, MergingInstance, OutcomeMode};
use qdecouple::states::{classical_purified, classical_side_purified, entangled_pure};
use qdecouple::linalg::{DimsLabel, PureState};

fn main() -> qdecouple::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let workers: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let eps = 0.3;
    let (inst, bound) = MergingInstance::at_achievable_cost(classical_purified(2)?, eps, RngSeed::new(0, "merging"))?;
    let inst = inst.with_mode(OutcomeMode::Sampled { outcomes: 32 });
    println!("GHZ k=2, eps={eps}: achievable cost {:.3} bits, K={} L={} ({} outcomes)", bound.value, inst.k, inst.l, inst.outcomes());
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let t = std::time::Instant::now();
    let rep = run_merging_seeds(&inst, &seeds, workers)?;
    println!(
        "  mean fidelity {:.6} +- {:.1e} (threshold {:.3}), ok: {}  [{:.1}s]",
        rep.fidelity.mean,
        rep.fidelity.std_error,
        rep.fidelity_threshold,
        rep.fidelity_ok,
        t.elapsed().as_secs_f64()
    );

    // A Bell pair between Alice and Bob merges with no communication and
    // leaves one ebit behind: cost -1.
    let bell = entangled_pure(1)?.relabel("E", "B")?;
    let psi = bell.tensor(&PureState::basis(DimsLabel::single("E", 1)?, 0)?)?;
    let r = run_merging(&MergingInstance::new(psi, 1, 2, 0.1, RngSeed::new(1, "merging"))?)?;
    println!("Bell pair: cost {} bits, fidelity {:.9}", r.cost_bits, r.fidelity);

    let beta = classical_side_purified(&[vec![0.8], vec![0.2]])?;
    let trend = iid_cost_trend(&beta, 0.01, 3)?;
    println!("i.i.d. trend at eps={}: H(A|B) = {:.4}", trend.epsilon, trend.conditional_entropy);
    for (n, (rate, b)) in trend.rates.iter().zip(&trend.bounds).enumerate() {
        println!("  n={} bound {:8.3} rate {:8.3}", n + 1, b.value, rate);
    }
    println!("  non-increasing: {}", trend.monotone);
    Ok(())
}
