//! Four classically correlated qubits sent through a channel that keeps m'
//! of them and discards the rest: sampled distance from decoupled versus
//! the one-shot bound, for m' = 0..4.
//!
//! Usage: cargo run --example decoupling_sweep -- [samples] [workers]

use qdecouple::channel::ChannelSpec;
use qdecouple::decoupling::{run, DecouplingExperiment};
use qdecouple::haar::RngSeed;
use qdecouple::states::classical;

fn main() -> qdecouple::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let workers = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let m = 4;
    let rho = classical(m)?;
    println!("{:>3} {:>12} {:>10} {:>12} {:>6}", "m'", "mean", "std err", "bound", "holds");
    for mp in 0..=m {
        let ch = ChannelSpec::IdTrace { m, m_prime: mp }.build()?;
        let exp = DecouplingExperiment::new(rho.clone(), &["A"], ch, samples, RngSeed::new(11, "sweep"));
        let r = run(&exp, workers)?;
        println!(
            "{mp:>3} {:>12.6} {:>10.2e} {:>12.6} {:>6}",
            r.empirical_mean, r.std_error, r.bound_nonsmooth, r.nonsmooth_holds
        );
    }
    Ok(())
}
