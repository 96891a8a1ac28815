//! Random strictly feasible SDPs: duality gap and residuals at the solver's
//! final iterate.

use qdecouple::sdp::random_feasible_problem;
use rand::{Rng, SeedableRng};

fn main() -> qdecouple::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    println!("{:>10} {:>3} {:>14} {:>10} {:>10} {:>10} {:>5}", "blocks", "m", "objective", "gap", "p-resid", "d-resid", "iters");
    for _ in 0..10 {
        let blocks: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=5)).collect();
        let vars: usize = blocks.iter().map(|d| d * d).sum();
        let m = rng.random_range(1..=vars.min(8));
        let sol = random_feasible_problem(&blocks, m, &mut rng)?.solve()?;
        println!(
            "{:>10} {m:>3} {:>14.8} {:>10.2e} {:>10.2e} {:>10.2e} {:>5}",
            format!("{blocks:?}"),
            sol.primal_obj,
            sol.gap,
            sol.primal_residual,
            sol.dual_residual,
            sol.iterations
        );
    }
    Ok(())
}
