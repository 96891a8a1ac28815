//! Randomized checks of the lemmas behind the decoupling theorem.
//!
//! Usage: cargo run --example proof_lemmas -- [trials] [seed]

use qdecouple::decoupling::verify_proof_lemmas;

fn main() {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let report = verify_proof_lemmas(seed, trials);
    println!("{:<30} {:>7} {:>10} {:>14}", "suite", "trials", "violations", "worst slack");
    for c in &report.checks {
        println!("{:<30} {:>7} {:>10} {:>14.3e}", c.name, c.trials, c.violations, c.worst_slack);
        for e in &c.errors {
            println!("    {e}");
        }
    }
    println!("all passed: {}", report.all_passed);
}
