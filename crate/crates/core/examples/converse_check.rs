//! Converse of the decoupling theorem on nearly decoupling channels: a
//! small admixture of a random channel into the full erasure.

use qdecouple::channel::Channel;
use qdecouple::decoupling::{converse_check, converse_distance, ConverseParams};
use qdecouple::linalg::{random_density_matrix, DimsLabel, StateOperator, C64};
use rand::SeedableRng;

fn main() -> qdecouple::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    println!("{:>6} {:>12} {:>10} {:>10} {:>6}", "p", "distance", "lhs", "rhs", "holds");
    for p in [0.0005, 0.002, 0.005, 0.01] {
        let dims = DimsLabel::new([("A", 2), ("E", 2)])?;
        let rho = StateOperator::new(dims, random_density_matrix(4, 4, &mut rng))?;
        let noise = Channel::random_tpcpm(2, 2, 2, &mut rng)?;
        let erase = Channel::erasure(2, 2)?;
        let choi = erase.choi().matrix() * C64::new(1.0 - p, 0.0) + noise.choi().matrix() * C64::new(p, 0.0);
        let ch = Channel::from_choi(2, 2, choi)?;
        let eps = converse_distance(&rho, &["A"], &ch)?;
        let r = converse_check(&rho, &["A"], &ch, eps, ConverseParams::default_for(eps))?;
        let lhs = r.lhs.map_or("vacuous".to_string(), |v| format!("{v:.4}"));
        println!("{p:>6} {eps:>12.3e} {lhs:>10} {:>10.4} {:>6}", r.rhs, r.holds);
    }
    Ok(())
}
