//! Conditional min-entropy of the Choi state of the five builder channels
//! on m qubits, next to H_max(AB) - H_min(B) of the same state.

use qdecouple::channel::{ChannelSpec, CHOI_IN, CHOI_OUT};
use qdecouple::entropy::{h_max, h_min};

fn main() -> qdecouple::Result<()> {
    println!("{:<16} {:>10} {:>16} {:>10}", "channel", "H_min(A|B)", "H_max(AB)-H_min(B)", "expected");
    for m in 1..=3u32 {
        for mp in 0..=m {
            let mut specs = vec![
                (ChannelSpec::IdMeasure { m, m_prime: mp }, -(mp as f64)),
                (ChannelSpec::IdTrace { m, m_prime: mp }, m as f64 - 2.0 * mp as f64),
            ];
            if mp == 0 {
                specs.splice(
                    0..0,
                    [
                        (ChannelSpec::Identity { m }, -(m as f64)),
                        (ChannelSpec::Measure { m }, 0.0),
                        (ChannelSpec::Erase { m }, m as f64),
                    ],
                );
            }
            for (spec, want) in specs {
                let tau = spec.build()?.choi().clone();
                let h = h_min(&tau, &[CHOI_IN], &[CHOI_OUT])?.value;
                let diff = h_max(&tau, &[CHOI_IN, CHOI_OUT], &[])?.value - h_min(&tau, &[CHOI_OUT], &[])?.value;
                println!("{:<16} {h:>10.6} {diff:>16.6} {want:>10}", spec.to_string());
            }
        }
    }
    Ok(())
}
