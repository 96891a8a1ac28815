//! Min-entropy of the three standard A E states, for k = 1..3 qubits, next
//! to the smooth and max entropies of the same states.

use qdecouple::entropy::{h_max, h_min, h_min_smooth, von_neumann};
use qdecouple::states::{classical, entangled, independent, EnvState};

fn main() -> qdecouple::Result<()> {
    println!("{:>2} {:<12} {:>10} {:>10} {:>12} {:>10}", "k", "state", "H_min", "H_max", "H_min^0.05", "H");
    for k in 1..=3u32 {
        let rows = [
            ("independent", independent(k, 2, EnvState::MaximallyMixed)?),
            ("classical", classical(k)?),
            ("entangled", entangled(k)?),
        ];
        for (name, rho) in rows {
            let hmin = h_min(&rho, &["A"], &["E"])?.value;
            let hmax = h_max(&rho, &["A"], &["E"])?.value;
            // The smoothing SDP on the entangled k = 3 state exceeds the default cap.
            let smooth = match h_min_smooth(&rho, &["A"], &["E"], 0.05) {
                Ok(r) => format!("{:.6}", r.value),
                Err(qdecouple::Error::DimensionCap { .. }) => "over cap".into(),
                Err(e) => return Err(e),
            };
            let h = von_neumann(&rho, &["A"], &["E"])?;
            println!("{k:>2} {name:<12} {hmin:>10.6} {hmax:>10.6} {smooth:>12.6} {h:>10.6}");
        }
    }
    Ok(())
}
