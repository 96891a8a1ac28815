//! Builds an experiment config in code, runs it at two worker counts and
//! shows that the result bytes agree; the config itself round-trips
//! through JSON.

use qdecouple::config::{execute, CommandConfig, ExperimentConfig, GlobalConfig};
use qdecouple::states::independent;
use qdecouple::states::EnvState;

fn main() -> qdecouple::Result<()> {
    let path = std::env::temp_dir().join("qdecouple-report-config.json");
    independent(1, 2, EnvState::Pure)?.write_json(&path)?;
    let mut cfg = ExperimentConfig {
        global: GlobalConfig { seed: 5, ..GlobalConfig::default() },
        command: CommandConfig::Decouple {
            state: path,
            system: vec!["A".into()],
            channel: "meas:1".into(),
            samples: 500,
            epsilon: 0.0,
            smooth_bound: false,
            optimize_h2: false,
            csv: None,
        },
    };
    let text = cfg.to_json()?;
    assert_eq!(ExperimentConfig::from_json(&text)?, cfg);
    println!("{text}");

    let one = execute(&cfg)?;
    cfg.global.workers = 4;
    let four = execute(&cfg)?;
    let same = serde_json::to_string(&one.result)? == serde_json::to_string(&four.result)?;
    println!("version {} passed {} identical across workers: {same}", one.version, one.passed);
    println!("wall clock: {:.3}s / {:.3}s", one.wall_clock_seconds, four.wall_clock_seconds);
    Ok(())
}
