use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qdecouple::config::{
    execute, parse_seeds, CommandConfig, ExperimentConfig, GlobalConfig, Report, DIM_CAP_ENV,
};
use qdecouple::decoupling::SIGMA_MARGIN;
use qdecouple::entropy::EntropyKind;
use qdecouple::linalg::DEFAULT_DIM_CAP;
use qdecouple::merging::{OutcomeMode, DEFAULT_SAMPLED_OUTCOMES};
use qdecouple::states::{EnvState, StateKind};
use qdecouple::Error;

/// Smooth entropies, decoupling checks and one-shot state merging.
///
/// Every command prints a JSON report (seeds, config, version, wall clock)
/// on stdout. Exit status: 0 success, 1 failed check or numerical failure,
/// 2 usage error.
#[derive(Parser)]
#[command(name = "qdecouple", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Cap on total Hilbert-space dimensions.
    #[arg(long, global = true, env = DIM_CAP_ENV, default_value_t = DEFAULT_DIM_CAP)]
    dim_cap: usize,
    /// Standard errors a Monte Carlo mean may exceed a bound by.
    #[arg(long, global = true, default_value_t = SIGMA_MARGIN)]
    sigma_margin: f64,
    /// Also write the output to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional entropy H(target|condition) of a state file.
    Entropy {
        #[arg(long)]
        state: PathBuf,
        /// vn, hmin, hmax or h2.
        #[arg(long)]
        kind: EntropyKind,
        #[arg(long, value_delimiter = ',', required = true)]
        target: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        condition: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Haar-sampled decoupling experiments.
    Decouple {
        #[command(subcommand)]
        action: DecoupleAction,
    },
    /// One-shot state merging.
    Merge {
        #[command(subcommand)]
        action: MergeAction,
    },
    /// Randomized checks of the lemmas behind the decoupling theorem.
    Lemmas {
        #[command(subcommand)]
        action: LemmasAction,
    },
    /// Emit a state JSON file.
    GenState {
        /// independent, classical, entangled, random-mixed, random-pure or ghz
        /// (k bits copied to A, B and E, the merging input).
        kind: StateKind,
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Environment of `independent`: maximally-mixed or pure.
        #[arg(long = "rhoE", default_value = "maximally-mixed")]
        rho_e: EnvState,
        #[arg(long, default_value_t = 2)]
        dim_e: usize,
        /// Rank of `random-mixed`.
        #[arg(long, default_value_t = 2)]
        rank: usize,
    },
    /// Emit a channel JSON file from a spec such as `id+trace:4,1`.
    GenChannel { spec: String },
}

#[derive(Subcommand)]
enum DecoupleAction {
    Run {
        #[arg(long)]
        state: PathBuf,
        /// Channel spec (`id:m`, `meas:m`, `erase:m`, `id+meas:m,m'`,
        /// `id+trace:m,m'`) or a channel JSON file.
        #[arg(long)]
        channel: String,
        /// Labels the channel acts on.
        #[arg(long, value_delimiter = ',', default_value = "A")]
        system: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Smoothing parameter; a positive value also evaluates the smooth bound.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Evaluate the smooth bound even at epsilon = 0.
        #[arg(long)]
        smooth: bool,
        #[arg(long)]
        optimize_h2: bool,
        /// Per-sample distances as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MergeAction {
    Run {
        /// Pure state on A, B, E, or a state on A, B (purified with E).
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Seeds: `0..19` (inclusive), `0..=19` or a comma list.
        #[arg(long, default_value = "0")]
        seeds: String,
        /// Register sizes; the achievable cost decides them when omitted.
        #[arg(long, requires = "l")]
        k: Option<usize>,
        #[arg(long, requires = "k")]
        l: Option<usize>,
        /// auto, exact or sampled.
        #[arg(long, default_value = "auto")]
        mode: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLED_OUTCOMES)]
        outcomes: usize,
    },
}

#[derive(Subcommand)]
enum LemmasAction {
    Check {
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

fn to_config(cli: Cli) -> Result<ExperimentConfig, Error> {
    let g = cli.global;
    let global = GlobalConfig {
        seed: g.seed,
        workers: g.workers,
        dim_cap: g.dim_cap,
        sigma_margin: g.sigma_margin,
        out: g.out,
    };
    let command = match cli.command {
        Command::Entropy { state, kind, target, condition, epsilon } => {
            CommandConfig::Entropy { state, kind, target, condition, epsilon }
        }
        Command::Decouple {
            action: DecoupleAction::Run { state, channel, system, samples, epsilon, smooth, optimize_h2, csv },
        } => CommandConfig::Decouple {
            state,
            system,
            channel,
            samples,
            epsilon,
            smooth_bound: smooth || epsilon > 0.0,
            optimize_h2,
            csv,
        },
        Command::Merge { action: MergeAction::Run { state, epsilon, seeds, k, l, mode, outcomes } } => {
            let mode = match mode.as_str() {
                "auto" => OutcomeMode::Auto,
                "exact" => OutcomeMode::Exact,
                "sampled" => OutcomeMode::Sampled { outcomes },
                other => return Err(Error::InvalidParameter(format!("unknown mode `{other}`"))),
            };
            CommandConfig::Merge { state, epsilon, seeds: parse_seeds(&seeds)?, registers: k.zip(l), mode }
        }
        Command::Lemmas { action: LemmasAction::Check { trials } } => CommandConfig::Lemmas { trials },
        Command::GenState { kind, k, rho_e, dim_e, rank } => {
            CommandConfig::GenState { kind, k, env: rho_e, dim_e, rank }
        }
        Command::GenChannel { spec } => CommandConfig::GenChannel { spec },
    };
    Ok(ExperimentConfig { global, command })
}

/// Input and parameter problems are usage errors; everything else means a
/// computation or check failed.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_)
        | Error::UnknownLabel(_)
        | Error::DuplicateLabel(_)
        | Error::DimensionMismatch(_)
        | Error::InvalidDim(_)
        | Error::DimensionCap { .. }
        | Error::NotSquare { .. }
        | Error::NonFinite
        | Error::NotHermitian(_)
        | Error::NotPsd(_)
        | Error::BadTrace(_)
        | Error::NotNormalized(_)
        | Error::SmoothingOutOfRange(_)
        | Error::Divisibility { .. }
        | Error::NotTracePreserving
        | Error::Json(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn emit(report: &Report) -> Result<(), Error> {
    let is_artifact = matches!(
        report.config.command,
        CommandConfig::GenState { .. } | CommandConfig::GenChannel { .. }
    );
    let body = if is_artifact {
        serde_json::to_string_pretty(&report.result)?
    } else {
        serde_json::to_string_pretty(report)?
    };
    if let Some(path) = &report.config.global.out {
        std::fs::write(path, &body)?;
    }
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{body}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = to_config(cli).and_then(|cfg| {
        let report = execute(&cfg)?;
        emit(&report)?;
        Ok(report.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("qdecouple: a checked inequality or invariant failed (see report)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("qdecouple: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
