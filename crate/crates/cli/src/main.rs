//! `hyplat` — experiment runner for the semi-discrete spectral toolkit.
//!
//! Subcommands cover the three reference experiments (large-time decay,
//! relaxation sweep, mesh-uniformity table), the scheme stability
//! comparison, and the framework self-test suites. All outputs are
//! deterministic: identical configurations produce byte-identical CSV files
//! regardless of `--threads`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, EXIT_CONFIG, EXIT_NUMERICAL};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "hyplat",
    version,
    about = "Spectral experiments for partially dissipative hyperbolic systems",
    after_help = "Exit codes: 0 success; 1 fitted slope outside its acceptance band or a \
                  self-test failure; 2 configuration error; 3 Kalman rank condition fails; \
                  4 numerical failure."
)]
struct Cli {
    /// Path to a flat key=value configuration file (defaults apply when omitted)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.directory from the configuration)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps (0 = rayon default)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Seed for randomized self-test vectors
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Print the effective configuration (defaults merged with --config) and exit
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the large-time decay experiment and fit the algebraic rate
    Decay,
    /// Sweep the relaxation parameter and fit the error orders
    RelaxSweep,
    /// Tabulate relaxation errors across mesh sizes at a fixed parameter
    RelaxTable,
    /// Compare central and one-sided scheme amplifications
    Stability,
    /// Run the framework invariant suites
    Selftest {
        /// Deliberately corrupt the named suite (testing aid)
        #[arg(long)]
        inject_fault: Option<String>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, Failure> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("cannot read config {}: {e}", p.display()),
            })?;
            ExperimentConfig::parse(&text)
                .map_err(|message| Failure { code: EXIT_CONFIG, message })
        }
    }
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let cfg = load_config(cli.config.as_ref())?;
    if cli.dump_config {
        print!("{}", cfg.serialize());
        return Ok(commands::EXIT_OK);
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure {
                code: EXIT_NUMERICAL,
                message: format!("cannot build thread pool: {e}"),
            })?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        None => Err(Failure {
            code: EXIT_CONFIG,
            message: "a subcommand is required (try 'hyplat --help')".to_string(),
        }),
        Some(Command::Decay) => commands::cmd_decay(&cfg, out),
        Some(Command::RelaxSweep) => commands::cmd_relax_sweep(&cfg, out),
        Some(Command::RelaxTable) => commands::cmd_relax_table(&cfg, out),
        Some(Command::Stability) => commands::cmd_stability(&cfg, out),
        Some(Command::Selftest { inject_fault }) => {
            commands::cmd_selftest(&cfg, cli.seed, inject_fault.as_deref())
        }
    }
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (e.g. `hyplat decay | head`) instead of
    // panicking mid-report.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code as u8)
        }
    }
}
