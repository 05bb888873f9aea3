use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod output;

use output::{CliError, Manifest};

/// Quantum broadcast channel toolkit.
#[derive(Debug, Parser)]
#[command(name = "qbc", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Root seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (stdout if omitted). A `<out>.manifest.json` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, env = "QBC_THREADS", default_value_t = 0)]
    threads: usize,

    /// Channel description (JSON).
    #[arg(long, global = true)]
    channel: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Monte Carlo check of the decoupling inequality.
    DecoupleCheck(DecoupleArgs),
    /// Simulate the one-shot broadcast protocol.
    OneShotSim(OneShotArgs),
    /// Sweep the boundary of a channel's rate region (CSV output).
    Region(RegionArgs),
    /// Classical Marton region of a classical_embedded channel.
    Marton(MartonArgs),
    /// Typical sets and projectors of a biased bit.
    TypicalDemo(TypicalArgs),
    /// Moments of |U00|^2 for the Haar sampler.
    HaarTest(HaarArgs),
}

#[derive(Debug, Args, Serialize)]
struct DecoupleArgs {
    /// State file, or `random` for a random pure state on `--dims`.
    #[arg(long, default_value = "random")]
    state: String,
    /// Factor layout such as `A=16,R=2`.
    #[arg(long)]
    dims: Option<String>,
    /// System the unitary acts on (default: first factor).
    #[arg(long)]
    system: Option<String>,
    /// Reference factors (default: every other factor).
    #[arg(long, value_delimiter = ',')]
    reference: Option<Vec<String>>,
    /// Dimension of the discarded part Â.
    #[arg(long)]
    ahat: usize,
    #[arg(long, default_value_t = 500)]
    trials: usize,
}

#[derive(Debug, Args, Serialize)]
struct OneShotArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModeArg {
    Assisted,
    Unassisted,
}

#[derive(Debug, Args, Serialize)]
struct RegionArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Assisted)]
    mode: ModeArg,
    /// Channel uses per block.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    sweep: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 2)]
    a1: usize,
    #[arg(long, default_value_t = 2)]
    a2: usize,
    /// Dimension of D (default: channel input dimension).
    #[arg(long)]
    d_dim: Option<usize>,
    /// Nelder–Mead iteration cap per start.
    #[arg(long, default_value_t = 1500)]
    max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
struct MartonArgs {
    #[arg(long, default_value_t = 32)]
    sweep: usize,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    /// |U1| (default |X|).
    #[arg(long)]
    u1: Option<usize>,
    /// |U2| (default |X|).
    #[arg(long)]
    u2: Option<usize>,
    #[arg(long, default_value_t = 1500)]
    max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
struct TypicalArgs {
    /// Probability of outcome 0.
    #[arg(long)]
    p: f64,
    #[arg(long)]
    n: usize,
    /// Typicality window (default n^{-1/4}).
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct HaarArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    ExitCode::from(EXIT_USAGE)
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(EXIT_VALIDATION)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbc: {e}");
            ExitCode::from(match e {
                CliError::Infeasible(_) => EXIT_INFEASIBLE,
                CliError::Validation(_) => EXIT_VALIDATION,
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let mut manifest = Manifest::new(command_name(&cli.command), &cli.command, cli.global.seed.unwrap_or(0));
    let produced = pool.install(|| commands::dispatch(&cli.command, &cli.global, &mut manifest))?;
    output::emit(cli.global.out.as_deref(), produced, &manifest, started.elapsed())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::DecoupleCheck(_) => "decouple-check",
        Command::OneShotSim(_) => "one-shot-sim",
        Command::Region(_) => "region",
        Command::Marton(_) => "marton",
        Command::TypicalDemo(_) => "typical-demo",
        Command::HaarTest(_) => "haar-test",
    }
}
