//! `kamlind <command> --config <file> --out <dir> [--seed n] [--force]`
//!
//! The thread count of the parallel parts is taken from `KAMLIND_THREADS`.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::commands::Ctx;
use crate::config::RunConfig;
use crate::output::RunDir;

pub const THREADS_ENV: &str = "KAMLIND_THREADS";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Newton iteration at one ε.
    Solve,
    /// Order-by-order Lindstedt series.
    Lindstedt,
    /// Lindstedt series by repeated doubling.
    Double,
    /// Excluded balls and the classified ε or λ plane.
    Atlas,
    /// Continuation along a path in ε.
    Sweep,
    /// Self-test of the invariants on this configuration.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Lindstedt => "lindstedt",
            Command::Double => "double",
            Command::Atlas => "atlas",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kamlind", version, about = "Invariant tori of conformally symplectic maps")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iterate even where the good-set test fails.
    #[arg(long)]
    force: bool,
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    if let Ok(n) = std::env::var(THREADS_ENV) {
        let n: usize = n
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got '{n}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let (cfg, bytes) = RunConfig::load(&cli.config)?;
    let mut out = RunDir::create(&cli.out)?;
    let ctx = Ctx {
        cfg: &cfg,
        seed: cli.seed,
        force: cli.force,
    };
    let status = match cli.command {
        Command::Solve => commands::solve(&ctx, &mut out),
        Command::Lindstedt => commands::lindstedt(&ctx, &mut out),
        Command::Double => commands::double(&ctx, &mut out),
        Command::Atlas => commands::atlas(&ctx, &mut out),
        Command::Sweep => commands::sweep(&ctx, &mut out),
        Command::Verify => commands::verify(&ctx, &mut out),
    };
    let code = match &status {
        Ok(code) => *code,
        Err(e) => commands::exit_status(e),
    };
    out.finish(cli.command.name(), &bytes, cli.seed, code)?;
    status
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_status(&e) as u8)
        }
    }
}
