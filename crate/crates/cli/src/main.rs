use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use dissipative_cli::config::RunConfig;
use dissipative_cli::io::Metadata;
use dissipative_cli::run::{run, Outcome, RunContext};

/// Green-function solves, finite-difference oracle runs and bound certification
/// for `eps*u_xxt + c^2*u_xx - u_tt - 2a*u_t = -f`.
///
/// Exit status: 0 success, 1 usage or configuration error, 2 certified bound
/// violation, 3 non-convergence.
#[derive(Parser, Debug)]
#[command(name = "dissip", version)]
struct Cli {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,

    /// Worker threads for parallel sweeps (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,

    /// Output directory (overrides `[output] dir`)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for randomized spot checks (overrides `seed` in the config)
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,

    /// Suppress the summary line
    #[arg(long)]
    quiet: bool,
}

fn execute(cli: &Cli) -> Result<Outcome> {
    if let Some(jobs) = cli.jobs {
        anyhow::ensure!(jobs > 0, "--jobs must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    let text = std::fs::read_to_string(&cli.config).with_context(|| format!("reading config {}", cli.config.display()))?;
    let mut raw = RunConfig::parse(&text).with_context(|| format!("in {}", cli.config.display()))?;
    if cli.seed.is_some() {
        raw.seed = cli.seed;
    }
    let seed = raw.seed.unwrap_or(0);
    let hash = dissipative_cli::config_hash(&raw)?;

    let cfg = RunConfig::load(&cli.config)?;
    let cfg = RunConfig { seed: Some(seed), ..cfg };
    cfg.validate().with_context(|| format!("in {}", cli.config.display()))?;

    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let ctx = RunContext {
        out_dir,
        seed,
        meta: Metadata::new(cfg.command.to_string(), hash, seed),
        quiet: cli.quiet,
    };
    run(&cfg, &ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
