//! Command-line front end: one subcommand per experiment family plus a
//! `verify` replay mode that recomputes artifacts and diffs them against a
//! previous run.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use glrtsim::config::{parse_config, ExperimentConfig, ExperimentTag};
use glrtsim::experiment::{run_experiment, verify};

#[derive(Parser)]
#[command(
    name = "glrtsim",
    about = "Monte-Carlo validation of asymptotic approximations for a multi-antenna GLRT detector",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker thread count (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the trial count from the configuration.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Moments against the dimension ratio c_N = M/N (N sweep).
    MomentsVsC(CommonArgs),
    /// Moments against the path count L (L sweep).
    MomentsVsL(CommonArgs),
    /// ROC with closed-form thresholds and empirical detection.
    RocHybrid(CommonArgs),
    /// Fully closed-form ROC curves.
    RocTheoretical(CommonArgs),
    /// ROC across proportionally growing (L, M, N).
    RocGrowingLmn(CommonArgs),
    /// Marcenko-Pastur spectral property validation.
    MpValidation(CommonArgs),
    /// Trace-lemma moment validation.
    TraceLemma(CommonArgs),
    /// Recompute artifacts from the configuration and diff against --out.
    Verify(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::MomentsVsC(a)
            | Command::MomentsVsL(a)
            | Command::RocHybrid(a)
            | Command::RocTheoretical(a)
            | Command::RocGrowingLmn(a)
            | Command::MpValidation(a)
            | Command::TraceLemma(a)
            | Command::Verify(a) => a,
        }
    }

    fn expected_tag(&self) -> Option<ExperimentTag> {
        match self {
            Command::MomentsVsC(_) => Some(ExperimentTag::MomentsVsC),
            Command::MomentsVsL(_) => Some(ExperimentTag::MomentsVsL),
            Command::RocHybrid(_) => Some(ExperimentTag::RocHybrid),
            Command::RocTheoretical(_) => Some(ExperimentTag::RocTheoretical),
            Command::RocGrowingLmn(_) => Some(ExperimentTag::RocGrowingLmn),
            Command::MpValidation(_) => Some(ExperimentTag::MpValidation),
            Command::TraceLemma(_) => Some(ExperimentTag::TraceLemma),
            Command::Verify(_) => None,
        }
    }
}

fn load_config(cmd: &Command) -> glrtsim::Result<ExperimentConfig> {
    let args = cmd.common();
    let mut config = parse_config(&args.config)?;
    if let Some(expected) = cmd.expected_tag() {
        if config.experiment != expected {
            return Err(glrtsim::Error::Config(format!(
                "configuration declares experiment '{}' but the subcommand expects '{}'",
                config.experiment.label(),
                expected.label()
            )));
        }
    }
    if let Some(trials) = args.trials {
        if trials < 2 {
            return Err(glrtsim::Error::Config(format!(
                "trials must be >= 2, got {trials}"
            )));
        }
        config.trials = trials;
    }
    Ok(config)
}

fn run(cmd: &Command) -> glrtsim::Result<()> {
    let args = cmd.common();
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| glrtsim::Error::Config(format!("thread pool setup failed: {e}")))?;
    }
    let config = load_config(cmd)?;
    match cmd {
        Command::Verify(_) => {
            verify(&config, &args.out)?;
            println!(
                "verified: artifacts in {} match the configuration",
                args.out.display()
            );
        }
        _ => {
            let written = run_experiment(&config, &args.out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
