use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use vboe_harness::config::{ExperimentConfig, ExperimentKind};
use vboe_harness::experiment::run_experiment;
use vboe_harness::pattern::load_pattern;
use vboe_harness::replay::{record_transcripts, replay_transcript, write_transcripts};
use vboe_harness::report::SeedSource;

const SEED_ENV: &str = "VBOE_SEED";

#[derive(Parser)]
#[command(name = "vboe", about = "Delegated-estimation experiment workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override (the VBOE_SEED environment variable wins over
    /// both this flag and the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Trial-count override.
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory for report.json / summary.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = automatic).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also record honest round transcripts for later replay.
    #[arg(long, default_value_t = false)]
    record: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write its report.
    Run(#[command(flatten)] RunArgs),
    /// Re-run client-side checks against a recorded transcript file.
    Replay {
        /// Transcript file (JSONL) produced by `run --record`.
        transcript: PathBuf,
    },
    /// Shortcut: bound tables for the parameters in a config file.
    Bounds(#[command(flatten)] RunArgs),
    /// Shortcut: exact blindness audit over all small patterns.
    Audit {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

fn resolve_seed(config_seed: u64, flag: Option<u64>) -> (u64, SeedSource) {
    if let Ok(text) = std::env::var(SEED_ENV) {
        if let Ok(seed) = text.parse() {
            return (seed, SeedSource::Environment);
        }
        eprintln!("warning: ignoring unparsable {SEED_ENV}={text:?}");
    }
    match flag {
        Some(seed) => (seed, SeedSource::Flag),
        None => (config_seed, SeedSource::Config),
    }
}

fn install_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn run(args: &RunArgs, force_kind: Option<ExperimentKind>) -> Result<bool, anyhow::Error> {
    install_threads(args.threads);
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(kind) = force_kind {
        config.experiment = kind;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    let (seed, source) = resolve_seed(config.master_seed, args.seed);
    let started = Instant::now();
    let report = run_experiment(&config, seed, source)?;
    eprintln!("experiment finished in {:.3}s", started.elapsed().as_secs_f64());
    report.write_to(&args.out)?;
    if args.record {
        if let Some(path) = &config.pattern {
            let pattern = load_pattern(path)?;
            let rounds = record_transcripts(&pattern, seed, 8, 8)?;
            write_transcripts(&args.out.join("transcripts.jsonl"), &pattern, seed, &rounds)?;
        }
    }
    for a in &report.assertions {
        eprintln!(
            "[{}] {}: {}",
            if a.passed { "pass" } else { "FAIL" },
            a.name,
            a.detail
        );
    }
    Ok(report.all_passed())
}

fn audit(out: &Path, threads: usize) -> Result<bool, anyhow::Error> {
    install_threads(threads);
    let config = ExperimentConfig {
        experiment: ExperimentKind::BlindnessAudit,
        pattern: None,
        params: None,
        adversary: None,
        trials: 1,
        master_seed: 0,
        tvd_threshold: 0.05,
    };
    let started = Instant::now();
    let report = run_experiment(&config, 0, SeedSource::Config)?;
    eprintln!("audit finished in {:.3}s", started.elapsed().as_secs_f64());
    report.write_to(out)?;
    for a in &report.assertions {
        eprintln!(
            "[{}] {}: {}",
            if a.passed { "pass" } else { "FAIL" },
            a.name,
            a.detail
        );
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args, None),
        Command::Bounds(args) => run(args, Some(ExperimentKind::BoundTables)),
        Command::Audit { out, threads } => audit(out, *threads),
        Command::Replay { transcript } => match replay_transcript(transcript) {
            Ok(mismatches) if mismatches.is_empty() => {
                eprintln!("transcript clean");
                Ok(true)
            }
            Ok(mismatches) => {
                for m in &mismatches {
                    eprintln!("round {}: {}", m.round, m.what);
                }
                Ok(false)
            }
            Err(e) => Err(e.into()),
        },
    };
    match outcome {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
