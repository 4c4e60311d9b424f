use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use inferlab::config::ExperimentConfig;
use inferlab::error::Error;
use inferlab::pipeline::{AnalyzeKind, AttackKind, Pipeline};

/// Membership / attribute inference experiment harness.
#[derive(Parser)]
#[command(name = "inferlab", version, about)]
struct Cli {
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize the dataset (synthetic generation or CSV import).
    Generate,
    /// Derive class labels by k-means (or pass supplied labels through).
    Label,
    /// Train the target model and persist it.
    Train,
    /// Run an inference attack against the trained model.
    Attack {
        #[arg(value_enum)]
        kind: AttackArg,
    },
    /// Produce an analysis artifact.
    Analyze {
        #[arg(value_enum)]
        kind: AnalyzeArg,
        /// Also emit the full JSON report with raw confidence lists.
        #[arg(long)]
        full: bool,
    },
    /// Collate all artifacts in the run directory into summary.json.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    Mia,
    StrongMia,
    Aia,
    ApproxAia,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeArg {
    DistAuc,
    Histogram,
    SyntheticAuc,
    ConfProfile,
}

impl From<AttackArg> for AttackKind {
    fn from(a: AttackArg) -> Self {
        match a {
            AttackArg::Mia => AttackKind::Mia,
            AttackArg::StrongMia => AttackKind::StrongMia,
            AttackArg::Aia => AttackKind::Aia,
            AttackArg::ApproxAia => AttackKind::ApproxAia,
        }
    }
}

impl From<AnalyzeArg> for AnalyzeKind {
    fn from(a: AnalyzeArg) -> Self {
        match a {
            AnalyzeArg::DistAuc => AnalyzeKind::DistAuc,
            AnalyzeArg::Histogram => AnalyzeKind::Histogram,
            AnalyzeArg::SyntheticAuc => AnalyzeKind::SyntheticAuc,
            AnalyzeArg::ConfProfile => AnalyzeKind::ConfProfile,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Exit codes: 1 usage, 2 config/schema validation, 3 runtime failure.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Validation { .. } | Error::Schema(_) | Error::Domain(_) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = load_config(&cli)?;
    let pipeline = Pipeline::new(cfg)?;
    eprintln!("run dir: {}", pipeline.run_dir().display());
    match cli.command {
        Command::Generate => pipeline.generate(),
        Command::Label => pipeline.label(),
        Command::Train => pipeline.train(),
        Command::Attack { kind } => pipeline.attack(kind.into()),
        Command::Analyze { kind, full } => pipeline.analyze(kind.into(), full),
        Command::Report => {
            let summary = pipeline.report()?;
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
