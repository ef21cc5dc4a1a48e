//! Single entry point wiring the pipeline stages behind subcommands.
//!
//! The CLI layer only composes operations from the core crate: it loads and
//! validates configuration, reads and writes the interchange files, and
//! maps errors to exit codes (0 success, 2 validation, 3 I/O, 4 upstream
//! service).

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::{annotate, audit, filter, judge, merge, pack, report};
use config::load_config;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "dapt", version, about = "Domain-adaptation pipeline toolkit")]
struct Cli {
    /// Pipeline configuration YAML.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Seed for seeded operations; subcommand flags take precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label documents medical/other via the chat backend.
    Annotate(annotate::AnnotateArgs),
    /// Threshold filtering, metric sweeps, stats, and splitting.
    Filter {
        #[command(subcommand)]
        command: filter::FilterCommand,
    },
    /// Deterministic train/test split (alias for `filter split`).
    Split(filter::SplitArgs),
    /// Pack tokenized documents into constant-length sequences.
    Pack(pack::PackArgs),
    /// SLERP-merge two checkpoints under a recipe.
    Merge(merge::MergeArgs),
    /// Pairwise response comparison via the chat backend.
    Judge(judge::JudgeArgs),
    /// Failure-mode audit of responses via the chat backend.
    Audit(audit::AuditArgs),
    /// Aggregate verdicts, audits, and benchmark counts into reports.
    Report {
        #[command(subcommand)]
        command: report::ReportCommand,
    },
}

#[derive(Serialize)]
struct ErrorRecord<'e> {
    stage: &'e str,
    error: String,
    causes: Vec<String>,
    exit_code: i32,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level.as_str()))
        .init();

    let stage = stage_name(&cli.command);
    match run(&cli) {
        Ok(()) => {}
        Err(err) => {
            let code = exit_code(&err);
            let record = ErrorRecord {
                stage,
                error: err.to_string(),
                causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
                exit_code: code,
            };
            eprintln!("{}", serde_json::to_string(&record).expect("error record"));
            std::process::exit(code);
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Annotate(args) => annotate::run(&config, args),
        Command::Filter { command } => match command {
            filter::FilterCommand::Sweep(args) => filter::run_sweep(&config, args),
            filter::FilterCommand::Apply(args) => filter::run_apply(&config, args),
            filter::FilterCommand::Stats(args) => filter::run_stats(args),
            filter::FilterCommand::Split(args) => filter::run_split(&config, args, cli.seed),
        },
        Command::Split(args) => filter::run_split(&config, args, cli.seed),
        Command::Pack(args) => pack::run(&config, args),
        Command::Merge(args) => merge::run(args),
        Command::Judge(args) => judge::run(&config, args, cli.seed),
        Command::Audit(args) => audit::run(&config, args),
        Command::Report { command } => match command {
            report::ReportCommand::Winrate(args) => report::run_winrate(args),
            report::ReportCommand::Failures(args) => report::run_failures(args),
            report::ReportCommand::Bench(args) => report::run_bench(args),
        },
    }
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::Annotate(_) => "annotate",
        Command::Filter { .. } => "filter",
        Command::Split(_) => "split",
        Command::Pack(_) => "pack",
        Command::Merge(_) => "merge",
        Command::Judge(_) => "judge",
        Command::Audit(_) => "audit",
        Command::Report { .. } => "report",
    }
}

/// 2 validation, 3 I/O, 4 upstream service, 1 anything else.
fn exit_code(err: &anyhow::Error) -> i32 {
    use dapt_core::archive::ArchiveError;
    use dapt_core::filter::FilterError;
    use dapt_core::gateway::GatewayError;
    use dapt_core::jsonl::JsonlError;
    use dapt_core::merge::MergeError;
    use dapt_core::metrics::MetricsError;
    use dapt_core::pack::PackError;

    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<GatewayError>() {
            return match e {
                GatewayError::JournalIo { .. } => 3,
                GatewayError::InvalidConfig(_) => 2,
                _ => 4,
            };
        }
        if let Some(e) = cause.downcast_ref::<ArchiveError>() {
            return match e {
                ArchiveError::Io { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<MergeError>() {
            return match e {
                MergeError::Io { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<JsonlError>() {
            return match e {
                JsonlError::Io { .. } => 3,
                JsonlError::Parse { .. } => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<config::ConfigError>() {
            return match e {
                config::ConfigError::Io { .. } => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<FilterError>().is_some()
            || cause.downcast_ref::<PackError>().is_some()
            || cause.downcast_ref::<MetricsError>().is_some()
        {
            return 2;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}
