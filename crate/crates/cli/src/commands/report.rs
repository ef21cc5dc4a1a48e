//! `report` subcommands: win-rate matrices, failure-mode counts, and
//! benchmark tables.

use crate::commands::judge::VerdictRecord;
use crate::output::write_atomic_or_stdout;
use anyhow::Context;
use clap::{Args, Subcommand};
use dapt_core::gateway::{FailureModeRecord, Winner, FAILURE_MODES};
use dapt_core::jsonl::read_jsonl;
use dapt_core::metrics::{
    aggregate_benchmarks, failure_counts, win_rate_matrix, BenchmarkResult, PairOutcome,
    PairVerdict, WinRateMatrix,
};
use serde::Deserialize;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Pairwise win-rate matrix from judge verdicts.
    Winrate(WinrateArgs),
    /// Failure-mode counts per model from audit records.
    Failures(FailuresArgs),
    /// Benchmark accuracy/SE table with the aggregate row.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct WinrateArgs {
    /// Verdicts, JSON lines (as written by `judge`).
    #[arg(long)]
    pub verdicts: PathBuf,
    /// Matrix as CSV; stdout when neither output flag is given.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Counts and rates as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FailuresArgs {
    /// Audit records, JSON lines (as written by `audit`).
    #[arg(long)]
    pub records: PathBuf,
    /// Output CSV (model,mode,count,total); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark counts, JSON lines {"name", "correct", "n"}.
    #[arg(long)]
    pub results: PathBuf,
    /// Output CSV (name,accuracy,se) in percent; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_winrate(args: &WinrateArgs) -> anyhow::Result<()> {
    let verdicts: Vec<VerdictRecord> = read_jsonl(&args.verdicts).context("reading verdicts")?;
    if verdicts.is_empty() {
        log::warn!("verdict file {} is empty", args.verdicts.display());
    }
    let pairs: Vec<PairVerdict> = verdicts
        .iter()
        .map(|v| PairVerdict {
            first: v.model_a.clone(),
            second: v.model_b.clone(),
            outcome: match v.winner {
                Winner::A => PairOutcome::FirstWins,
                Winner::B => PairOutcome::SecondWins,
                Winner::Tie => PairOutcome::Tie,
            },
        })
        .collect();
    let matrix = win_rate_matrix(&pairs)?;

    if args.csv.is_none() && args.json.is_none() {
        return write_atomic_or_stdout(None, |sink| write_winrate_csv(sink, &matrix));
    }
    if let Some(path) = &args.csv {
        write_atomic_or_stdout(Some(path), |sink| write_winrate_csv(sink, &matrix))?;
    }
    if let Some(path) = &args.json {
        write_atomic_or_stdout(Some(path), |sink| {
            #[derive(serde::Serialize)]
            struct WinrateJson<'m> {
                #[serde(flatten)]
                matrix: &'m WinRateMatrix,
                rates: Vec<Vec<Option<f64>>>,
            }
            serde_json::to_writer_pretty(
                &mut *sink,
                &WinrateJson {
                    matrix: &matrix,
                    rates: matrix.rates(),
                },
            )?;
            sink.write_all(b"\n")?;
            Ok(())
        })?;
    }
    Ok(())
}

fn write_winrate_csv(sink: &mut dyn Write, matrix: &WinRateMatrix) -> anyhow::Result<()> {
    let mut csv = csv::Writer::from_writer(sink);
    let mut header = vec!["model".to_string()];
    header.extend(matrix.models.iter().cloned());
    csv.write_record(&header)?;
    for i in 0..matrix.models.len() {
        let mut row = vec![matrix.models[i].clone()];
        for j in 0..matrix.models.len() {
            row.push(match matrix.rate(i, j) {
                Some(rate) => format!("{rate:.4}"),
                None => String::new(),
            });
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ModelRecord {
    model: String,
    #[serde(flatten)]
    record: FailureModeRecord,
}

pub fn run_failures(args: &FailuresArgs) -> anyhow::Result<()> {
    let records: Vec<ModelRecord> = read_jsonl(&args.records).context("reading audit records")?;
    if records.is_empty() {
        log::warn!("record file {} is empty", args.records.display());
    }
    let pairs: Vec<(String, FailureModeRecord)> = records
        .into_iter()
        .map(|r| (r.model, r.record))
        .collect();
    let counts = failure_counts(&pairs);

    write_atomic_or_stdout(args.out.as_deref(), |sink| {
        let mut csv = csv::Writer::from_writer(sink);
        csv.write_record(["model", "mode", "count", "total"])?;
        for (model, model_counts) in &counts {
            for mode in FAILURE_MODES {
                csv.write_record([
                    model.as_str(),
                    mode,
                    &model_counts.counts[mode].to_string(),
                    &model_counts.total.to_string(),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    })
}

#[derive(Debug, Deserialize)]
struct BenchCounts {
    name: String,
    correct: u64,
    n: u64,
}

pub fn run_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let counts: Vec<BenchCounts> = read_jsonl(&args.results).context("reading benchmark counts")?;
    let results: Vec<BenchmarkResult> = counts
        .iter()
        .map(|c| BenchmarkResult::from_counts(c.name.clone(), c.correct, c.n))
        .collect::<Result<_, _>>()?;

    write_atomic_or_stdout(args.out.as_deref(), |sink| {
        let mut csv = csv::Writer::from_writer(sink);
        csv.write_record(["name", "accuracy", "se"])?;
        for r in &results {
            csv.write_record([
                r.name.as_str(),
                &format!("{:.2}", r.accuracy * 100.0),
                &format!("{:.2}", r.se * 100.0),
            ])?;
        }
        if !results.is_empty() {
            let (avg, se) = aggregate_benchmarks(&results)?;
            csv.write_record([
                "average",
                &format!("{:.2}", avg * 100.0),
                &format!("{:.2}", se * 100.0),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })
}
