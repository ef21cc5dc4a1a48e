//! `filter` subcommands: threshold sweeps, keep/drop application, corpus
//! statistics, and seeded splitting.

use crate::config::PipelineConfig;
use crate::output::{write_atomic, write_atomic_or_stdout};
use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use dapt_core::filter::{
    apply_threshold, corpus_stats, metric_curve, split_dataset, validate_documents, Label,
    ScoredDocument,
};
use dapt_core::jsonl::{read_jsonl, write_jsonl};
use std::path::PathBuf;

#[derive(Debug, Subcommand)]
pub enum FilterCommand {
    /// Metric curve over a threshold grid, written as CSV.
    Sweep(SweepArgs),
    /// Keep documents scoring at or above the threshold.
    Apply(ApplyArgs),
    /// Document/word totals and optionally the positive fraction.
    Stats(StatsArgs),
    /// Deterministic train/test split.
    Split(SplitArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Scored documents with gold labels, JSON lines.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Threshold grid `begin:end:step`, or a comma-separated list.
    #[arg(long)]
    pub taus: String,
    /// Output CSV (tau,precision,recall,f1,f_beta).
    #[arg(long)]
    pub out: PathBuf,
    /// Beta for the F-beta column.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Decision threshold; scores >= tau are kept.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Label documents by thresholding their scores at this value.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Label documents by their gold labels (all must carry one).
    #[arg(long)]
    pub use_gold: bool,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Fraction of documents assigned to the test side.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Shuffle seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

fn load_documents(path: &PathBuf) -> anyhow::Result<Vec<ScoredDocument>> {
    let docs: Vec<ScoredDocument> = read_jsonl(path).context("reading scored documents")?;
    validate_documents(&docs)?;
    Ok(docs)
}

pub fn run_sweep(config: &PipelineConfig, args: &SweepArgs) -> anyhow::Result<()> {
    let docs = load_documents(&args.input)?;
    let taus = parse_taus(&args.taus)?;
    let beta = args.beta.unwrap_or(config.filter.beta);
    if beta <= 0.0 {
        bail!("beta must be positive, got {beta}");
    }
    let rows = metric_curve(&docs, &taus, beta)?;
    write_atomic(&args.out, |sink| {
        let mut csv = csv::Writer::from_writer(sink);
        csv.write_record(["tau", "precision", "recall", "f1", "f_beta"])?;
        for row in &rows {
            csv.write_record([
                format!("{:.6}", row.tau),
                format!("{:.6}", row.precision),
                format!("{:.6}", row.recall),
                format!("{:.6}", row.f1),
                format!("{:.6}", row.f_beta),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    log::info!("wrote {} curve rows", rows.len());
    Ok(())
}

pub fn run_apply(config: &PipelineConfig, args: &ApplyArgs) -> anyhow::Result<()> {
    let docs = load_documents(&args.input)?;
    let tau = args.tau.unwrap_or(config.filter.tau);
    let kept = apply_threshold(&docs, tau)?;
    log::info!("kept {} of {} documents at tau {tau}", kept.len(), docs.len());
    write_atomic(&args.out, |sink| {
        write_jsonl(sink, &kept)?;
        Ok(())
    })
}

pub fn run_stats(args: &StatsArgs) -> anyhow::Result<()> {
    let docs = load_documents(&args.input)?;
    let labels: Option<Vec<Label>> = match (args.tau, args.use_gold) {
        (Some(_), true) => bail!("--tau and --use-gold are mutually exclusive"),
        (Some(tau), false) => {
            if !(0.0..=1.0).contains(&tau) {
                bail!("tau {tau} outside [0, 1]");
            }
            Some(
                docs.iter()
                    .map(|d| if d.score >= tau { Label::Medical } else { Label::Other })
                    .collect(),
            )
        }
        (None, true) => Some(
            docs.iter()
                .map(|d| {
                    d.gold_label
                        .ok_or_else(|| anyhow::anyhow!("document {:?} has no gold label", d.id))
                })
                .collect::<Result<_, _>>()?,
        ),
        (None, false) => None,
    };
    let stats = corpus_stats(&docs, labels.as_deref())?;
    write_atomic_or_stdout(args.out.as_deref(), |sink| {
        serde_json::to_writer_pretty(&mut *sink, &stats)?;
        sink.write_all(b"\n")?;
        Ok(())
    })
}

pub fn run_split(
    config: &PipelineConfig,
    args: &SplitArgs,
    global_seed: Option<u64>,
) -> anyhow::Result<()> {
    let docs = load_documents(&args.input)?;
    let fraction = args.test_fraction.unwrap_or(config.filter.test_fraction);
    let seed = args.seed.or(global_seed).unwrap_or(config.filter.seed);
    let (train, test) = split_dataset(&docs, fraction, seed)?;
    log::info!(
        "split {} documents into {} train / {} test (seed {seed})",
        docs.len(),
        train.len(),
        test.len()
    );
    write_atomic(&args.train_out, |sink| {
        write_jsonl(sink, &train)?;
        Ok(())
    })?;
    write_atomic(&args.test_out, |sink| {
        write_jsonl(sink, &test)?;
        Ok(())
    })?;
    Ok(())
}

/// Parses `begin:end:step` into an inclusive grid, or a comma-separated
/// list of thresholds.
pub fn parse_taus(spec: &str) -> anyhow::Result<Vec<f64>> {
    let taus = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [begin, end, step] = parts.as_slice() else {
            bail!("threshold grid must be begin:end:step, got {spec:?}");
        };
        let begin: f64 = begin.parse().context("grid begin")?;
        let end: f64 = end.parse().context("grid end")?;
        let step: f64 = step.parse().context("grid step")?;
        if step <= 0.0 {
            bail!("grid step must be positive, got {step}");
        }
        if begin > end {
            bail!("grid begin {begin} exceeds end {end}");
        }
        let count = ((end - begin) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| (begin + i as f64 * step).min(end)).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().context("threshold value"))
            .collect::<Result<Vec<_>, _>>()?
    };
    if taus.is_empty() {
        bail!("threshold list is empty");
    }
    for &tau in &taus {
        if !(0.0..=1.0).contains(&tau) {
            bail!("threshold {tau} outside [0, 1]");
        }
    }
    Ok(taus)
}
