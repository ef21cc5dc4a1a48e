//! `merge`: blend two checkpoints under a recipe and emit a decision
//! report.

use crate::output::write_atomic;
use anyhow::Context;
use clap::Args;
use dapt_core::archive::{read_checkpoint, write_checkpoint, WriteOptions};
use dapt_core::merge::{load_recipe, merge_checkpoints_with, DEFAULT_DOT_THRESHOLD};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Merge recipe YAML.
    #[arg(long)]
    pub recipe: PathBuf,
    /// Checkpoint acting as the interpolation origin (t = 0).
    #[arg(long)]
    pub base: PathBuf,
    /// Checkpoint acting as the interpolation target (t = 1).
    #[arg(long)]
    pub other: PathBuf,
    /// Merged checkpoint output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-tensor decision report, JSON.
    #[arg(long)]
    pub report: PathBuf,
    /// Normalized-dot cutoff for the linear-interpolation fallback.
    #[arg(long, default_value_t = DEFAULT_DOT_THRESHOLD)]
    pub dot_threshold: f64,
}

pub fn run(args: &MergeArgs) -> anyhow::Result<()> {
    let recipe = load_recipe(&args.recipe).context("loading recipe")?;
    let base = read_checkpoint(&args.base).context("reading base checkpoint")?;
    let other = read_checkpoint(&args.other).context("reading other checkpoint")?;

    let (merged, report) = merge_checkpoints_with(&recipe, &base, &other, args.dot_threshold)?;

    // the checkpoint writer is atomic via a temporary sibling as well
    let tmp = args.out.with_extension("tmp-merge");
    write_checkpoint(&merged, &tmp, &WriteOptions::default()).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    std::fs::rename(&tmp, &args.out)
        .with_context(|| format!("replacing {}", args.out.display()))?;

    write_atomic(&args.report, |sink| {
        serde_json::to_writer_pretty(&mut *sink, &report)?;
        sink.write_all(b"\n")?;
        Ok(())
    })?;
    log::info!(
        "merged {} tensors ({} interpolated, {} copied) across {} layers",
        report.records.len(),
        report.merged,
        report.copied,
        report.num_layers
    );
    Ok(())
}
