//! `pack`: bin tokenized documents into constant-length sequences.

use crate::config::PipelineConfig;
use crate::output::write_atomic;
use anyhow::Context;
use clap::Args;
use dapt_core::jsonl::read_jsonl;
use dapt_core::pack::{pack, packing_efficiency, TokenDocument};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct PackArgs {
    /// Tokenized documents, JSON lines {"id", "tokens"}.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Sequence length of every output bin.
    #[arg(long)]
    pub len: Option<usize>,
    /// Token id separating documents.
    #[arg(long)]
    pub eos: Option<u32>,
    /// Token id filling bin tails.
    #[arg(long)]
    pub pad: Option<u32>,
    /// Output bins plus a trailing summary record, JSON lines.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct PackSummary {
    bins: usize,
    efficiency: f64,
}

pub fn run(config: &PipelineConfig, args: &PackArgs) -> anyhow::Result<()> {
    let docs: Vec<TokenDocument> = read_jsonl(&args.input).context("reading token documents")?;
    let len = args.len.unwrap_or(config.pack.len);
    let eos = args
        .eos
        .or(config.pack.eos)
        .context("--eos is required (or set pack.eos in the config)")?;
    let pad = args
        .pad
        .or(config.pack.pad)
        .context("--pad is required (or set pack.pad in the config)")?;

    let bins = pack(&docs, len, eos, pad)?;
    let summary = PackSummary {
        bins: bins.len(),
        efficiency: packing_efficiency(&bins),
    };
    write_atomic(&args.out, |sink| {
        for bin in &bins {
            serde_json::to_writer(&mut *sink, bin)?;
            sink.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut *sink, &summary)?;
        sink.write_all(b"\n")?;
        Ok(())
    })?;
    log::info!(
        "packed {} documents into {} bins (efficiency {:.4})",
        docs.len(),
        summary.bins,
        summary.efficiency
    );
    Ok(())
}
