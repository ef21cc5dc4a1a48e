//! `judge`: pairwise response comparison through the chat backend, with
//! seeded A/B order debiasing.

use crate::config::PipelineConfig;
use crate::output::write_atomic;
use anyhow::Context;
use clap::Args;
use dapt_core::gateway::{
    build_judge_prompt, pairwise_order_flip, parse_judge_verdict, Journal, Winner, WorkItem,
};
use dapt_core::jsonl::{read_jsonl, write_jsonl};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// Comparison pairs, JSON lines {"id", "context"?, "query",
    /// "response_a", "response_b", "model_a", "model_b"}.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output verdicts, JSON lines.
    #[arg(long)]
    pub out: PathBuf,
    /// Append-only request/response journal; reruns skip journaled ids.
    #[arg(long)]
    pub journal: PathBuf,
    /// Seed for the per-item A/B order flip.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct PairInput {
    id: String,
    #[serde(default)]
    context: String,
    query: String,
    response_a: String,
    response_b: String,
    model_a: String,
    model_b: String,
}

/// Verdict with the order flip undone: `winner` refers to the original
/// `model_a`/`model_b` slots regardless of what the judge saw.
#[derive(Debug, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub id: String,
    pub model_a: String,
    pub model_b: String,
    pub winner: Winner,
    pub reasoning: String,
    /// True when the judge saw the responses in swapped order.
    pub swapped: bool,
}

pub fn run(config: &PipelineConfig, args: &JudgeArgs, global_seed: Option<u64>) -> anyhow::Result<()> {
    let pairs: Vec<PairInput> = read_jsonl(&args.input).context("reading comparison pairs")?;
    let seed = args.seed.or(global_seed).unwrap_or(config.filter.seed);
    let gateway = super::build_gateway(config)?;
    let mut journal = Journal::open(&args.journal)?;

    let items: Vec<WorkItem> = pairs
        .iter()
        .map(|pair| {
            let swapped = pairwise_order_flip(seed, &pair.id);
            let (first, second) = if swapped {
                (&pair.response_b, &pair.response_a)
            } else {
                (&pair.response_a, &pair.response_b)
            };
            WorkItem {
                id: pair.id.clone(),
                prompt: build_judge_prompt(&pair.context, &pair.query, first, second),
            }
        })
        .collect();
    let outcomes = gateway.run_batch(&items, &mut journal);

    let mut records = Vec::with_capacity(pairs.len());
    let mut failures = 0usize;
    let mut first_error = None;
    for (pair, outcome) in pairs.iter().zip(outcomes) {
        match outcome
            .result
            .and_then(|content| parse_judge_verdict(&content))
        {
            Ok(verdict) => {
                let swapped = pairwise_order_flip(seed, &pair.id);
                let winner = if swapped {
                    verdict.winner.swapped()
                } else {
                    verdict.winner
                };
                records.push(VerdictRecord {
                    id: pair.id.clone(),
                    model_a: pair.model_a.clone(),
                    model_b: pair.model_b.clone(),
                    winner,
                    reasoning: verdict.reasoning,
                    swapped,
                });
            }
            Err(e) => {
                failures += 1;
                log::error!("pair {:?}: {e}", pair.id);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(anyhow::Error::new(e).context(format!(
            "{failures} of {} comparisons failed; the journal retains completed items",
            pairs.len()
        )));
    }

    write_atomic(&args.out, |sink| {
        write_jsonl(sink, &records)?;
        Ok(())
    })?;
    log::info!("judged {} comparisons", records.len());
    Ok(())
}
