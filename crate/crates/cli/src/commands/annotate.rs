//! `annotate`: label documents medical/other through the chat backend.

use crate::config::PipelineConfig;
use crate::output::write_atomic;
use anyhow::Context;
use clap::Args;
use dapt_core::filter::Label;
use dapt_core::gateway::{build_classifier_prompt, parse_yes_no, Journal, WorkItem};
use dapt_core::jsonl::{read_jsonl, write_jsonl};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Input documents, JSON lines {"id", "text", "score"?}.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output documents with an added "label" field.
    #[arg(long)]
    pub out: PathBuf,
    /// Append-only request/response journal; reruns skip journaled ids.
    #[arg(long)]
    pub journal: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotateRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

pub fn run(config: &PipelineConfig, args: &AnnotateArgs) -> anyhow::Result<()> {
    let mut docs: Vec<AnnotateRecord> =
        read_jsonl(&args.input).context("reading input documents")?;
    let gateway = super::build_gateway(config)?;
    let mut journal = Journal::open(&args.journal)?;

    let items: Vec<WorkItem> = docs
        .iter()
        .map(|doc| WorkItem {
            id: doc.id.clone(),
            prompt: build_classifier_prompt(&doc.text),
        })
        .collect();
    let outcomes = gateway.run_batch(&items, &mut journal);

    let mut failures = 0usize;
    let mut first_error = None;
    for (doc, outcome) in docs.iter_mut().zip(outcomes) {
        match outcome.result.and_then(|content| parse_yes_no(&content)) {
            Ok(label) => doc.label = Some(label),
            Err(e) => {
                failures += 1;
                log::error!("document {:?}: {e}", doc.id);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(anyhow::Error::new(e).context(format!(
            "{failures} of {} documents failed to annotate; the journal retains completed items",
            docs.len()
        )));
    }

    write_atomic(&args.out, |sink| {
        write_jsonl(sink, &docs)?;
        Ok(())
    })?;
    log::info!("annotated {} documents", docs.len());
    Ok(())
}
