//! `audit`: flag failure modes in model responses through the chat backend.

use crate::config::PipelineConfig;
use crate::output::write_atomic;
use anyhow::Context;
use clap::Args;
use dapt_core::gateway::{
    build_failure_prompt, parse_failure_record, FailureModeRecord, Journal, WorkItem,
};
use dapt_core::jsonl::{read_jsonl, write_jsonl};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Responses to audit, JSON lines {"id", "context"?, "query",
    /// "response", "model"}.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output failure-mode records, JSON lines.
    #[arg(long)]
    pub out: PathBuf,
    /// Append-only request/response journal; reruns skip journaled ids.
    #[arg(long)]
    pub journal: PathBuf,
}

#[derive(Debug, Deserialize)]
struct AuditInput {
    id: String,
    #[serde(default)]
    context: String,
    query: String,
    response: String,
    model: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AuditRecord {
    pub id: String,
    pub model: String,
    #[serde(flatten)]
    pub record: FailureModeRecord,
}

pub fn run(config: &PipelineConfig, args: &AuditArgs) -> anyhow::Result<()> {
    let inputs: Vec<AuditInput> = read_jsonl(&args.input).context("reading responses")?;
    let gateway = super::build_gateway(config)?;
    let mut journal = Journal::open(&args.journal)?;

    let items: Vec<WorkItem> = inputs
        .iter()
        .map(|input| WorkItem {
            id: input.id.clone(),
            prompt: build_failure_prompt(&input.context, &input.query, &input.response),
        })
        .collect();
    let outcomes = gateway.run_batch(&items, &mut journal);

    let mut records = Vec::with_capacity(inputs.len());
    let mut failures = 0usize;
    let mut first_error = None;
    for (input, outcome) in inputs.iter().zip(outcomes) {
        match outcome
            .result
            .and_then(|content| parse_failure_record(&content))
        {
            Ok(record) => records.push(AuditRecord {
                id: input.id.clone(),
                model: input.model.clone(),
                record,
            }),
            Err(e) => {
                failures += 1;
                log::error!("response {:?}: {e}", input.id);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(anyhow::Error::new(e).context(format!(
            "{failures} of {} audits failed; the journal retains completed items",
            inputs.len()
        )));
    }

    write_atomic(&args.out, |sink| {
        write_jsonl(sink, &records)?;
        Ok(())
    })?;
    log::info!("audited {} responses", records.len());
    Ok(())
}
