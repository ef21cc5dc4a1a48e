//! Client-side machinery for external chat-completion services: prompt
//! templates, strict response parsers, a retrying transport with bounded
//! concurrency, and an append-only journal that makes batch runs auditable
//! and resumable.

mod client;
mod journal;
mod parse;
mod prompts;

pub use client::{
    ChatMessage, ChatRequest, ChatTransport, Gateway, GatewayConfig, HttpTransport, ItemOutcome,
    RetryPolicy, TransportError, WorkItem,
};
pub use journal::{Journal, JournalEntry};
pub use parse::{parse_failure_record, parse_judge_verdict, parse_yes_no};
pub use prompts::{
    build_classifier_prompt, build_failure_prompt, build_judge_prompt, render_template,
    CLASSIFIER_TEMPLATE, FAILURE_SYSTEM_PROMPT, FAILURE_USER_TEMPLATE, JUDGE_SYSTEM_PROMPT,
    JUDGE_USER_TEMPLATE,
};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("output {0:?} is neither yes nor no")]
    UnparseableLabel(String),
    #[error("response is not valid JSON: {0}")]
    MalformedJson(String),
    #[error("missing required key {0:?}")]
    MissingKey(String),
    #[error("key {key:?} must be {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("winner must be \"A\", \"B\" or \"0\", got {0:?}")]
    InvalidWinner(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("item {item_id:?} failed after {attempts} attempts: {last}")]
    RetriesExhausted {
        item_id: String,
        attempts: u32,
        last: TransportError,
    },
    #[error("malformed chat response: {0}")]
    MalformedResponse(String),
    #[error("journal {path}: {source}")]
    JournalIo { path: PathBuf, source: io::Error },
    #[error("invalid gateway configuration: {0}")]
    InvalidConfig(String),
}

/// A fully rendered request, transport-agnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptRequest {
    /// System message; empty means the request carries only a user message.
    pub system: String,
    pub user: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub response_format: ResponseFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseFormat {
    FreeText,
    Json,
}

/// Pairwise judgment: which of two presented responses won.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub reasoning: String,
    pub winner: Winner,
}

/// `"0"` is the wire spelling of a tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
    #[serde(rename = "0")]
    Tie,
}

impl Winner {
    /// Winner as seen after exchanging the A and B slots.
    pub fn swapped(self) -> Winner {
        match self {
            Winner::A => Winner::B,
            Winner::B => Winner::A,
            Winner::Tie => Winner::Tie,
        }
    }
}

/// The audited failure modes, in schema order.
pub const FAILURE_MODES: [&str; 14] = [
    "language_mixing",
    "typo",
    "contradiction",
    "hallucination",
    "omission",
    "overgeneralization",
    "irrelevance",
    "verbosity",
    "underexplained",
    "ambiguity",
    "instruction_ignoring",
    "repetition",
    "overconfidence",
    "bias_or_harm",
];

/// One audited response: a boolean per failure mode, always complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FailureModeRecord {
    flags: [bool; 14],
}

impl FailureModeRecord {
    pub fn new(flags: [bool; 14]) -> Self {
        FailureModeRecord { flags }
    }

    pub fn flag(&self, mode: &str) -> Option<bool> {
        FAILURE_MODES
            .iter()
            .position(|&m| m == mode)
            .map(|i| self.flags[i])
    }

    pub fn set(&mut self, mode: &str, value: bool) -> bool {
        match FAILURE_MODES.iter().position(|&m| m == mode) {
            Some(i) => {
                self.flags[i] = value;
                true
            }
            None => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, bool)> + '_ {
        FAILURE_MODES.iter().zip(self.flags).map(|(&m, f)| (m, f))
    }

    pub fn flagged(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.iter().filter(|(_, f)| *f).map(|(m, _)| m)
    }
}

impl Serialize for FailureModeRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(14))?;
        for (mode, flag) in self.iter() {
            map.serialize_entry(mode, &flag)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for FailureModeRecord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let entries = std::collections::BTreeMap::<String, serde_json::Value>::deserialize(
            deserializer,
        )?;
        let mut flags = [false; 14];
        for (i, mode) in FAILURE_MODES.iter().enumerate() {
            match entries.get(*mode) {
                Some(serde_json::Value::Bool(b)) => flags[i] = *b,
                Some(_) => {
                    return Err(D::Error::custom(format!("key {mode:?} must be a boolean")))
                }
                None => return Err(D::Error::custom(format!("missing required key {mode:?}"))),
            }
        }
        Ok(FailureModeRecord { flags })
    }
}

/// Deterministic per-item coin flip deciding whether a pairwise comparison
/// swaps its A/B slots before being sent to the judge. Keyed by item id so
/// resumed runs assign the same orders.
pub fn pairwise_order_flip(seed: u64, item_id: &str) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(item_id.as_bytes()));
    rng.next_u64() & 1 == 1
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
