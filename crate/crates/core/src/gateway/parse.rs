//! Strict parsers for model outputs. Every response maps to exactly one of
//! a typed record or a structured error; nothing is silently defaulted.

use super::{FailureModeRecord, GatewayError, JudgeVerdict, Winner, FAILURE_MODES};
use crate::filter::Label;
use serde_json::Value;

/// Maps a single-token classification output to a label. The first
/// whitespace token is compared case-insensitively after trimming
/// punctuation; anything but yes/no is a parse failure.
pub fn parse_yes_no(raw: &str) -> Result<Label, GatewayError> {
    let token = raw
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric());
    if token.eq_ignore_ascii_case("yes") {
        Ok(Label::Medical)
    } else if token.eq_ignore_ascii_case("no") {
        Ok(Label::Other)
    } else {
        Err(GatewayError::UnparseableLabel(raw.to_string()))
    }
}

/// Parses a pairwise verdict object: `reasoning` string plus `winner` in
/// {"A", "B", "0"}. Extraneous keys are ignored; required keys are not.
pub fn parse_judge_verdict(raw: &str) -> Result<JudgeVerdict, GatewayError> {
    let value: Value =
        serde_json::from_str(raw).map_err(|e| GatewayError::MalformedJson(e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| GatewayError::MalformedJson("top level is not an object".to_string()))?;

    let winner = match object.get("winner") {
        Some(Value::String(s)) => match s.as_str() {
            "A" => Winner::A,
            "B" => Winner::B,
            "0" => Winner::Tie,
            other => return Err(GatewayError::InvalidWinner(other.to_string())),
        },
        Some(other) => return Err(GatewayError::InvalidWinner(other.to_string())),
        None => return Err(GatewayError::MissingKey("winner".to_string())),
    };
    let reasoning = match object.get("reasoning") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            return Err(GatewayError::WrongType {
                key: "reasoning".to_string(),
                expected: "a string",
            })
        }
        None => return Err(GatewayError::MissingKey("reasoning".to_string())),
    };
    Ok(JudgeVerdict { reasoning, winner })
}

/// Parses a failure-mode audit object: all fourteen mode keys, each a
/// boolean. A missing or mistyped key is an error naming it.
pub fn parse_failure_record(raw: &str) -> Result<FailureModeRecord, GatewayError> {
    let value: Value =
        serde_json::from_str(raw).map_err(|e| GatewayError::MalformedJson(e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| GatewayError::MalformedJson("top level is not an object".to_string()))?;

    let mut flags = [false; 14];
    for (i, mode) in FAILURE_MODES.iter().enumerate() {
        match object.get(*mode) {
            Some(Value::Bool(b)) => flags[i] = *b,
            Some(_) => {
                return Err(GatewayError::WrongType {
                    key: mode.to_string(),
                    expected: "a boolean",
                })
            }
            None => return Err(GatewayError::MissingKey(mode.to_string())),
        }
    }
    Ok(FailureModeRecord::new(flags))
}
