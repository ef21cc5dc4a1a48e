//! The three canonical prompt templates and their builders.
//!
//! Substitution is a single left-to-right pass over the template, so
//! placeholder-shaped text inside substituted values is never re-expanded.

use super::{PromptRequest, ResponseFormat};

/// Zero-shot document classification prompt. The document replaces the
/// `<DOCUMENT>` marker; the response is constrained to a single token.
pub const CLASSIFIER_TEMPLATE: &str = "\
You are a medical expert tasked with identifying whether the provided content is both medical and high quality. Analyze the content carefully based on the following criteria:
- The content is related to health, medicine, or healthcare.
- The information needs to be scientific, high-quality, accurate, and well-structured.
Only allow the highest quality data. If it doesn't seem scientific, then leave it out. Also, leave out news stories or similar styles of text that are not written by medical experts.
Restrict your response to 'yes' or 'no'. Do not include any other explanation.
---
Content: <DOCUMENT>";

pub const JUDGE_SYSTEM_PROMPT: &str = "You are an AI assistant that evaluates pairs of responses to a given query. Your goal is to determine which response is better based on correctness, clarity, completeness, and relevance.";

pub const JUDGE_USER_TEMPLATE: &str = r#"Compare the following two responses. Your answer needs to follow this json-schema:

```json
{
  "type": "object",
  "properties": {
    "reasoning": {
      "type": "string",
      "description": "Detailed explanation of why this decision was made, analyzing the quality and characteristics of both responses."
    },
    "winner": {
      "type": "string",
      "enum": ["A", "B", "0"],
      "description": "The winning response, i.e. 'A', 'B' or '0' indicating a tie."
    }
  },
  "required": ["reasoning", "winner"]
}
```

Context:
  {{ context }}

Query:
  {{ query }}

Response A:
  {{ response_a }}

Response B:
  {{ response_b }}

Based on the query and context above, which response is better?"#;

pub const FAILURE_SYSTEM_PROMPT: &str = r#"You are an evaluator of language model responses.

Your task is to analyze whether the given response exhibits any of the following failure modes.

```json
{
  "type": "object",
  "properties": {
    "language_mixing": {
      "type": "boolean",
      "description": "Whether the response unexpectedly switches between languages or dialects without instruction or user prompting."
    },
    "typo": {
      "type": "boolean",
      "description": "Whether the response contains spelling mistakes, character errors, or malformed words that reduce readability."
    },
    ...
  },
  "required": [
    "language_mixing", "typo", "contradiction",
    "hallucination", "omission",
    "overgeneralization", "irrelevance",
    "verbosity", "underexplained", "ambiguity",
    "instruction_ignoring", "repetition",
    "overconfidence", "bias_or_harm"
  ]
}
```

Instructions:
1. Carefully read the translated question (the original user query) and the response (the model's answer).
2. For each failure mode, decide whether it applies to the response.
   - Answer true if the failure mode is present.
   - Answer false if the failure mode is not present.
3. Return your answer as valid JSON following the json-schema above."#;

pub const FAILURE_USER_TEMPLATE: &str = r#"Context:
  {{ context }}

Query (the question posed to the model):
<<<
  {{ query }}
>>>

Response (the model's answer to be evaluated):
<<<
  {{ response }}
>>>"#;

const JUDGE_MAX_TOKENS: u32 = 1024;
const FAILURE_MAX_TOKENS: u32 = 1024;

/// Substitutes `{{ name }}` placeholders in one pass. Unknown placeholders
/// are left verbatim; substituted values are never rescanned.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(pos) = rest.find("{{") {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match tail.find("}}") {
            Some(end) => {
                let key = tail[2..end].trim();
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, value)) => out.push_str(value),
                    None => out.push_str(&tail[..end + 2]),
                }
                rest = &tail[end + 2..];
            }
            None => {
                out.push_str(tail);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders the document classification request. The instruction block rides
/// in the user message; the response is capped at one token and parsed by
/// [`super::parse_yes_no`].
pub fn build_classifier_prompt(document_text: &str) -> PromptRequest {
    PromptRequest {
        system: String::new(),
        user: CLASSIFIER_TEMPLATE.replace("<DOCUMENT>", document_text),
        max_tokens: 1,
        temperature: 0.0,
        response_format: ResponseFormat::FreeText,
    }
}

/// Renders the pairwise comparison request with the embedded verdict schema.
pub fn build_judge_prompt(
    context: &str,
    query: &str,
    response_a: &str,
    response_b: &str,
) -> PromptRequest {
    PromptRequest {
        system: JUDGE_SYSTEM_PROMPT.to_string(),
        user: render_template(
            JUDGE_USER_TEMPLATE,
            &[
                ("context", context),
                ("query", query),
                ("response_a", response_a),
                ("response_b", response_b),
            ],
        ),
        max_tokens: JUDGE_MAX_TOKENS,
        temperature: 0.0,
        response_format: ResponseFormat::Json,
    }
}

/// Renders the failure-mode audit request; the schema block requires all
/// fourteen mode keys.
pub fn build_failure_prompt(context: &str, query: &str, response: &str) -> PromptRequest {
    PromptRequest {
        system: FAILURE_SYSTEM_PROMPT.to_string(),
        user: render_template(
            FAILURE_USER_TEMPLATE,
            &[("context", context), ("query", query), ("response", response)],
        ),
        max_tokens: FAILURE_MAX_TOKENS,
        temperature: 0.0,
        response_format: ResponseFormat::Json,
    }
}
