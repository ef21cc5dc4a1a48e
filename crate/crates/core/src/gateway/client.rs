//! Chat-completions transport with retrying, bounded-concurrency batch
//! execution, and journal-backed resumption.

use super::journal::{Journal, JournalEntry};
use super::{GatewayError, PromptRequest, ResponseFormat};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::VecDeque;
use std::sync::mpsc;
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum TransportError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

impl TransportError {
    /// Rate limits, server errors and network failures are worth retrying;
    /// other statuses and protocol violations are not.
    pub fn retryable(&self) -> bool {
        match self {
            TransportError::Network(_) => true,
            TransportError::Status { status, .. } => {
                *status == 429 || (500..=599).contains(status)
            }
            TransportError::Protocol(_) => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// OpenAI-compatible chat-completions request body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_format: Option<ResponseFormatSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseFormatSpec {
    #[serde(rename = "type")]
    pub kind: String,
}

/// Anything that can answer a chat request with the service's raw response
/// JSON. Implemented over HTTP for production and by scripted fakes in
/// tests.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<Value, TransportError>;
}

/// Blocking HTTP transport against an OpenAI-compatible endpoint.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(
        base_url: &str,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .no_proxy()
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(HttpTransport {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<Value, TransportError> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body });
        }
        serde_json::from_str(&body)
            .map_err(|e| TransportError::Protocol(format!("body is not JSON: {e}")))
    }
}

/// Exponential backoff schedule for transient failures.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub model: String,
    /// Maximum in-flight requests.
    pub concurrency: usize,
    pub retry: RetryPolicy,
}

/// One unit of batch work, identified by a stable id that keys journal
/// entries and resumption.
#[derive(Debug, Clone)]
pub struct WorkItem {
    pub id: String,
    pub prompt: PromptRequest,
}

/// Result for one work item: the raw content string of the first choice,
/// or the error that exhausted its attempts.
#[derive(Debug)]
pub struct ItemOutcome {
    pub id: String,
    pub result: Result<String, GatewayError>,
}

pub struct Gateway<T: ChatTransport> {
    transport: T,
    config: GatewayConfig,
}

impl<T: ChatTransport> Gateway<T> {
    pub fn new(transport: T, config: GatewayConfig) -> Result<Self, GatewayError> {
        if config.concurrency == 0 {
            return Err(GatewayError::InvalidConfig(
                "concurrency must be at least 1".to_string(),
            ));
        }
        if config.model.is_empty() {
            return Err(GatewayError::InvalidConfig("model name is empty".to_string()));
        }
        Ok(Gateway { transport, config })
    }

    /// Lowers a prompt to the wire request. An empty system string means no
    /// system message is sent.
    pub fn chat_request(&self, prompt: &PromptRequest) -> ChatRequest {
        let mut messages = Vec::with_capacity(2);
        if !prompt.system.is_empty() {
            messages.push(ChatMessage {
                role: "system".to_string(),
                content: prompt.system.clone(),
            });
        }
        messages.push(ChatMessage {
            role: "user".to_string(),
            content: prompt.user.clone(),
        });
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            max_tokens: prompt.max_tokens,
            temperature: prompt.temperature,
            response_format: match prompt.response_format {
                ResponseFormat::FreeText => None,
                ResponseFormat::Json => Some(ResponseFormatSpec {
                    kind: "json_object".to_string(),
                }),
            },
        }
    }

    /// Runs a batch with at most `concurrency` requests in flight.
    ///
    /// Items already present in the journal are answered from it without
    /// touching the transport; fresh responses are journaled before being
    /// parsed. Outcomes are returned in input order regardless of
    /// completion order, one per item.
    pub fn run_batch(&self, items: &[WorkItem], journal: &mut Journal) -> Vec<ItemOutcome> {
        let mut results: Vec<Option<Result<String, GatewayError>>> =
            items.iter().map(|_| None).collect();
        let mut pending = VecDeque::new();
        for (i, item) in items.iter().enumerate() {
            match journal.get(&item.id) {
                Some(entry) => results[i] = Some(extract_content(&entry.response)),
                None => pending.push_back(i),
            }
        }

        if !pending.is_empty() {
            let workers = self.config.concurrency.min(pending.len());
            let queue = Mutex::new(pending);
            let journal = Mutex::new(journal);
            let (tx, rx) = mpsc::channel();
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    let tx = tx.clone();
                    let queue = &queue;
                    let journal = &journal;
                    scope.spawn(move || loop {
                        let idx = queue.lock().unwrap().pop_front();
                        let Some(idx) = idx else { break };
                        let outcome = self.execute(&items[idx], journal);
                        if tx.send((idx, outcome)).is_err() {
                            break;
                        }
                    });
                }
                drop(tx);
                for (idx, outcome) in rx {
                    results[idx] = Some(outcome);
                }
            });
        }

        items
            .iter()
            .zip(results)
            .map(|(item, result)| ItemOutcome {
                id: item.id.clone(),
                result: result.expect("every item resolved"),
            })
            .collect()
    }

    fn execute(
        &self,
        item: &WorkItem,
        journal: &Mutex<&mut Journal>,
    ) -> Result<String, GatewayError> {
        let request = self.chat_request(&item.prompt);
        let request_value = serde_json::to_value(&request).expect("request serializes");
        let mut attempt = 0u32;
        loop {
            match self.transport.send(&request) {
                Ok(raw) => {
                    journal.lock().unwrap().append(JournalEntry::now(
                        item.id.clone(),
                        request_value,
                        raw.clone(),
                    ))?;
                    return extract_content(&raw);
                }
                Err(e) if e.retryable() && attempt < self.config.retry.max_retries => {
                    log::debug!("item {:?} attempt {} failed, retrying: {e}", item.id, attempt + 1);
                    std::thread::sleep(self.config.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) => {
                    return Err(GatewayError::RetriesExhausted {
                        item_id: item.id.clone(),
                        attempts: attempt + 1,
                        last: e,
                    })
                }
            }
        }
    }
}

/// Pulls `choices[0].message.content` out of a raw chat response.
pub fn extract_content(response: &Value) -> Result<String, GatewayError> {
    response
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            GatewayError::MalformedResponse("missing choices[0].message.content".to_string())
        })
}
