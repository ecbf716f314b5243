use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::{CONTENT_TYPE, RETRY_AFTER};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{decode_dump, AttentionProvider, AttentionRequest, Reduction, DEFAULT_LOOKAHEAD};
use crate::error::{Error, Result};
use crate::importance::LookaheadAttention;
use crate::tokenizer::TokenId;

pub const ATTENTION_PATH: &str = "/v1/attention";

/// JSON body of `POST /v1/attention`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionWireRequest {
    #[serde(default)]
    pub draft_model_id: String,
    pub token_ids: Vec<TokenId>,
    #[serde(default = "default_lookahead")]
    pub n_lookahead: usize,
    #[serde(default)]
    pub reduction: Reduction,
}

fn default_lookahead() -> usize {
    DEFAULT_LOOKAHEAD
}

impl From<&AttentionRequest> for AttentionWireRequest {
    fn from(req: &AttentionRequest) -> Self {
        Self {
            draft_model_id: req.draft_model_id.clone(),
            token_ids: req.draft_token_ids.clone(),
            n_lookahead: req.n_lookahead,
            reduction: req.reduction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(200),
            max_backoff: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    pub fn no_retry() -> Self {
        Self { max_attempts: 1, ..Self::default() }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.saturating_sub(1).min(16);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

/// Client for a remote attention exporter.
///
/// Connection failures, 429 and 5xx answers are retried per the
/// [`RetryPolicy`]; a `Retry-After` header (in seconds) overrides the backoff.
/// Any other non-success status is a protocol error and is not retried.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    endpoint: String,
    draft_model_id: String,
    client: Client,
    retry: RetryPolicy,
    max_context: Option<usize>,
}

impl HttpProvider {
    pub fn new(base_url: &str) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| Error::Transport { message: e.to_string(), attempts: 0 })?;
        Ok(Self {
            endpoint: format!("{}{ATTENTION_PATH}", base_url.trim_end_matches('/')),
            draft_model_id: String::new(),
            client,
            retry: RetryPolicy::default(),
            max_context: None,
        })
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.draft_model_id = id.into();
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_context(mut self, limit: usize) -> Self {
        self.max_context = Some(limit);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &AttentionWireRequest) -> std::result::Result<Vec<u8>, Attempt> {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(body)
            .send()
            .map_err(|e| Attempt::Retry(e.to_string(), None))?;
        let status = resp.status();
        if status.is_success() {
            let is_binary = resp
                .headers()
                .get(CONTENT_TYPE)
                .and_then(|v| v.to_str().ok())
                .is_some_and(|v| v.starts_with("application/octet-stream"));
            if !is_binary {
                return Err(Attempt::Fatal(Error::Protocol(
                    "attention response is not application/octet-stream".into(),
                )));
            }
            return resp
                .bytes()
                .map(|b| b.to_vec())
                .map_err(|e| Attempt::Retry(e.to_string(), None));
        }
        let retry_after = resp
            .headers()
            .get(RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp.text().unwrap_or_default();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            Err(Attempt::Retry(format!("HTTP {status}: {text}"), retry_after))
        } else {
            Err(Attempt::Fatal(Error::Protocol(format!("HTTP {status}: {text}"))))
        }
    }
}

enum Attempt {
    Retry(String, Option<Duration>),
    Fatal(Error),
}

impl AttentionProvider for HttpProvider {
    fn provide(&self, req: &AttentionRequest) -> Result<LookaheadAttention> {
        req.validate()?;
        let mut body = AttentionWireRequest::from(req);
        if body.draft_model_id.is_empty() {
            body.draft_model_id = self.draft_model_id.clone();
        }
        let max_attempts = self.retry.max_attempts.max(1);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(bytes) => {
                    let attn = decode_dump(&bytes)?;
                    return req.accept(attn);
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message, retry_after)) => {
                    if attempts >= max_attempts {
                        return Err(Error::Transport { message, attempts });
                    }
                    let wait = retry_after.unwrap_or_else(|| self.retry.backoff(attempts)).min(self.retry.max_backoff);
                    log::warn!("attention request failed (attempt {attempts}/{max_attempts}): {message}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                }
            }
        }
    }

    fn max_context(&self) -> Option<usize> {
        self.max_context
    }
}
