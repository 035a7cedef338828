//! Chat-completion HTTP backend.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, CompletionBackend, CompletionRequest};
use crate::retry::{is_transient_status, Attempt, RetryPolicy};

pub struct LiveBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl LiveBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(LiveBackend {
            client,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            retry: RetryPolicy::default(),
        })
    }

    /// Reads the key from `LLM_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, BackendError> {
        let key = std::env::var("LLM_API_KEY").ok().filter(|k| !k.is_empty());
        Self::new(endpoint, model, key)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn post_once(&self, body: &serde_json::Value) -> Attempt<String, BackendError> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() => {
                return Attempt::Retryable(BackendError::Transport(e.to_string()))
            }
            Err(e) => return Attempt::Fatal(BackendError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retryable(BackendError::Transport(e.to_string())),
        };
        if is_transient_status(status) {
            return Attempt::Retryable(BackendError::Status { status, body: text });
        }
        if status == 400 || status == 413 {
            // typically an over-long prompt; the record is failed, not truncated
            return Attempt::Fatal(BackendError::Rejected(text));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(BackendError::Status { status, body: text });
        }
        match serde_json::from_str::<ChatResponse>(&text) {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(choice) => Attempt::Done(choice.message.content),
                None => Attempt::Fatal(BackendError::Response("no choices".into())),
            },
            Err(e) => Attempt::Fatal(BackendError::Response(e.to_string())),
        }
    }
}

impl CompletionBackend for LiveBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "n": 1,
            "messages": [{"role": "user", "content": request.prompt.text}],
        });
        let (result, retries) = self.retry.run(|_| self.post_once(&body));
        if retries > 0 {
            tracing::info!(retries, id = %request.prompt.record_id.as_str(), "completion needed retries");
        }
        result
    }

    fn name(&self) -> &'static str {
        "live"
    }
}
