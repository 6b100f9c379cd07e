//! Completion backends (scripted mock and OpenAI-compatible HTTP), the
//! extraction prompt templates and the answer-block contract.

mod answer;
mod http;
mod mock;
mod prompt;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answer::{parse_extraction_output, render_answer_block, render_answer_line, ParseError};
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use mock::{mock_rule_complete, MockBackend, MockMode, MockScript};
pub use prompt::{build_extraction_prompt, parse_user_prompt, Excerpt, PromptStage, PromptView, DEFAULT_PROMPT_BUDGET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(system_prompt: String, user_prompt: String) -> ChatRequest {
        ChatRequest {
            system_prompt,
            user_prompt,
            max_tokens: 1024,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub latency_ms: f64,
    pub backend_id: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("prompt exceeds the {budget}-character budget even with a single excerpt")]
    PromptTooLong { budget: usize },
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Whether a retry may succeed.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout | BackendError::Transport(_) | BackendError::RateLimited { .. }
        )
    }
}

/// A completion model `M`. Implementations must tolerate concurrent calls.
pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, req: &ChatRequest) -> Result<CompletionResult, BackendError>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, req: &ChatRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(req)
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, req: &ChatRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(req)
    }
}
