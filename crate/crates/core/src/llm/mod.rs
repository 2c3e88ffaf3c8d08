//! Prompting a chat-completion model and turning its answers into labels.

mod cache;
mod client;
mod parse;
mod pipeline;
mod stub;
mod template;

use thiserror::Error;

pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use client::{
    call_with_retry, ChatClient, HttpChatClient, LlmRequest, LlmResponse, NoSleep, RecordingSleeper, RetryPolicy,
    Sleeper, ThreadSleeper, TokenUsage, API_KEY_ENV, DEFAULT_MAX_TOKENS,
};
pub use parse::{parse_findings, ParsedAnswer};
pub use pipeline::{
    BatchOutcome, BatchStats, Labeled, Labeler, LabelerOptions, Provenance, QuarantineRecord,
};
pub use stub::{FaultPlan, FixedProvider, StubProvider};
pub use template::{build_prompt, target_report, LabelMode, PromptTemplate, TemplateExample, ANSWER_CUE, REPORT_PREFIX};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("template: {0}")]
    Template(String),
    #[error("report text is empty")]
    EmptyReport,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("provider error (retryable: {retryable}): {message}")]
    Provider { retryable: bool, message: String },
    #[error("missing credentials: set {0}")]
    MissingCredentials(&'static str),
    #[error("cache: {0}")]
    Cache(String),
    #[error("study {study_id}: {source}")]
    Report {
        study_id: String,
        #[source]
        source: Box<LlmError>,
    },
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Provider { retryable, .. } => *retryable,
            LlmError::Report { source, .. } => source.is_retryable(),
            _ => false,
        }
    }

    /// Short machine-readable kind for quarantine records.
    pub fn kind(&self) -> &'static str {
        match self {
            LlmError::Template(_) => "template",
            LlmError::EmptyReport => "empty_report",
            LlmError::MalformedResponse(_) => "malformed_response",
            LlmError::UnknownCategory(_) => "unknown_category",
            LlmError::Provider { .. } => "provider",
            LlmError::MissingCredentials(_) => "missing_credentials",
            LlmError::Cache(_) => "cache",
            LlmError::Report { source, .. } => source.kind(),
        }
    }

    pub(crate) fn for_report(self, study_id: &str) -> LlmError {
        match self {
            e @ LlmError::Report { .. } => e,
            e => LlmError::Report { study_id: study_id.to_string(), source: Box::new(e) },
        }
    }
}
