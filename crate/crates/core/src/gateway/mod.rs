//! Prompt rendering, model clients and answer extraction.

mod batch;
mod client;
mod embed;
mod explanation;
mod extract;
mod prompt;
mod stub;

pub use batch::complete_batch;
pub use client::{
    with_retries, AttemptError, Completer, Completion, CompletionRequest, HttpCompleter, RetryPolicy,
    DEFAULT_API_KEY_VAR,
};
pub use embed::{Embedder, HttpEmbedder, StubEmbedder};
pub use explanation::{detect_explanation, ExplanationRules};
pub use extract::{extract_answer_def, extract_answer_wc, first_mentions, tokenize};
pub use prompt::render_prompt;
pub use stub::{canned_answer, StubCompleter};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited; gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("transient failure after {attempts} attempts: {reason}")]
    Transient { attempts: u32, reason: String },
    #[error("template error: {0}")]
    Template(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("stub has no response for question {0:?}")]
    NoCannedResponse(String),
}
