use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::GatewayError;
use crate::model::SamplingConfig;

pub const DEFAULT_API_KEY_VAR: &str = "AGEALIGN_API_KEY";

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub question_id: &'a str,
    pub prompt: &'a str,
    pub sampling: &'a SamplingConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Attempts beyond the first.
    pub retries: u32,
}

/// Anything that turns a prompt into completion text.
pub trait Completer: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError>;
}

impl<C: Completer + ?Sized> Completer for &C {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError> {
        (**self).complete(request)
    }
}

impl<C: Completer + ?Sized> Completer for Box<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (attempts counted from 1).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Outcome of one attempt, before the retry decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptError {
    Auth(String),
    RateLimited,
    Transient(String),
    Malformed(String),
}

/// Run `op` until it succeeds, fails permanently, or the attempt budget is
/// spent. Rate limits and transient failures are retried with exponential
/// backoff; auth and malformed responses are not.
pub fn with_retries<F>(policy: &RetryPolicy, mut op: F) -> Result<Completion, GatewayError>
where
    F: FnMut(u32) -> Result<String, AttemptError>,
{
    let attempts = policy.max_attempts.max(1);
    let mut attempt = 1;
    loop {
        let err = match op(attempt) {
            Ok(text) => return Ok(Completion { text, retries: attempt - 1 }),
            Err(AttemptError::Auth(m)) => return Err(GatewayError::Auth(m)),
            Err(AttemptError::Malformed(m)) => return Err(GatewayError::Malformed(m)),
            Err(e) => e,
        };
        if attempt >= attempts {
            return Err(match err {
                AttemptError::RateLimited => GatewayError::RateLimited { attempts },
                AttemptError::Transient(reason) => GatewayError::Transient { attempts, reason },
                _ => unreachable!("permanent errors returned above"),
            });
        }
        log::debug!("attempt {attempt} failed ({err:?}), retrying");
        thread::sleep(policy.delay(attempt));
        attempt += 1;
    }
}

/// Pull completion text out of the common response shapes:
/// `{"text": ..}`, `{"completion": ..}` or `{"choices": [{"text": ..}]}`.
fn completion_text(body: &Value) -> Option<String> {
    body.get("text")
        .or_else(|| body.get("completion"))
        .or_else(|| body.pointer("/choices/0/text"))
        .and_then(Value::as_str)
        .map(str::to_owned)
}

/// Completion client for a JSON-over-HTTP endpoint. The request body is
/// `{model, prompt, top_p, temperature, max_tokens}`.
#[derive(Debug, Clone)]
pub struct HttpCompleter {
    endpoint: String,
    api_key: Option<String>,
    policy: RetryPolicy,
    agent: ureq::Agent,
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .build()
        .into()
}

/// POST `body` and classify the reply.
pub(crate) fn post_json(
    agent: &ureq::Agent,
    endpoint: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<Value, AttemptError> {
    let mut req = agent.post(endpoint);
    if let Some(key) = api_key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let resp = req.send_json(body).map_err(|e| AttemptError::Transient(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .into_body()
        .read_to_string()
        .map_err(|e| AttemptError::Transient(e.to_string()))?;
    match status {
        200..=299 => serde_json::from_str(&text).map_err(|e| AttemptError::Malformed(e.to_string())),
        401 | 403 => Err(AttemptError::Auth(format!("HTTP {status}"))),
        429 => Err(AttemptError::RateLimited),
        408 | 500..=599 => Err(AttemptError::Transient(format!("HTTP {status}"))),
        _ => Err(AttemptError::Malformed(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()))),
    }
}

impl HttpCompleter {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        HttpCompleter {
            endpoint: endpoint.into(),
            api_key,
            policy: RetryPolicy::default(),
            agent: agent(Duration::from_secs(60)),
        }
    }

    /// Read the credential from `var`; a missing variable is an error.
    pub fn from_env(endpoint: impl Into<String>, var: &str) -> Result<Self, GatewayError> {
        let key = std::env::var(var).map_err(|_| GatewayError::MissingCredential(var.to_string()))?;
        Ok(Self::new(endpoint, Some(key)))
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }
}

impl Completer for HttpCompleter {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError> {
        let s = request.sampling;
        let body = json!({
            "model": s.model_id,
            "prompt": request.prompt,
            "top_p": s.top_p,
            "temperature": s.temperature,
            "max_tokens": s.max_tokens,
        });
        with_retries(&self.policy, |_| {
            let reply = post_json(&self.agent, &self.endpoint, self.api_key.as_deref(), &body)?;
            completion_text(&reply).ok_or_else(|| AttemptError::Malformed(format!("no completion text in {reply}")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> RetryPolicy {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(1), max_delay: Duration::from_millis(4) }
    }

    #[test]
    fn two_rate_limits_then_success() {
        let mut script = vec![Err(AttemptError::RateLimited), Err(AttemptError::RateLimited), Ok("car and boat".to_string())]
            .into_iter();
        let c = with_retries(&fast(), |_| script.next().unwrap()).unwrap();
        assert_eq!(c, Completion { text: "car and boat".into(), retries: 2 });
    }

    #[test]
    fn auth_is_not_retried() {
        let mut calls = 0;
        let r = with_retries(&fast(), |_| {
            calls += 1;
            Err(AttemptError::Auth("HTTP 401".into()))
        });
        assert_eq!(r, Err(GatewayError::Auth("HTTP 401".into())));
        assert_eq!(calls, 1);
    }

    #[test]
    fn exhaustion_kinds() {
        let r = with_retries(&fast(), |_| Err(AttemptError::RateLimited));
        assert_eq!(r, Err(GatewayError::RateLimited { attempts: 3 }));
        let mut calls = 0;
        let r = with_retries(&fast(), |_| {
            calls += 1;
            Err(AttemptError::Transient("reset".into()))
        });
        assert!(matches!(r, Err(GatewayError::Transient { attempts: 3, .. })));
        assert_eq!(calls, 3);
        let r = with_retries(&fast(), |_| Err(AttemptError::Malformed("x".into())));
        assert!(matches!(r, Err(GatewayError::Malformed(_))));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy { max_attempts: 5, base_delay: Duration::from_millis(100), max_delay: Duration::from_millis(350) };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(350));
    }

    #[test]
    fn response_shapes() {
        assert_eq!(completion_text(&json!({"text": "a"})).as_deref(), Some("a"));
        assert_eq!(completion_text(&json!({"choices": [{"text": "b"}]})).as_deref(), Some("b"));
        assert_eq!(completion_text(&json!({"completion": "c"})).as_deref(), Some("c"));
        assert_eq!(completion_text(&json!({"choices": []})), None);
    }

    #[test]
    fn missing_credential() {
        let r = HttpCompleter::from_env("http://127.0.0.1:1", "AGEALIGN_TEST_SURELY_UNSET_VAR");
        assert!(matches!(r, Err(GatewayError::MissingCredential(_))));
    }
}
