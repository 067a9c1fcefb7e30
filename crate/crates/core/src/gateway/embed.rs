use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::client::{agent, post_json, with_retries, AttemptError, RetryPolicy};
use super::GatewayError;
use crate::model::seeded_rng;

pub trait Embedder: Send + Sync {
    /// One vector per text, all of the same length.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;
}

pub(crate) fn check_embeddings(vectors: &[Vec<f64>], expected: usize) -> Result<(), GatewayError> {
    if vectors.len() != expected {
        return Err(GatewayError::Provider(format!("{} vectors for {expected} texts", vectors.len())));
    }
    if let Some(first) = vectors.first() {
        if let Some(v) = vectors.iter().find(|v| v.len() != first.len()) {
            return Err(GatewayError::Provider(format!(
                "dimension mismatch: {} vs {}",
                first.len(),
                v.len()
            )));
        }
    }
    Ok(())
}

/// Deterministic pseudo-embeddings: a unit vector seeded by the text's hash.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    pub dim: usize,
}

impl Embedder for StubEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        Ok(texts
            .iter()
            .map(|t| {
                let digest = Sha256::digest(t.as_bytes());
                let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
                let mut rng = seeded_rng(seed);
                let v: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect())
    }
}

/// Embedding client. Sends `{model, input: [..]}` and accepts
/// `{"data": [{"embedding": [..]}, ..]}` or `{"embeddings": [[..], ..]}`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    policy: RetryPolicy,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            policy: RetryPolicy::default(),
            agent: agent(Duration::from_secs(60)),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }
}

fn parse_vectors(body: &Value) -> Option<Vec<Vec<f64>>> {
    let rows: Vec<&Value> = if let Some(data) = body.get("data").and_then(Value::as_array) {
        data.iter().map(|d| d.get("embedding")).collect::<Option<_>>()?
    } else {
        body.get("embeddings")?.as_array()?.iter().collect()
    };
    rows.into_iter()
        .map(|r| r.as_array()?.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .collect()
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({ "model": self.model, "input": texts });
        let mut vectors = None;
        with_retries(&self.policy, |_| {
            let reply = post_json(&self.agent, &self.endpoint, self.api_key.as_deref(), &body)?;
            vectors = Some(parse_vectors(&reply).ok_or_else(|| AttemptError::Malformed("no embeddings".into()))?);
            Ok(String::new())
        })?;
        let vectors = vectors.expect("set on success");
        check_embeddings(&vectors, texts.len())?;
        Ok(vectors)
    }
}
