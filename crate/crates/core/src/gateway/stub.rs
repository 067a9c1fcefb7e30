use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::client::{Completer, Completion, CompletionRequest};
use super::GatewayError;
use crate::model::{jsonl, ExamItem, ModelError};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CannedLine {
    question_id: String,
    text: String,
}

type Responder = dyn Fn(&CompletionRequest<'_>) -> Option<String> + Send + Sync;

/// Offline completer. Answers come from a table keyed by question id, a
/// fixed reply, or a closure.
pub struct StubCompleter {
    responder: Box<Responder>,
}

impl std::fmt::Debug for StubCompleter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("StubCompleter")
    }
}

impl StubCompleter {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&CompletionRequest<'_>) -> Option<String> + Send + Sync + 'static,
    {
        StubCompleter { responder: Box::new(f) }
    }

    /// Same reply to every prompt.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::from_fn(move |_| Some(text.clone()))
    }

    pub fn from_map(map: HashMap<String, String>) -> Self {
        Self::from_fn(move |r| map.get(r.question_id).cloned())
    }

    /// Load canned responses from JSONL lines `{"question_id", "text"}`.
    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let lines: Vec<CannedLine> = jsonl::read(path)?;
        Ok(Self::from_map(lines.into_iter().map(|l| (l.question_id, l.text)).collect()))
    }

    /// Answers each item correctly when `correct(item)` holds and with a
    /// wrong candidate otherwise.
    pub fn scripted<F>(items: &[ExamItem], correct: F) -> Self
    where
        F: Fn(&ExamItem) -> bool,
    {
        let map = items.iter().map(|it| (it.id().to_string(), canned_answer(it, correct(it)))).collect();
        Self::from_map(map)
    }
}

/// A reply text that scores as correct or incorrect for `item`.
pub fn canned_answer(item: &ExamItem, correct: bool) -> String {
    match item {
        ExamItem::Wc(q) => {
            if correct {
                format!("\"{}\" and \"{}\"", q.gold_pair[0], q.gold_pair[1])
            } else {
                let gold = q.gold();
                let mut others = q.words_presented.iter().filter(|w| !gold.contains(&w.to_lowercase()));
                let a = others.next().cloned().unwrap_or_default();
                let b = others.next().cloned().unwrap_or_default();
                format!("\"{a}\" and \"{b}\"")
            }
        }
        ExamItem::Def(q) => {
            if correct {
                q.target.clone()
            } else {
                q.choices.iter().find(|c| **c != q.target).cloned().unwrap_or_default()
            }
        }
        ExamItem::Open(_) => String::new(),
    }
}

impl Completer for StubCompleter {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError> {
        (self.responder)(request)
            .map(|text| Completion { text, retries: 0 })
            .ok_or_else(|| GatewayError::NoCannedResponse(request.question_id.to_string()))
    }
}
