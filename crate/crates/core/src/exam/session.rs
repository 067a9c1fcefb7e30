use serde::{Deserialize, Serialize};

use super::ceiling::CeilingTracker;
use super::run::{now_ms, score_response};
use super::ExamError;
use crate::gateway::{render_prompt, Completer, CompletionRequest, ExplanationRules};
use crate::model::{
    normalize_score, AgeValue, ExamItem, LmResponse, NormTable, Outcome, PromptProtocol, RequestMetadata,
    SamplingConfig, Scorer,
};

/// Error categories clinicians tag observations with, before any
/// session-specific additions.
pub const DEFAULT_OBSERVATION_TAGS: [&str; 5] = ["functional relation", "category", "antonym", "inference", "context"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    CeilingStopped,
    Completed,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self != SessionStatus::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemState {
    Pending,
    Responded,
    Scored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub question_id: String,
    pub tag: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ItemRecord {
    state: ItemState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<LmResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    suggested_h: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcome: Option<Outcome>,
}

/// What the clinician sees for the current question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presentation {
    pub question_id: String,
    pub position: usize,
    pub total: usize,
    pub prompt: String,
    pub item: ExamItem,
    pub response: LmResponse,
    /// Automatic score, when the item type has one.
    pub suggested_h: Option<u8>,
    pub max_score: u8,
    pub consecutive_errors: u32,
    pub ceiling_k: u32,
    pub ceiling_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum NextItem {
    Present(Box<Presentation>),
    Done { status: SessionStatus },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub id: String,
    pub subtest: String,
    pub status: SessionStatus,
    pub administered: usize,
    pub total_items: usize,
    pub raw_score: u32,
    pub max_score: u32,
    pub percent: f64,
    pub age: Option<AgeValue>,
    pub outcomes: Vec<Outcome>,
    pub observations: Vec<Observation>,
}

/// A clinician-scored administration. Items are presented strictly in
/// order; each must be scored before the next is shown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamSession {
    pub id: String,
    pub subtest: String,
    pub protocol: PromptProtocol,
    pub sampling: SamplingConfig,
    items: Vec<ExamItem>,
    records: Vec<ItemRecord>,
    cursor: usize,
    ceiling: CeilingTracker,
    status: SessionStatus,
    observations: Vec<Observation>,
    tags: Vec<String>,
    /// Bumped on every mutation.
    pub version: u64,
}

impl ExamSession {
    pub fn create(
        id: impl Into<String>,
        subtest: impl Into<String>,
        items: Vec<ExamItem>,
        protocol: PromptProtocol,
        sampling: SamplingConfig,
        ceiling_k: u32,
    ) -> Result<Self, ExamError> {
        if items.is_empty() {
            return Err(ExamError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = items.iter().find(|i| !seen.insert(i.id())) {
            return Err(ExamError::InvalidPayload(format!("duplicate question id {:?}", dup.id())));
        }
        sampling.validate()?;
        let records = items
            .iter()
            .map(|_| ItemRecord { state: ItemState::Pending, prompt: None, response: None, suggested_h: None, outcome: None })
            .collect();
        Ok(ExamSession {
            id: id.into(),
            subtest: subtest.into(),
            protocol,
            sampling,
            items,
            records,
            cursor: 0,
            ceiling: CeilingTracker::new(ceiling_k),
            status: SessionStatus::Active,
            observations: Vec::new(),
            tags: DEFAULT_OBSERVATION_TAGS.iter().map(|s| s.to_string()).collect(),
            version: 0,
        })
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn ceiling_k(&self) -> u32 {
        self.ceiling.k
    }

    pub fn consecutive_errors(&self) -> u32 {
        self.ceiling.consecutive_errors
    }

    pub fn items(&self) -> &[ExamItem] {
        &self.items
    }

    pub fn item_states(&self) -> Vec<ItemState> {
        self.records.iter().map(|r| r.state).collect()
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.records.iter().filter_map(|r| r.outcome.clone()).collect()
    }

    pub fn responses(&self) -> Vec<LmResponse> {
        self.records.iter().filter_map(|r| r.response.clone()).collect()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn add_tag(&mut self, tag: impl Into<String>) {
        let tag = tag.into();
        if !self.tags.contains(&tag) {
            self.tags.push(tag);
            self.version += 1;
        }
    }

    /// Id of the question awaiting a response or score.
    pub fn current_question(&self) -> Option<&str> {
        (!self.status.is_terminal()).then(|| self.items[self.cursor].id())
    }

    fn presentation(&self) -> Presentation {
        let i = self.cursor;
        let rec = &self.records[i];
        Presentation {
            question_id: self.items[i].id().to_string(),
            position: i,
            total: self.items.len(),
            prompt: rec.prompt.clone().expect("responded item has a prompt"),
            item: self.items[i].clone(),
            response: rec.response.clone().expect("responded item has a response"),
            suggested_h: rec.suggested_h,
            max_score: self.items[i].max_score(),
            consecutive_errors: self.ceiling.consecutive_errors,
            ceiling_k: self.ceiling.k,
            ceiling_warning: self.ceiling.at_warning(),
        }
    }

    /// Present the current question, querying the LM on first view.
    /// Repeated calls before scoring return the same presentation.
    pub fn next<C: Completer + ?Sized>(&mut self, completer: &C) -> Result<NextItem, ExamError> {
        if self.status.is_terminal() {
            return Ok(NextItem::Done { status: self.status });
        }
        let i = self.cursor;
        if self.records[i].state == ItemState::Pending {
            let item = &self.items[i];
            let prompt = render_prompt(&self.protocol, item)?;
            let started_ms = now_ms();
            let completion = completer.complete(&CompletionRequest {
                question_id: item.id(),
                prompt: &prompt,
                sampling: &self.sampling,
            })?;
            let finished_ms = now_ms();
            let (extracted, has_explanation, suggested_h) =
                match score_response(item, &completion.text, &ExplanationRules::default()) {
                    Ok(s) => (s.extracted, s.has_explanation, Some(s.h)),
                    Err(ExamError::NotAutoScorable(_)) => (None, false, None),
                    Err(e) => return Err(e),
                };
            let rec = &mut self.records[i];
            rec.response = Some(LmResponse {
                question_id: item.id().to_string(),
                raw_text: completion.text,
                extracted_answer: extracted,
                has_explanation,
                metadata: RequestMetadata {
                    fingerprint: self.sampling.fingerprint(),
                    retries: completion.retries,
                    started_ms,
                    finished_ms,
                },
            });
            rec.prompt = Some(prompt);
            rec.suggested_h = suggested_h;
            rec.state = ItemState::Responded;
            self.version += 1;
        }
        Ok(NextItem::Present(Box::new(self.presentation())))
    }

    /// Record the clinician's score for the presented question, with an
    /// optional observation. Applies the ceiling rule.
    pub fn record_score(
        &mut self,
        question_id: &str,
        h: u8,
        note: Option<String>,
        tag: Option<String>,
    ) -> Result<SessionStatus, ExamError> {
        if self.status.is_terminal() {
            return Err(ExamError::Terminal(self.status));
        }
        let i = self.cursor;
        let current = self.items[i].id();
        if question_id != current {
            let reason = match self.items.iter().position(|it| it.id() == question_id) {
                Some(j) if j < i => format!("{question_id:?} is already scored"),
                Some(_) => format!("{question_id:?} has not been presented; current is {current:?}"),
                None => format!("{question_id:?} is not in this session"),
            };
            return Err(ExamError::Sequencing(reason));
        }
        if self.records[i].state != ItemState::Responded {
            return Err(ExamError::Sequencing(format!("{question_id:?} has not been presented")));
        }
        let max = self.items[i].max_score();
        if h > max {
            return Err(ExamError::InvalidScore(format!("{h} exceeds item maximum {max}")));
        }
        if let Some(t) = &tag {
            if !self.tags.contains(t) {
                return Err(ExamError::InvalidPayload(format!("unknown observation tag {t:?}")));
            }
        }
        if note.is_some() || tag.is_some() {
            self.observations.push(Observation {
                question_id: question_id.to_string(),
                tag,
                text: note.clone().unwrap_or_default(),
            });
        }
        let rec = &mut self.records[i];
        rec.outcome = Some(Outcome { question_id: question_id.to_string(), h, scorer: Scorer::Clinician, note });
        rec.state = ItemState::Scored;
        if self.ceiling.record(h) {
            self.status = SessionStatus::CeilingStopped;
        } else if i + 1 == self.items.len() {
            self.status = SessionStatus::Completed;
        } else {
            self.cursor += 1;
        }
        self.version += 1;
        Ok(self.status)
    }

    pub fn raw_score(&self) -> u32 {
        self.records.iter().filter_map(|r| r.outcome.as_ref()).map(|o| u32::from(o.h)).sum()
    }

    pub fn max_score(&self) -> u32 {
        self.items.iter().map(|i| u32::from(i.max_score())).sum()
    }

    pub fn report(&self) -> SessionReport {
        let outcomes = self.outcomes();
        let raw = self.raw_score();
        let max = self.max_score();
        SessionReport {
            id: self.id.clone(),
            subtest: self.subtest.clone(),
            status: self.status,
            administered: outcomes.len(),
            total_items: self.items.len(),
            raw_score: raw,
            max_score: max,
            percent: normalize_score(raw, max).expect("raw never exceeds max"),
            age: None,
            outcomes,
            observations: self.observations.clone(),
        }
    }

    /// Report with the age equivalent from `norms` for this sub-test.
    pub fn finish(&self, norms: &NormTable) -> Result<SessionReport, ExamError> {
        let mut report = self.report();
        report.age = Some(super::lookup_age_equivalent(norms, &self.subtest, report.raw_score)?);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::StubCompleter;
    use crate::model::{OpenItem, Relation, WcQuestion};
    use proptest::prelude::*;

    fn items(n: usize) -> Vec<ExamItem> {
        (0..n)
            .map(|i| {
                ExamItem::Wc(WcQuestion {
                    id: format!("q{i:02}"),
                    words_presented: vec![format!("w{i}a"), format!("w{i}b"), format!("w{i}c"), format!("w{i}d")],
                    gold_pair: [format!("w{i}a"), format!("w{i}c")],
                    pair_aoa: Some(5.0),
                    relation: Relation::Category,
                    explanation: String::new(),
                    feature_annotations: None,
                })
            })
            .collect()
    }

    fn session(n: usize, k: u32) -> (ExamSession, StubCompleter) {
        let its = items(n);
        let stub = StubCompleter::scripted(&its, |_| true);
        let s = ExamSession::create("s1", "wc", its, PromptProtocol::slp(), SamplingConfig::nucleus("m"), k).unwrap();
        (s, stub)
    }

    fn score_next(s: &mut ExamSession, stub: &StubCompleter, h: u8) -> Result<SessionStatus, ExamError> {
        let NextItem::Present(p) = s.next(stub).unwrap() else { panic!("terminal") };
        s.record_score(&p.question_id, h, None, None)
    }

    #[test]
    fn ceiling_trace() {
        let (mut s, stub) = session(10, 4);
        let statuses: Vec<SessionStatus> = [1, 0, 0, 0, 0].iter().map(|&h| score_next(&mut s, &stub, h).unwrap()).collect();
        assert_eq!(statuses[3], SessionStatus::Active);
        assert_eq!(statuses[4], SessionStatus::CeilingStopped);
        assert_eq!(s.next(&stub).unwrap(), NextItem::Done { status: SessionStatus::CeilingStopped });
        assert!(matches!(s.record_score("q05", 1, None, None), Err(ExamError::Terminal(_))));
        assert_eq!(s.report().administered, 5);
    }

    #[test]
    fn sequencing() {
        let (mut s, stub) = session(3, 4);
        assert!(matches!(s.record_score("q00", 1, None, None), Err(ExamError::Sequencing(_))));
        s.next(&stub).unwrap();
        assert!(matches!(s.record_score("q01", 1, None, None), Err(ExamError::Sequencing(_))));
        assert!(matches!(s.record_score("zz", 1, None, None), Err(ExamError::Sequencing(_))));
        assert!(matches!(s.record_score("q00", 2, None, None), Err(ExamError::InvalidScore(_))));
        s.record_score("q00", 1, None, None).unwrap();
        assert!(matches!(s.record_score("q00", 1, None, None), Err(ExamError::Sequencing(_))));
    }

    #[test]
    fn repeated_next_is_stable() {
        let calls = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let c = calls.clone();
        let stub = StubCompleter::from_fn(move |_| {
            c.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Some("w0a and w0c".into())
        });
        let mut s = ExamSession::create("s", "wc", items(2), PromptProtocol::slp(), SamplingConfig::nucleus("m"), 4)
            .unwrap();
        let a = s.next(&stub).unwrap();
        let b = s.next(&stub).unwrap();
        assert_eq!(a, b);
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 1);
        let NextItem::Present(p) = a else { unreachable!() };
        assert_eq!(p.suggested_h, Some(1));
    }

    #[test]
    fn completes_and_reports() {
        let (mut s, stub) = session(3, 4);
        for _ in 0..3 {
            score_next(&mut s, &stub, 1).unwrap();
        }
        assert_eq!(s.status(), SessionStatus::Completed);
        let r = s.report();
        assert_eq!((r.raw_score, r.max_score, r.percent), (3, 3, 100.0));
    }

    #[test]
    fn observations_verbatim_and_tags() {
        let (mut s, stub) = session(2, 4);
        s.next(&stub).unwrap();
        assert!(matches!(
            s.record_score("q00", 0, Some("x".into()), Some("nonsense".into())),
            Err(ExamError::InvalidPayload(_))
        ));
        let note = "  chose a category link; \"odd\"\n".to_string();
        s.record_score("q00", 0, Some(note.clone()), Some("category".into())).unwrap();
        assert_eq!(s.observations()[0].text, note);
        assert_eq!(s.observations()[0].tag.as_deref(), Some("category"));
        s.add_tag("phonology");
        assert!(s.tags().iter().any(|t| t == "phonology"));
    }

    #[test]
    fn finish_with_norms() {
        let norms = NormTable::from_json(
            r#"{"subtests": {"wc": {"max_score": 40, "entries": [
                {"min": 0, "max": 19, "age": "< 5"},
                {"min": 20, "max": 20, "age": "7:5"},
                {"min": 21, "max": 40, "age": "21:5+"}]}}}"#,
        )
        .unwrap();
        let (mut s, stub) = session(40, 0);
        for i in 0..40 {
            score_next(&mut s, &stub, u8::from(i % 2 == 0)).unwrap();
        }
        let r = s.finish(&norms).unwrap();
        assert_eq!((r.raw_score, r.percent), (20, 50.0));
        assert_eq!(r.age.unwrap().to_string(), "7:5");
    }

    #[test]
    fn graded_open_items() {
        let its = vec![ExamItem::Open(OpenItem { id: "fs1".into(), prompt: "Make a sentence.".into(), max_score: 2 })];
        let stub = StubCompleter::fixed("The dog ran.");
        let mut s = ExamSession::create("o", "fs", its, PromptProtocol::slp(), SamplingConfig::nucleus("m"), 4).unwrap();
        let NextItem::Present(p) = s.next(&stub).unwrap() else { unreachable!() };
        assert_eq!((p.suggested_h, p.max_score, p.prompt.as_str()), (None, 2, "Make a sentence."));
        assert!(s.record_score("fs1", 3, None, None).is_err());
        s.record_score("fs1", 2, None, None).unwrap();
        assert_eq!(s.report().percent, 100.0);
    }

    proptest! {
        #[test]
        fn state_machine(scores in proptest::collection::vec(0u8..2, 1..30), k in 0u32..6) {
            let (mut s, stub) = session(scores.len(), k);
            let mut trace = vec![s.status()];
            for &h in &scores {
                match score_next_opt(&mut s, &stub, h) {
                    Some(st) => trace.push(st),
                    None => {
                        prop_assert!(s.status().is_terminal());
                        prop_assert!(matches!(s.record_score("q00", h, None, None), Err(ExamError::Terminal(_))));
                    }
                }
            }
            for w in trace.windows(2) {
                prop_assert!(w[0] == w[1] || w[0] == SessionStatus::Active, "{:?}", w);
            }
            let out = s.outcomes();
            // Nothing is scored after the first run of k zeros.
            if k > 0 {
                let hs: Vec<u8> = out.iter().map(|o| o.h).collect();
                if let Some(end) = (0..hs.len()).find(|&i| i + 1 >= k as usize && hs[i + 1 - k as usize..=i].iter().all(|&h| h == 0)) {
                    prop_assert_eq!(hs.len(), end + 1);
                    prop_assert_eq!(s.status(), SessionStatus::CeilingStopped);
                }
            }
            let r = s.report();
            prop_assert_eq!(r.raw_score, out.iter().map(|o| u32::from(o.h)).sum::<u32>());
            prop_assert_eq!(r.percent, normalize_score(r.raw_score, r.max_score).unwrap());
            let back: ExamSession = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            prop_assert_eq!(back, s);
        }
    }

    fn score_next_opt(s: &mut ExamSession, stub: &StubCompleter, h: u8) -> Option<SessionStatus> {
        match s.next(stub).unwrap() {
            NextItem::Present(p) => Some(s.record_score(&p.question_id, h, None, None).unwrap()),
            NextItem::Done { .. } => None,
        }
    }
}
