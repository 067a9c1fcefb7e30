use std::time::{SystemTime, UNIX_EPOCH};

use super::ceiling::CeilingTracker;
use super::ExamError;
use crate::gateway::{
    detect_explanation, extract_answer_def, extract_answer_wc, render_prompt, Completer, CompletionRequest,
    ExplanationRules,
};
use crate::model::{
    ExamItem, ExtractedAnswer, LmResponse, Outcome, PromptProtocol, RequestMetadata, SamplingConfig, UnorderedPair,
};

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredResponse {
    pub extracted: Option<ExtractedAnswer>,
    pub has_explanation: bool,
    pub h: u8,
}

/// Extract and auto-score a raw completion. Word Classes scores 1 iff the
/// extracted pair equals the gold pair; Definitions iff the extracted word
/// is the target.
pub fn score_response(item: &ExamItem, raw_text: &str, rules: &ExplanationRules) -> Result<ScoredResponse, ExamError> {
    let (extracted, answer_words, correct) = match item {
        ExamItem::Wc(q) => {
            let pair = extract_answer_wc(raw_text, &q.words_presented);
            let correct = pair.as_ref().is_some_and(|[a, b]| UnorderedPair::folded(a, b) == q.gold());
            let words = pair.clone().map(Vec::from).unwrap_or_default();
            (pair.map(ExtractedAnswer::Pair), words, correct)
        }
        ExamItem::Def(q) => {
            let word = extract_answer_def(raw_text, &q.choices);
            let correct = word.as_ref().is_some_and(|w| w.eq_ignore_ascii_case(&q.target));
            let words = word.clone().into_iter().collect();
            (word.map(ExtractedAnswer::Word), words, correct)
        }
        ExamItem::Open(q) => return Err(ExamError::NotAutoScorable(q.id.clone())),
    };
    Ok(ScoredResponse {
        has_explanation: detect_explanation(raw_text, &answer_words, rules),
        extracted,
        h: u8::from(correct),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubtestRun {
    pub responses: Vec<LmResponse>,
    pub outcomes: Vec<Outcome>,
    pub raw_score: u32,
    pub stopped_early: bool,
}

/// A run cut short by an error, with everything scored before it.
#[derive(Debug, thiserror::Error)]
#[error("sub-test aborted after {} outcomes: {error}", partial.outcomes.len())]
pub struct RunAborted {
    pub partial: SubtestRun,
    #[source]
    pub error: ExamError,
}

/// Administer items in the given order, stopping at the ceiling.
pub fn run_subtest<C: Completer + ?Sized>(
    items: &[ExamItem],
    protocol: &PromptProtocol,
    sampling: &SamplingConfig,
    ceiling_k: u32,
    completer: &C,
    rules: &ExplanationRules,
) -> Result<SubtestRun, RunAborted> {
    let mut run = SubtestRun::default();
    if items.is_empty() {
        return Err(RunAborted { partial: run, error: ExamError::Empty });
    }
    let fingerprint = sampling.fingerprint();
    let mut ceiling = CeilingTracker::new(ceiling_k);
    for item in items {
        let step = || -> Result<(LmResponse, u8), ExamError> {
            let prompt = render_prompt(protocol, item)?;
            let started_ms = now_ms();
            let completion =
                completer.complete(&CompletionRequest { question_id: item.id(), prompt: &prompt, sampling })?;
            let finished_ms = now_ms();
            let scored = score_response(item, &completion.text, rules)?;
            let response = LmResponse {
                question_id: item.id().to_string(),
                raw_text: completion.text,
                extracted_answer: scored.extracted,
                has_explanation: scored.has_explanation,
                metadata: RequestMetadata {
                    fingerprint: fingerprint.clone(),
                    retries: completion.retries,
                    started_ms,
                    finished_ms,
                },
            };
            Ok((response, scored.h))
        };
        let (response, h) = match step() {
            Ok(v) => v,
            Err(error) => return Err(RunAborted { partial: run, error }),
        };
        run.responses.push(response);
        run.outcomes.push(Outcome::auto(item.id(), h == 1));
        run.raw_score += u32::from(h);
        if ceiling.record(h) {
            run.stopped_early = true;
            break;
        }
    }
    Ok(run)
}

/// Stable sort by pair AoA, easiest first; unknown AoA goes last.
pub fn order_by_pair_aoa(items: &mut [ExamItem]) {
    items.sort_by(|a, b| match (a.aoa(), b.aoa()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::StubCompleter;
    use crate::model::{Relation, WcQuestion};

    fn wc_items(n: usize) -> Vec<ExamItem> {
        (0..n)
            .map(|i| {
                ExamItem::Wc(WcQuestion {
                    id: format!("wc-{i:03}"),
                    words_presented: vec![format!("a{i}"), format!("b{i}"), format!("c{i}"), format!("d{i}")],
                    gold_pair: [format!("b{i}"), format!("d{i}")],
                    pair_aoa: Some(4.0 + i as f64),
                    relation: Relation::Synonym,
                    explanation: String::new(),
                    feature_annotations: None,
                })
            })
            .collect()
    }

    fn run(items: &[ExamItem], stub: &StubCompleter, k: u32) -> SubtestRun {
        let sampling = SamplingConfig::nucleus("stub");
        run_subtest(items, &PromptProtocol::slp(), &sampling, k, stub, &ExplanationRules::default()).unwrap()
    }

    #[test]
    fn always_correct() {
        let items = wc_items(10);
        let r = run(&items, &StubCompleter::scripted(&items, |_| true), 4);
        assert_eq!((r.outcomes.len(), r.raw_score, r.stopped_early), (10, 10, false));
        assert!(r.responses.iter().all(|x| x.metadata.fingerprint == SamplingConfig::nucleus("stub").fingerprint()));
    }

    #[test]
    fn always_wrong_stops_at_ceiling() {
        let items = wc_items(10);
        let stub = StubCompleter::scripted(&items, |_| false);
        let r = run(&items, &stub, 4);
        assert_eq!((r.outcomes.len(), r.raw_score, r.stopped_early), (4, 0, true));
        let r = run(&items, &stub, 0);
        assert_eq!((r.outcomes.len(), r.stopped_early), (10, false));
    }

    #[test]
    fn gateway_error_keeps_partial() {
        let items = wc_items(6);
        let answers = StubCompleter::scripted(&items[..3], |_| true);
        let sampling = SamplingConfig::nucleus("stub");
        let err = run_subtest(&items, &PromptProtocol::slp(), &sampling, 4, &answers, &ExplanationRules::default())
            .unwrap_err();
        assert_eq!(err.partial.outcomes.len(), 3);
        assert!(matches!(err.error, ExamError::Gateway(_)));
    }

    #[test]
    fn scoring_is_order_free() {
        let items = wc_items(1);
        let s = score_response(&items[0], "D0 and b0, since they match", &ExplanationRules::default()).unwrap();
        assert_eq!(s.h, 1);
        assert!(s.has_explanation);
        let s = score_response(&items[0], "a0 and b0", &ExplanationRules::default()).unwrap();
        assert_eq!(s.h, 0);
        let s = score_response(&items[0], "no idea", &ExplanationRules::default()).unwrap();
        assert_eq!((s.h, s.extracted), (0, None));
    }

    #[test]
    fn aoa_ordering() {
        let mut items = wc_items(4);
        items.reverse();
        if let ExamItem::Wc(q) = &mut items[3] {
            q.pair_aoa = None;
        }
        order_by_pair_aoa(&mut items);
        let ids: Vec<&str> = items.iter().map(|i| i.id()).collect();
        assert_eq!(ids, vec!["wc-001", "wc-002", "wc-003", "wc-000"]);
    }
}
