use serde::{Deserialize, Serialize};

use super::extract::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationRules {
    /// Phrases that mark an explanation wherever they occur.
    pub markers: Vec<String>,
    /// Alphabetic tokens needed outside the answer sentence.
    pub min_tokens: usize,
}

impl Default for ExplanationRules {
    fn default() -> Self {
        ExplanationRules {
            markers: ["because", "since", "as they", "this is"].iter().map(|s| s.to_string()).collect(),
            min_tokens: 3,
        }
    }
}

fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?', '\n']).map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Whether a response explains its answer. The answer sentence is the
/// first sentence mentioning an answer word (the first sentence when there
/// is no answer). True if the other sentences hold at least
/// `min_tokens` alphabetic tokens, or any sentence contains a marker.
pub fn detect_explanation(raw_text: &str, answer: &[String], rules: &ExplanationRules) -> bool {
    let sents: Vec<Vec<String>> = sentences(raw_text).into_iter().map(tokenize).collect();
    if sents.is_empty() {
        return false;
    }
    let markers: Vec<Vec<String>> = rules.markers.iter().map(|m| tokenize(m)).collect();
    if sents.iter().any(|s| markers.iter().any(|m| contains_run(s, m))) {
        return true;
    }
    let answer_tokens: Vec<Vec<String>> = answer.iter().map(|a| tokenize(a)).collect();
    let answer_idx = sents
        .iter()
        .position(|s| answer_tokens.iter().any(|a| contains_run(s, a)))
        .unwrap_or(0);
    let remainder = sents
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != answer_idx)
        .flat_map(|(_, s)| s.iter())
        .filter(|t| t.chars().all(char::is_alphabetic))
        .count();
    remainder >= rules.min_tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Vec<String> {
        vec!["car".into(), "boat".into()]
    }

    #[test]
    fn explained_answer() {
        let raw = "The two words that go together best are \"car\" and \"boat\". This is because they are both types of transport.";
        assert!(detect_explanation(raw, &pair(), &ExplanationRules::default()));
    }

    #[test]
    fn bare_answer() {
        assert!(!detect_explanation("car and boat", &pair(), &ExplanationRules::default()));
        assert!(!detect_explanation("car and boat.", &pair(), &ExplanationRules::default()));
        assert!(!detect_explanation("", &pair(), &ExplanationRules::default()));
    }

    #[test]
    fn marker_in_answer_sentence() {
        assert!(detect_explanation("car and boat because both float", &pair(), &ExplanationRules::default()));
        let rules = ExplanationRules { markers: vec![], min_tokens: 3 };
        assert!(!detect_explanation("car and boat because both float", &pair(), &rules));
    }

    #[test]
    fn long_remainder() {
        assert!(detect_explanation("Car and boat. Both move people around.", &pair(), &ExplanationRules::default()));
        assert!(!detect_explanation("Car and boat. Good one.", &pair(), &ExplanationRules::default()));
    }
}
