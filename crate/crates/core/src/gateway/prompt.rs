use super::GatewayError;
use crate::model::{ExamItem, PromptProtocol, DEFINITION_SLOT, WORD_SLOTS};

/// Substitute every placeholder in one left-to-right pass, so words that
/// themselves look like placeholders are never re-expanded.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    'scan: while !rest.is_empty() {
        for (slot, value) in values {
            if let Some(tail) = rest.strip_prefix(slot) {
                out.push_str(value);
                rest = tail;
                continue 'scan;
            }
        }
        let ch = rest.chars().next().expect("non-empty");
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}

/// Render the prompt for an item. Word Classes fills `[W]`..`[Z]` with the
/// presented words in order. Definitions uses the protocol's template if it
/// has a `[Defn.]` slot and the completion-style definitions template
/// otherwise. Open items are sent verbatim.
pub fn render_prompt(protocol: &PromptProtocol, item: &ExamItem) -> Result<String, GatewayError> {
    let template_err = |e: crate::model::ModelError| GatewayError::Template(e.to_string());
    match item {
        ExamItem::Wc(q) => {
            protocol.validate_for(false).map_err(template_err)?;
            if q.words_presented.len() != WORD_SLOTS.len() {
                return Err(GatewayError::Template(format!(
                    "{}: {} words for {} slots",
                    q.id,
                    q.words_presented.len(),
                    WORD_SLOTS.len()
                )));
            }
            let values: Vec<(&str, &str)> =
                WORD_SLOTS.iter().copied().zip(q.words_presented.iter().map(String::as_str)).collect();
            Ok(fill(&protocol.template, &values))
        }
        ExamItem::Def(q) => {
            let fallback;
            let protocol = if protocol.template.contains(DEFINITION_SLOT) {
                protocol
            } else {
                fallback = PromptProtocol::definitions();
                &fallback
            };
            protocol.validate_for(true).map_err(template_err)?;
            if q.choices.len() != WORD_SLOTS.len() {
                return Err(GatewayError::Template(format!(
                    "{}: {} choices for {} slots",
                    q.id,
                    q.choices.len(),
                    WORD_SLOTS.len()
                )));
            }
            let mut values: Vec<(&str, &str)> =
                WORD_SLOTS.iter().copied().zip(q.choices.iter().map(String::as_str)).collect();
            values.push((DEFINITION_SLOT, q.definition.as_str()));
            Ok(fill(&protocol.template, &values))
        }
        ExamItem::Open(q) => Ok(q.prompt.clone()),
    }
}
