use serde::{Deserialize, Serialize};

use super::ExamError;
use crate::model::{AgeValue, NormTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub id: String,
    pub description: String,
    pub applicable: bool,
    #[serde(default)]
    pub rating: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecklistMode {
    /// Percent over all items; inapplicable items score 0.
    PenalizeInapplicable,
    /// Percent over applicable items only.
    RestrictToApplicable,
    /// Restrict, then scale the raw score up to the full item count
    /// before the norm lookup.
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistScore {
    pub mode: ChecklistMode,
    pub raw: u32,
    pub applicable: u32,
    pub total: u32,
    pub percent: f64,
    /// Raw score scaled to the full item count, rounded half up.
    pub extrapolated_raw: Option<u32>,
    pub age: Option<AgeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistSession {
    pub items: Vec<ChecklistItem>,
    pub mode: ChecklistMode,
}

impl ChecklistSession {
    pub fn new(items: Vec<ChecklistItem>, mode: ChecklistMode) -> Result<Self, ExamError> {
        let s = ChecklistSession { items, mode };
        s.validate()?;
        Ok(s)
    }

    /// Ratings on inapplicable items are only meaningful when penalizing.
    pub fn validate(&self) -> Result<(), ExamError> {
        if self.mode != ChecklistMode::PenalizeInapplicable {
            if let Some(it) = self.items.iter().find(|i| !i.applicable && i.rating.is_some()) {
                return Err(ExamError::InvalidPayload(format!("item {:?} is inapplicable but rated", it.id)));
            }
        }
        Ok(())
    }

    pub fn rate(&mut self, id: &str, passed: bool) -> Result<(), ExamError> {
        let mode = self.mode;
        let item = self
            .items
            .iter_mut()
            .find(|i| i.id == id)
            .ok_or_else(|| ExamError::InvalidPayload(format!("no checklist item {id:?}")))?;
        if !item.applicable && mode != ChecklistMode::PenalizeInapplicable {
            return Err(ExamError::InvalidPayload(format!("item {id:?} is inapplicable")));
        }
        item.rating = Some(passed);
        Ok(())
    }

    pub fn score(&self, norms: Option<(&NormTable, &str)>) -> Result<ChecklistScore, ExamError> {
        score_checklist(self, norms)
    }
}

/// Score a checklist. The age lookup runs when norms are given; in
/// extrapolate mode it uses the scaled raw score.
pub fn score_checklist(
    session: &ChecklistSession,
    norms: Option<(&NormTable, &str)>,
) -> Result<ChecklistScore, ExamError> {
    session.validate()?;
    let unrated: Vec<String> =
        session.items.iter().filter(|i| i.applicable && i.rating.is_none()).map(|i| i.id.clone()).collect();
    if !unrated.is_empty() {
        return Err(ExamError::Incomplete(unrated));
    }
    let total = session.items.len() as u32;
    let applicable = session.items.iter().filter(|i| i.applicable).count() as u32;
    let raw = session.items.iter().filter(|i| i.applicable && i.rating == Some(true)).count() as u32;
    let denominator = match session.mode {
        ChecklistMode::PenalizeInapplicable => total,
        ChecklistMode::RestrictToApplicable | ChecklistMode::Extrapolate => applicable,
    };
    if denominator == 0 {
        return Err(ExamError::Empty);
    }
    let percent = 100.0 * f64::from(raw) / f64::from(denominator);
    let extrapolated_raw = (session.mode == ChecklistMode::Extrapolate)
        .then(|| ((f64::from(raw) * f64::from(total) / f64::from(applicable)) + 0.5).floor() as u32);
    let age = match norms {
        Some((table, subtest)) => {
            Some(super::lookup_age_equivalent(table, subtest, extrapolated_raw.unwrap_or(raw))?)
        }
        None => None,
    };
    Ok(ChecklistScore { mode: session.mode, raw, applicable, total, percent, extrapolated_raw, age })
}
