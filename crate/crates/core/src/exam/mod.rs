//! Sub-test administration: the ceiling rule, automatic scoring, norm
//! lookups, clinician sessions, checklists and configuration sweeps.

mod ceiling;
mod checklist;
mod run;
mod session;
mod store;
mod sweep;

pub use ceiling::CeilingTracker;
pub use checklist::{score_checklist, ChecklistItem, ChecklistMode, ChecklistScore, ChecklistSession};
pub use run::{order_by_pair_aoa, run_subtest, score_response, RunAborted, ScoredResponse, SubtestRun};
pub use session::{
    ExamSession, ItemState, NextItem, Observation, Presentation, SessionReport, SessionStatus,
    DEFAULT_OBSERVATION_TAGS,
};
pub use store::{FaultPoint, SessionStore};
pub use sweep::{run_sweep, ConfigScore, SweepReport};

use crate::gateway::GatewayError;
use crate::model::{AgeValue, ModelError, NormTable};

pub const DEFAULT_CEILING: u32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum ExamError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no questions to administer")]
    Empty,
    #[error("item {0:?} has no automatic scorer")]
    NotAutoScorable(String),
    #[error("out of order: {0}")]
    Sequencing(String),
    #[error("session is {0:?}; no further changes accepted")]
    Terminal(SessionStatus),
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("checklist incomplete: unrated applicable items {0:?}")]
    Incomplete(Vec<String>),
    #[error("no session {0:?}")]
    UnknownSession(String),
    #[error("storage error on {path}: {source}")]
    Storage {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Age equivalent of a raw score on one sub-test.
pub fn lookup_age_equivalent(table: &NormTable, subtest: &str, raw_score: u32) -> Result<AgeValue, ModelError> {
    table.subtest(subtest)?.lookup(raw_score)
}
