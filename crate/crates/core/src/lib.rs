//! Age-alignment evaluation of language models.
//!
//! The crate builds age-normed word tests from association and
//! age-of-acquisition data, administers them to a completion model (or to a
//! clinician-scored session), and runs the statistical suite that turns
//! per-question outcomes into age-alignment verdicts and error analyses.
//!
//! Module map:
//!
//! * [`model`]: shared domain types, seeded randomness, JSONL helpers.
//! * [`builder`]: Word Classes and Definitions test construction.
//! * [`gateway`]: prompt rendering, completion/embedding clients, answer extraction.
//! * [`exam`]: sub-test administration, ceiling rule, norm tables, clinician
//!   sessions, checklists and the prompt/parameter sweep.
//! * [`features`]: question/response features and the regression design matrix.
//! * [`stats`]: exact binomial tests, age profiles, simulation, chi-squared,
//!   linear probability model, k-means coarsening and energy distance.
//! * [`report`]: run-directory reports.

pub mod builder;
pub mod exam;
pub mod features;
pub mod gateway;
pub mod model;
pub mod report;
pub mod stats;

pub use model::{
    normalize_score, seeded_rng, AgeTestResult, AgeValue, AssociationRecord, DefQuestion,
    ExamItem, LmResponse, ModelError, MorphClass, NormTable, OpenItem, Outcome, PosTag,
    PromptProtocol, ProtocolName, Relation, SamplingConfig, Scorer, SeededRng, TestKind,
    TestMode, UnorderedPair, WcQuestion, WordEntry,
};
