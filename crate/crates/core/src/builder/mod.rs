//! Test-set construction: Word Classes questions from word-association
//! records and Definitions questions from a defined lexicon.

mod def;
mod histogram;
mod lexicon;
mod wax;
mod wc;

pub use def::build_def_test;
pub use histogram::{aoa_histogram, HistogramKey};
pub use lexicon::{load_aoa_lexicon, pair_aoa, read_aoa_lexicon, Lexicon};
pub use wax::{load_wax, read_wax};
pub use wc::{build_wc_large, distractor_pool};

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum BuilderError {
    #[error("{source_name}:{line}: {reason}")]
    Parse { source_name: String, line: u64, reason: String },
    #[error("unknown AoA for {0:?}")]
    UnknownAoa(String),
    #[error("need at least {needed} candidate words, found {found}")]
    TooFewWords { needed: usize, found: usize },
    #[error("invalid builder config: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuilderConfig {
    pub seed: u64,
    pub n_distractors: usize,
    /// Reject distractors that form a known gold pair with a gold word.
    pub overlap_filter: bool,
    /// Drop pairs whose AoA is unknown.
    pub aoa_required: bool,
    /// Resample cap per distractor slot.
    pub max_attempts: usize,
}

impl BuilderConfig {
    pub fn wc(seed: u64) -> Self {
        BuilderConfig { seed, n_distractors: 2, overlap_filter: true, aoa_required: true, max_attempts: 100 }
    }

    pub fn def(seed: u64) -> Self {
        BuilderConfig { n_distractors: 3, ..Self::wc(seed) }
    }

    pub fn validate(&self) -> Result<(), BuilderError> {
        if self.n_distractors == 0 {
            return Err(BuilderError::Config("n_distractors must be at least 1".into()));
        }
        if self.max_attempts == 0 {
            return Err(BuilderError::Config("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Non-fatal conditions met while loading or building.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuildWarning {
    DuplicateLemma { lemma: String, kept_aoa: String },
    UnknownAoa { index: usize, word: String },
    PoolExhausted { index: usize },
    InvalidRecord { index: usize, reason: String },
    /// Two distractors form a known gold pair (allowed, flagged).
    DistractorOverlap { id: String, pair: [String; 2] },
}

impl std::fmt::Display for BuildWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BuildWarning::DuplicateLemma { lemma, kept_aoa } => {
                write!(f, "duplicate lemma {lemma:?}, keeping aoa {kept_aoa}")
            }
            BuildWarning::UnknownAoa { index, word } => {
                write!(f, "record {index}: unknown aoa for {word:?}, skipped")
            }
            BuildWarning::PoolExhausted { index } => {
                write!(f, "record {index}: distractor pool exhausted, skipped")
            }
            BuildWarning::InvalidRecord { index, reason } => write!(f, "record {index}: {reason}"),
            BuildWarning::DistractorOverlap { id, pair } => {
                write!(f, "{id}: distractors {:?} and {:?} form a gold pair", pair[0], pair[1])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Built<T> {
    pub items: Vec<T>,
    pub warnings: Vec<BuildWarning>,
}

impl<T> Built<T> {
    fn new(items: Vec<T>, warnings: Vec<BuildWarning>) -> Self {
        for w in &warnings {
            log::warn!("{w}");
        }
        Built { items, warnings }
    }
}
