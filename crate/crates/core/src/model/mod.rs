//! Shared domain types and serialization contracts.

mod age;
pub mod jsonl;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use age::{AgeValue, NormEntry, NormTable, SubtestNorms};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid norm: {0}")]
    InvalidNorm(String),
    #[error("invalid age value {0:?}")]
    InvalidAge(String),
    #[error("invalid {kind}: {reason}")]
    Invalid { kind: &'static str, reason: String },
    #[error("{path}:{line}: {source}")]
    Jsonl {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub(crate) fn invalid(kind: &'static str, reason: impl Into<String>) -> Self {
        ModelError::Invalid {
            kind,
            reason: reason.into(),
        }
    }
}

/// Deterministic random stream used everywhere a seed is accepted.
///
/// ChaCha8 is specified bit-for-bit, so identical seeds give identical
/// streams on every platform.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-stream `stream` of the generator seeded with `seed`.
///
/// Used for per-item and per-trial randomness so that work can be split
/// across threads without changing results.
pub fn sub_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Percent of the highest possible score.
pub fn normalize_score(raw: u32, max: u32) -> Result<f64, ModelError> {
    if max == 0 {
        return Err(ModelError::InvalidNorm("maximum score is zero".into()));
    }
    if raw > max {
        return Err(ModelError::InvalidNorm(format!(
            "raw score {raw} exceeds maximum {max}"
        )));
    }
    Ok(100.0 * f64::from(raw) / f64::from(max))
}

/// Universal Dependencies coarse part-of-speech tags. `X` is unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Propn,
    Verb,
    Aux,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Cconj,
    Sconj,
    Part,
    Intj,
    X,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Propn => "PROPN",
            PosTag::Verb => "VERB",
            PosTag::Aux => "AUX",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Num => "NUM",
            PosTag::Cconj => "CCONJ",
            PosTag::Sconj => "SCONJ",
            PosTag::Part => "PART",
            PosTag::Intj => "INTJ",
            PosTag::X => "X",
        }
    }

    pub fn is_modifier(self) -> bool {
        matches!(self, PosTag::Adj | PosTag::Adv)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tag = match s.trim().to_ascii_uppercase().as_str() {
            "NOUN" | "N" => PosTag::Noun,
            "PROPN" => PosTag::Propn,
            "VERB" | "V" => PosTag::Verb,
            "AUX" => PosTag::Aux,
            "ADJ" | "A" => PosTag::Adj,
            "ADV" => PosTag::Adv,
            "PRON" => PosTag::Pron,
            "DET" => PosTag::Det,
            "ADP" => PosTag::Adp,
            "NUM" => PosTag::Num,
            "CCONJ" => PosTag::Cconj,
            "SCONJ" => PosTag::Sconj,
            "PART" => PosTag::Part,
            "INTJ" => PosTag::Intj,
            "X" | "" => PosTag::X,
            other => return Err(ModelError::invalid("pos tag", other)),
        };
        Ok(tag)
    }
}

/// Word-association relation labels.
///
/// Labels outside this set parse to [`Relation::Unknown`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Action,
    Location,
    Phrase,
    Synonym,
    Antonym,
    Function,
    Category,
    PartWhole,
    Property,
    Material,
    Emotion,
    Time,
    Thematic,
    Hypernym,
    Common,
    Other,
    Unknown,
}

impl Relation {
    pub const ALL: [Relation; 17] = [
        Relation::Action,
        Relation::Location,
        Relation::Phrase,
        Relation::Synonym,
        Relation::Antonym,
        Relation::Function,
        Relation::Category,
        Relation::PartWhole,
        Relation::Property,
        Relation::Material,
        Relation::Emotion,
        Relation::Time,
        Relation::Thematic,
        Relation::Hypernym,
        Relation::Common,
        Relation::Other,
        Relation::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Action => "action",
            Relation::Location => "location",
            Relation::Phrase => "phrase",
            Relation::Synonym => "synonym",
            Relation::Antonym => "antonym",
            Relation::Function => "function",
            Relation::Category => "category",
            Relation::PartWhole => "part_whole",
            Relation::Property => "property",
            Relation::Material => "material",
            Relation::Emotion => "emotion",
            Relation::Time => "time",
            Relation::Thematic => "thematic",
            Relation::Hypernym => "hypernym",
            Relation::Common => "common",
            Relation::Other => "other",
            Relation::Unknown => "unknown",
        }
    }

    /// Lenient parse: case and separators are ignored, unrecognised labels
    /// become `Unknown`.
    pub fn parse_label(label: &str) -> Relation {
        let norm: String = label
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        match norm.as_str() {
            "action" => Relation::Action,
            "location" => Relation::Location,
            "phrase" | "common_phrase" => Relation::Phrase,
            "synonym" | "synonyms" => Relation::Synonym,
            "antonym" | "antonyms" => Relation::Antonym,
            "function" | "functional" => Relation::Function,
            "category" | "categorical" => Relation::Category,
            "part_whole" | "part_of" | "has_part" | "partwhole" => Relation::PartWhole,
            "property" | "attribute" => Relation::Property,
            "material" | "made_of" => Relation::Material,
            "emotion" | "feeling" => Relation::Emotion,
            "time" | "temporal" => Relation::Time,
            "thematic" => Relation::Thematic,
            "hypernym" | "hyponym" | "is_a" => Relation::Hypernym,
            "common" => Relation::Common,
            "other" => Relation::Other,
            _ => Relation::Unknown,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Morphological complexity of a word pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphClass {
    Low,
    Medium,
    High,
}

impl MorphClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MorphClass::Low => "low",
            MorphClass::Medium => "medium",
            MorphClass::High => "high",
        }
    }
}

/// One row of an age-of-acquisition lexicon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEntry {
    pub lemma: String,
    pub aoa_years: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morph_feature_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_hint: Option<PosTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
}

impl WordEntry {
    pub fn new(lemma: &str, aoa_years: f64) -> Result<Self, ModelError> {
        let entry = WordEntry {
            lemma: lemma.trim().to_lowercase(),
            aoa_years,
            morph_feature_count: None,
            pos_hint: None,
            definition: None,
        };
        entry.validate()?;
        Ok(entry)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.lemma.is_empty() {
            return Err(ModelError::invalid("word entry", "empty lemma"));
        }
        if !(self.aoa_years > 0.0 && self.aoa_years.is_finite()) {
            return Err(ModelError::invalid(
                "word entry",
                format!("{}: aoa must be positive, got {}", self.lemma, self.aoa_years),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub cue: String,
    pub association: String,
    pub relation: Relation,
    pub explanation: String,
}

impl AssociationRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.cue.is_empty() || self.association.is_empty() {
            return Err(ModelError::invalid("association", "empty word"));
        }
        if self.cue.eq_ignore_ascii_case(&self.association) {
            return Err(ModelError::invalid(
                "association",
                format!("cue equals association ({})", self.cue),
            ));
        }
        Ok(())
    }
}

/// A pair of words compared without regard to order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnorderedPair(String, String);

impl UnorderedPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            UnorderedPair(a, b)
        } else {
            UnorderedPair(b, a)
        }
    }

    /// Case-folded pair, for comparisons against free text.
    pub fn folded(a: &str, b: &str) -> Self {
        Self::new(a.to_lowercase(), b.to_lowercase())
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0 == w || self.1 == w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FeatureAnnotations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_pair: Option<[PosTag; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morph_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morph_class: Option<MorphClass>,
}

/// A Word Classes question: pick the two words that go together best.
///
/// `gold_pair` keeps (cue, association) order; scoring compares it as an
/// unordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcQuestion {
    pub id: String,
    pub words_presented: Vec<String>,
    pub gold_pair: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_aoa: Option<f64>,
    pub relation: Relation,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_annotations: Option<FeatureAnnotations>,
}

impl WcQuestion {
    pub fn gold(&self) -> UnorderedPair {
        UnorderedPair::folded(&self.gold_pair[0], &self.gold_pair[1])
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let folded: Vec<String> = self.words_presented.iter().map(|w| w.to_lowercase()).collect();
        for (i, a) in folded.iter().enumerate() {
            if folded[i + 1..].contains(a) {
                return Err(ModelError::invalid(
                    "wc question",
                    format!("{}: word {a:?} presented twice", self.id),
                ));
            }
        }
        for g in &self.gold_pair {
            if !folded.contains(&g.to_lowercase()) {
                return Err(ModelError::invalid(
                    "wc question",
                    format!("{}: gold word {g:?} not presented", self.id),
                ));
            }
        }
        if self.gold_pair[0].eq_ignore_ascii_case(&self.gold_pair[1]) {
            return Err(ModelError::invalid(
                "wc question",
                format!("{}: gold words identical", self.id),
            ));
        }
        Ok(())
    }
}

/// A Definitions question: pick the word matching the definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefQuestion {
    pub id: String,
    pub target: String,
    pub definition: String,
    pub choices: Vec<String>,
    pub aoa: f64,
}

impl DefQuestion {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.choices.iter().any(|c| c == &self.target) {
            return Err(ModelError::invalid(
                "def question",
                format!("{}: target not among choices", self.id),
            ));
        }
        for (i, a) in self.choices.iter().enumerate() {
            if self.choices[i + 1..].contains(a) {
                return Err(ModelError::invalid(
                    "def question",
                    format!("{}: duplicate choice {a:?}", self.id),
                ));
            }
        }
        Ok(())
    }
}

/// A clinician-scored item with a free-form prompt (sentence formulation,
/// recall, paragraph comprehension, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenItem {
    pub id: String,
    pub prompt: String,
    /// Highest score a clinician may award for this item.
    #[serde(default = "default_open_max")]
    pub max_score: u8,
}

fn default_open_max() -> u8 {
    1
}

/// Any question an exam can present. Serialized with a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExamItem {
    Wc(WcQuestion),
    Def(DefQuestion),
    Open(OpenItem),
}

impl ExamItem {
    pub fn id(&self) -> &str {
        match self {
            ExamItem::Wc(q) => &q.id,
            ExamItem::Def(q) => &q.id,
            ExamItem::Open(q) => &q.id,
        }
    }

    pub fn aoa(&self) -> Option<f64> {
        match self {
            ExamItem::Wc(q) => q.pair_aoa,
            ExamItem::Def(q) => Some(q.aoa),
            ExamItem::Open(_) => None,
        }
    }

    pub fn max_score(&self) -> u8 {
        match self {
            ExamItem::Open(q) => q.max_score,
            _ => 1,
        }
    }

    /// Words an answer may be drawn from.
    pub fn candidates(&self) -> &[String] {
        match self {
            ExamItem::Wc(q) => &q.words_presented,
            ExamItem::Def(q) => &q.choices,
            ExamItem::Open(_) => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    Slp,
    Qa,
    Comp,
    Custom,
}

impl FromStr for ProtocolName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "slp" => Ok(ProtocolName::Slp),
            "qa" => Ok(ProtocolName::Qa),
            "comp" => Ok(ProtocolName::Comp),
            "custom" => Ok(ProtocolName::Custom),
            other => Err(ModelError::invalid("protocol", other)),
        }
    }
}

/// A prompt template. Placeholders are `[W]`, `[X]`, `[Y]`, `[Z]` for the
/// presented words and `[Defn.]` for a definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptProtocol {
    pub name: ProtocolName,
    pub template: String,
}

pub const WORD_SLOTS: [&str; 4] = ["[W]", "[X]", "[Y]", "[Z]"];
pub const DEFINITION_SLOT: &str = "[Defn.]";

impl PromptProtocol {
    pub fn slp() -> Self {
        PromptProtocol {
            name: ProtocolName::Slp,
            template: "Carefully consider the following words and tell me the two words that go together best: \"[W]\", \"[X]\", \"[Y]\", \"[Z]\".".into(),
        }
    }

    pub fn qa() -> Self {
        PromptProtocol {
            name: ProtocolName::Qa,
            template: "Instruction: Carefully consider the following words and tell me the two words that go together best: \"[W]\", \"[X]\", \"[Y]\", \"[Z]\".\nStudent:".into(),
        }
    }

    pub fn comp() -> Self {
        PromptProtocol {
            name: ProtocolName::Comp,
            template: "Among the words \"[W]\", \"[X]\", \"[Y]\", and \"[Z]\", the two words that go together best are".into(),
        }
    }

    /// Completion-style Definitions prompt, used by every built-in protocol.
    pub fn definitions() -> Self {
        PromptProtocol {
            name: ProtocolName::Comp,
            template: "Among the words \"[W]\", \"[X]\", \"[Y]\", and \"[Z]\", the word that most means \"[Defn.]\" is".into(),
        }
    }

    pub fn custom(template: impl Into<String>) -> Self {
        PromptProtocol {
            name: ProtocolName::Custom,
            template: template.into(),
        }
    }

    pub fn builtin(name: ProtocolName) -> Option<Self> {
        match name {
            ProtocolName::Slp => Some(Self::slp()),
            ProtocolName::Qa => Some(Self::qa()),
            ProtocolName::Comp => Some(Self::comp()),
            ProtocolName::Custom => None,
        }
    }

    /// Checks the template carries every placeholder the target test needs.
    pub fn validate_for(&self, definitions: bool) -> Result<(), ModelError> {
        let missing: Vec<&str> = WORD_SLOTS
            .iter()
            .copied()
            .chain(definitions.then_some(DEFINITION_SLOT))
            .filter(|p| !self.template.contains(p))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ModelError::invalid(
                "prompt template",
                format!("missing placeholders {}", missing.join(", ")),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub model_id: String,
    pub top_p: f64,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl SamplingConfig {
    /// Nucleus sampling defaults: top_p 0.95, temperature 1, 256 tokens.
    pub fn nucleus(model_id: impl Into<String>) -> Self {
        SamplingConfig {
            model_id: model_id.into(),
            top_p: 0.95,
            temperature: 1.0,
            max_tokens: 256,
        }
    }

    /// Greedy "factual" preset: top_p 1, temperature 0.
    pub fn factual(model_id: impl Into<String>) -> Self {
        SamplingConfig {
            model_id: model_id.into(),
            top_p: 1.0,
            temperature: 0.0,
            max_tokens: 256,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ModelError::invalid("sampling", format!("top_p {} not in (0,1]", self.top_p)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::invalid(
                "sampling",
                format!("temperature {} must be >= 0", self.temperature),
            ));
        }
        if self.max_tokens == 0 {
            return Err(ModelError::invalid("sampling", "max_tokens must be positive"));
        }
        Ok(())
    }

    /// Stable short hash of the configuration.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "{}|{:.6}|{:.6}|{}",
            self.model_id, self.top_p, self.temperature, self.max_tokens
        );
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Answer pulled out of a raw completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtractedAnswer {
    Pair([String; 2]),
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RequestMetadata {
    pub fingerprint: String,
    #[serde(default)]
    pub retries: u32,
    #[serde(default)]
    pub started_ms: u64,
    #[serde(default)]
    pub finished_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmResponse {
    pub question_id: String,
    pub raw_text: String,
    #[serde(rename = "extracted")]
    pub extracted_answer: Option<ExtractedAnswer>,
    pub has_explanation: bool,
    #[serde(flatten)]
    pub metadata: RequestMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    Auto,
    Clinician,
}

/// Per-question score. Graded clinician scores stay raw here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub question_id: String,
    pub h: u8,
    pub scorer: Scorer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Outcome {
    pub fn auto(question_id: impl Into<String>, correct: bool) -> Self {
        Outcome {
            question_id: question_id.into(),
            h: u8::from(correct),
            scorer: Scorer::Auto,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// Questions whose (truncated) AoA equals the age.
    Exact,
    /// Questions whose (truncated) AoA is at most the age.
    AtMost,
}

impl FromStr for TestMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(TestMode::Exact),
            "at_most" | "at-most" => Ok(TestMode::AtMost),
            other => Err(ModelError::invalid("test mode", other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Means,
    Td,
}

impl FromStr for TestKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "means" => Ok(TestKind::Means),
            "td" => Ok(TestKind::Td),
            other => Err(ModelError::invalid("test kind", other)),
        }
    }
}

/// One row of an age-alignment profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeTestResult {
    pub age_years: f64,
    pub mode: TestMode,
    pub test_kind: TestKind,
    /// Accuracy for the means test, empirical divergence for the TD test.
    pub statistic: f64,
    pub n: u64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}
