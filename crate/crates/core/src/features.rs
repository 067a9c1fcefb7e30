//! Question and response features, and the design matrix for the linear
//! probability model.
//!
//! Morphological class boundaries: a pair with at most 2 unique features is
//! `low`, 3 or 4 is `medium`, 5 or more is `high`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::builder::Lexicon;
use crate::gateway::tokenize;
use crate::model::{jsonl, LmResponse, ModelError, MorphClass, Outcome, PosTag, Relation, WcQuestion};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("join error: {0}")]
    Join(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Tags a tokenized sentence, one tag per token.
pub trait PosTagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag>;
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "no", "my", "your",
    "his", "her", "its", "our", "their", "another", "both", "either", "neither", "many", "much", "few",
];
const ADPOSITIONS: &[&str] = &[
    "in", "on", "at", "of", "for", "with", "by", "from", "to", "into", "onto", "over", "under", "about",
    "through", "between", "against", "during", "without", "within", "near", "behind", "above", "below",
    "inside", "outside", "around", "across", "after", "before", "like",
];
const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "someone", "something",
    "anyone", "anything", "everyone", "everything", "who", "what", "which", "one", "you're", "it's",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "have", "has", "had",
    "can", "could", "will", "would", "shall", "should", "may", "might", "must",
];
const COORDINATORS: &[&str] = &["and", "or", "but", "nor", "yet", "so"];
const SUBORDINATORS: &[&str] = &["because", "if", "when", "while", "although", "though", "since", "unless", "whereas", "as"];
const PARTICLES: &[&str] = &["not", "n't", "'s"];
const ADVERBS: &[&str] = &["very", "too", "often", "always", "never", "also", "usually", "sometimes", "quite", "really", "well", "fast", "soon", "here", "there"];

fn closed_class(tok: &str) -> Option<PosTag> {
    let in_list = |l: &[&str]| l.contains(&tok);
    Some(if in_list(DETERMINERS) {
        PosTag::Det
    } else if in_list(ADPOSITIONS) {
        PosTag::Adp
    } else if in_list(PRONOUNS) {
        PosTag::Pron
    } else if in_list(AUXILIARIES) {
        PosTag::Aux
    } else if in_list(COORDINATORS) {
        PosTag::Cconj
    } else if in_list(SUBORDINATORS) {
        PosTag::Sconj
    } else if in_list(PARTICLES) {
        PosTag::Part
    } else if in_list(ADVERBS) {
        PosTag::Adv
    } else if tok.chars().all(|c| c.is_ascii_digit()) {
        PosTag::Num
    } else {
        return None;
    })
}

fn by_suffix(tok: &str) -> Option<PosTag> {
    let ends = |s: &[&str]| s.iter().any(|x| tok.len() > x.len() + 2 && tok.ends_with(x));
    if ends(&["ly"]) {
        Some(PosTag::Adv)
    } else if ends(&["ous", "ful", "ive", "able", "ible", "less", "ish", "ic", "al", "est"]) {
        Some(PosTag::Adj)
    } else if ends(&["tion", "sion", "ness", "ment", "ity", "ship", "hood", "er", "or", "ist"]) {
        Some(PosTag::Noun)
    } else if ends(&["ing", "ed", "ize", "ise", "ify"]) {
        Some(PosTag::Verb)
    } else {
        None
    }
}

/// Rule-based fallback tagger: closed-class lists, then lexicon hints,
/// then left context and suffixes. Open-class words default to NOUN.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    hints: HashMap<String, PosTag>,
}

impl LexiconTagger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_lexicon(lexicon: &Lexicon) -> Self {
        let hints = lexicon.entries().filter_map(|e| Some((e.lemma.clone(), e.pos_hint?))).collect();
        LexiconTagger { hints }
    }

    pub fn with_hint(mut self, word: &str, tag: PosTag) -> Self {
        self.hints.insert(word.to_lowercase(), tag);
        self
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
        let mut tags: Vec<PosTag> = Vec::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| tags[j]);
            let tag = if let Some(t) = closed_class(tok) {
                t
            } else if let Some(&t) = self.hints.get(tok) {
                t
            } else {
                match (prev, by_suffix(tok)) {
                    (_, Some(PosTag::Adv)) => PosTag::Adv,
                    (Some(PosTag::Det | PosTag::Adp), Some(PosTag::Adj)) => PosTag::Adj,
                    (Some(PosTag::Det | PosTag::Adp | PosTag::Adj | PosTag::Num), _) => PosTag::Noun,
                    (Some(PosTag::Aux), Some(s)) => s,
                    (Some(PosTag::Aux), None) => PosTag::Adj,
                    (Some(PosTag::Noun | PosTag::Pron | PosTag::Propn | PosTag::Part), None) => PosTag::Verb,
                    (Some(PosTag::Part), Some(PosTag::Noun)) | (Some(PosTag::Pron), Some(PosTag::Noun)) => PosTag::Verb,
                    (_, Some(s)) => s,
                    (_, None) => PosTag::Noun,
                }
            };
            tags.push(tag);
        }
        tags
    }
}

fn matches_word(token: &str, word: &str) -> bool {
    if token == word {
        return true;
    }
    let Some(rest) = token.strip_prefix(word) else { return false };
    matches!(rest, "s" | "es" | "ed" | "d" | "ing" | "er" | "ers" | "'s")
}

/// POS of each gold word as used in the explanation; `X` when the word
/// does not occur there.
pub fn annotate_pos(pair: &[String; 2], explanation: &str, tagger: &dyn PosTagger) -> [PosTag; 2] {
    let tokens = tokenize(explanation);
    if tokens.is_empty() {
        return [PosTag::X, PosTag::X];
    }
    let tags = tagger.tag(&tokens);
    let find = |word: &str| {
        let word = word.to_lowercase();
        tokens
            .iter()
            .position(|t| *t == word)
            .or_else(|| tokens.iter().position(|t| matches_word(t, &word)))
            .map_or(PosTag::X, |i| tags[i])
    };
    [find(&pair[0]), find(&pair[1])]
}

/// Morphological class from the count of unique features across both words.
pub fn morph_class(count: u32) -> MorphClass {
    match count {
        0..=2 => MorphClass::Low,
        3..=4 => MorphClass::Medium,
        _ => MorphClass::High,
    }
}

/// Relations outside {action, location, phrase, synonym} are hard, and so
/// is an unknown relation.
pub fn relation_hard(relation: Relation) -> bool {
    match relation {
        Relation::Action | Relation::Location | Relation::Phrase | Relation::Synonym => false,
        Relation::Antonym
        | Relation::Function
        | Relation::Category
        | Relation::PartWhole
        | Relation::Property
        | Relation::Material
        | Relation::Emotion
        | Relation::Time
        | Relation::Thematic
        | Relation::Hypernym
        | Relation::Common
        | Relation::Other
        | Relation::Unknown => true,
    }
}

/// One line of a pre-annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreAnnotation {
    pub question_id: String,
    #[serde(default)]
    pub pos_pair: Option<[PosTag; 2]>,
    #[serde(default)]
    pub morph_count: Option<u32>,
}

pub fn load_pre_annotations(path: &Path) -> Result<HashMap<String, PreAnnotation>, ModelError> {
    let rows: Vec<PreAnnotation> = jsonl::read(path)?;
    Ok(rows.into_iter().map(|r| (r.question_id.clone(), r)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub question_id: String,
    pub pos_pair: [PosTag; 2],
    pub same_pos: bool,
    pub has_adv_or_adj: bool,
    pub relation: Relation,
    pub relation_hard: bool,
    pub morph_count: Option<u32>,
    pub morph_class: Option<MorphClass>,
    pub has_explanation: bool,
    pub pair_aoa: Option<f64>,
}

impl FeatureVector {
    /// Both tags known and different.
    pub fn distinct_pos(&self) -> bool {
        let [a, b] = self.pos_pair;
        a != PosTag::X && b != PosTag::X && a != b
    }
}

/// Sources consulted in order: pre-annotation, the question's own
/// annotations, then the tagger and the lexicon's per-word counts (summed).
pub struct FeatureSources<'a> {
    pub pre: Option<&'a HashMap<String, PreAnnotation>>,
    pub tagger: &'a dyn PosTagger,
    pub lexicon: Option<&'a Lexicon>,
}

pub fn question_features(q: &WcQuestion, response: &LmResponse, src: &FeatureSources<'_>) -> FeatureVector {
    let pre = src.pre.and_then(|m| m.get(&q.id));
    let ann = q.feature_annotations.as_ref();
    let pos_pair = pre
        .and_then(|p| p.pos_pair)
        .or_else(|| ann.and_then(|a| a.pos_pair))
        .unwrap_or_else(|| annotate_pos(&q.gold_pair, &q.explanation, src.tagger));
    let morph_count = pre.and_then(|p| p.morph_count).or_else(|| ann.and_then(|a| a.morph_count)).or_else(|| {
        let lex = src.lexicon?;
        let a = lex.get(&q.gold_pair[0])?.morph_feature_count?;
        let b = lex.get(&q.gold_pair[1])?.morph_feature_count?;
        Some(a + b)
    });
    let morph_class = morph_count.map(morph_class).or_else(|| ann.and_then(|a| a.morph_class));
    let [a, b] = pos_pair;
    FeatureVector {
        question_id: q.id.clone(),
        pos_pair,
        same_pos: a != PosTag::X && a == b,
        has_adv_or_adj: a.is_modifier() || b.is_modifier(),
        relation: q.relation,
        relation_hard: relation_hard(q.relation),
        morph_count,
        morph_class,
        has_explanation: response.has_explanation,
        pair_aoa: q.pair_aoa,
    }
}

/// Features for every answered question. A response for an unknown
/// question is a join error; unanswered questions are skipped.
pub fn annotate_questions(
    questions: &[WcQuestion],
    responses: &[LmResponse],
    src: &FeatureSources<'_>,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let by_id: HashMap<&str, &WcQuestion> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    responses
        .iter()
        .map(|r| {
            let q = by_id
                .get(r.question_id.as_str())
                .ok_or_else(|| FeatureError::Join(format!("response for unknown question {:?}", r.question_id)))?;
            Ok(question_features(q, r, src))
        })
        .collect()
}

pub const REGRESSOR_NAMES: [&str; 7] = [
    "intercept",
    "h1_adv_adj",
    "h2_distinct_pos",
    "h3_hard_relation",
    "h4_morph_med_high",
    "h5_explains",
    "h6_pair_aoa",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub question_id: String,
    /// 1 when the LM was wrong.
    pub error: u8,
    pub regressors: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub rows: Vec<DesignRow>,
    /// Scored questions left out, with the reason.
    pub excluded: Vec<(String, String)>,
}

impl DesignMatrix {
    pub fn x(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.regressors.to_vec()).collect()
    }

    pub fn y(&self) -> Vec<f64> {
        self.rows.iter().map(|r| f64::from(r.error)).collect()
    }
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// One row per outcome, in outcome order, with `error = 1 - h`. Rows with
/// no morphological class or pair AoA are excluded and listed.
pub fn build_design_matrix(outcomes: &[Outcome], features: &[FeatureVector]) -> Result<DesignMatrix, FeatureError> {
    let by_id: HashMap<&str, &FeatureVector> = features.iter().map(|f| (f.question_id.as_str(), f)).collect();
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut excluded = Vec::new();
    for o in outcomes {
        let f = by_id
            .get(o.question_id.as_str())
            .ok_or_else(|| FeatureError::Join(format!("no features for question {:?}", o.question_id)))?;
        if o.h > 1 {
            return Err(FeatureError::Join(format!("outcome {:?} is not binary", o.question_id)));
        }
        let (Some(morph), Some(aoa)) = (f.morph_class, f.pair_aoa) else {
            let what = if f.morph_class.is_none() { "morphological class" } else { "pair AoA" };
            excluded.push((o.question_id.clone(), format!("missing {what}")));
            continue;
        };
        rows.push(DesignRow {
            question_id: o.question_id.clone(),
            error: 1 - o.h,
            regressors: [
                1.0,
                bit(f.has_adv_or_adj),
                bit(f.distinct_pos()),
                bit(f.relation_hard),
                bit(morph != MorphClass::Low),
                bit(f.has_explanation),
                aoa,
            ],
        });
    }
    if !excluded.is_empty() {
        log::warn!("{} scored question(s) excluded from the design matrix", excluded.len());
    }
    Ok(DesignMatrix { rows, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RequestMetadata;
    use proptest::prelude::*;

    fn s(x: &str) -> String {
        x.to_string()
    }

    #[test]
    fn boat_and_water_are_nouns() {
        let t = LexiconTagger::new();
        let tags = t.tag(&tokenize("a boat floats on water"));
        assert_eq!(tags, vec![PosTag::Det, PosTag::Noun, PosTag::Verb, PosTag::Adp, PosTag::Noun]);
        assert_eq!(annotate_pos(&[s("boat"), s("water")], "a boat floats on water", &t), [PosTag::Noun, PosTag::Noun]);
    }

    #[test]
    fn absent_words_are_x() {
        let t = LexiconTagger::new();
        assert_eq!(annotate_pos(&[s("boat"), s("water")], "a boat floats", &t), [PosTag::Noun, PosTag::X]);
        assert_eq!(annotate_pos(&[s("boat"), s("water")], "", &t), [PosTag::X, PosTag::X]);
    }

    #[test]
    fn modifiers_and_hints() {
        let t = LexiconTagger::new();
        assert_eq!(
            annotate_pos(&[s("quickly"), s("run")], "you run quickly", &t),
            [PosTag::Adv, PosTag::Verb]
        );
        assert_eq!(annotate_pos(&[s("cold"), s("ice")], "ice is cold", &t), [PosTag::Adj, PosTag::Noun]);
        let t = LexiconTagger::new().with_hint("hot", PosTag::Adj);
        assert_eq!(annotate_pos(&[s("hot"), s("sun")], "the sun feels hot", &t)[0], PosTag::Adj);
        // Inflected mention still matches.
        assert_eq!(annotate_pos(&[s("boat"), s("sail")], "boats sail", &LexiconTagger::new())[0], PosTag::Noun);
    }

    #[test]
    fn morph_boundaries() {
        let got: Vec<MorphClass> = (0..=6).map(morph_class).collect();
        use MorphClass::*;
        assert_eq!(got, vec![Low, Low, Low, Medium, Medium, High, High]);
    }

    #[test]
    fn relation_partition() {
        let easy: Vec<Relation> = Relation::ALL.into_iter().filter(|r| !relation_hard(*r)).collect();
        assert_eq!(easy, vec![Relation::Action, Relation::Location, Relation::Phrase, Relation::Synonym]);
        assert!(relation_hard(Relation::Function));
        assert!(relation_hard(Relation::parse_label("no-such-label")));
    }

    fn question(id: &str, relation: Relation, aoa: f64, pos: [PosTag; 2], morph: u32) -> WcQuestion {
        WcQuestion {
            id: id.into(),
            words_presented: vec![s("boat"), s("water"), s("red"), s("sky")],
            gold_pair: [s("boat"), s("water")],
            pair_aoa: Some(aoa),
            relation,
            explanation: s("a boat floats on water"),
            feature_annotations: Some(crate::model::FeatureAnnotations {
                pos_pair: Some(pos),
                morph_count: Some(morph),
                morph_class: None,
            }),
        }
    }

    fn response(id: &str, explains: bool) -> LmResponse {
        LmResponse {
            question_id: id.into(),
            raw_text: String::new(),
            extracted_answer: None,
            has_explanation: explains,
            metadata: RequestMetadata::default(),
        }
    }

    fn src(t: &LexiconTagger) -> FeatureSources<'_> {
        FeatureSources { pre: None, tagger: t, lexicon: None }
    }

    #[test]
    fn definition_row() {
        let t = LexiconTagger::new();
        let q = question("q1", Relation::Synonym, 6.0, [PosTag::Noun, PosTag::Noun], 1);
        let f = annotate_questions(&[q], &[response("q1", false)], &src(&t)).unwrap();
        let dm = build_design_matrix(&[Outcome::auto("q1", false)], &f).unwrap();
        assert_eq!(dm.rows[0].regressors, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 6.0]);
        assert_eq!(dm.y(), vec![1.0]);
    }

    #[test]
    fn pre_annotation_wins() {
        let t = LexiconTagger::new();
        let q = question("q1", Relation::Function, 6.0, [PosTag::Noun, PosTag::Noun], 1);
        let pre: HashMap<String, PreAnnotation> = [(
            s("q1"),
            PreAnnotation { question_id: s("q1"), pos_pair: Some([PosTag::Adj, PosTag::Noun]), morph_count: Some(5) },
        )]
        .into();
        let f = question_features(&q, &response("q1", true), &FeatureSources { pre: Some(&pre), tagger: &t, lexicon: None });
        assert_eq!(f.pos_pair, [PosTag::Adj, PosTag::Noun]);
        assert_eq!(f.morph_class, Some(MorphClass::High));
        let dm = build_design_matrix(&[Outcome::auto("q1", true)], &[f]).unwrap();
        assert_eq!(dm.rows[0].regressors, [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 6.0]);
    }

    #[test]
    fn join_errors_and_exclusions() {
        let t = LexiconTagger::new();
        let q = question("q1", Relation::Synonym, 6.0, [PosTag::Noun, PosTag::Noun], 1);
        assert!(matches!(annotate_questions(std::slice::from_ref(&q), &[response("q2", false)], &src(&t)), Err(FeatureError::Join(_))));
        let mut f = question_features(&q, &response("q1", false), &src(&t));
        assert!(matches!(build_design_matrix(&[Outcome::auto("zz", true)], &[f.clone()]), Err(FeatureError::Join(_))));
        f.morph_class = None;
        let dm = build_design_matrix(&[Outcome::auto("q1", true)], &[f]).unwrap();
        assert!(dm.rows.is_empty());
        assert_eq!(dm.excluded.len(), 1);
    }

    proptest! {
        #[test]
        fn permutation_is_a_pure_join(
            cases in proptest::collection::vec((0usize..17, 1.0f64..15.0, 0u32..7, any::<bool>(), any::<bool>()), 1..25),
            seed in any::<u64>(),
        ) {
            let t = LexiconTagger::new();
            let qs: Vec<WcQuestion> = cases.iter().enumerate()
                .map(|(i, &(r, aoa, m, _, _))| question(&format!("q{i}"), Relation::ALL[r], aoa, [PosTag::Noun, PosTag::Adj], m))
                .collect();
            let rs: Vec<LmResponse> = cases.iter().enumerate().map(|(i, s)| response(&format!("q{i}"), s.3)).collect();
            let os: Vec<Outcome> = cases.iter().enumerate().map(|(i, s)| Outcome::auto(format!("q{i}"), s.4)).collect();
            let feats = annotate_questions(&qs, &rs, &src(&t)).unwrap();
            let base = build_design_matrix(&os, &feats).unwrap();
            prop_assert_eq!(base.rows.len(), os.len());
            prop_assert!(base.rows.iter().all(|r| r.regressors[0] == 1.0));
            let mut perm: Vec<usize> = (0..os.len()).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut crate::model::seeded_rng(seed));
            let os_p: Vec<Outcome> = perm.iter().map(|&i| os[i].clone()).collect();
            let mut feats_p = feats.clone();
            feats_p.reverse();
            let permuted = build_design_matrix(&os_p, &feats_p).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(&permuted.rows[k], &base.rows[i]);
            }
        }
    }
}
